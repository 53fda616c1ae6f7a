#include <doctest.h>

#include <random>
#include <set>
#include <utility>

#include "cerisier/isa.hpp"

using namespace cerisier;

namespace {

// Deterministic operand pools for round-trip fuzzing.
std::vector<Int> immediate_pool() {
  std::vector<Int> pool = {0, 1, -1, 2, -2, 126, 127, 128, 129, -127, -128, -129,
                           16383, 16384, -16384, 1000000007, -1000000007};
  Int big = 1;
  for (int k = 0; k < 40; ++k) {
    big *= 937;
    pool.push_back(big);
    pool.push_back(-big);
  }
  pool.push_back(Int(1) << 64);
  pool.push_back((Int(1) << 64) - 1);
  pool.push_back(-(Int(1) << 64));
  pool.push_back((Int(1) << 200) + 12345);
  return pool;
}

Int random_int(std::mt19937_64& rng, unsigned max_bits) {
  unsigned bits = 1 + static_cast<unsigned>(rng() % max_bits);
  Int z = 0;
  for (unsigned got = 0; got < bits; got += 64) {
    z <<= 64;
    z |= rng();
  }
  z &= (Int(1) << bits) - 1;
  if (rng() & 1) z = -z;
  return z;
}

Instr random_fill(Opcode op, std::mt19937_64& rng, const std::vector<Int>& pool) {
  const OpSig& sg = sig(op);
  Instr out = make_instr(op);
  for (unsigned k = 0; k < sg.arity; ++k) {
    if (sg.slots[k] == Slot::R || (rng() & 1)) {
      out.ops.emplace_back(Reg(rng() % kNumRegs));
    } else if (rng() & 1) {
      out.ops.emplace_back(pool[rng() % pool.size()]);
    } else {
      out.ops.emplace_back(random_int(rng, 96));
    }
  }
  return out;
}

const Instr kFailInstr = make_instr(Opcode::fail);

}  // namespace

TEST_CASE("memory permission order matches the flows-to lattice") {
  using P = MemPerm;
  const std::set<std::pair<P, P>> leq = {
      {P::O, P::O},   {P::O, P::E},    {P::O, P::RO},  {P::O, P::RX},
      {P::O, P::RW},  {P::O, P::RWX},  {P::E, P::E},   {P::E, P::RX},
      {P::E, P::RWX}, {P::RO, P::RO},  {P::RO, P::RX}, {P::RO, P::RW},
      {P::RO, P::RWX}, {P::RX, P::RX}, {P::RX, P::RWX}, {P::RW, P::RW},
      {P::RW, P::RWX}, {P::RWX, P::RWX},
  };
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK(perm_leq(P(i), P(j)) == (leq.count({P(i), P(j)}) != 0));
  // partial order axioms
  for (int i = 0; i < 6; ++i) {
    CHECK(perm_leq(P(i), P(i)));
    for (int j = 0; j < 6; ++j) {
      if (i != j) CHECK_FALSE((perm_leq(P(i), P(j)) && perm_leq(P(j), P(i))));
      for (int k = 0; k < 6; ++k)
        if (perm_leq(P(i), P(j)) && perm_leq(P(j), P(k))) CHECK(perm_leq(P(i), P(k)));
    }
  }
}

TEST_CASE("seal permission order matches its lattice") {
  using P = SealPerm;
  const std::set<std::pair<P, P>> leq = {
      {P::O, P::O}, {P::O, P::S},  {P::O, P::U},  {P::O, P::SU},
      {P::S, P::S}, {P::S, P::SU}, {P::U, P::U},  {P::U, P::SU},
      {P::SU, P::SU},
  };
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(perm_leq(P(i), P(j)) == (leq.count({P(i), P(j)}) != 0));
  CHECK_FALSE(perm_leq(P::S, P::U));
  CHECK_FALSE(perm_leq(P::U, P::S));
}

TEST_CASE("permission names and integer codes round-trip") {
  CHECK(perm_name(MemPerm::RWX) == "rwx");
  CHECK(perm_name(MemPerm::E) == "e");
  CHECK(perm_name(SealPerm::SU) == "su");
  for (int i = 0; i < 6; ++i) {
    CHECK(mem_perm_of_name(perm_name(MemPerm(i))) == MemPerm(i));
    CHECK(mem_perm_of_code(Int(i)) == MemPerm(i));
  }
  for (int i = 0; i < 4; ++i) {
    CHECK(seal_perm_of_name(perm_name(SealPerm(i))) == SealPerm(i));
    CHECK(seal_perm_of_code(Int(i)) == SealPerm(i));
  }
  CHECK_FALSE(mem_perm_of_name("rwxx"));
  CHECK_FALSE(mem_perm_of_code(Int(6)));
  CHECK_FALSE(mem_perm_of_code(Int(-1)));
  CHECK_FALSE(seal_perm_of_code(Int(4)));
}

TEST_CASE("register names round-trip and malformed names are rejected") {
  CHECK(reg_name(kPC) == "pc");
  CHECK(reg_name(gpr(0)) == "r0");
  CHECK(reg_name(gpr(31)) == "r31");
  for (std::size_t i = 0; i < kNumRegs; ++i) CHECK(reg_of_name(reg_name(Reg(i))) == Reg(i));
  CHECK_FALSE(reg_of_name("r32"));
  CHECK_FALSE(reg_of_name("r00"));
  CHECK_FALSE(reg_of_name("r"));
  CHECK_FALSE(reg_of_name("r1x"));
  CHECK_FALSE(reg_of_name("x1"));
  CHECK_FALSE(reg_of_name(""));
}

TEST_CASE("instruction signature table is frozen") {
  struct Row {
    Opcode op;
    std::string_view name;
    unsigned arity;
  };
  const Row rows[] = {
      {Opcode::jmp, "jmp", 1},          {Opcode::jnz, "jnz", 2},
      {Opcode::fail, "fail", 0},        {Opcode::halt, "halt", 0},
      {Opcode::mov, "mov", 2},          {Opcode::add, "add", 3},
      {Opcode::sub, "sub", 3},          {Opcode::lt, "lt", 3},
      {Opcode::lea, "lea", 2},          {Opcode::load, "load", 2},
      {Opcode::store, "store", 2},      {Opcode::restrict_, "restrict", 2},
      {Opcode::subseg, "subseg", 3},    {Opcode::getp, "getp", 2},
      {Opcode::getb, "getb", 2},        {Opcode::gete, "gete", 2},
      {Opcode::geta, "geta", 2},        {Opcode::cseal, "cseal", 3},
      {Opcode::cunseal, "cunseal", 3},  {Opcode::getwtype, "getwtype", 2},
      {Opcode::getotype, "getotype", 2}, {Opcode::isunique, "isunique", 2},
      {Opcode::einit, "einit", 2},      {Opcode::edeinit, "edeinit", 1},
      {Opcode::estoreid, "estoreid", 2}, {Opcode::hash, "hash", 2},
      {Opcode::hashconcat, "hashconcat", 3},
  };
  std::set<std::string_view> names;
  for (const Row& r : rows) {
    CHECK(sig(r.op).mnemonic == r.name);
    CHECK(sig(r.op).arity == r.arity);
    CHECK(opcode_of_mnemonic(r.name) == r.op);
    names.insert(r.name);
  }
  CHECK(names.size() == 27);
  CHECK_FALSE(opcode_of_mnemonic("nop"));
  // operand slot kinds that the encoding depends on
  CHECK(sig(Opcode::jnz).slots[0] == Slot::R);
  CHECK(sig(Opcode::jnz).slots[1] == Slot::R);
  CHECK(sig(Opcode::mov).slots[1] == Slot::A);
  CHECK(sig(Opcode::store).slots[0] == Slot::R);
  CHECK(sig(Opcode::store).slots[1] == Slot::A);
  CHECK(sig(Opcode::load).slots[1] == Slot::R);
  CHECK(sig(Opcode::cseal).slots[2] == Slot::R);
  CHECK(sig(Opcode::hashconcat).slots[1] == Slot::A);
  CHECK(sig(Opcode::hashconcat).slots[2] == Slot::A);
}

TEST_CASE("encoding layout is pinned by hand-computed values") {
  CHECK(encode(make_instr(Opcode::fail)) == 3);
  CHECK(encode(make_instr(Opcode::halt)) == 4);
  CHECK(encode(make_instr(Opcode::jmp, {kPC})) == 1);
  CHECK(encode(make_instr(Opcode::jmp, {gpr(0)})) == 1 + (1 << 8));
  // mov r0 r1: opcode 5 | reg 1 << 8 | tag 0 << 14 | reg 2 << 15
  CHECK(encode(make_instr(Opcode::mov, {gpr(0), gpr(1)})) == 5 + (1 << 8) + (2 << 15));
  // mov r0 #7: opcode 5 | reg 1 << 8 | tag 1 << 14 | sign 0 << 15 | group 7 << 16
  CHECK(encode(make_instr(Opcode::mov, {gpr(0), Int(7)})) == 5 + (1 << 8) + (1 << 14) + (7 << 16));
  CHECK(encode(make_instr(Opcode::mov, {gpr(0), Int(0)})) == 5 + (1 << 8) + (1 << 14));
  // negative immediate sets the sign bit at position 15
  CHECK(encode(make_instr(Opcode::mov, {gpr(0), Int(-7)})) ==
        5 + (1 << 8) + (1 << 14) + (1 << 15) + (7 << 16));
  // 128 needs two varint groups: 0x80 (continuation) then 0x01
  CHECK(encode(make_instr(Opcode::mov, {gpr(0), Int(128)})) ==
        5 + (1 << 8) + (1 << 14) + (Int(0x80) << 16) + (Int(0x01) << 24));
}

TEST_CASE("decode rejects everything outside the encoding image") {
  CHECK(decode(Int(0)) == kFailInstr);
  CHECK(decode(Int(-1)) == kFailInstr);
  CHECK(decode(Int(-123456789)) == kFailInstr);
  CHECK(decode(Int(28)) == kFailInstr);   // reserved opcode
  CHECK(decode(Int(255)) == kFailInstr);  // reserved opcode
  CHECK(decode(encode(make_instr(Opcode::halt)) | (Int(1) << 20)) == kFailInstr);  // garbage bits
  // register index 33 is out of range
  CHECK(decode(Int(1 + (33 << 8))) == kFailInstr);
  // negative zero immediate: mov r0, sign=1, single zero group
  CHECK(decode(Int(5 + (1 << 8) + (1 << 14) + (1 << 15))) == kFailInstr);
  // non-minimal varint: zero with a continuation group then zero final group
  CHECK(decode(Int(5) + (Int(1) << 8) + (Int(1) << 14) + (Int(0x80) << 16)) == kFailInstr);
  // fail's own encoding decodes to fail (it is in the image)
  CHECK(decode(Int(3)) == kFailInstr);
}

TEST_CASE("encode and decode round-trip over every opcode") {
  std::mt19937_64 rng(0xC0FFEE);
  auto pool = immediate_pool();
  for (int opi = kFirstOpcode; opi < kFirstOpcode + kNumOpcodes; ++opi) {
    Opcode op = Opcode(opi);
    for (int n = 0; n < 400; ++n) {
      Instr i = random_fill(op, rng, pool);
      REQUIRE(well_formed(i));
      Int z = encode(i);
      CHECK(z > 0);
      CHECK(decode(z) == i);
    }
  }
}

TEST_CASE("decode is total and re-encodes canonically on random integers") {
  std::mt19937_64 rng(0xDEC0DE7);
  int in_image = 0;
  for (int n = 0; n < 100000; ++n) {
    Int z = random_int(rng, 160);
    Instr i = decode(z);
    if (!(i == kFailInstr)) {
      CHECK(encode(i) == z);
      ++in_image;
    } else if (z == 3) {
      CHECK(encode(i) == z);
    }
  }
  CHECK(in_image > 0);  // the sample actually exercises the image
  for (int z = -300; z <= 300; ++z) {
    Instr i = decode(Int(z));
    if (!(i == kFailInstr) || z == 3) CHECK(encode(i) == Int(z));
  }
}

TEST_CASE("well_formed rejects arity and slot violations") {
  CHECK_FALSE(well_formed(make_instr(Opcode::jmp, {})));
  CHECK_FALSE(well_formed(make_instr(Opcode::jmp, {kPC, kPC})));
  CHECK_FALSE(well_formed(make_instr(Opcode::jmp, {Operand(Int(3))})));   // R slot immediate
  CHECK_FALSE(well_formed(make_instr(Opcode::load, {gpr(0), Int(1)})));  // R slot immediate
  CHECK(well_formed(make_instr(Opcode::store, {gpr(0), Int(1)})));       // A slot immediate
  CHECK_FALSE(well_formed(make_instr(Opcode::mov, {Reg(40), gpr(0)})));  // bad register
  CHECK(well_formed(make_instr(Opcode::halt)));
}
