#include "cerisier/isa.hpp"

namespace cerisier {

namespace {

// Flows-to lattice membership, row = lo, col = hi.
constexpr bool kMemLeq[6][6] = {
    //             O      E      RO     RX     RW     RWX
    /* O   */ {true, true, true, true, true, true},
    /* E   */ {false, true, false, true, false, true},
    /* RO  */ {false, false, true, true, true, true},
    /* RX  */ {false, false, false, true, false, true},
    /* RW  */ {false, false, false, false, true, true},
    /* RWX */ {false, false, false, false, false, true},
};

constexpr bool kSealLeq[4][4] = {
    //            O      S      U      SU
    /* O  */ {true, true, true, true},
    /* S  */ {false, true, false, true},
    /* U  */ {false, false, true, true},
    /* SU */ {false, false, false, true},
};

constexpr std::string_view kMemPermNames[6] = {"o", "e", "ro", "rx", "rw", "rwx"};
constexpr std::string_view kSealPermNames[4] = {"o", "s", "u", "su"};

const std::array<OpSig, kNumOpcodes> kSigs = {{
    {"jmp", 1, {Slot::R}},
    {"jnz", 2, {Slot::R, Slot::R}},
    {"fail", 0, {}},
    {"halt", 0, {}},
    {"mov", 2, {Slot::R, Slot::A}},
    {"add", 3, {Slot::R, Slot::A, Slot::A}},
    {"sub", 3, {Slot::R, Slot::A, Slot::A}},
    {"lt", 3, {Slot::R, Slot::A, Slot::A}},
    {"lea", 2, {Slot::R, Slot::A}},
    {"load", 2, {Slot::R, Slot::R}},
    {"store", 2, {Slot::R, Slot::A}},
    {"restrict", 2, {Slot::R, Slot::A}},
    {"subseg", 3, {Slot::R, Slot::A, Slot::A}},
    {"getp", 2, {Slot::R, Slot::R}},
    {"getb", 2, {Slot::R, Slot::R}},
    {"gete", 2, {Slot::R, Slot::R}},
    {"geta", 2, {Slot::R, Slot::R}},
    {"cseal", 3, {Slot::R, Slot::R, Slot::R}},
    {"cunseal", 3, {Slot::R, Slot::R, Slot::R}},
    {"getwtype", 2, {Slot::R, Slot::R}},
    {"getotype", 2, {Slot::R, Slot::R}},
    {"isunique", 2, {Slot::R, Slot::R}},
    {"einit", 2, {Slot::R, Slot::R}},
    {"edeinit", 1, {Slot::R}},
    {"estoreid", 2, {Slot::R, Slot::R}},
    {"hash", 2, {Slot::R, Slot::R}},
    {"hashconcat", 3, {Slot::R, Slot::A, Slot::A}},
}};

}  // namespace

bool perm_leq(MemPerm lo, MemPerm hi) {
  return kMemLeq[static_cast<int>(lo)][static_cast<int>(hi)];
}

bool perm_leq(SealPerm lo, SealPerm hi) {
  return kSealLeq[static_cast<int>(lo)][static_cast<int>(hi)];
}

std::string_view perm_name(MemPerm p) { return kMemPermNames[static_cast<int>(p)]; }
std::string_view perm_name(SealPerm sp) { return kSealPermNames[static_cast<int>(sp)]; }

std::optional<MemPerm> mem_perm_of_name(std::string_view s) {
  for (int i = 0; i < 6; ++i)
    if (s == kMemPermNames[i]) return MemPerm(i);
  return std::nullopt;
}

std::optional<SealPerm> seal_perm_of_name(std::string_view s) {
  for (int i = 0; i < 4; ++i)
    if (s == kSealPermNames[i]) return SealPerm(i);
  return std::nullopt;
}

std::optional<MemPerm> mem_perm_of_code(const Int& z) {
  if (z < 0 || z > 5) return std::nullopt;
  return MemPerm(z.convert_to<int>());
}

std::optional<SealPerm> seal_perm_of_code(const Int& z) {
  if (z < 0 || z > 3) return std::nullopt;
  return SealPerm(z.convert_to<int>());
}

std::string reg_name(Reg r) {
  if (r == kPC) return "pc";
  return "r" + std::to_string(reg_index(r) - 1);
}

std::optional<Reg> reg_of_name(std::string_view s) {
  if (s == "pc") return kPC;
  if (s.size() < 2 || s.size() > 3 || s[0] != 'r') return std::nullopt;
  unsigned n = 0;
  for (char c : s.substr(1)) {
    if (c < '0' || c > '9') return std::nullopt;
    n = n * 10 + unsigned(c - '0');
  }
  if (s[1] == '0' && s.size() > 2) return std::nullopt;  // no leading zeros
  if (n > 31) return std::nullopt;
  return gpr(n);
}

const OpSig& sig(Opcode op) { return kSigs[static_cast<int>(op) - kFirstOpcode]; }

std::optional<Opcode> opcode_of_mnemonic(std::string_view m) {
  for (int i = 0; i < kNumOpcodes; ++i)
    if (kSigs[i].mnemonic == m) return Opcode(i + kFirstOpcode);
  return std::nullopt;
}

bool well_formed(const Instr& i) {
  int code = static_cast<int>(i.op);
  if (code < kFirstOpcode || code >= kFirstOpcode + kNumOpcodes) return false;
  const OpSig& s = sig(i.op);
  if (i.ops.size() != s.arity) return false;
  for (std::size_t k = 0; k < i.ops.size(); ++k) {
    if (std::holds_alternative<Reg>(i.ops[k])) {
      if (reg_index(std::get<Reg>(i.ops[k])) >= kNumRegs) return false;
    } else if (s.slots[k] == Slot::R) {
      return false;  // register-only slot holding an immediate
    }
  }
  return true;
}

namespace {

void append_bits(Int& acc, std::size_t& pos, std::uint64_t v, unsigned n) {
  if (v != 0) acc |= Int(v) << pos;
  pos += n;
}

// Sign-plus-magnitude varint: 1 sign bit, then base-128 groups LSB-first,
// each group an 8-bit field whose top bit marks continuation. Minimal form.
void append_imm(Int& acc, std::size_t& pos, const Int& z) {
  bool neg = z < 0;
  append_bits(acc, pos, neg ? 1 : 0, 1);
  Int mag = neg ? Int(-z) : z;
  do {
    std::uint64_t group = (mag & 0x7f).convert_to<std::uint64_t>();
    mag >>= 7;
    if (mag != 0) group |= 0x80;
    append_bits(acc, pos, group, 8);
  } while (mag != 0);
}

struct BitReader {
  const Int& z;
  std::size_t pos = 0;
  std::uint64_t take(unsigned n) {
    std::uint64_t v = ((z >> pos) & ((std::uint64_t(1) << n) - 1)).convert_to<std::uint64_t>();
    pos += n;
    return v;
  }
};

}  // namespace

Int encode(const Instr& i) {
  Int acc = static_cast<int>(i.op);
  std::size_t pos = 8;
  const OpSig& s = sig(i.op);
  for (std::size_t k = 0; k < s.arity; ++k) {
    const Operand& o = i.ops[k];
    if (s.slots[k] == Slot::R) {
      append_bits(acc, pos, reg_index(std::get<Reg>(o)), 6);
    } else if (std::holds_alternative<Reg>(o)) {
      append_bits(acc, pos, 0, 1);
      append_bits(acc, pos, reg_index(std::get<Reg>(o)), 6);
    } else {
      append_bits(acc, pos, 1, 1);
      append_imm(acc, pos, std::get<Int>(o));
    }
  }
  return acc;
}

Instr decode(const Int& z) {
  static const Instr kFail = make_instr(Opcode::fail);
  if (z <= 0) return kFail;
  BitReader rd{z};
  std::uint64_t opraw = rd.take(8);
  if (opraw < std::uint64_t(kFirstOpcode) || opraw >= std::uint64_t(kFirstOpcode + kNumOpcodes))
    return kFail;
  Opcode op = Opcode(opraw);
  const OpSig& s = sig(op);
  Instr out = make_instr(op);
  out.ops.reserve(s.arity);
  for (std::size_t k = 0; k < s.arity; ++k) {
    bool want_imm = s.slots[k] == Slot::A && rd.take(1) == 1;
    if (!want_imm) {
      std::uint64_t idx = rd.take(6);
      if (idx >= kNumRegs) return kFail;
      out.ops.emplace_back(Reg(idx));
    } else {
      bool neg = rd.take(1) == 1;
      Int mag = 0;
      std::size_t shift = 0;
      std::uint64_t group;
      do {
        group = rd.take(8);
        if (std::uint64_t payload = group & 0x7f; payload != 0)
          mag |= Int(payload) << shift;
        else if (shift > 0 && (group & 0x80) == 0)
          return kFail;  // non-minimal: trailing zero group
        shift += 7;
      } while (group & 0x80);
      if (neg && mag == 0) return kFail;  // negative zero
      out.ops.emplace_back(neg ? Int(-mag) : mag);
    }
  }
  if ((z >> rd.pos) != 0) return kFail;  // trailing garbage bits
  return out;
}

}  // namespace cerisier
