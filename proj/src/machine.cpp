#include "cerisier/machine.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <limits>
#include <sstream>

namespace cerisier {

namespace {

constexpr std::size_t R(Reg r) { return reg_index(r); }
constexpr std::int64_t kParallelSweepThreshold = 1 << 15;

void wreg(MachineState& s, WriteLog* log, Reg r, Word w) {
  s.reg[R(r)] = std::move(w);
  if (log) log->regs.push_back(static_cast<std::uint8_t>(R(r)));
}

void wmem(MachineState& s, WriteLog* log, Addr a, Word w) {
  s.mem[a] = std::move(w);
  if (log) log->mems.push_back(a);
}

void fail(MachineState& s) { s.status = ExecState::Failed; }

// pc cursor advance; the increment is unconditional, bounds are re-checked
// by the next fetch.
void upd_pc(MachineState& s, WriteLog* log) {
  const Cap* c = std::get_if<Cap>(&s.reg[0]);
  if (!c) {
    fail(s);
    return;
  }
  Cap nc = *c;
  nc.a += 1;
  wreg(s, log, kPC, nc);
}

const Int* as_int(const Word& w) { return std::get_if<Int>(&w); }

inline const Cap* cap_view(const Word& w) {
  if (const Cap* c = std::get_if<Cap>(&w)) return c;
  if (const Sealed* sw = std::get_if<Sealed>(&w)) return std::get_if<Cap>(&sw->sc);
  return nullptr;
}

Reg rop(const Instr& i, std::size_t k) { return std::get<Reg>(i.ops[k]); }

bool in_addr_range(const MachineState& s, const Int& v, bool is_end) {
  return v >= 0 && v <= Int(s.cfg.addr_max) + (is_end ? 1 : 0);
}

bool in_otype_range(const MachineState& s, const Int& v, bool is_end) {
  return v >= 0 && v <= Int(s.cfg.otype_max) + (is_end ? 1 : 0);
}

}  // namespace

std::string_view exec_state_name(ExecState st) {
  switch (st) {
    case ExecState::Running: return "Running";
    case ExecState::Halted: return "Halted";
    default: return "Failed";
  }
}

std::optional<ExecState> exec_state_of_name(std::string_view s) {
  if (s == "Running") return ExecState::Running;
  if (s == "Halted") return ExecState::Halted;
  if (s == "Failed") return ExecState::Failed;
  return std::nullopt;
}

Word get_word(const MachineState& s, const Operand& arg) {
  if (const Int* z = std::get_if<Int>(&arg)) return *z;
  return s.reg[R(std::get<Reg>(arg))];
}

bool overlap(const Word& w1, const Word& w2) {
  const Cap* c1 = cap_view(w1);
  if (!c1) return false;
  const Cap* c2 = cap_view(w2);
  if (!c2) return false;
  return std::max(c1->b, c2->b) < std::min(c1->e, c2->e);
}

bool sweep(const MachineState& s, Reg rs) {
  const Word& target = s.reg[R(rs)];
  for (std::size_t i = 0; i < kNumRegs; ++i)
    if (i != R(rs) && overlap(s.reg[i], target)) return false;
  const std::int64_t n = static_cast<std::int64_t>(s.mem.size());
  if (n <= kParallelSweepThreshold || omp_in_parallel()) {
    for (const Word& w : s.mem)
      if (overlap(w, target)) return false;
    return true;
  }
  std::atomic<bool> found{false};
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    if (found.load(std::memory_order_relaxed)) continue;
    if (overlap(s.mem[i], target)) found.store(true, std::memory_order_relaxed);
  }
  return !found.load();
}

std::uint64_t tidx_of_ot(std::uint64_t o) {
  return o / 2;  // even: o/2; odd: (o-1)/2; same integer division
}

namespace {

void exec_jmp_target(MachineState& s, WriteLog* log, Word w) {
  if (Cap* c = std::get_if<Cap>(&w); c && c->p == MemPerm::E) c->p = MemPerm::RX;
  wreg(s, log, kPC, std::move(w));
}

void exec_einit(const Instr& i, MachineState& s, WriteLog* log) {
  Reg r1 = rop(i, 0), r2 = rop(i, 1);
  if (r1 == kPC) return fail(s);
  const Cap* code = std::get_if<Cap>(&s.reg[R(r1)]);
  if (!code || code->p != MemPerm::RX || !(code->b < code->e)) return fail(s);
  const Cap* data = std::get_if<Cap>(&s.reg[R(r2)]);
  if (!data || data->p != MemPerm::RW || !(data->b < data->e)) return fail(s);
  if (Int(2) * s.ec + 2 > Int(s.cfg.otype_max) + 1) return fail(s);  // otype exhaustion
  if (s.cfg.fault != Fault::einit_skip_int_check) {
    for (Addr l = code->b + 1; l < code->e; ++l)
      if (!std::holds_alternative<Int>(s.mem[l])) return fail(s);
  }
  if (!sweep(s, r1)) return fail(s);
  if (s.cfg.fault != Fault::einit_skip_data_sweep && !sweep(s, r2)) return fail(s);

  std::vector<Word> body(s.mem.begin() + code->b + 1, s.mem.begin() + code->e);
  Int identity = measure_identity(code->b, body, s.cfg.hash_mode);

  std::uint64_t tidx = s.ec;
  if (s.cfg.fault == Fault::table_slot_reuse) {
    tidx = 0;
    while (s.etbl.count(tidx)) ++tidx;
  }
  OType oa = 2 * tidx;
  Cap code_cap = *code, data_cap = *data;  // operands may alias r1/r2 writes
  wmem(s, log, code_cap.b, data_cap);
  wmem(s, log, data_cap.b, SealRange{SealPerm::SU, oa, oa + 2, oa});
  s.etbl[tidx] = std::move(identity);
  s.ec += 1;
  wreg(s, log, r1, Cap{MemPerm::E, code_cap.b, code_cap.e, code_cap.b + 1});
  wreg(s, log, r2, Int(0));
  upd_pc(s, log);
}

void exec_instr(const Instr& i, MachineState& s, WriteLog* log) {
  switch (i.op) {
    case Opcode::jmp:
      exec_jmp_target(s, log, s.reg[R(rop(i, 0))]);
      return;
    case Opcode::jnz: {
      const Int* c = as_int(s.reg[R(rop(i, 1))]);
      if (c && *c != 0)
        exec_jmp_target(s, log, s.reg[R(rop(i, 0))]);
      else
        upd_pc(s, log);
      return;
    }
    case Opcode::fail:
      fail(s);
      return;
    case Opcode::halt:
      s.status = ExecState::Halted;
      return;
    case Opcode::mov:
      wreg(s, log, rop(i, 0), get_word(s, i.ops[1]));
      upd_pc(s, log);
      return;
    case Opcode::add:
    case Opcode::sub:
    case Opcode::lt: {
      const Word w1 = get_word(s, i.ops[1]), w2 = get_word(s, i.ops[2]);
      const Int *z1 = as_int(w1), *z2 = as_int(w2);
      if (!z1 || !z2) return fail(s);
      Int r = i.op == Opcode::add ? Int(*z1 + *z2)
              : i.op == Opcode::sub ? Int(*z1 - *z2)
                                    : Int(*z1 < *z2 ? 1 : 0);
      wreg(s, log, rop(i, 0), std::move(r));
      upd_pc(s, log);
      return;
    }
    case Opcode::lea: {
      Reg rd = rop(i, 0);
      const Word off = get_word(s, i.ops[1]);
      const Int* z = as_int(off);
      if (!z) return fail(s);
      Word v = s.reg[R(rd)];
      if (Cap* c = std::get_if<Cap>(&v)) {
        if (c->p == MemPerm::E) return fail(s);
        Int na = Int(c->a) + *z;
        if (!in_addr_range(s, na, /*is_end=*/true)) return fail(s);
        c->a = na.convert_to<Addr>();
      } else if (SealRange* sr = std::get_if<SealRange>(&v)) {
        Int na = Int(sr->oa) + *z;
        if (!in_otype_range(s, na, /*is_end=*/true)) return fail(s);
        sr->oa = na.convert_to<OType>();
      } else {
        return fail(s);
      }
      wreg(s, log, rd, std::move(v));
      upd_pc(s, log);
      return;
    }
    case Opcode::load: {
      const Cap* c = std::get_if<Cap>(&s.reg[R(rop(i, 1))]);
      if (!c || !(c->b <= c->a && c->a < c->e) || c->a >= s.mem.size()) return fail(s);
      if (c->p != MemPerm::RO && c->p != MemPerm::RX && c->p != MemPerm::RW &&
          c->p != MemPerm::RWX)
        return fail(s);
      Word w = s.mem[c->a];
      wreg(s, log, rop(i, 0), std::move(w));
      upd_pc(s, log);
      return;
    }
    case Opcode::store: {
      const Cap* c = std::get_if<Cap>(&s.reg[R(rop(i, 0))]);
      if (!c || !(c->b <= c->a && c->a < c->e) || c->a >= s.mem.size()) return fail(s);
      if (c->p != MemPerm::RW && c->p != MemPerm::RWX) return fail(s);
      wmem(s, log, c->a, get_word(s, i.ops[1]));
      upd_pc(s, log);
      return;
    }
    case Opcode::restrict_: {
      Reg rd = rop(i, 0);
      const Word code = get_word(s, i.ops[1]);
      const Int* z = as_int(code);
      if (!z) return fail(s);
      Word v = s.reg[R(rd)];
      if (Cap* c = std::get_if<Cap>(&v)) {
        auto np = mem_perm_of_code(*z);
        if (!np) return fail(s);
        if (s.cfg.fault != Fault::restrict_widen && !perm_leq(*np, c->p)) return fail(s);
        c->p = *np;
      } else if (SealRange* sr = std::get_if<SealRange>(&v)) {
        auto np = seal_perm_of_code(*z);
        if (!np) return fail(s);
        if (s.cfg.fault != Fault::restrict_widen && !perm_leq(*np, sr->sp)) return fail(s);
        sr->sp = *np;
      } else {
        return fail(s);
      }
      wreg(s, log, rd, std::move(v));
      upd_pc(s, log);
      return;
    }
    case Opcode::subseg: {
      Reg rd = rop(i, 0);
      const Word w1 = get_word(s, i.ops[1]), w2 = get_word(s, i.ops[2]);
      const Int *z1 = as_int(w1), *z2 = as_int(w2);
      if (!z1 || !z2) return fail(s);
      Word v = s.reg[R(rd)];
      if (Cap* c = std::get_if<Cap>(&v)) {
        if (c->p == MemPerm::E) return fail(s);
        if (!in_addr_range(s, *z1, false) || !in_addr_range(s, *z2, true)) return fail(s);
        if (*z1 < Int(c->b) || *z2 > Int(c->e)) return fail(s);
        c->b = z1->convert_to<Addr>();
        c->e = z2->convert_to<Addr>();
      } else if (SealRange* sr = std::get_if<SealRange>(&v)) {
        if (!in_otype_range(s, *z1, false) || !in_otype_range(s, *z2, true)) return fail(s);
        if (*z1 < Int(sr->ob) || *z2 > Int(sr->oe)) return fail(s);
        sr->ob = z1->convert_to<OType>();
        sr->oe = z2->convert_to<OType>();
      } else {
        return fail(s);
      }
      wreg(s, log, rd, std::move(v));
      upd_pc(s, log);
      return;
    }
    case Opcode::getp:
    case Opcode::getb:
    case Opcode::gete:
    case Opcode::geta: {
      const Word& v = s.reg[R(rop(i, 1))];
      Int out;
      if (const Cap* c = std::get_if<Cap>(&v)) {
        out = i.op == Opcode::getp   ? Int(static_cast<int>(c->p))
              : i.op == Opcode::getb ? Int(c->b)
              : i.op == Opcode::gete ? Int(c->e)
                                     : Int(c->a);
      } else if (const SealRange* sr = std::get_if<SealRange>(&v)) {
        out = i.op == Opcode::getp   ? Int(static_cast<int>(sr->sp))
              : i.op == Opcode::getb ? Int(sr->ob)
              : i.op == Opcode::gete ? Int(sr->oe)
                                     : Int(sr->oa);
      } else {
        return fail(s);
      }
      wreg(s, log, rop(i, 0), std::move(out));
      upd_pc(s, log);
      return;
    }
    case Opcode::cseal: {
      const SealRange* sr = std::get_if<SealRange>(&s.reg[R(rop(i, 1))]);
      if (!sr || !perm_leq(SealPerm::S, sr->sp)) return fail(s);
      if (!(sr->ob <= sr->oa && sr->oa < sr->oe)) return fail(s);
      const Word& w2 = s.reg[R(rop(i, 2))];
      Sealable sc;
      if (const Cap* c = std::get_if<Cap>(&w2))
        sc = *c;
      else if (const SealRange* r2 = std::get_if<SealRange>(&w2))
        sc = *r2;
      else
        return fail(s);
      wreg(s, log, rop(i, 0), Sealed{sr->oa, sc});
      upd_pc(s, log);
      return;
    }
    case Opcode::cunseal: {
      const SealRange* sr = std::get_if<SealRange>(&s.reg[R(rop(i, 1))]);
      if (!sr || !perm_leq(SealPerm::U, sr->sp)) return fail(s);
      if (!(sr->ob <= sr->oa && sr->oa < sr->oe)) return fail(s);
      const Sealed* sw = std::get_if<Sealed>(&s.reg[R(rop(i, 2))]);
      if (!sw || sw->otype != sr->oa) return fail(s);
      Word out = std::holds_alternative<Cap>(sw->sc) ? Word(std::get<Cap>(sw->sc))
                                                     : Word(std::get<SealRange>(sw->sc));
      wreg(s, log, rop(i, 0), std::move(out));
      upd_pc(s, log);
      return;
    }
    case Opcode::getwtype: {
      Int code = static_cast<int>(s.reg[R(rop(i, 1))].index());
      wreg(s, log, rop(i, 0), std::move(code));
      upd_pc(s, log);
      return;
    }
    case Opcode::getotype: {
      const Word& v = s.reg[R(rop(i, 1))];
      Int out = std::holds_alternative<Sealed>(v) ? Int(std::get<Sealed>(v).otype) : Int(-1);
      wreg(s, log, rop(i, 0), std::move(out));
      upd_pc(s, log);
      return;
    }
    case Opcode::isunique: {
      Reg rs = rop(i, 1);
      const Word& v = s.reg[R(rs)];
      if (!cap_view(v)) return fail(s);
      bool unique = sweep(s, rs);
      wreg(s, log, rop(i, 0), Int(unique ? 1 : 0));
      upd_pc(s, log);
      return;
    }
    case Opcode::einit:
      exec_einit(i, s, log);
      return;
    case Opcode::edeinit: {
      const SealRange* sr = std::get_if<SealRange>(&s.reg[R(rop(i, 0))]);
      if (!sr || sr->sp != SealPerm::SU) return fail(s);
      if (sr->oe != sr->ob + 2 || sr->ob % 2 != 0) return fail(s);
      auto it = s.etbl.find(tidx_of_ot(sr->ob));
      if (it == s.etbl.end()) return fail(s);
      s.etbl.erase(it);
      upd_pc(s, log);
      return;
    }
    case Opcode::estoreid: {
      const Int* z = as_int(s.reg[R(rop(i, 1))]);
      if (!z || *z < 0) return fail(s);
      // Beyond uint64 no table index can exist; below that the lookup decides.
      if (*z > Int(std::numeric_limits<std::uint64_t>::max())) return fail(s);
      auto it = s.etbl.find(tidx_of_ot(z->convert_to<std::uint64_t>()));
      if (it == s.etbl.end()) return fail(s);
      wreg(s, log, rop(i, 0), it->second);
      upd_pc(s, log);
      return;
    }
    case Opcode::hash: {
      Int h = int_of_hash(hash_word(s.reg[R(rop(i, 1))], s.cfg.hash_mode));
      wreg(s, log, rop(i, 0), std::move(h));
      upd_pc(s, log);
      return;
    }
    case Opcode::hashconcat: {
      const Word w1 = get_word(s, i.ops[1]), w2 = get_word(s, i.ops[2]);
      const Int *z1 = as_int(w1), *z2 = as_int(w2);
      if (!z1 || !z2) return fail(s);
      auto b1 = bytes_of_hash_int(*z1), b2 = bytes_of_hash_int(*z2);
      if (!b1 || !b2) return fail(s);
      wreg(s, log, rop(i, 0), int_of_hash(hash_concat(std::move(*b1), *b2)));
      upd_pc(s, log);
      return;
    }
  }
  fail(s);  // unreachable for well-formed instructions
}

// ExecSingle's fetch: pc must be an in-bounds RX/RWX capability over a cell
// holding an integer.
const Int* fetch_raw(const MachineState& s) {
  const Cap* pc = std::get_if<Cap>(&s.reg[0]);
  if (!pc || !(pc->b <= pc->a && pc->a < pc->e)) return nullptr;
  if (pc->p != MemPerm::RX && pc->p != MemPerm::RWX) return nullptr;
  if (pc->a >= s.mem.size()) return nullptr;
  return std::get_if<Int>(&s.mem[pc->a]);
}

}  // namespace

std::optional<Instr> fetch(const MachineState& s) {
  const Int* z = fetch_raw(s);
  if (!z) return std::nullopt;
  return decode(*z);
}

void step_inplace(MachineState& s, WriteLog* log) {
  if (s.status != ExecState::Running) return;
  const Int* z = fetch_raw(s);
  if (!z) {
    fail(s);
    return;
  }
  exec_instr(decode(*z), s, log);
}

MachineState step(const MachineState& s, WriteLog* log) {
  MachineState out = s;
  step_inplace(out, log);
  return out;
}

Runner::Runner(MachineState s) : s_(std::move(s)), cache_(s_.mem.size()) {}

bool Runner::step(WriteLog* log) {
  if (s_.status != ExecState::Running) return false;
  const Int* z = fetch_raw(s_);
  if (!z) {
    fail(s_);
    return true;
  }
  const Cap& pc = std::get<Cap>(s_.reg[0]);
  Entry& e = cache_[pc.a];
  if (e.raw != *z) {
    e.raw = *z;
    e.ins = decode(*z);
  }
  exec_instr(e.ins, s_, log);
  return true;
}

RunResult run(MachineState s, std::uint64_t fuel) {
  Runner r(std::move(s));
  std::uint64_t steps = 0;
  while (steps < fuel && r.step()) ++steps;
  return RunResult{std::move(r.state()), steps};
}

// ---- textual formats ----

namespace {

bool parse_u64(std::string_view s, std::uint64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_bigint(std::string_view s, Int& out) {
  if (s.empty()) return false;
  std::size_t k = s[0] == '-' ? 1 : 0;
  if (k == s.size()) return false;
  for (std::size_t i = k; i < s.size(); ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  out = Int(std::string(s));
  return true;
}

std::optional<Sealable> sealable_of_string(std::string_view s);

void sealable_to_string(std::string& out, const Sealable& sc) {
  if (const Cap* c = std::get_if<Cap>(&sc)) {
    out += "cap:";
    out += perm_name(c->p);
    out += ':' + std::to_string(c->b) + ':' + std::to_string(c->e) + ':' + std::to_string(c->a);
  } else {
    const SealRange& sr = std::get<SealRange>(sc);
    out += "srange:";
    out += perm_name(sr.sp);
    out += ':' + std::to_string(sr.ob) + ':' + std::to_string(sr.oe) + ':' + std::to_string(sr.oa);
  }
}

std::vector<std::string_view> split(std::string_view s, char sep, std::size_t max_parts = SIZE_MAX) {
  std::vector<std::string_view> out;
  while (out.size() + 1 < max_parts) {
    std::size_t k = s.find(sep);
    if (k == std::string_view::npos) break;
    out.push_back(s.substr(0, k));
    s.remove_prefix(k + 1);
  }
  out.push_back(s);
  return out;
}

// Field invariant for parsed states: bases within [0, max], exclusive ends
// within [0, max+1]. Cursors are deliberately unconstrained; bounds on them
// are checked at use sites.
bool word_in_range(const Word& w, const MachineConfig& cfg) {
  if (const Cap* c = cap_view(w))
    if (c->b > cfg.addr_max || c->e > cfg.addr_max + 1) return false;
  const SealRange* sr = std::get_if<SealRange>(&w);
  if (!sr)
    if (const Sealed* sw = std::get_if<Sealed>(&w)) sr = std::get_if<SealRange>(&sw->sc);
  if (sr && (sr->ob > cfg.otype_max || sr->oe > cfg.otype_max + 1)) return false;
  if (const Sealed* sw = std::get_if<Sealed>(&w); sw && sw->otype > cfg.otype_max) return false;
  return true;
}

std::optional<Sealable> sealable_of_string(std::string_view s) {
  auto parts = split(s, ':');
  if (parts.size() != 5) return std::nullopt;
  std::uint64_t f1, f2, f3;
  if (!parse_u64(parts[2], f1) || !parse_u64(parts[3], f2) || !parse_u64(parts[4], f3))
    return std::nullopt;
  if (parts[0] == "cap") {
    auto p = mem_perm_of_name(parts[1]);
    if (!p) return std::nullopt;
    return Sealable(Cap{*p, f1, f2, f3});
  }
  if (parts[0] == "srange") {
    auto sp = seal_perm_of_name(parts[1]);
    if (!sp) return std::nullopt;
    return Sealable(SealRange{*sp, f1, f2, f3});
  }
  return std::nullopt;
}

}  // namespace

std::string word_to_string(const Word& w) {
  std::string out;
  switch (w.index()) {
    case 0:
      out = "int:" + std::get<Int>(w).str();
      break;
    case 1:
      sealable_to_string(out, std::get<Cap>(w));
      break;
    case 2:
      sealable_to_string(out, std::get<SealRange>(w));
      break;
    default: {
      const Sealed& sw = std::get<Sealed>(w);
      out = "sealed:" + std::to_string(sw.otype) + ':';
      sealable_to_string(out, sw.sc);
      break;
    }
  }
  return out;
}

std::optional<Word> word_of_string(std::string_view s) {
  if (s.rfind("int:", 0) == 0) {
    Int z;
    if (!parse_bigint(s.substr(4), z)) return std::nullopt;
    return Word(std::move(z));
  }
  if (s.rfind("sealed:", 0) == 0) {
    auto parts = split(s.substr(7), ':', 2);
    if (parts.size() != 2) return std::nullopt;
    std::uint64_t o;
    if (!parse_u64(parts[0], o)) return std::nullopt;
    auto sc = sealable_of_string(parts[1]);
    if (!sc) return std::nullopt;
    return Word(Sealed{o, *sc});
  }
  auto sc = sealable_of_string(s);
  if (!sc) return std::nullopt;
  return std::holds_alternative<Cap>(*sc) ? Word(std::get<Cap>(*sc))
                                          : Word(std::get<SealRange>(*sc));
}

std::string snapshot(const MachineState& s) {
  std::ostringstream out;
  out << "cerisier-snapshot v1 addrmax=" << s.cfg.addr_max << " otypemax=" << s.cfg.otype_max
      << " ec=" << s.ec << " status=" << exec_state_name(s.status) << '\n';
  for (std::size_t i = 0; i < kNumRegs; ++i)
    out << "reg " << reg_name(Reg(i)) << ' ' << word_to_string(s.reg[i]) << '\n';
  for (Addr a = 0; a < s.mem.size(); ++a) {
    const Int* z = std::get_if<Int>(&s.mem[a]);
    if (z && *z == 0) continue;
    out << "mem " << a << ' ' << word_to_string(s.mem[a]) << '\n';
  }
  for (const auto& [tidx, id] : s.etbl) out << "etbl " << tidx << ' ' << id.str() << '\n';
  return out.str();
}

std::optional<MachineState> snapshot_parse(std::string_view text) {
  std::optional<MachineState> out;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    auto tok = split(line, ' ');
    if (first) {
      if (tok.size() != 6 || tok[0] != "cerisier-snapshot" || tok[1] != "v1") return std::nullopt;
      MachineConfig cfg;
      std::uint64_t ec = 0;
      ExecState st = ExecState::Running;
      for (std::size_t k = 2; k < 6; ++k) {
        auto kv = split(tok[k], '=', 2);
        if (kv.size() != 2) return std::nullopt;
        if (kv[0] == "addrmax") {
          if (!parse_u64(kv[1], cfg.addr_max)) return std::nullopt;
        } else if (kv[0] == "otypemax") {
          if (!parse_u64(kv[1], cfg.otype_max)) return std::nullopt;
        } else if (kv[0] == "ec") {
          if (!parse_u64(kv[1], ec)) return std::nullopt;
        } else if (kv[0] == "status") {
          auto st2 = exec_state_of_name(kv[1]);
          if (!st2) return std::nullopt;
          st = *st2;
        } else {
          return std::nullopt;
        }
      }
      out.emplace(cfg);
      out->ec = ec;
      out->status = st;
      first = false;
      continue;
    }
    if (tok.size() != 3 || !out) return std::nullopt;
    if (tok[0] == "reg") {
      auto r = reg_of_name(tok[1]);
      auto w = word_of_string(tok[2]);
      if (!r || !w || !word_in_range(*w, out->cfg)) return std::nullopt;
      out->reg[reg_index(*r)] = *w;
    } else if (tok[0] == "mem") {
      std::uint64_t a;
      auto w = word_of_string(tok[2]);
      if (!parse_u64(tok[1], a) || !w || a >= out->mem.size() || !word_in_range(*w, out->cfg))
        return std::nullopt;
      out->mem[a] = *w;
    } else if (tok[0] == "etbl") {
      std::uint64_t tidx;
      Int id;
      if (!parse_u64(tok[1], tidx) || !parse_bigint(tok[2], id)) return std::nullopt;
      out->etbl[tidx] = std::move(id);
    } else {
      return std::nullopt;
    }
  }
  if (first) return std::nullopt;
  return out;
}

}  // namespace cerisier
