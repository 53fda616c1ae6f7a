#include "cerisier/harness.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "cerisier/assembler.hpp"

namespace cerisier {

bool sweep_reference(const MachineState& s, Reg rs) {
  const Word& w = s.reg[reg_index(rs)];
  for (std::size_t i = 0; i < kNumRegs; ++i) {
    if (i == reg_index(rs)) continue;
    if (overlap(s.reg[i], w)) return false;
  }
  for (Addr a = 0; a < s.mem.size(); ++a)
    if (overlap(s.mem[a], w)) return false;
  return true;
}

MachineState random_small_state(std::uint64_t seed) {
  std::mt19937_64 g(seed ^ 0x5EEDF00DULL);
  MachineState s{MachineConfig{63, 63}};
  auto cap = [&]() {
    return Cap{MemPerm(g() % 6), Addr(g() % 66), Addr(g() % 66), Addr(g() % 66)};
  };
  auto srange = [&]() {
    return SealRange{SealPerm(g() % 4), OType(g() % 66), OType(g() % 66),
                     OType(g() % 66)};
  };
  auto word = [&]() -> Word {
    switch (g() % 8) {
      case 0:
        return cap();
      case 1:
        return srange();
      case 2:
        if (g() & 1) return Sealed{OType(g() % 64), cap()};
        return Sealed{OType(g() % 64), srange()};
      default:
        return Int(g() % 101) - 50;
    }
  };
  for (int i = 0; i < 16; ++i) s.reg[g() % kNumRegs] = word();
  for (int i = 0; i < 64; ++i) s.mem[g() % s.mem.size()] = word();
  return s;
}

namespace {

// Pre-state authority pool for provenance checks.
struct Pool {
  std::vector<Cap> caps;
  std::vector<SealRange> srs;

  void add(const Word& w) {
    if (const Cap* c = std::get_if<Cap>(&w)) {
      caps.push_back(*c);
    } else if (const SealRange* r = std::get_if<SealRange>(&w)) {
      srs.push_back(*r);
    } else if (const Sealed* sd = std::get_if<Sealed>(&w)) {
      if (const Cap* c = std::get_if<Cap>(&sd->sc))
        caps.push_back(*c);
      else
        srs.push_back(std::get<SealRange>(sd->sc));
    }
  }

  static Pool of(const MachineState& s) {
    Pool p;
    for (std::size_t i = 0; i < kNumRegs; ++i) p.add(s.reg[i]);
    for (const Word& w : s.mem) p.add(w);
    return p;
  }

  // Shrinks of a pre capability (cursor free), plus the executable upgrade a
  // sentry jump performs.
  bool justifies(const Cap& c) const {
    for (const Cap& p : caps) {
      if (perm_leq(c.p, p.p) && c.b >= p.b && c.e <= p.e) return true;
      if (c.p == MemPerm::RX && p.p == MemPerm::E && c.b == p.b && c.e == p.e)
        return true;
    }
    return false;
  }

  bool justifies(const SealRange& r) const {
    for (const SealRange& p : srs)
      if (perm_leq(r.sp, p.sp) && r.ob >= p.ob && r.oe <= p.oe) return true;
    return false;
  }
};

template <typename Emit>
void check_fresh(const Word& w, const Int& lim, const std::string& where,
                 Emit&& emit) {
  const SealRange* sr = std::get_if<SealRange>(&w);
  if (const Sealed* sd = std::get_if<Sealed>(&w)) {
    if (Int(sd->otype) >= lim)
      emit(where + ": sealed word beyond allocated otypes");
    sr = std::get_if<SealRange>(&sd->sc);
  }
  if (sr && Int(sr->oe) > lim)
    emit(where + ": seal range beyond allocated otypes");
}

template <typename Emit>
void check_provenance(const Word& w, const Pool& pool,
                      const std::optional<SealRange>& minted,
                      const std::string& where, Emit&& emit) {
  auto bad_cap = [&](const Cap& c) { return !pool.justifies(c); };
  auto bad_sr = [&](const SealRange& r) {
    return !pool.justifies(r) && !(minted && r == *minted);
  };
  if (const Cap* c = std::get_if<Cap>(&w)) {
    if (bad_cap(*c)) emit(where + ": capability not justified by the pre state");
  } else if (const SealRange* r = std::get_if<SealRange>(&w)) {
    if (bad_sr(*r)) emit(where + ": seal range not justified by the pre state");
  } else if (const Sealed* sd = std::get_if<Sealed>(&w)) {
    if (const Cap* c = std::get_if<Cap>(&sd->sc)) {
      if (bad_cap(*c))
        emit(where + ": sealed capability not justified by the pre state");
    } else if (bad_sr(std::get<SealRange>(sd->sc))) {
      emit(where + ": sealed seal range not justified by the pre state");
    }
  }
}

std::optional<SealRange> mint_allowance(std::uint64_t pre_ec,
                                        std::uint64_t post_ec) {
  if (post_ec != pre_ec + 1) return std::nullopt;
  return SealRange{SealPerm::SU, 2 * pre_ec, 2 * pre_ec + 2, 2 * pre_ec};
}

}  // namespace

std::vector<std::string> monitor_step(const MachineState& pre,
                                      const MachineState& post,
                                      bool provenance) {
  std::vector<std::string> v;
  auto emit = [&](std::string m) { v.push_back(std::move(m)); };

  if (post.ec < pre.ec) emit("enclave counter decreased");
  for (const auto& [k, id] : post.etbl) {
    if (k >= post.ec)
      emit("table slot " + std::to_string(k) + " at or beyond the counter");
    if (!pre.etbl.count(k) && k < pre.ec)
      emit("table slot " + std::to_string(k) + " reallocated");
  }

  const Int lim = Int(2) * Int(post.ec);
  for (std::size_t i = 0; i < kNumRegs; ++i)
    check_fresh(post.reg[i], lim, "register " + reg_name(Reg(i)), emit);
  for (Addr a = 0; a < post.mem.size(); ++a)
    check_fresh(post.mem[a], lim, "address " + std::to_string(a), emit);

  if (provenance) {
    Pool pool = Pool::of(pre);
    auto minted = mint_allowance(pre.ec, post.ec);
    for (std::size_t i = 0; i < kNumRegs; ++i)
      check_provenance(post.reg[i], pool, minted,
                       "register " + reg_name(Reg(i)), emit);
    for (Addr a = 0; a < post.mem.size(); ++a)
      check_provenance(post.mem[a], pool, minted, "address " + std::to_string(a),
                       emit);
  }
  return v;
}

StepMonitor::StepMonitor(const MachineState& init, Options opt) : opt_(opt) {
  prev_ec_ = init.ec;
  for (const auto& [k, id] : init.etbl) {
    table_keys_.insert(k);
    table_ever_used_.insert(k);
  }
  for (std::uint64_t k = 0; k < init.ec; ++k) table_ever_used_.insert(k);
}

void StepMonitor::pre_step(const MachineState& s) {
  einit_armed_ = false;
  if (opt_.provenance) pre_copy_.emplace(s);
  if (!opt_.einit_revalidate) return;
  auto ins = fetch(s);
  if (!ins || ins->op != Opcode::einit) return;
  const Cap* c = std::get_if<Cap>(&s.reg[reg_index(std::get<Reg>(ins->ops[0]))]);
  if (!c || c->b >= c->e || c->e > s.mem.size()) return;
  einit_armed_ = true;
  pe_b_ = c->b;
  pe_e_ = c->e;
  pre_body_.assign(s.mem.begin() + c->b + 1, s.mem.begin() + c->e);
}

void StepMonitor::post_step(const MachineState& s, const WriteLog& log) {
  ++step_no_;
  auto emit = [&](std::string m) {
    violations_.push_back("step " + std::to_string(step_no_) + ": " +
                          std::move(m));
  };

  if (s.ec < prev_ec_) emit("enclave counter decreased");

  std::vector<std::uint64_t> fresh_keys;
  {
    std::set<std::uint64_t> now;
    for (const auto& [k, id] : s.etbl) now.insert(k);
    for (std::uint64_t k : now)
      if (!table_keys_.count(k)) fresh_keys.push_back(k);
    table_keys_ = std::move(now);
  }
  for (std::uint64_t k : fresh_keys) {
    if (k >= s.ec)
      emit("table slot " + std::to_string(k) + " at or beyond the counter");
    if (k < prev_ec_ || table_ever_used_.count(k))
      emit("table slot " + std::to_string(k) + " reallocated");
    table_ever_used_.insert(k);
  }

  const Int lim = Int(2) * Int(s.ec);
  for (std::uint8_t ri : log.regs)
    check_fresh(s.reg[ri], lim, "register " + reg_name(Reg(ri)), emit);
  for (Addr a : log.mems)
    check_fresh(s.mem[a], lim, "address " + std::to_string(a), emit);

  if (opt_.provenance && pre_copy_) {
    Pool pool = Pool::of(*pre_copy_);
    auto minted = mint_allowance(prev_ec_, s.ec);
    for (std::uint8_t ri : log.regs)
      check_provenance(s.reg[ri], pool, minted,
                       "register " + reg_name(Reg(ri)), emit);
    for (Addr a : log.mems)
      check_provenance(s.mem[a], pool, minted, "address " + std::to_string(a),
                       emit);
  }

  // Anything an enclave launch claims gets recomputed and re-swept here.
  if (opt_.einit_revalidate && einit_armed_ && s.ec == prev_ec_ + 1 &&
      log.regs.size() >= 3) {
    for (const Word& w : pre_body_)
      if (!std::holds_alternative<Int>(w)) {
        emit("enclave launch admitted a non-integer code body");
        break;
      }
    if (fresh_keys.size() == 1) {
      auto it = s.etbl.find(fresh_keys[0]);
      if (it == s.etbl.end() ||
          it->second != measure_identity(pe_b_, pre_body_, s.cfg.hash_mode))
        emit("table identity does not match the measured code body");
    } else {
      emit("enclave launch did not allocate exactly one table slot");
    }

    const std::uint8_t r1 = log.regs[0];
    const Word& sentry = s.reg[r1];
    const Word& data = s.mem[pe_b_];
    for (std::size_t i = 0; i < kNumRegs; ++i) {
      if (i != r1 && overlap(s.reg[i], sentry))
        emit("code capability aliased after enclave launch (register " +
             reg_name(Reg(i)) + ")");
      if (overlap(s.reg[i], data))
        emit("data capability aliased after enclave launch (register " +
             reg_name(Reg(i)) + ")");
    }
    for (Addr a = 0; a < s.mem.size(); ++a) {
      if (overlap(s.mem[a], sentry))
        emit("code capability aliased after enclave launch (address " +
             std::to_string(a) + ")");
      if (a != pe_b_ && overlap(s.mem[a], data))
        emit("data capability aliased after enclave launch (address " +
             std::to_string(a) + ")");
    }
  }

  prev_ec_ = s.ec;
  einit_armed_ = false;
}

std::string_view gen_mode_name(GenMode m) {
  switch (m) {
    case GenMode::pure:
      return "pure";
    case GenMode::mutate:
      return "mutate";
    case GenMode::grammar:
      return "grammar";
  }
  return "?";
}

GenMode gen_mode_for_seed(std::uint64_t seed) {
  switch (seed % 4) {
    case 0:
      return GenMode::pure;
    case 1:
      return GenMode::mutate;
    default:
      return GenMode::grammar;
  }
}

namespace {

struct Gen {
  std::mt19937_64 g;
  const SystemImage& img;
  std::vector<std::uint8_t> held;
  std::vector<Int> imms;

  Gen(const SystemImage& im, std::uint64_t seed)
      : g(seed * 0x9E3779B97F4A7C15ULL + 0xC0FFEE), img(im) {
    held = {reg_index(gpr(0)), reg_index(gpr(1)), reg_index(gpr(2)),
            reg_index(gpr(3))};
    for (const auto& [r, w] : img.grants) held.push_back(reg_index(r));
    std::sort(held.begin(), held.end());
    held.erase(std::unique(held.begin(), held.end()), held.end());
    imms = {Int(0),
            Int(1),
            Int(2),
            Int(-1),
            Int(2) * Int(img.ec0),
            Int(img.cfg.otype_max),
            Int(img.cfg.otype_max) + 1,
            Int(img.flag)};
    for (const LoadedRegion& r : img.regions) {
      imms.emplace_back(r.base);
      imms.emplace_back(r.end);
    }
  }

  std::uint64_t u(std::uint64_t n) { return n ? g() % n : 0; }
  bool pct(int p) { return u(100) < static_cast<std::uint64_t>(p); }

  Reg reg() {
    if (pct(60)) return Reg(held[u(held.size())]);
    return Reg(u(kNumRegs));
  }

  Int imm() {
    if (pct(55)) return imms[u(imms.size())];
    if (pct(50)) return Int(u(256));
    if (pct(60)) return -Int(u(64));
    return Int(g());
  }

  Instr instr() {
    Opcode op{static_cast<std::uint8_t>(kFirstOpcode + u(kNumOpcodes))};
    const OpSig& sg = sig(op);
    Instr i;
    i.op = op;
    for (std::size_t k = 0; k < sg.arity; ++k) {
      if (sg.slots[k] == Slot::R || pct(55))
        i.ops.emplace_back(reg());
      else
        i.ops.emplace_back(imm());
    }
    return i;
  }
};

std::vector<Word> gen_pure(Gen& gn, std::size_t length) {
  std::vector<Word> w;
  w.reserve(length);
  for (std::size_t i = 0; i < length; ++i) w.emplace_back(encode(gn.instr()));
  return w;
}

std::vector<Word> gen_mutate(Gen& gn, std::size_t length) {
  const LoadedRegion* adv = gn.img.region("adv");
  if (!adv || adv->image.words.empty()) return gen_pure(gn, length);
  std::vector<Word> w = adv->image.words;
  w.resize(length, Int(0));
  std::size_t hits = 1 + gn.u(4);
  for (std::size_t k = 0; k < hits; ++k) {
    std::size_t pos = gn.u(length);
    switch (gn.u(4)) {
      case 0:
        w[pos] = encode(gn.instr());
        break;
      case 1: {
        const Int* cell = std::get_if<Int>(&w[pos]);
        if (!cell) {
          w[pos] = encode(gn.instr());
          break;
        }
        Instr i = decode(*cell);
        if (i.ops.empty()) {
          w[pos] = encode(gn.instr());
          break;
        }
        std::size_t oi = gn.u(i.ops.size());
        if (sig(i.op).slots[oi] == Slot::R || gn.pct(55))
          i.ops[oi] = gn.reg();
        else
          i.ops[oi] = gn.imm();
        w[pos] = encode(i);
        break;
      }
      case 2:
        std::swap(w[pos], w[gn.u(length)]);
        break;
      default:
        w[pos] = gn.imm();
        break;
    }
  }
  return w;
}

std::vector<Word> gen_grammar(Gen& gn, std::size_t length) {
  const SystemImage& img = gn.img;
  std::vector<Instr> p;

  // Scratch region plus the register granting it, for self-enclaves.
  const LoadedRegion* scr = img.region("scratch");
  int scr_reg = -1;
  if (scr && scr->end - scr->base >= 4) {
    for (const auto& [r, w] : img.grants)
      if (const Cap* c = std::get_if<Cap>(&w))
        if (c->p == MemPerm::RWX && c->b <= scr->base && scr->end <= c->e)
          scr_reg = reg_index(r);
  }

  // Registers the recipe owns; everything else stays usable by the preamble.
  const Reg rc = gpr(scr_reg == reg_index(gpr(8)) ? 10 : 8);
  const Reg rd = gpr(scr_reg == reg_index(gpr(9)) ? 11 : 9);
  auto safe_dest = [&]() -> Reg {
    while (true) {
      Reg r = gn.reg();
      if (r == kPC || r == rc || r == rd) continue;
      if (scr_reg >= 0 && reg_index(r) == scr_reg) continue;
      return r;
    }
  };

  // Total preamble: moves and the always-defined inspections.
  std::size_t npre = gn.u(4);
  for (std::size_t i = 0; i < npre; ++i) {
    switch (gn.u(4)) {
      case 0:
        p.push_back(make_instr(Opcode::mov, {safe_dest(), gn.imm()}));
        break;
      case 1:
        p.push_back(make_instr(Opcode::mov, {safe_dest(), gn.reg()}));
        break;
      case 2:
        p.push_back(make_instr(Opcode::getwtype, {safe_dest(), gn.reg()}));
        break;
      default:
        p.push_back(make_instr(Opcode::getotype, {safe_dest(), gn.reg()}));
        break;
    }
  }

  if (scr_reg >= 0) {
    Addr sb = scr->base, se = scr->end;
    Addr mid = sb + 1 + gn.u(se - sb - 2);
    const Reg rs = Reg(scr_reg);
    p.push_back(make_instr(Opcode::mov, {rc, rs}));
    p.push_back(make_instr(Opcode::subseg, {rc, Int(sb), Int(mid)}));
    p.push_back(make_instr(Opcode::restrict_, {rc, Int(int(MemPerm::RX))}));
    p.push_back(make_instr(Opcode::mov, {rd, rs}));
    p.push_back(make_instr(Opcode::subseg, {rd, Int(mid), Int(se)}));
    p.push_back(make_instr(Opcode::restrict_, {rd, Int(int(MemPerm::RW))}));
    p.push_back(make_instr(Opcode::mov, {rs, Int(0)}));
    p.push_back(make_instr(Opcode::einit, {rc, rd}));
  }

  std::size_t nsuf = gn.u(6);
  for (std::size_t i = 0; i < nsuf; ++i) {
    switch (gn.u(10)) {
      case 0:
        p.push_back(make_instr(Opcode::getotype, {safe_dest(), gn.reg()}));
        break;
      case 1:
        p.push_back(make_instr(Opcode::estoreid, {safe_dest(), gn.reg()}));
        break;
      case 2:
        p.push_back(make_instr(Opcode::cseal, {safe_dest(), gn.reg(), gn.reg()}));
        break;
      case 3:
        p.push_back(
            make_instr(Opcode::cunseal, {safe_dest(), gn.reg(), gn.reg()}));
        break;
      case 4:
        p.push_back(make_instr(Opcode::edeinit, {rc}));
        break;
      case 5:
        p.push_back(make_instr(Opcode::hash, {safe_dest(), gn.reg()}));
        break;
      case 6:
        p.push_back(make_instr(Opcode::mov, {gpr(2), gn.pct(50)
                                                         ? Operand(gn.imm())
                                                         : Operand(gn.reg())}));
        break;
      case 7:
        p.push_back(make_instr(Opcode::mov, {gpr(3), Operand(gn.reg())}));
        break;
      case 8:
        p.push_back(make_instr(Opcode::jmp, {rc}));
        break;
      default:
        p.push_back(gn.instr());
        break;
    }
  }

  if (gn.pct(80))
    p.push_back(make_instr(Opcode::jmp, {gpr(1)}));  // back into the client
  else if (gn.pct(50))
    p.push_back(make_instr(Opcode::jmp, {gn.reg()}));

  std::vector<Word> w;
  w.reserve(length);
  for (const Instr& i : p) {
    if (w.size() == length) break;
    w.emplace_back(encode(i));
  }
  w.resize(length, Int(0));
  return w;
}

}  // namespace

std::vector<Word> gen_adversary(const SystemImage& img, std::uint64_t seed,
                                std::size_t length, GenMode mode) {
  Gen gn(img, seed);
  switch (mode) {
    case GenMode::pure:
      return gen_pure(gn, length);
    case GenMode::mutate:
      return gen_mutate(gn, length);
    case GenMode::grammar:
      return gen_grammar(gn, length);
  }
  return gen_pure(gn, length);
}

MachineState splice_adversary(const SystemImage& img,
                              const std::vector<Word>& adv) {
  MachineState s = img.init;
  const LoadedRegion* r = img.region("adv");
  if (!r) return s;
  const std::size_t len = r->end - r->base;
  for (std::size_t i = 0; i < len; ++i)
    s.mem[r->base + i] = i < adv.size() ? adv[i] : Word{Int(0)};
  return s;
}

std::string_view outcome_name(ExecState st) {
  return st == ExecState::Running ? "FuelExhausted" : exec_state_name(st);
}

std::string report_line(const RunReport& r) {
  std::string out = "seed=" + std::to_string(r.seed);
  out += " outcome=";
  out += outcome_name(r.outcome);
  out += " steps=" + std::to_string(r.steps);
  out += " flag=" + std::to_string(r.assert_flag);
  out += " violations=" + std::to_string(r.violations.size());
  return out;
}

namespace {

RunReport run_state(MachineState st, Addr flag, std::uint64_t seed,
                    const RunOptions& opt) {
  RunReport rep;
  rep.seed = seed;
  std::optional<StepMonitor> mon;
  if (opt.monitors)
    mon.emplace(st, StepMonitor::Options{true, opt.instrumented});
  Runner r(std::move(st));
  WriteLog log;
  while (rep.steps < opt.fuel) {
    if (mon) mon->pre_step(r.state());
    log.clear();
    if (!r.step(mon ? &log : nullptr)) break;
    ++rep.steps;
    if (mon) mon->post_step(r.state(), log);
  }
  rep.outcome = r.state().status;
  rep.assert_flag =
      flag < r.state().mem.size() && r.state().mem[flag] == Word{Int(1)} ? 1 : 0;
  if (mon) rep.violations = mon->violations();
  return rep;
}

}  // namespace

RunReport run_one(const SystemImage& img, std::uint64_t seed,
                  const RunOptions& opt) {
  const LoadedRegion* adv = img.region("adv");
  std::vector<Word> words;
  if (adv)
    words = gen_adversary(img, seed, adv->end - adv->base,
                          gen_mode_for_seed(seed));
  return run_state(splice_adversary(img, words), img.flag, seed, opt);
}

RunReport run_system(const SystemImage& img, const RunOptions& opt) {
  return run_state(img.init, img.flag, 0, opt);
}

CampaignResult fuzz_campaign(const SystemImage& img,
                             const CampaignOptions& opt) {
  CampaignResult res;
  res.reports.resize(opt.runs);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(opt.runs); ++i)
    res.reports[i] = run_one(img, opt.seed0 + i, opt.run);
  for (const RunReport& r : res.reports)
    if (r.assert_flag || !r.violations.empty()) ++res.failures;
  return res;
}

std::string campaign_report(const CampaignResult& res) {
  std::string out;
  for (const RunReport& r : res.reports) {
    out += report_line(r);
    out += '\n';
  }
  out += "SUMMARY runs=" + std::to_string(res.reports.size()) +
         " failures=" + std::to_string(res.failures) + "\n";
  return out;
}

TraceResult trace_run(MachineState s, std::uint64_t fuel) {
  Runner r(std::move(s));
  std::ostringstream os;
  std::uint64_t steps = 0;
  while (steps < fuel && r.state().status == ExecState::Running) {
    const MachineState& st = r.state();
    std::string pcs = word_to_string(st.reg[reg_index(kPC)]);
    std::string ins = "-";
    if (const Cap* c = std::get_if<Cap>(&st.reg[reg_index(kPC)]))
      if ((c->p == MemPerm::RX || c->p == MemPerm::RWX) && c->b <= c->a &&
          c->a < c->e && c->a < st.mem.size())
        if (const Int* z = std::get_if<Int>(&st.mem[c->a]))
          ins = disassemble(*z);
    if (!r.step()) break;
    ++steps;
    os << "step=" << steps << " pc=" << pcs << " instr=" << ins
       << " status=" << exec_state_name(r.state().status) << "\n";
  }
  return TraceResult{std::move(os).str(), r.state(), steps};
}

}  // namespace cerisier
