#include "cerisier/assembler.hpp"

#include <cctype>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "text_util.hpp"

namespace cerisier {

namespace {

using detail::is_decimal;
using detail::split_fields;
using detail::tokens_of;

bool valid_label(std::string_view s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

// Loader-supplied constant names: identity.enclave, preid.a.body.body_end, ...
bool valid_const_key(std::string_view s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
  return true;
}

struct Item {
  std::size_t line = 0;
  Addr offset = 0;
  std::vector<std::string> toks;
};

std::size_t item_size(const std::string& head) {
  if (head == "adr") return 2;
  if (head == "assert") return 9;
  return 1;
}

class Assembler {
 public:
  Assembler(std::string_view src, Addr base, const AsmEnv& env)
      : src_(src), env_(env) {
    res_.image.base = base;
  }

  AsmResult run() {
    if (layout())
      for (const Item& it : items_) emit(it);
    return std::move(res_);
  }

 private:
  void err(std::size_t line, std::string msg) {
    res_.errors.push_back("line " + std::to_string(line) + ": " + std::move(msg));
  }

  bool layout() {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= src_.size()) {
      std::size_t nl = src_.find('\n', pos);
      std::string_view line = src_.substr(pos, (nl == src_.npos ? src_.size() : nl) - pos);
      pos = (nl == src_.npos) ? src_.size() + 1 : nl + 1;
      ++line_no;

      if (std::size_t c = line.find(';'); c != line.npos) line = line.substr(0, c);
      std::vector<std::string> toks = tokens_of(line);

      std::size_t k = 0;
      while (k < toks.size() && toks[k].back() == ':') {
        std::string name = toks[k].substr(0, toks[k].size() - 1);
        if (!valid_label(name))
          err(line_no, "bad label name '" + name + "'");
        else if (res_.image.symbols.count(name))
          err(line_no, "duplicate label '" + name + "'");
        else
          res_.image.symbols.emplace(std::move(name), res_.image.base + len_);
        ++k;
      }
      toks.erase(toks.begin(), toks.begin() + k);
      if (toks.empty()) continue;

      std::size_t sz = item_size(toks[0]);
      if (sz > std::numeric_limits<Addr>::max() - res_.image.base - len_) {
        err(line_no, "image out of range");
        return false;
      }
      items_.push_back(Item{line_no, len_, std::move(toks)});
      len_ += sz;
    }
    res_.image.words.assign(len_, Int(0));
    return true;
  }

  // Numeric field: decimal, @label, or an env constant. No deferral.
  std::optional<Int> number(const Item& it, const std::string& tok) {
    if (is_decimal(tok)) return Int(tok);
    if (!tok.empty() && tok[0] == '@') {
      auto s = res_.image.symbols.find(tok.substr(1));
      if (s == res_.image.symbols.end()) {
        err(it.line, "unresolved symbol '" + tok.substr(1) + "'");
        return std::nullopt;
      }
      return Int(s->second);
    }
    if (auto e = env_.find(tok); e != env_.end()) return e->second;
    err(it.line, "unknown constant '" + tok + "'");
    return std::nullopt;
  }

  std::optional<Reg> reg_operand(const Item& it, const std::string& tok) {
    auto r = reg_of_name(tok);
    if (!r) err(it.line, "expected register, got '" + tok + "'");
    return r;
  }

  void put(const Item& it, Addr rel, Word w) {
    res_.image.words[it.offset + rel] = std::move(w);
  }

  void put_instr(const Item& it, Addr rel, Instr ins) {
    put(it, rel, Int(encode(ins)));
  }

  // Named constant only the loader can supply; emits 0 and defers.
  void put_deferred(const Item& it, std::string key) {
    if (!valid_const_key(key)) {
      err(it.line, "bad constant name '" + key + "'");
      return;
    }
    if (auto e = env_.find(key); e != env_.end()) {
      put(it, 0, e->second);
      return;
    }
    res_.pending.push_back(PendingWord{it.offset, std::move(key)});
  }

  void emit_word(const Item& it) {
    if (it.toks.size() != 2) {
      err(it.line, ".word expects one value");
      return;
    }
    const std::string& tok = it.toks[1];
    if (is_decimal(tok) || tok[0] == '@') {
      if (auto v = number(it, tok)) put(it, 0, *v);
      return;
    }
    if (auto e = env_.find(tok); e != env_.end()) {
      put(it, 0, e->second);
      return;
    }
    put_deferred(it, tok);
  }

  void emit_cap(const Item& it) {
    if (it.toks.size() != 2) {
      err(it.line, ".cap expects perm:base:end:cursor");
      return;
    }
    std::vector<std::string> f = split_fields(it.toks[1], ':');
    if (f.size() != 4) {
      err(it.line, ".cap expects perm:base:end:cursor");
      return;
    }
    auto p = mem_perm_of_name(f[0]);
    if (!p) {
      err(it.line, "bad permission '" + f[0] + "'");
      return;
    }
    auto b = number(it, f[1]), e = number(it, f[2]), a = number(it, f[3]);
    if (!b || !e || !a) return;
    if (*b < 0 || *e < 0 || *a < 0 ||
        *e > std::numeric_limits<Addr>::max() || *b > *e) {
      err(it.line, "bad capability bounds");
      return;
    }
    put(it, 0, Cap{*p, static_cast<Addr>(*b), static_cast<Addr>(*e),
                   static_cast<Addr>(*a)});
  }

  void emit_srange(const Item& it) {
    if (it.toks.size() != 2) {
      err(it.line, ".srange expects perm:base:end:cursor");
      return;
    }
    std::vector<std::string> f = split_fields(it.toks[1], ':');
    if (f.size() != 4) {
      err(it.line, ".srange expects perm:base:end:cursor");
      return;
    }
    auto p = seal_perm_of_name(f[0]);
    if (!p) {
      err(it.line, "bad permission '" + f[0] + "'");
      return;
    }
    auto b = number(it, f[1]), e = number(it, f[2]), a = number(it, f[3]);
    if (!b || !e || !a) return;
    if (*b < 0 || *e < 0 || *a < 0 ||
        *e > std::numeric_limits<OType>::max() || *b > *e) {
      err(it.line, "bad seal-range bounds");
      return;
    }
    put(it, 0, SealRange{*p, static_cast<OType>(*b), static_cast<OType>(*e),
                         static_cast<OType>(*a)});
  }

  void emit_sealed(const Item& it) {
    if (it.toks.size() != 2) {
      err(it.line, ".sealed expects otype:cap:... or otype:srange:...");
      return;
    }
    std::vector<std::string> f = split_fields(it.toks[1], ':');
    if (f.size() != 6 || (f[1] != "cap" && f[1] != "srange")) {
      err(it.line, ".sealed expects otype:cap:... or otype:srange:...");
      return;
    }
    auto o = number(it, f[0]);
    if (!o) return;
    if (*o < 0 || *o > std::numeric_limits<OType>::max()) {
      err(it.line, "bad otype");
      return;
    }
    auto x = number(it, f[3]), y = number(it, f[4]), z = number(it, f[5]);
    if (!x || !y || !z) return;
    if (*x < 0 || *y < 0 || *z < 0 || *y > std::numeric_limits<Addr>::max() ||
        *x > *y) {
      err(it.line, "bad sealed payload bounds");
      return;
    }
    Sealable sc;
    if (f[1] == "cap") {
      auto p = mem_perm_of_name(f[2]);
      if (!p) {
        err(it.line, "bad permission '" + f[2] + "'");
        return;
      }
      sc = Cap{*p, static_cast<Addr>(*x), static_cast<Addr>(*y),
               static_cast<Addr>(*z)};
    } else {
      auto p = seal_perm_of_name(f[2]);
      if (!p) {
        err(it.line, "bad permission '" + f[2] + "'");
        return;
      }
      sc = SealRange{*p, static_cast<OType>(*x), static_cast<OType>(*y),
                     static_cast<OType>(*z)};
    }
    put(it, 0, Sealed{static_cast<OType>(*o), sc});
  }

  void emit_adr(const Item& it) {
    if (it.toks.size() != 3) {
      err(it.line, "adr expects a register and a label");
      return;
    }
    auto rd = reg_operand(it, it.toks[1]);
    if (!rd) return;
    std::string name = it.toks[2];
    if (!name.empty() && name[0] == '@') name.erase(0, 1);
    auto s = res_.image.symbols.find(name);
    if (s == res_.image.symbols.end()) {
      err(it.line, "unresolved symbol '" + name + "'");
      return;
    }
    Addr site = res_.image.base + it.offset;
    Int delta = Int(s->second) - Int(site);
    put_instr(it, 0, make_instr(Opcode::mov, {*rd, kPC}));
    put_instr(it, 1, make_instr(Opcode::lea, {*rd, delta}));
  }

  // assert rs1 rs2 rflag: compare rs1 with rs2; on mismatch store Int(1)
  // through rflag and halt, otherwise fall through. Clobbers r30/r31.
  void emit_assert(const Item& it) {
    if (it.toks.size() != 4) {
      err(it.line, "assert expects two value registers and a flag register");
      return;
    }
    auto r1 = reg_operand(it, it.toks[1]);
    auto r2 = reg_operand(it, it.toks[2]);
    auto rf = reg_operand(it, it.toks[3]);
    if (!r1 || !r2 || !rf) return;
    for (Reg r : {*r1, *r2, *rf})
      if (r == gpr(30) || r == gpr(31)) {
        err(it.line, "assert operands may not use scratch registers r30/r31");
        return;
      }
    const Reg s = gpr(30), t = gpr(31);
    put_instr(it, 0, make_instr(Opcode::sub, {s, *r1, *r2}));
    put_instr(it, 1, make_instr(Opcode::mov, {t, kPC}));
    put_instr(it, 2, make_instr(Opcode::lea, {t, Int(6)}));  // -> +7 (fail)
    put_instr(it, 3, make_instr(Opcode::jnz, {t, s}));
    put_instr(it, 4, make_instr(Opcode::mov, {t, kPC}));
    put_instr(it, 5, make_instr(Opcode::lea, {t, Int(5)}));  // -> +9 (cont)
    put_instr(it, 6, make_instr(Opcode::jmp, {t}));
    put_instr(it, 7, make_instr(Opcode::store, {*rf, Int(1)}));
    put_instr(it, 8, make_instr(Opcode::halt));
  }

  void emit_instr(const Item& it) {
    auto op = opcode_of_mnemonic(it.toks[0]);
    if (!op) {
      err(it.line, "unknown mnemonic '" + it.toks[0] + "'");
      return;
    }
    const OpSig& sg = sig(*op);
    if (it.toks.size() - 1 != sg.arity) {
      err(it.line, std::string(sg.mnemonic) + " expects " +
                       std::to_string(sg.arity) + " operands");
      return;
    }
    Instr ins;
    ins.op = *op;
    for (std::size_t i = 0; i < sg.arity; ++i) {
      const std::string& tok = it.toks[i + 1];
      if (auto r = reg_of_name(tok)) {
        ins.ops.emplace_back(*r);
        continue;
      }
      if (sg.slots[i] == Slot::R) {
        err(it.line, "operand " + std::to_string(i + 1) + " of " +
                         std::string(sg.mnemonic) + " must be a register");
        return;
      }
      if (auto v = number(it, tok))
        ins.ops.emplace_back(*v);
      else
        return;
    }
    put_instr(it, 0, std::move(ins));
  }

  void emit(const Item& it) {
    const std::string& head = it.toks[0];
    if (head == ".word") return emit_word(it);
    if (head == ".cap") return emit_cap(it);
    if (head == ".srange") return emit_srange(it);
    if (head == ".sealed") return emit_sealed(it);
    if (head == ".identity") {
      if (it.toks.size() != 2) return err(it.line, ".identity expects a unit name");
      return put_deferred(it, "identity." + it.toks[1]);
    }
    if (head == ".preid") {
      if (it.toks.size() != 4)
        return err(it.line, ".preid expects a unit name and two labels");
      return put_deferred(it, "preid." + it.toks[1] + "." + it.toks[2] + "." +
                                  it.toks[3]);
    }
    if (head[0] == '.') return err(it.line, "unknown directive '" + head + "'");
    if (head == "adr") return emit_adr(it);
    if (head == "assert") return emit_assert(it);
    emit_instr(it);
  }

  std::string_view src_;
  const AsmEnv& env_;
  AsmResult res_;
  std::vector<Item> items_;
  Addr len_ = 0;
};

}  // namespace

AsmResult assemble(std::string_view src, Addr base, const AsmEnv& env) {
  return Assembler(src, base, env).run();
}

std::string disassemble(const Int& z) {
  Instr ins = decode(z);
  static const Int kFailCode = encode(make_instr(Opcode::fail));
  if (ins.op == Opcode::fail && z != kFailCode) return "fail ; raw=" + z.str();
  std::string out{sig(ins.op).mnemonic};
  for (const Operand& o : ins.ops) {
    out += ' ';
    if (std::holds_alternative<Reg>(o))
      out += reg_name(std::get<Reg>(o));
    else
      out += std::get<Int>(o).str();
  }
  return out;
}

std::optional<Instr> parse_instruction(std::string_view text) {
  if (std::size_t c = text.find(';'); c != text.npos) text = text.substr(0, c);
  std::vector<std::string> toks = tokens_of(text);
  if (toks.empty()) return std::nullopt;
  auto op = opcode_of_mnemonic(toks[0]);
  if (!op) return std::nullopt;
  const OpSig& sg = sig(*op);
  if (toks.size() - 1 != sg.arity) return std::nullopt;
  Instr ins;
  ins.op = *op;
  for (std::size_t i = 0; i < sg.arity; ++i) {
    const std::string& tok = toks[i + 1];
    if (auto r = reg_of_name(tok)) {
      ins.ops.emplace_back(*r);
    } else if (is_decimal(tok)) {
      ins.ops.emplace_back(Int(tok));
    } else {
      return std::nullopt;
    }
  }
  if (!well_formed(ins)) return std::nullopt;
  return ins;
}

}  // namespace cerisier
