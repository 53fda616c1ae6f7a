#include "cerisier/loader.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include "text_util.hpp"

namespace cerisier {

namespace {

using detail::for_each_line;
using detail::parse_u64;
using detail::split_fields;
using detail::tokens_of;

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

struct Errors {
  std::vector<std::string> list;
  void add(std::size_t line, std::string msg) {
    list.push_back("spec line " + std::to_string(line) + ": " + std::move(msg));
  }
};

}  // namespace

SpecParse parse_system_spec(std::string_view text, const FileLookup& files) {
  SystemSpec sp;
  Errors errs;
  bool have_flag = false;
  std::set<std::string> names;

  for_each_line(text, [&](std::size_t ln, std::string_view line) {
    std::vector<std::string> t = tokens_of(line);
    if (t.empty()) return;
    const std::string& head = t[0];

    if (head == "config") {
      for (std::size_t i = 1; i < t.size(); ++i) {
        std::vector<std::string> kv = split_fields(t[i], '=');
        if (kv.size() != 2) {
          errs.add(ln, "config entries look like key=value, got '" + t[i] + "'");
          continue;
        }
        if (kv[0] == "hashmode") {
          if (kv[1] == "exact")
            sp.cfg.hash_mode = HashMode::exact;
          else if (kv[1] == "digest32")
            sp.cfg.hash_mode = HashMode::digest32;
          else
            errs.add(ln, "unknown hash mode '" + kv[1] + "'");
          continue;
        }
        auto v = parse_u64(kv[1]);
        if (!v) {
          errs.add(ln, "bad config value '" + t[i] + "'");
          continue;
        }
        if (kv[0] == "addrmax")
          sp.cfg.addr_max = *v;
        else if (kv[0] == "otypemax")
          sp.cfg.otype_max = *v;
        else if (kv[0] == "ec")
          sp.ec0 = *v;
        else
          errs.add(ln, "unknown config key '" + kv[0] + "'");
      }
      return;
    }

    if (head == "region") {
      if (t.size() != 5) {
        errs.add(ln, "region expects: name base exposure file");
        return;
      }
      RegionSpec r;
      r.name = t[1];
      if (!valid_name(r.name)) {
        errs.add(ln, "bad region name '" + r.name + "'");
        return;
      }
      if (!names.insert(r.name).second) {
        errs.add(ln, "duplicate region '" + r.name + "'");
        return;
      }
      auto b = parse_u64(t[2]);
      if (!b) {
        errs.add(ln, "bad region base '" + t[2] + "'");
        return;
      }
      r.base = *b;
      auto p = mem_perm_of_name(t[3]);
      if (!p) {
        errs.add(ln, "bad exposure permission '" + t[3] + "'");
        return;
      }
      r.exposure = *p;
      auto src = files(t[4]);
      if (!src) {
        errs.add(ln, "cannot read '" + t[4] + "'");
        return;
      }
      r.source = std::move(*src);
      sp.regions.push_back(std::move(r));
      return;
    }

    if (head == "grant" || head == "entry") {
      if (t.size() != 3) {
        errs.add(ln, head + " expects: register word-spec");
        return;
      }
      auto r = reg_of_name(t[1]);
      if (!r) {
        errs.add(ln, "bad register '" + t[1] + "'");
        return;
      }
      if (head == "grant" && *r == kPC) {
        errs.add(ln, "grant may not target pc");
        return;
      }
      sp.grants.push_back(GrantSpec{*r, t[2], head == "grant", ln});
      return;
    }

    if (head == "flag") {
      if (t.size() != 2) {
        errs.add(ln, "flag expects one address");
        return;
      }
      if (have_flag) {
        errs.add(ln, "duplicate flag");
        return;
      }
      have_flag = true;
      sp.flag = t[1];
      sp.flag_line = ln;
      return;
    }

    if (head == "etbl") {
      if (t.size() != 3) {
        errs.add(ln, "etbl expects: tidx identity");
        return;
      }
      auto idx = parse_u64(t[1]);
      if (!idx) {
        errs.add(ln, "bad table index '" + t[1] + "'");
        return;
      }
      sp.etbl.push_back(TableSpec{*idx, t[2], ln});
      return;
    }

    errs.add(ln, "unknown directive '" + head + "'");
  });

  if (sp.regions.empty()) errs.list.push_back("spec: no regions");
  if (!have_flag) errs.list.push_back("spec: no flag cell");
  if (!errs.list.empty()) return SpecParse{std::nullopt, std::move(errs.list)};
  return SpecParse{std::move(sp), {}};
}

SpecParse load_system_spec(const std::string& path) {
  auto slurp = [](const std::filesystem::path& p) -> std::optional<std::string> {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
  };
  auto text = slurp(path);
  if (!text) return SpecParse{std::nullopt, {"cannot read '" + path + "'"}};
  std::filesystem::path dir = std::filesystem::path(path).parent_path();
  return parse_system_spec(
      *text, [&](const std::string& name) { return slurp(dir / name); });
}

const LoadedRegion* SystemImage::region(std::string_view name) const {
  for (const LoadedRegion& r : regions)
    if (r.name == name) return &r;
  return nullptr;
}

namespace {

// Numeric field of a word/flag spec: decimal, @region, @region.end, or
// @region.<label>.
std::optional<Int> spec_field(const SystemImage& img, const std::string& tok,
                              std::string* err) {
  if (detail::is_decimal(tok)) return Int(tok);
  if (tok.empty() || tok[0] != '@') {
    *err = "bad field '" + tok + "'";
    return std::nullopt;
  }
  std::string_view rest{tok};
  rest.remove_prefix(1);
  std::string name{rest.substr(0, rest.find('.'))};
  const LoadedRegion* r = img.region(name);
  if (!r) {
    *err = "unknown region '" + name + "'";
    return std::nullopt;
  }
  std::size_t dot = rest.find('.');
  if (dot == rest.npos) return Int(r->base);
  std::string label{rest.substr(dot + 1)};
  if (label == "end") return Int(r->end);
  auto s = r->image.symbols.find(label);
  if (s == r->image.symbols.end()) {
    *err = "region '" + name + "' has no symbol '" + label + "'";
    return std::nullopt;
  }
  return Int(s->second);
}

std::optional<Addr> spec_addr(const SystemImage& img, const std::string& tok,
                              std::string* err) {
  auto v = spec_field(img, tok, err);
  if (!v) return std::nullopt;
  if (*v < 0 || *v > img.cfg.addr_max) {
    *err = "address '" + tok + "' out of range";
    return std::nullopt;
  }
  return static_cast<Addr>(*v);
}

// Word specs; see the header comment for the grammar.
std::optional<Word> parse_word_spec(const SystemImage& img,
                                    const std::string& spec, std::string* err) {
  std::vector<std::string> f = split_fields(spec, ':');
  auto num = [&](const std::string& tok, Int lo, Int hi) -> std::optional<Int> {
    auto v = spec_field(img, tok, err);
    if (!v) return std::nullopt;
    if (*v < lo || *v > hi) {
      *err = "field '" + tok + "' out of range";
      return std::nullopt;
    }
    return v;
  };
  const Int addr_top = Int(img.cfg.addr_max) + 1;
  const Int otype_top = Int(img.cfg.otype_max) + 1;
  const Int cursor_top = std::numeric_limits<std::uint64_t>::max();

  if (f[0] == "int") {
    if (f.size() != 2 || !detail::is_decimal(f[1])) {
      *err = "int expects one decimal";
      return std::nullopt;
    }
    return Word{Int(f[1])};
  }

  auto cap_of = [&](const std::vector<std::string>& g) -> std::optional<Word> {
    auto p = mem_perm_of_name(g[0]);
    if (!p) {
      *err = "bad permission '" + g[0] + "'";
      return std::nullopt;
    }
    auto b = num(g[1], 0, addr_top), e = num(g[2], 0, addr_top),
         a = num(g[3], 0, cursor_top);
    if (!b || !e || !a) return std::nullopt;
    if (*b > *e) {
      *err = "capability base above end";
      return std::nullopt;
    }
    return Word{Cap{*p, static_cast<Addr>(*b), static_cast<Addr>(*e),
                    static_cast<Addr>(*a)}};
  };
  auto srange_of = [&](const std::vector<std::string>& g) -> std::optional<Word> {
    auto p = seal_perm_of_name(g[0]);
    if (!p) {
      *err = "bad permission '" + g[0] + "'";
      return std::nullopt;
    }
    auto b = num(g[1], 0, otype_top), e = num(g[2], 0, otype_top),
         a = num(g[3], 0, cursor_top);
    if (!b || !e || !a) return std::nullopt;
    if (*b > *e) {
      *err = "seal range base above end";
      return std::nullopt;
    }
    return Word{SealRange{*p, static_cast<OType>(*b), static_cast<OType>(*e),
                          static_cast<OType>(*a)}};
  };

  if (f[0] == "cap") {
    if (f.size() != 5) {
      *err = "cap expects perm:base:end:cursor";
      return std::nullopt;
    }
    return cap_of({f[1], f[2], f[3], f[4]});
  }
  if (f[0] == "srange") {
    if (f.size() != 5) {
      *err = "srange expects perm:base:end:cursor";
      return std::nullopt;
    }
    return srange_of({f[1], f[2], f[3], f[4]});
  }
  if (f[0] == "sealed") {
    if (f.size() != 7 || (f[2] != "cap" && f[2] != "srange")) {
      *err = "sealed expects otype:cap:... or otype:srange:...";
      return std::nullopt;
    }
    auto o = num(f[1], 0, Int(img.cfg.otype_max));
    if (!o) return std::nullopt;
    std::optional<Word> inner = f[2] == "cap"
                                    ? cap_of({f[3], f[4], f[5], f[6]})
                                    : srange_of({f[3], f[4], f[5], f[6]});
    if (!inner) return std::nullopt;
    Sealable sc;
    if (auto* c = std::get_if<Cap>(&*inner))
      sc = *c;
    else
      sc = std::get<SealRange>(*inner);
    return Word{Sealed{static_cast<OType>(*o), sc}};
  }
  if (f.size() == 4 && mem_perm_of_name(f[0]))
    return cap_of({f[0], f[1], f[2], f[3]});
  *err = "unknown word spec '" + spec + "'";
  return std::nullopt;
}

struct PendingPatch {
  std::size_t ri = 0;
  Addr off = 0;
  std::string key;
};

}  // namespace

LoadResult build_system(const SystemSpec& spec) {
  std::vector<std::string> errors;
  if (spec.cfg.addr_max > (1u << 22))
    return LoadResult{std::nullopt, {"config: addrmax too large"}};
  SystemImage img;
  img.cfg = spec.cfg;
  img.ec0 = spec.ec0;

  // Sizing pass: item counts do not depend on constants, so lengths from an
  // env-free assembly are final.
  AsmEnv env;
  {
    std::vector<Addr> lens;
    for (const RegionSpec& r : spec.regions)
      lens.push_back(assemble(r.source, r.base).image.words.size());
    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
      env["base." + spec.regions[i].name] = Int(spec.regions[i].base);
      env["end." + spec.regions[i].name] = Int(spec.regions[i].base) + lens[i];
    }
  }

  // ri == regions.size() marks demand without a patch site (etbl ids).
  std::vector<PendingPatch> pend;
  for (const TableSpec& ts : spec.etbl)
    if (!detail::is_decimal(ts.id))
      pend.push_back(PendingPatch{spec.regions.size(), 0, ts.id});
  for (std::size_t i = 0; i < spec.regions.size(); ++i) {
    const RegionSpec& rs = spec.regions[i];
    AsmResult ar = assemble(rs.source, rs.base, env);
    for (const std::string& e : ar.errors)
      errors.push_back("region " + rs.name + ": " + e);
    for (const PendingWord& pw : ar.pending)
      pend.push_back(PendingPatch{i, pw.offset, pw.key});
    LoadedRegion lr;
    lr.name = rs.name;
    lr.base = rs.base;
    lr.end = rs.base + ar.image.words.size();
    lr.exposure = rs.exposure;
    lr.image = std::move(ar.image);
    if (lr.end < lr.base || lr.end > img.cfg.addr_max + 1)
      errors.push_back("region " + rs.name + " does not fit in memory");
    img.regions.push_back(std::move(lr));
  }
  if (!errors.empty()) return LoadResult{std::nullopt, std::move(errors)};

  // Constant resolution to a fixpoint: preids over clean ranges first, then
  // identities whose measured words are all settled.
  auto region_index = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < img.regions.size(); ++i)
      if (img.regions[i].name == name) return i;
    return std::nullopt;
  };
  auto has_pending_in = [&](std::size_t ri, Addr lo, Addr hi) {
    for (const PendingPatch& p : pend)
      if (p.ri == ri && p.off >= lo && p.off < hi) return true;
    return false;
  };
  auto patch_key = [&](const std::string& key, const Int& value) {
    img.consts[key] = value;
    std::erase_if(pend, [&](const PendingPatch& p) {
      if (p.key != key) return false;
      if (p.ri < img.regions.size())
        img.regions[p.ri].image.words[p.off] = value;
      return true;
    });
  };

  bool progress = true;
  while (progress && !pend.empty()) {
    progress = false;
    std::set<std::string> keys;
    for (const PendingPatch& p : pend) keys.insert(p.key);
    for (const std::string& key : keys) {
      std::vector<std::string> parts = split_fields(key, '.');
      if (parts.size() == 4 && parts[0] == "preid") {
        auto ri = region_index(parts[1]);
        if (!ri) {
          errors.push_back("unknown unit in constant '" + key + "'");
          std::erase_if(pend, [&](const PendingPatch& p) { return p.key == key; });
          progress = true;
          continue;
        }
        const LoadedRegion& r = img.regions[*ri];
        auto s1 = r.image.symbols.find(parts[2]);
        auto s2 = r.image.symbols.find(parts[3]);
        if (s1 == r.image.symbols.end() || s2 == r.image.symbols.end() ||
            s1->second > s2->second || s1->second < r.base || s2->second > r.end) {
          errors.push_back("bad label range in constant '" + key + "'");
          std::erase_if(pend, [&](const PendingPatch& p) { return p.key == key; });
          progress = true;
          continue;
        }
        Addr lo = s1->second - r.base, hi = s2->second - r.base;
        if (has_pending_in(*ri, lo, hi)) continue;
        std::vector<Word> span(r.image.words.begin() + lo,
                               r.image.words.begin() + hi);
        patch_key(key, int_of_hash(region_hash(span, img.cfg.hash_mode)));
        progress = true;
      } else if (parts.size() == 2 && parts[0] == "identity") {
        auto ri = region_index(parts[1]);
        if (!ri) {
          errors.push_back("unknown unit in constant '" + key + "'");
          std::erase_if(pend, [&](const PendingPatch& p) { return p.key == key; });
          progress = true;
          continue;
        }
        const LoadedRegion& r = img.regions[*ri];
        if (r.image.words.empty()) {
          errors.push_back("identity of empty unit '" + parts[1] + "'");
          std::erase_if(pend, [&](const PendingPatch& p) { return p.key == key; });
          progress = true;
          continue;
        }
        if (has_pending_in(*ri, 1, r.end - r.base)) continue;
        std::vector<Word> body(r.image.words.begin() + 1, r.image.words.end());
        patch_key(key, measure_identity(r.base, body, img.cfg.hash_mode));
        progress = true;
      } else {
        errors.push_back("unresolved constant '" + key + "'");
        std::erase_if(pend, [&](const PendingPatch& p) { return p.key == key; });
        progress = true;
      }
    }
  }
  for (const PendingPatch& p : pend)
    errors.push_back("circular constant '" + p.key + "' in " +
                     (p.ri < img.regions.size() ? "region " + img.regions[p.ri].name
                                                : std::string("spec")));
  if (!errors.empty()) return LoadResult{std::nullopt, std::move(errors)};

  // Materialize the initial state.
  img.init = MachineState(img.cfg);
  img.init.ec = img.ec0;
  for (const LoadedRegion& r : img.regions)
    for (std::size_t k = 0; k < r.image.words.size(); ++k)
      img.init.mem[r.base + k] = r.image.words[k];

  std::string err;
  if (auto a = spec_addr(img, spec.flag, &err))
    img.flag = *a;
  else
    errors.push_back("spec line " + std::to_string(spec.flag_line) + ": " + err);

  std::set<std::uint8_t> granted;
  for (const GrantSpec& g : spec.grants) {
    auto w = parse_word_spec(img, g.word, &err);
    if (!w) {
      errors.push_back("spec line " + std::to_string(g.line) + ": " + err);
      continue;
    }
    if (!granted.insert(reg_index(g.reg)).second) {
      errors.push_back("spec line " + std::to_string(g.line) + ": register " +
                       reg_name(g.reg) + " granted twice");
      continue;
    }
    img.init.reg[reg_index(g.reg)] = *w;
    if (g.checked) img.grants.emplace_back(g.reg, *w);
  }

  for (const TableSpec& ts : spec.etbl) {
    Int id;
    if (detail::is_decimal(ts.id)) {
      id = Int(ts.id);
    } else if (auto c = img.consts.find(ts.id); c != img.consts.end()) {
      id = c->second;
    } else {
      errors.push_back("spec line " + std::to_string(ts.line) +
                       ": unknown identity '" + ts.id + "'");
      continue;
    }
    if (img.init.etbl.count(ts.tidx)) {
      errors.push_back("spec line " + std::to_string(ts.line) +
                       ": duplicate table index " + std::to_string(ts.tidx));
      continue;
    }
    img.init.etbl[ts.tidx] = id;
  }

  if (!errors.empty()) return LoadResult{std::nullopt, std::move(errors)};
  return LoadResult{std::move(img), {}};
}

std::vector<std::string> check_wellformed(const SystemImage& img) {
  std::vector<std::string> v;
  const MachineState& s = img.init;

  std::vector<const LoadedRegion*> by_base;
  for (const LoadedRegion& r : img.regions) by_base.push_back(&r);
  std::sort(by_base.begin(), by_base.end(),
            [](auto* a, auto* b) { return a->base < b->base; });
  for (const LoadedRegion* r : by_base)
    if (r->end > img.cfg.addr_max + 1)
      v.push_back("region " + r->name + " exceeds memory");
  for (std::size_t i = 1; i < by_base.size(); ++i)
    if (by_base[i]->base < by_base[i - 1]->end)
      v.push_back("regions " + by_base[i - 1]->name + " and " +
                  by_base[i]->name + " overlap");

  const LoadedRegion* flag_region = nullptr;
  for (const LoadedRegion& r : img.regions)
    if (r.base <= img.flag && img.flag < r.end) flag_region = &r;
  if (!flag_region)
    v.push_back("flag cell outside every region");
  else if (flag_region->exposure != MemPerm::O)
    v.push_back("flag cell lies in exposed region " + flag_region->name);

  const Int lim = Int(2) * Int(img.ec0);
  auto scan = [&](const Word& w, const std::string& where) {
    if (const auto* sr = std::get_if<SealRange>(&w)) {
      if (Int(sr->oe) > lim)
        v.push_back(where + ": seal range reaches unallocated otypes");
    } else if (const auto* sd = std::get_if<Sealed>(&w)) {
      if (Int(sd->otype) >= lim)
        v.push_back(where + ": sealed word under unallocated otype");
      if (const auto* isr = std::get_if<SealRange>(&sd->sc))
        if (Int(isr->oe) > lim)
          v.push_back(where + ": sealed seal range reaches unallocated otypes");
    }
  };
  for (std::size_t i = 0; i < kNumRegs; ++i)
    scan(s.reg[i], "register " + reg_name(Reg(i)));
  for (Addr a = 0; a < s.mem.size(); ++a)
    scan(s.mem[a], "address " + std::to_string(a));

  for (const auto& [reg, w] : img.grants) {
    std::string who = "grant " + reg_name(reg);
    const Cap* c = std::get_if<Cap>(&w);
    if (const auto* sd = std::get_if<Sealed>(&w))
      c = std::get_if<Cap>(&sd->sc);
    if (!c || c->b >= c->e) continue;  // no memory authority
    const LoadedRegion* home = nullptr;
    for (const LoadedRegion& r : img.regions)
      if (r.base <= c->b && c->e <= r.end) home = &r;
    if (!home) {
      v.push_back(who + ": capability spans no single region");
    } else if (!perm_leq(c->p, home->exposure)) {
      v.push_back(who + ": permission exceeds exposure of region " + home->name);
    }
    if (c->b <= img.flag && img.flag < c->e)
      v.push_back(who + ": capability covers the flag cell");
  }

  if (Int(2) * Int(img.ec0) > Int(img.cfg.otype_max) + 1)
    v.push_back("initial counter exceeds the otype space");
  for (const auto& [tidx, id] : s.etbl)
    if (tidx >= img.ec0)
      v.push_back("table entry " + std::to_string(tidx) +
                  " at or above the initial counter");

  const Cap* pc = std::get_if<Cap>(&s.reg[reg_index(kPC)]);
  if (!pc || !(pc->p == MemPerm::RX || pc->p == MemPerm::RWX) ||
      !(pc->b <= pc->a && pc->a < pc->e))
    v.push_back("entry capability is not runnable");

  if (s.status != ExecState::Running) v.push_back("initial status not Running");
  if (s.ec != img.ec0) v.push_back("initial counter mismatch");
  return v;
}

}  // namespace cerisier
