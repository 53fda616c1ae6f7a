#include <map>
#include <string>

#include <doctest.h>

#include "cerisier/hash.hpp"
#include "cerisier/loader.hpp"

using namespace cerisier;

namespace {

FileLookup files_of(std::map<std::string, std::string> m) {
  return [m = std::move(m)](const std::string& n) -> std::optional<std::string> {
    auto it = m.find(n);
    if (it == m.end()) return std::nullopt;
    return it->second;
  };
}

SystemSpec parse_ok(std::string_view text, const FileLookup& files) {
  SpecParse p = parse_system_spec(text, files);
  for (const std::string& e : p.errors) CAPTURE(e);
  REQUIRE(p.ok());
  return *std::move(p.spec);
}

SystemImage build_ok(std::string_view text, const FileLookup& files) {
  LoadResult r = build_system(parse_ok(text, files));
  for (const std::string& e : r.errors) CAPTURE(e);
  REQUIRE(r.ok());
  return *std::move(r.image);
}

bool has(const std::vector<std::string>& v, std::string_view needle) {
  for (const std::string& e : v)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

const char* kMiniSpec = R"(
config addrmax=255 otypemax=63
region client 10 o main.casm
region adv 100 rwx adv.casm
entry pc rx:@client:@client.end:@client
entry r29 rw:@client.flag_cell:@client.flag_cell_end:@client.flag_cell
grant r0 rwx:@adv:@adv.end:@adv
flag @client.flag_cell
)";

FileLookup mini_files() {
  return files_of({
      {"main.casm", R"(
        mov r1 7
        halt
flag_cell: .word 0
flag_cell_end:
)"},
      {"adv.casm", "jmp pc\n"},
  });
}

}  // namespace

TEST_CASE("parse_system_spec: fields land where they should") {
  SystemSpec sp = parse_ok(R"(
; comment
config addrmax=1023 otypemax=127 ec=2 hashmode=digest32
region a 0 o a.casm
region b 64 rw b.casm   ; trailing comment
grant r3 int:5
entry pc rx:0:4:0
flag 40
etbl 0 123
etbl 1 identity.a
)",
                           files_of({{"a.casm", "halt\n"}, {"b.casm", ".word 1\n"}}));
  CHECK(sp.cfg.addr_max == 1023);
  CHECK(sp.cfg.otype_max == 127);
  CHECK(sp.cfg.hash_mode == HashMode::digest32);
  CHECK(sp.ec0 == 2);
  REQUIRE(sp.regions.size() == 2);
  CHECK(sp.regions[0].name == "a");
  CHECK(sp.regions[0].base == 0);
  CHECK(sp.regions[0].exposure == MemPerm::O);
  CHECK(sp.regions[0].source == "halt\n");
  CHECK(sp.regions[1].exposure == MemPerm::RW);
  REQUIRE(sp.grants.size() == 2);
  CHECK(sp.grants[0].reg == gpr(3));
  CHECK(sp.grants[0].checked);
  CHECK_FALSE(sp.grants[1].checked);
  CHECK(sp.flag == "40");
  REQUIRE(sp.etbl.size() == 2);
  CHECK(sp.etbl[1].id == "identity.a");
}

TEST_CASE("parse_system_spec: errors") {
  auto f = files_of({{"a.casm", "halt\n"}});
  auto expect = [&](std::string_view text, std::string_view msg) {
    SpecParse p = parse_system_spec(text, f);
    CAPTURE(text);
    CAPTURE(msg);
    CHECK_FALSE(p.ok());
    CHECK(has(p.errors, msg));
  };
  expect("bogus 1 2\nregion a 0 o a.casm\nflag 0\n", "unknown directive 'bogus'");
  expect("region a 0 o missing.casm\nflag 0\n", "cannot read 'missing.casm'");
  expect("region a 0 o a.casm\nregion a 9 o a.casm\nflag 0\n",
         "duplicate region 'a'");
  expect("region 2x 0 o a.casm\nflag 0\n", "bad region name '2x'");
  expect("region a x o a.casm\nflag 0\n", "bad region base 'x'");
  expect("region a 0 q a.casm\nflag 0\n", "bad exposure permission 'q'");
  expect("region a 0 o a.casm\ngrant pc rx:0:1:0\nflag 0\n",
         "grant may not target pc");
  expect("region a 0 o a.casm\ngrant rr int:1\nflag 0\n", "bad register 'rr'");
  expect("region a 0 o a.casm\nconfig addrmax=zz\nflag 0\n", "bad config value");
  expect("region a 0 o a.casm\nconfig hashmode=md5\nflag 0\n",
         "unknown hash mode 'md5'");
  expect("region a 0 o a.casm\nconfig foo=1\nflag 0\n", "unknown config key 'foo'");
  expect("region a 0 o a.casm\nflag 0\nflag 1\n", "duplicate flag");
  expect("region a 0 o a.casm\netbl x 1\nflag 0\n", "bad table index 'x'");
  expect("flag 0\n", "spec: no regions");
  expect("region a 0 o a.casm\n", "spec: no flag cell");
}

TEST_CASE("build_system: placement, grants, flag, counters") {
  SystemImage img = build_ok(kMiniSpec, mini_files());
  CHECK(img.cfg.addr_max == 255);
  CHECK(img.ec0 == 0);
  REQUIRE(img.regions.size() == 2);
  CHECK(img.regions[0].base == 10);
  CHECK(img.regions[0].end == 13);
  CHECK(img.regions[1].base == 100);
  CHECK(img.regions[1].end == 101);
  CHECK(img.region("adv") == &img.regions[1]);
  CHECK(img.region("nope") == nullptr);
  CHECK(img.flag == 12);

  const MachineState& s = img.init;
  CHECK(s.cfg == img.cfg);
  CHECK(s.ec == 0);
  CHECK(s.status == ExecState::Running);
  CHECK(s.mem[10] == Word{Int(encode(make_instr(Opcode::mov, {gpr(1), Int(7)})))});
  CHECK(s.mem[11] == Word{Int(encode(make_instr(Opcode::halt)))});
  CHECK(s.mem[12] == Word{Int(0)});
  CHECK(s.mem[100] == Word{Int(encode(make_instr(Opcode::jmp, {kPC})))});
  CHECK(s.mem[13] == Word{Int(0)});  // untouched memory stays zero
  CHECK(s.reg[reg_index(kPC)] == Word{Cap{MemPerm::RX, 10, 13, 10}});
  CHECK(s.reg[reg_index(gpr(29))] == Word{Cap{MemPerm::RW, 12, 13, 12}});
  CHECK(s.reg[reg_index(gpr(0))] == Word{Cap{MemPerm::RWX, 100, 101, 100}});
  REQUIRE(img.grants.size() == 1);
  CHECK(img.grants[0].first == gpr(0));

  CHECK(check_wellformed(img).empty());
}

TEST_CASE("build_system: word specs cover every kind") {
  const char* spec = R"(
config addrmax=255 otypemax=63 ec=2
region client 10 o main.casm
entry pc rx:@client:@client.end:@client
entry r1 int:-42
entry r2 cap:ro:20:30:25
entry r3 srange:su:1:4:2
entry r4 sealed:3:cap:rw:10:11:10
entry r5 sealed:2:srange:u:0:4:0
entry r29 rw:@client.flag_cell:13:@client.flag_cell
flag @client.flag_cell
etbl 0 7
etbl 1 identity.client
)";
  SystemImage img = build_ok(spec, mini_files());
  const MachineState& s = img.init;
  CHECK(s.reg[reg_index(gpr(1))] == Word{Int(-42)});
  CHECK(s.reg[reg_index(gpr(2))] == Word{Cap{MemPerm::RO, 20, 30, 25}});
  CHECK(s.reg[reg_index(gpr(3))] == Word{SealRange{SealPerm::SU, 1, 4, 2}});
  CHECK(s.reg[reg_index(gpr(4))] == Word{Sealed{3, Cap{MemPerm::RW, 10, 11, 10}}});
  CHECK(s.reg[reg_index(gpr(5))] == Word{Sealed{2, SealRange{SealPerm::U, 0, 4, 0}}});
  REQUIRE(s.etbl.count(0));
  CHECK(s.etbl.at(0) == Int(7));
  REQUIRE(s.etbl.count(1));
  CHECK(s.etbl.at(1) == img.consts.at("identity.client"));
  CHECK(s.ec == 2);
}

TEST_CASE("build_system: identity constants match a fresh measurement") {
  const char* spec = R"(
config addrmax=255 otypemax=63
region client 10 o main.casm
region encl 50 o encl.casm
entry pc rx:@client:@client.end:@client
flag @client.flag_cell
)";
  auto files = files_of({
      {"main.casm", R"(
id:     .identity encl
        halt
flag_cell: .word 0
)"},
      {"encl.casm", R"(
        .word 0     ; data capability slot
        mov r1 5
        halt
        .word 99
)"},
  });
  SystemImage img = build_ok(spec, files);
  std::vector<Word> body(img.region("encl")->image.words.begin() + 1,
                         img.region("encl")->image.words.end());
  Int want = measure_identity(50, body);
  CHECK(img.consts.at("identity.encl") == want);
  CHECK(img.init.mem[10] == Word{want});
}

TEST_CASE("build_system: preid constants and the table identity algebra") {
  // One enclave shaped [data slot | body | table]; the table embeds the
  // region base and the preid of the body. Reconstructing the identity from
  // those table entries must give exactly the measured identity.
  const char* spec = R"(
config addrmax=255 otypemax=63
region client 10 o main.casm
region encl 80 o encl.casm
entry pc rx:@client:@client.end:@client
flag @client.flag_cell
)";
  auto files = files_of({
      {"main.casm", "halt\nflag_cell: .word 0\n"},
      {"encl.casm", R"(
        .word 0
body:   mov r1 5
        add r2 r1 r1
        halt
table:  .word base.encl
        .preid encl body table
)"},
  });
  SystemImage img = build_ok(spec, files);
  const LoadedRegion& encl = *img.region("encl");
  Int preid = img.consts.at("preid.encl.body.table");

  std::vector<Word> body(encl.image.words.begin() + 1,
                         encl.image.words.begin() + 4);
  CHECK(preid == int_of_hash(region_hash(body)));

  // identity == base atom + preid bytes + table atoms (split distributivity)
  std::vector<Word> table(encl.image.words.begin() + 4, encl.image.words.end());
  Bytes acc = hash_word(Int(encl.base));
  acc = hash_concat(std::move(acc), *bytes_of_hash_int(preid));
  acc = hash_concat(std::move(acc), region_hash(table));
  std::vector<Word> measured(encl.image.words.begin() + 1, encl.image.words.end());
  CHECK(int_of_hash(acc) == measure_identity(encl.base, measured));

  // the table's own words were patched in place
  CHECK(img.init.mem[encl.base + 4] == Word{Int(80)});
  CHECK(img.init.mem[encl.base + 5] == Word{preid});
}

TEST_CASE("build_system: identity over a range containing a preid resolves") {
  // The enclave's measured range includes its table, which includes a preid
  // word; the fixpoint must settle preids before identities.
  const char* spec = R"(
config addrmax=255 otypemax=63
region client 10 o main.casm
region encl 80 o encl.casm
entry pc rx:@client:@client.end:@client
flag @client.flag_cell
)";
  auto files = files_of({
      {"main.casm", ".identity encl\nhalt\nflag_cell: .word 0\n"},
      {"encl.casm", R"(
        .word 0
body:   halt
table:  .preid encl body table
)"},
  });
  SystemImage img = build_ok(spec, files);
  const LoadedRegion& encl = *img.region("encl");
  std::vector<Word> measured(encl.image.words.begin() + 1, encl.image.words.end());
  CHECK(img.consts.at("identity.encl") == measure_identity(encl.base, measured));
  CHECK(img.init.mem[10] == Word{img.consts.at("identity.encl")});
}

TEST_CASE("build_system: constant resolution errors") {
  auto build_errs = [](const char* main_src) {
    const char* spec = R"(
config addrmax=255 otypemax=63
region client 10 o main.casm
region other 80 o other.casm
entry pc rx:@client:@client.end:@client
flag @client.flag_cell
)";
    auto files = files_of({
        {"main.casm", std::string(main_src) + "\nhalt\nflag_cell: .word 0\n"},
        {"other.casm", "y: halt\nx: .identity client\n"},
    });
    SpecParse p = parse_system_spec(spec, files);
    REQUIRE(p.ok());
    return build_system(*p.spec).errors;
  };
  CHECK(has(build_errs(".word mystery.const"), "unresolved constant 'mystery.const'"));
  CHECK(has(build_errs(".identity nowhere"), "unknown unit in constant"));
  CHECK(has(build_errs(".preid other x y"), "bad label range in constant"));
  // each unit's measured range contains the other's identity word
  CHECK(has(build_errs("halt\n.identity other"), "circular constant"));
}

TEST_CASE("build_system: spec-level resolution errors") {
  auto f = mini_files();
  auto expect = [&](const char* line, std::string_view msg) {
    std::string text = std::string(R"(
config addrmax=255 otypemax=63
region client 10 o main.casm
region adv 100 rwx adv.casm
entry pc rx:@client:@client.end:@client
flag @client.flag_cell
)") + line + "\n";
    SpecParse p = parse_system_spec(text, f);
    REQUIRE(p.ok());
    LoadResult r = build_system(*p.spec);
    CAPTURE(line);
    CHECK_FALSE(r.ok());
    CHECK(has(r.errors, msg));
  };
  expect("grant r0 rx:@ghost:@ghost.end:@ghost", "unknown region 'ghost'");
  expect("grant r0 rx:@adv.zz:200:100", "no symbol 'zz'");
  expect("grant r0 cap:zz:0:1:0", "bad permission 'zz'");
  expect("grant r0 rx:5:1:0", "capability base above end");
  expect("grant r0 rx:0:999:0", "field '999' out of range");
  expect("grant r0 int:x", "int expects one decimal");
  expect("grant r0 srange:su:0:999:0", "field '999' out of range");
  expect("grant r0 sealed:1:box:rw:0:1:0", "sealed expects");
  expect("grant r0 wat", "unknown word spec 'wat'");
  expect("grant r1 int:1\ngrant r1 int:2", "register r1 granted twice");
  expect("etbl 0 identity.ghost", "unknown unit in constant 'identity.ghost'");
  expect("etbl 9 1\netbl 9 2", "duplicate table index 9");
}

TEST_CASE("build_system: oversized layouts are rejected") {
  auto f = mini_files();
  SpecParse p = parse_system_spec(
      "config addrmax=15 otypemax=63\nregion client 14 o main.casm\n"
      "entry pc rx:@client:@client.end:@client\nflag @client.flag_cell\n",
      f);
  REQUIRE(p.ok());
  LoadResult r = build_system(*p.spec);
  CHECK(has(r.errors, "does not fit in memory"));

  SpecParse p2 = parse_system_spec(
      "config addrmax=99999999\nregion client 10 o main.casm\n"
      "entry pc rx:@client:@client.end:@client\nflag @client.flag_cell\n",
      f);
  REQUIRE(p2.ok());
  CHECK(has(build_system(*p2.spec).errors, "addrmax too large"));
}

TEST_CASE("build_system is deterministic") {
  SystemImage a = build_ok(kMiniSpec, mini_files());
  SystemImage b = build_ok(kMiniSpec, mini_files());
  CHECK(a.init == b.init);
  CHECK(a.consts == b.consts);
  CHECK(a.flag == b.flag);
  CHECK(a.regions.size() == b.regions.size());
}

TEST_CASE("check_wellformed flags structural defects") {
  auto f = mini_files();
  auto violations = [&](const std::string& text) {
    SpecParse p = parse_system_spec(text, f);
    REQUIRE(p.ok());
    LoadResult r = build_system(*p.spec);
    for (const std::string& e : r.errors) CAPTURE(e);
    REQUIRE(r.ok());
    return check_wellformed(*r.image);
  };
  const std::string base_cfg = "config addrmax=255 otypemax=63\n";
  const std::string client =
      "region client 10 o main.casm\n"
      "entry pc rx:@client:@client.end:@client\n";
  const std::string flag = "flag @client.flag_cell\n";

  SUBCASE("clean") {
    CHECK(violations(base_cfg + client + "region adv 100 rwx adv.casm\n" +
                     "grant r0 rwx:@adv:@adv.end:@adv\n" + flag)
              .empty());
  }
  SUBCASE("overlapping regions") {
    CHECK(has(violations(base_cfg + client + "region adv 11 rwx adv.casm\n" + flag),
              "overlap"));
  }
  SUBCASE("flag outside every region") {
    CHECK(has(violations(base_cfg + client + "flag 200\n"),
              "flag cell outside every region"));
  }
  SUBCASE("flag in exposed region") {
    CHECK(has(violations(base_cfg +
                         "region client 10 rw main.casm\n"
                         "entry pc rx:@client:@client.end:@client\n" +
                         flag),
              "flag cell lies in exposed region"));
  }
  SUBCASE("grant exceeding exposure") {
    CHECK(has(violations(base_cfg + client + "region adv 100 ro adv.casm\n" +
                         "grant r0 rwx:@adv:@adv.end:@adv\n" + flag),
              "permission exceeds exposure"));
  }
  SUBCASE("grant spanning two regions") {
    CHECK(has(violations(base_cfg + client + "region adv 13 rwx adv.casm\n" +
                         "grant r0 rwx:10:14:10\n" + flag),
              "spans no single region"));
  }
  SUBCASE("grant covering the flag cell") {
    CHECK(has(violations(base_cfg +
                         "region client 10 rwx main.casm\n"
                         "entry pc rx:@client:@client.end:@client\n"
                         "grant r0 rwx:@client:@client.end:@client\n" + flag),
              "covers the flag cell"));
  }
  SUBCASE("sealed grant is checked like its payload") {
    CHECK(has(violations(base_cfg + client + "region adv 100 ro adv.casm\n" +
                         "config ec=4\n" +
                         "grant r0 sealed:1:cap:rwx:100:101:100\n" + flag),
              "permission exceeds exposure"));
  }
  SUBCASE("seal authority beyond the table horizon") {
    CHECK(has(violations(base_cfg + client + "grant r0 srange:su:0:2:0\n" + flag),
              "seal range reaches unallocated otypes"));
  }
  SUBCASE("sealed word under unallocated otype") {
    CHECK(has(violations(base_cfg + client +
                         "grant r0 sealed:0:cap:o:0:0:0\n" + flag),
              "sealed word under unallocated otype"));
  }
  SUBCASE("table entry at or above the counter") {
    CHECK(has(violations(base_cfg + client + "etbl 0 5\n" + flag),
              "table entry 0 at or above the initial counter"));
  }
  SUBCASE("initial counter exceeding otype space") {
    CHECK(has(violations("config addrmax=255 otypemax=63 ec=33\n" + client +
                         "etbl 0 1\n" + flag),
              "initial counter exceeds the otype space"));
  }
  SUBCASE("missing entry capability") {
    CHECK(has(violations(base_cfg + "region client 10 o main.casm\n" + flag),
              "entry capability is not runnable"));
  }
}
