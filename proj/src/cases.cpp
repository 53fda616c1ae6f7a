#include "cerisier/cases.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cerisier {

namespace {

std::string env_or(const char* var, const char* fallback) {
  if (const char* v = std::getenv(var); v && *v) return v;
  return fallback;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    if (!out.empty()) out += "; ";
    out += l;
  }
  return out;
}

// Expect an exact Int at a memory cell or table slot.
void want_int(std::vector<std::string>& problems, const std::string& what,
              const Word& got, const Int& expect) {
  if (const Int* v = std::get_if<Int>(&got); v && *v == expect) return;
  problems.push_back(what + " is " + word_to_string(got) + ", expected " +
                     word_to_string(Word{expect}));
}

// Identity a launch of the whole region should record: its base and every
// word after the launch slot, measured independently of machine and loader.
Int measured_region_identity(const SystemImage& img, std::string_view name) {
  const LoadedRegion* r = img.region(name);
  if (!r) throw std::runtime_error("case image lacks region " + std::string(name));
  std::vector<Word> body(r->image.words.begin() + 1, r->image.words.end());
  return measure_identity(r->base, body, img.cfg.hash_mode);
}

void check_table_identity(std::vector<std::string>& problems,
                          const SystemImage& img, const MachineState& fin,
                          std::uint64_t tidx, std::string_view region) {
  auto it = fin.etbl.find(tidx);
  if (it == fin.etbl.end()) {
    problems.push_back("table slot " + std::to_string(tidx) + " is empty");
    return;
  }
  if (it->second != measured_region_identity(img, region))
    problems.push_back("table slot " + std::to_string(tidx) +
                       " does not hold the measured identity of " +
                       std::string(region));
}

Addr region_base(const SystemImage& img, std::string_view name) {
  const LoadedRegion* r = img.region(name);
  if (!r) throw std::runtime_error("case image lacks region " + std::string(name));
  return r->base;
}

}  // namespace

std::string cases_dir() {
  return env_or("CERISIER_CASES_DIR", CERISIER_CASES_DIR);
}

std::string golden_dir() {
  return env_or("CERISIER_GOLDEN_DIR", CERISIER_GOLDEN_DIR);
}

const std::vector<CaseStudy>& case_registry() {
  static const std::vector<CaseStudy> cases = {
      {"soc", "soc.spec", ExecState::Halted, 0, 42, 1},
      {"soc-selfmade", "soc_selfmade.spec", ExecState::Failed, 0, std::nullopt, 1},
      {"soc-noeinit", "soc_noeinit.spec", ExecState::Failed, 0, std::nullopt, 0},
      {"soc-broken-client", "soc_broken_client.spec", ExecState::Halted, 1,
       std::nullopt, 1},
      {"mutual", "mutual.spec", ExecState::Halted, 0, 43, 2},
      {"mutual-tampered", "mutual_tampered.spec", ExecState::Failed, 0,
       std::nullopt, 2},
      {"sensor", "sensor.spec", ExecState::Halted, 0, 42, 2},
      {"sensor-aliased", "sensor_aliased.spec", ExecState::Failed, 0,
       std::nullopt, 1},
      {"sensor-fake-reader", "sensor_fake_reader.spec", ExecState::Failed, 0,
       std::nullopt, 2},
  };
  return cases;
}

const CaseStudy* find_case(const std::string& name) {
  for (const auto& c : case_registry())
    if (c.name == name) return &c;
  return nullptr;
}

SystemImage load_case(const CaseStudy& c) {
  const std::string path = cases_dir() + "/" + c.spec_file;
  SpecParse parse = load_system_spec(path);
  if (!parse.ok()) throw std::runtime_error(path + ": " + join(parse.errors));
  LoadResult built = build_system(*parse.spec);
  if (!built.ok()) throw std::runtime_error(path + ": " + join(built.errors));
  if (auto issues = check_wellformed(*built.image); !issues.empty())
    throw std::runtime_error(path + ": " + join(issues));
  return std::move(*built.image);
}

CaseRun run_case(const CaseStudy& c, std::uint64_t fuel) {
  const SystemImage img = load_case(c);

  RunOptions opt;
  opt.fuel = fuel;
  opt.instrumented = true;
  CaseRun out{run_system(img, opt), run(img.init, fuel).state, {}};

  auto& p = out.problems;
  const RunReport& rep = out.report;
  const MachineState& fin = out.final_state;

  if (rep.outcome != c.outcome)
    p.push_back(std::string("outcome ") + std::string(outcome_name(rep.outcome)) +
                ", expected " + std::string(outcome_name(c.outcome)));
  if (rep.assert_flag != c.flag)
    p.push_back("flag " + std::to_string(rep.assert_flag) + ", expected " +
                std::to_string(c.flag));
  for (const auto& v : rep.violations) p.push_back("monitor: " + v);
  if (c.result)
    want_int(p, "r2", fin.reg[reg_index(gpr(2))], Int(*c.result));
  if (fin.etbl.size() != c.table_entries)
    p.push_back("table has " + std::to_string(fin.etbl.size()) +
                " entries, expected " + std::to_string(c.table_entries));

  if (c.name == "soc") {
    check_table_identity(p, img, fin, 0, "enclave");
  } else if (c.name == "mutual") {
    check_table_identity(p, img, fin, 0, "encla");
    check_table_identity(p, img, fin, 1, "enclb");
    want_int(p, "a's confirmation cell",
             fin.mem[region_base(img, "adata") + 1], Int(43));
    want_int(p, "b's confirmation cell",
             fin.mem[region_base(img, "bdata") + 1], Int(42));
  } else if (c.name == "sensor") {
    check_table_identity(p, img, fin, 0, "reader");
    check_table_identity(p, img, fin, 1, "transformer");
    want_int(p, "sensor cell", fin.mem[region_base(img, "sensor")], Int(21));
  }
  return out;
}

RunReport run_soc() { return run_case(*find_case("soc")).report; }
RunReport run_mutual() { return run_case(*find_case("mutual")).report; }
RunReport run_sensor() { return run_case(*find_case("sensor")).report; }

std::optional<std::string> golden_trace(const CaseStudy& c) {
  std::ifstream in(golden_dir() + "/" + c.name + ".trace", std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::string trace_case(const CaseStudy& c, std::uint64_t fuel) {
  return trace_run(load_case(c).init, fuel).text;
}

}  // namespace cerisier
