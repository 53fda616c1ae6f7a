// cerisier: assemble, run, trace, fuzz, and check capability-machine systems.
//
// Exit codes: 0 success (Halted with flag 0, or expectations met);
// 1 machine Failed unexpectedly; 2 fuel exhausted where completion was
// expected; 3 assert failure or invariant violation; 4 usage or parse error.
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cerisier/assembler.hpp"
#include "cerisier/cases.hpp"
#include "cerisier/harness.hpp"
#include "cerisier/loader.hpp"
#include "cerisier/machine.hpp"

namespace {

using namespace cerisier;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kFuel = 2;
constexpr int kAssert = 3;
constexpr int kUsage = 4;

struct Output {
  bool ci = false;
  bool tsv = false;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  // Wall-clock footer: the one permitted nondeterminism, silenced by --ci.
  void footer() const {
    if (ci) return;
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
    std::cout << "# time " << ms << " ms\n";
  }
};

int diag(const std::vector<std::string>& messages) {
  for (const auto& m : messages) std::cerr << m << "\n";
  return kUsage;
}

// CERISIER_CONFIG: optional file of addrmax=/otypemax=/hashmode= lines that
// overrides the machine configuration a spec asks for.
int apply_config_env(SystemSpec& spec) {
  const char* path = std::getenv("CERISIER_CONFIG");
  if (!path || !*path) return kOk;
  std::ifstream in(path);
  if (!in) return diag({std::string("CERISIER_CONFIG: cannot open ") + path});
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find(';'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string item;
    if (!(ls >> item)) continue;
    auto where = [&] {
      return std::string(path) + ":" + std::to_string(lineno) + ": ";
    };
    auto eq = item.find('=');
    if (eq == std::string::npos)
      return diag({where() + "expected key=value, got '" + item + "'"});
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    try {
      if (key == "addrmax") {
        spec.cfg.addr_max = std::stoull(val);
      } else if (key == "otypemax") {
        spec.cfg.otype_max = std::stoull(val);
      } else if (key == "hashmode") {
        if (val == "exact")
          spec.cfg.hash_mode = HashMode::exact;
        else if (val == "digest32")
          spec.cfg.hash_mode = HashMode::digest32;
        else
          return diag({where() + "unknown hash mode '" + val + "'"});
      } else {
        return diag({where() + "unknown key '" + key + "'"});
      }
    } catch (const std::exception&) {
      return diag({where() + "bad value '" + val + "'"});
    }
  }
  return kOk;
}

// Parse, override, build, and wellformedness-check one spec file.
// On failure prints diagnostics and returns nonzero.
int build_image(const std::string& path, std::optional<SystemImage>& out) {
  SpecParse parse = load_system_spec(path);
  if (!parse.ok()) return diag(parse.errors);
  if (int rc = apply_config_env(*parse.spec); rc != kOk) return rc;
  LoadResult built = build_system(*parse.spec);
  if (!built.ok()) return diag(built.errors);
  if (auto issues = check_wellformed(*built.image); !issues.empty())
    return diag(issues);
  out = std::move(*built.image);
  return kOk;
}

int report_exit(const RunReport& rep) {
  if (rep.assert_flag != 0 || !rep.violations.empty()) return kAssert;
  if (rep.outcome == ExecState::Failed) return kFailed;
  if (rep.outcome == ExecState::Running) return kFuel;
  return kOk;
}

std::string report_tsv_header() { return "seed\toutcome\tsteps\tflag\tviolations\n"; }

std::string report_tsv_row(const RunReport& r) {
  std::ostringstream os;
  os << r.seed << '\t' << outcome_name(r.outcome) << '\t' << r.steps << '\t'
     << r.assert_flag << '\t' << r.violations.size() << '\n';
  return os.str();
}

int write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) return diag({"cannot write " + path});
  return kOk;
}

int cmd_asm(const std::string& file, Addr base, const std::string& out_path,
            Output& out) {
  std::ifstream in(file);
  if (!in) return diag({"cannot open " + file});
  std::ostringstream src;
  src << in.rdbuf();
  AsmResult ar = assemble(src.str(), base, {});
  if (!ar.ok()) return diag(ar.errors);
  if (!ar.pending.empty()) {
    std::vector<std::string> msgs;
    for (const auto& p : ar.pending)
      msgs.push_back("word " + std::to_string(base + p.offset) +
                     " needs the loader constant " + p.key);
    return diag(msgs);
  }
  std::ostringstream os;
  os << "image base=" << ar.image.base << " words=" << ar.image.words.size()
     << "\n";
  for (std::size_t i = 0; i < ar.image.words.size(); ++i)
    os << "word " << ar.image.base + i << " "
       << word_to_string(ar.image.words[i]) << "\n";
  for (const auto& [label, addr] : ar.image.symbols)
    os << "symbol " << label << " " << addr << "\n";
  if (!out_path.empty()) {
    if (int rc = write_file(out_path, os.str()); rc != kOk) return rc;
  } else {
    std::cout << os.str();
  }
  out.footer();
  return kOk;
}

int cmd_run(const std::string& spec, std::uint64_t fuel, bool monitors,
            const std::string& snapshot_path, Output& out) {
  std::optional<SystemImage> img;
  if (int rc = build_image(spec, img); rc != kOk) return rc;
  RunOptions opt;
  opt.fuel = fuel;
  opt.monitors = monitors;
  RunReport rep = run_system(*img, opt);
  if (out.tsv)
    std::cout << report_tsv_header() << report_tsv_row(rep);
  else
    std::cout << report_line(rep) << "\n";
  if (!snapshot_path.empty()) {
    MachineState fin = run(img->init, fuel).state;
    if (int rc = write_file(snapshot_path, snapshot(fin)); rc != kOk) return rc;
  }
  out.footer();
  return report_exit(rep);
}

int cmd_trace(const std::string& spec, std::uint64_t fuel,
              const std::string& out_path, Output& out) {
  std::optional<SystemImage> img;
  if (int rc = build_image(spec, img); rc != kOk) return rc;
  TraceResult tr = trace_run(img->init, fuel);
  RunOptions opt;
  opt.fuel = fuel;
  RunReport rep = run_system(*img, opt);
  if (!out_path.empty()) {
    if (int rc = write_file(out_path, tr.text); rc != kOk) return rc;
  } else {
    std::cout << tr.text;
  }
  if (out.tsv)
    std::cout << report_tsv_header() << report_tsv_row(rep);
  else
    std::cout << report_line(rep) << "\n";
  out.footer();
  return report_exit(rep);
}

int cmd_fuzz(const std::string& spec, std::uint64_t runs, std::uint64_t fuel,
             std::uint64_t seed0, bool monitors, Output& out) {
  std::optional<SystemImage> img;
  if (int rc = build_image(spec, img); rc != kOk) return rc;
  CampaignOptions opt;
  opt.runs = runs;
  opt.seed0 = seed0;
  opt.run.fuel = fuel;
  opt.run.monitors = monitors;
  CampaignResult res = fuzz_campaign(*img, opt);
  if (out.tsv) {
    std::cout << report_tsv_header();
    for (const auto& r : res.reports) std::cout << report_tsv_row(r);
    std::cout << "SUMMARY\t" << res.reports.size() << '\t' << res.failures
              << '\n';
  } else {
    std::cout << campaign_report(res);
  }
  out.footer();
  return res.failures == 0 ? kOk : kAssert;
}

int cmd_case(const std::string& name, std::uint64_t fuel, Output& out) {
  const CaseStudy* c = find_case(name);
  if (!c) {
    std::string known = "unknown case '" + name + "'; available:";
    for (const auto& k : case_registry()) known += " " + k.name;
    return diag({known});
  }
  CaseRun r;
  try {
    r = run_case(*c, fuel);
  } catch (const std::exception& e) {
    return diag({e.what()});
  }
  std::string result = "-";
  if (const Int* v = std::get_if<Int>(&r.final_state.reg[reg_index(gpr(2))]))
    result = v->str();
  if (out.tsv)
    std::cout << "result\tflag\n" << result << '\t' << r.report.assert_flag
              << '\n';
  else
    std::cout << "result=" << result << " flag=" << r.report.assert_flag
              << "\n";
  for (const auto& p : r.problems) std::cerr << "problem: " << p << "\n";
  out.footer();
  if (r.problems.empty()) return kOk;
  if (r.report.assert_flag != c->flag || !r.report.violations.empty())
    return kAssert;
  if (r.report.outcome == ExecState::Running) return kFuel;
  return kFailed;
}

int cmd_check(const std::string& spec, Output& out) {
  SpecParse parse = load_system_spec(spec);
  if (!parse.ok()) {
    for (const auto& e : parse.errors) std::cout << e << "\n";
    return kUsage;
  }
  if (int rc = apply_config_env(*parse.spec); rc != kOk) return rc;
  LoadResult built = build_system(*parse.spec);
  if (!built.ok()) {
    for (const auto& e : built.errors) std::cout << e << "\n";
    return kUsage;
  }
  auto issues = check_wellformed(*built.image);
  if (!issues.empty()) {
    for (const auto& e : issues) std::cout << e << "\n";
    return kUsage;
  }
  std::cout << "ok regions=" << built.image->regions.size()
            << " grants=" << built.image->grants.size()
            << " flag=" << built.image->flag << "\n";
  out.footer();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cerisier capability machine toolchain"};
  app.require_subcommand(1);

  Output out;
  std::string format = "plain";
  app.add_flag("--ci", out.ci, "suppress the timing footer");
  app.add_option("--format", format, "output format: plain or tsv")
      ->check(CLI::IsMember({"plain", "tsv"}));

  std::string asm_file, asm_out;
  Addr asm_base = 0;
  auto* c_asm = app.add_subcommand("asm", "assemble one unit to a word image");
  c_asm->add_option("file", asm_file, "assembly source")->required();
  c_asm->add_option("--base", asm_base, "load address of the image");
  c_asm->add_option("-o,--output", asm_out, "write the image here");

  std::string run_spec, run_snapshot;
  std::uint64_t run_fuel = 50000;
  bool run_monitors = true;
  auto* c_run = app.add_subcommand("run", "build a system spec and run it");
  c_run->add_option("spec", run_spec, "system spec file")->required();
  c_run->add_option("--fuel", run_fuel, "step budget");
  c_run->add_flag("--monitors,!--no-monitors", run_monitors,
                  "step monitors (default on)");
  c_run->add_option("--snapshot", run_snapshot, "write the final state here");

  std::string trace_spec, trace_out;
  std::uint64_t trace_fuel = 50000;
  auto* c_trace =
      app.add_subcommand("trace", "run a system spec with a per-step trace");
  c_trace->add_option("spec", trace_spec, "system spec file")->required();
  c_trace->add_option("--fuel", trace_fuel, "step budget");
  c_trace->add_option("-o,--output", trace_out,
                      "write the trace here instead of stdout");

  std::string fuzz_spec;
  std::uint64_t fuzz_runs = 1000, fuzz_fuel = 50000, fuzz_seed = 0;
  bool fuzz_monitors = true;
  auto* c_fuzz =
      app.add_subcommand("fuzz", "run a campaign of generated adversaries");
  c_fuzz->add_option("spec", fuzz_spec, "system spec file")->required();
  c_fuzz->add_option("--runs", fuzz_runs, "number of adversaries");
  c_fuzz->add_option("--fuel", fuzz_fuel, "step budget per run");
  c_fuzz->add_option("--seed", fuzz_seed, "first seed");
  c_fuzz->add_flag("--monitors,!--no-monitors", fuzz_monitors,
                   "step monitors (default on)");

  std::string case_name;
  std::uint64_t case_fuel = 50000;
  auto* c_case =
      app.add_subcommand("case", "run a shipped case study and check it");
  c_case->add_option("name", case_name, "case name, e.g. soc")->required();
  c_case->add_option("--fuel", case_fuel, "step budget");

  std::string check_spec;
  auto* c_check =
      app.add_subcommand("check", "well-formedness check of a system spec");
  c_check->add_option("spec", check_spec, "system spec file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  out.tsv = format == "tsv";

  try {
    if (c_asm->parsed()) return cmd_asm(asm_file, asm_base, asm_out, out);
    if (c_run->parsed())
      return cmd_run(run_spec, run_fuel, run_monitors, run_snapshot, out);
    if (c_trace->parsed()) return cmd_trace(trace_spec, trace_fuel, trace_out, out);
    if (c_fuzz->parsed())
      return cmd_fuzz(fuzz_spec, fuzz_runs, fuzz_fuel, fuzz_seed, fuzz_monitors,
                      out);
    if (c_case->parsed()) return cmd_case(case_name, case_fuel, out);
    if (c_check->parsed()) return cmd_check(check_spec, out);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
