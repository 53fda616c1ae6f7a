// Adversarial test harness: reference sweep, runtime monitors, adversary
// program generation, single runs, and the fuzz campaign driver.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cerisier/loader.hpp"
#include "cerisier/machine.hpp"

namespace cerisier {

// Serial, clause-by-clause transcription of the exclusivity sweep; the
// differential oracle for the parallel sweep in the machine.
bool sweep_reference(const MachineState& s, Reg rs);

// A state with randomized registers and memory (capabilities, seal ranges,
// sealed words, integers) over a small address space, for differential and
// monitor tests.
MachineState random_small_state(std::uint64_t seed);

// Full-state step validation for hand-crafted or spot-checked transitions:
// the enclave counter never decreases, the table allocates fresh slots below
// the counter, no reachable seal range or sealed word refers to otypes at or
// beyond 2*ec, and (with provenance on) every capability or seal range in
// the post state is justified by the pre state: equal to a pre word, a
// field-shrunk or cursor-moved version of one, an executable upgrade of a
// sentry, or the exact words an enclave launch mints.
std::vector<std::string> monitor_step(const MachineState& pre,
                                      const MachineState& post,
                                      bool provenance = true);

// Incremental monitor for long runs: consumes the write log of each step and
// only inspects changed locations, plus a full revalidation of every enclave
// launch (pre-body integer check, table identity recomputation, post-state
// exclusivity of the minted code and data capabilities).
class StepMonitor {
 public:
  struct Options {
    bool einit_revalidate = true;
    bool provenance = false;  // keeps a pre-state copy per step; small states
  };
  explicit StepMonitor(const MachineState& init) : StepMonitor(init, Options{}) {}
  StepMonitor(const MachineState& init, Options opt);
  void pre_step(const MachineState& s);
  void post_step(const MachineState& s, const WriteLog& log);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  Options opt_;
  std::vector<std::string> violations_;
  std::set<std::uint64_t> table_keys_;       // mirror of the live table domain
  std::set<std::uint64_t> table_ever_used_;  // bump-allocator discipline
  std::uint64_t prev_ec_ = 0;
  std::uint64_t step_no_ = 0;
  bool einit_armed_ = false;
  Addr pe_b_ = 0, pe_e_ = 0;
  std::vector<Word> pre_body_;
  std::optional<MachineState> pre_copy_;  // provenance mode only
};

enum class GenMode : std::uint8_t { pure, mutate, grammar };
std::string_view gen_mode_name(GenMode m);

// Campaign mixing policy: pure and mutate one part each, grammar two.
GenMode gen_mode_for_seed(std::uint64_t seed);

// Deterministic adversary program of exactly `length` words for the system's
// `adv` region. pure: random instructions biased toward held registers and
// boundary immediates (0, 2*ec, the otype maximum, region bounds). mutate:
// the shipped adversary with a few point mutations. grammar: attack-shaped
// sequences that duplicate held capabilities, launch an enclave from the
// scratch region, play with seals and table instructions, and re-enter the
// client through its return sentry.
std::vector<Word> gen_adversary(const SystemImage& img, std::uint64_t seed,
                                std::size_t length, GenMode mode);

// Copy of the initial state with `adv` spliced over the adversary region
// (zero-padded to the region size).
MachineState splice_adversary(const SystemImage& img,
                              const std::vector<Word>& adv);

struct RunReport {
  std::uint64_t seed = 0;
  ExecState outcome = ExecState::Running;  // Running means fuel exhausted
  std::uint64_t steps = 0;
  int assert_flag = 0;
  std::vector<std::string> violations;
};

std::string_view outcome_name(ExecState st);
std::string report_line(const RunReport& r);

struct RunOptions {
  std::uint64_t fuel = 50000;
  bool monitors = true;
  bool instrumented = false;  // adds the provenance monitor
};

// One fuzz iteration: generate, splice, run, read the assert flag.
RunReport run_one(const SystemImage& img, std::uint64_t seed,
                  const RunOptions& opt);

// Run of the unmodified system (no adversary splice), with monitors.
RunReport run_system(const SystemImage& img, const RunOptions& opt);

struct CampaignOptions {
  std::uint64_t runs = 1000;
  std::uint64_t seed0 = 0;
  RunOptions run;
};

struct CampaignResult {
  std::vector<RunReport> reports;  // indexed by seed - seed0
  std::uint64_t failures = 0;      // runs with a raised flag or violations
};

// OpenMP-parallel over seeds; the result is independent of thread count.
CampaignResult fuzz_campaign(const SystemImage& img, const CampaignOptions& opt);

// One line per run plus a SUMMARY line; byte-identical across repeats.
std::string campaign_report(const CampaignResult& res);

struct TraceResult {
  std::string text;  // step=<n> pc=<word> instr=<disassembly> status=<s>
  MachineState final;
  std::uint64_t steps = 0;
};

TraceResult trace_run(MachineState s, std::uint64_t fuel);

}  // namespace cerisier
