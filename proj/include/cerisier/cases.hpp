// Case study registry: the shipped trusted-computing systems (secret output,
// mutual attestation, exclusive sensor access), their expected outcomes, and
// helpers to load, run, check, and trace them.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cerisier/harness.hpp"
#include "cerisier/loader.hpp"

namespace cerisier {

// Directories baked in at configure time; the environment variables
// CERISIER_CASES_DIR and CERISIER_GOLDEN_DIR override them.
std::string cases_dir();
std::string golden_dir();

struct CaseStudy {
  std::string name;
  std::string spec_file;  // under cases_dir()
  ExecState outcome = ExecState::Halted;
  int flag = 0;                   // flag cell after the intended run
  std::optional<long> result;     // Int expected in r2 at the end, if any
  std::size_t table_entries = 0;  // enclave table population at the end
};

const std::vector<CaseStudy>& case_registry();
const CaseStudy* find_case(const std::string& name);

// Parse + assemble + load + wellformedness check. Throws std::runtime_error
// with the collected messages when the spec does not build cleanly.
SystemImage load_case(const CaseStudy& c);

struct CaseRun {
  RunReport report;
  MachineState final_state;
  std::vector<std::string> problems;  // unmet expectations; empty means pass
};

// Runs the case with its shipped adversary under full instrumentation and
// checks the registry expectations plus case-specific postconditions (table
// identities, confirmation cells, the sensor reading).
CaseRun run_case(const CaseStudy& c, std::uint64_t fuel = 50000);

RunReport run_soc();
RunReport run_mutual();
RunReport run_sensor();

// Stored reference trace for a case, if one has been recorded.
std::optional<std::string> golden_trace(const CaseStudy& c);
// Trace text of the intended run (same format as the stored references).
std::string trace_case(const CaseStudy& c, std::uint64_t fuel = 50000);

}  // namespace cerisier
