// Operational semantics: machine state, single-step execution, the memory
// sweep, attestation primitives, and the textual snapshot format.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cerisier/hash.hpp"
#include "cerisier/isa.hpp"

namespace cerisier {

enum class ExecState : std::uint8_t { Running, Halted, Failed };
std::string_view exec_state_name(ExecState st);
std::optional<ExecState> exec_state_of_name(std::string_view s);

// Deliberate semantics defects, used by the harness to prove the monitors
// and the fuzz campaign can catch a broken machine.
enum class Fault : std::uint8_t {
  none,
  einit_skip_data_sweep,  // einit does not sweep the data capability
  einit_skip_int_check,   // einit accepts capabilities inside the code region
  restrict_widen,         // restrict drops the lattice check
  table_slot_reuse,       // einit reallocates freed table slots and otypes
};

struct MachineConfig {
  std::uint64_t addr_max = kDefaultAddrMax;
  std::uint64_t otype_max = kDefaultOTypeMax;
  HashMode hash_mode = HashMode::exact;
  Fault fault = Fault::none;
  bool operator==(const MachineConfig&) const = default;
};

struct MachineState {
  MachineConfig cfg;
  std::array<Word, kNumRegs> reg{};  // [0]=pc, [1..32]=r0..r31; default Int(0)
  std::vector<Word> mem;             // total over [0, addr_max]
  std::map<std::uint64_t, Int> etbl;
  std::uint64_t ec = 0;
  ExecState status = ExecState::Running;

  MachineState() : MachineState(MachineConfig{}) {}
  explicit MachineState(MachineConfig c) : cfg(c), mem(c.addr_max + 1) {}

  bool operator==(const MachineState&) const = default;
};

// Locations written during one step; consumed by the harness monitors.
struct WriteLog {
  std::vector<std::uint8_t> regs;
  std::vector<Addr> mems;
  void clear() {
    regs.clear();
    mems.clear();
  }
};

// Operand evaluation: immediates pass through, register names read the file.
Word get_word(const MachineState& s, const Operand& arg);

// Interval overlap: true iff both words are capabilities (bare or sealed)
// with intersecting [b, e) ranges.
bool overlap(const Word& w1, const Word& w2);

// True iff no register other than rs (pc included) and no memory cell holds
// a word overlapping reg(rs). OpenMP-parallel over memory for large spaces;
// harness::sweep_reference is the serial oracle.
bool sweep(const MachineState& s, Reg rs);

std::uint64_t tidx_of_ot(std::uint64_t o);

// What ExecSingle would execute next: the decoded instruction, or nullopt if
// the fetch faults (pc not an executable in-bounds capability, or the cell
// does not hold an integer).
std::optional<Instr> fetch(const MachineState& s);

// One ExecSingle application. Identity on non-Running states.
MachineState step(const MachineState& s, WriteLog* log = nullptr);

// In-place step for run loops; equivalent to s = step(s, log).
void step_inplace(MachineState& s, WriteLog* log = nullptr);

struct RunResult {
  MachineState state;
  std::uint64_t steps = 0;
};

// Iterates step until the status leaves Running or fuel runs out. Uses a
// per-address decode cache keyed on the raw cell value.
RunResult run(MachineState s, std::uint64_t fuel);

// Fetch-decode-execute engine with the decode cache exposed, for callers
// that need to observe every step (tracing, monitors).
class Runner {
 public:
  explicit Runner(MachineState s);
  const MachineState& state() const { return s_; }
  MachineState& state() { return s_; }
  // One step; returns false once the machine is no longer Running.
  bool step(WriteLog* log = nullptr);

 private:
  struct Entry {
    Int raw;  // defaults to 0, whose decode is `fail`, a correct cache seed
    Instr ins;
  };
  MachineState s_;
  std::vector<Entry> cache_;
};

// Textual word syntax: int:<decimal>, cap:<perm>:<b>:<e>:<a>,
// srange:<sperm>:<ob>:<oe>:<oa>, sealed:<o>:<sealable>.
std::string word_to_string(const Word& w);
std::optional<Word> word_of_string(std::string_view s);

// Deterministic state snapshot; parse is the exact inverse (used in tests).
std::string snapshot(const MachineState& s);
std::optional<MachineState> snapshot_parse(std::string_view text);

}  // namespace cerisier
