// System loader: turns a textual system spec (regions of assembled code and
// data, register grants, the assert flag cell, table preinstalls) into an
// initial machine state plus layout metadata, and validates the result.
//
// Spec grammar (one directive per line, ';' comments):
//   config addrmax=<n> otypemax=<n> [ec=<n>] [hashmode=exact|digest32]
//   region <name> <base> <exposure-perm> <file.casm>
//   grant <reg> <word-spec>      adversary-held register, checked
//   entry <reg|pc> <word-spec>   trusted setup register, unchecked
//   flag <addr-spec>             the assert flag cell
//   etbl <tidx> <id-spec>        preinstalled identity table entry
//
// Word specs: int:<n>, [cap:]<perm>:<b>:<e>:<a>, srange:<sp>:<ob>:<oe>:<oa>,
// sealed:<otype>:<cap|srange>:<perm>:<x>:<y>:<z>. Numeric fields are decimal,
// @region (its base), @region.end (one past its last word), or
// @region.<label> (a symbol of that region's unit).
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cerisier/assembler.hpp"
#include "cerisier/machine.hpp"

namespace cerisier {

struct RegionSpec {
  std::string name;
  Addr base = 0;
  // Strongest permission `grant` lines may hand out over this region; `o`
  // marks memory the adversary must never receive.
  MemPerm exposure = MemPerm::O;
  std::string source;
};

struct GrantSpec {
  Reg reg{};
  std::string word;
  bool checked = true;  // grant (checked) vs entry (trusted)
  std::size_t line = 0;
};

struct TableSpec {
  std::uint64_t tidx = 0;
  std::string id;
  std::size_t line = 0;
};

struct SystemSpec {
  MachineConfig cfg;
  std::uint64_t ec0 = 0;
  std::vector<RegionSpec> regions;
  std::vector<GrantSpec> grants;
  std::string flag;
  std::size_t flag_line = 0;
  std::vector<TableSpec> etbl;
};

// Resolves a region's source file name to its contents.
using FileLookup = std::function<std::optional<std::string>(const std::string&)>;

struct SpecParse {
  std::optional<SystemSpec> spec;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

SpecParse parse_system_spec(std::string_view text, const FileLookup& files);
// Reads the spec from disk; region files resolve relative to its directory.
SpecParse load_system_spec(const std::string& path);

struct LoadedRegion {
  std::string name;
  Addr base = 0;
  Addr end = 0;  // one past the last word
  MemPerm exposure = MemPerm::O;
  ProgramImage image;
};

struct SystemImage {
  MachineConfig cfg;
  std::uint64_t ec0 = 0;
  std::vector<LoadedRegion> regions;
  Addr flag = 0;
  std::vector<std::pair<Reg, Word>> grants;  // checked grants only
  std::map<std::string, Int> consts;         // resolved identity.*/preid.*
  MachineState init;

  const LoadedRegion* region(std::string_view name) const;
};

struct LoadResult {
  std::optional<SystemImage> image;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

// Deterministic: equal specs give equal images.
LoadResult build_system(const SystemSpec& spec);

// Structural sanity of a built image: regions in bounds and disjoint, flag
// inside an unexposed region, checked grants within one region and within
// its exposure and away from the flag, no seal authority or sealed word
// referring to otypes at or above 2*ec0, table domain below ec0, and a
// runnable entry capability.
std::vector<std::string> check_wellformed(const SystemImage& img);

}  // namespace cerisier
