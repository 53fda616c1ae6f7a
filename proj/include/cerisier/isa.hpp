// Core value types of the Cerisier capability machine: words, permissions,
// registers, the 27-instruction set and its integer encoding.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace cerisier {

using Int = boost::multiprecision::cpp_int;

// Addresses and otypes live in [0, max]; exclusive interval ends (Cap.e,
// SealRange.oe) may additionally take the one-past-the-end value max+1.
using Addr = std::uint64_t;
using OType = std::uint64_t;

inline constexpr std::uint64_t kDefaultAddrMax = 1u << 20;
inline constexpr std::uint64_t kDefaultOTypeMax = 1u << 20;

// Memory permissions. Enumerator values double as the integer codes used by
// getp and restrict.
enum class MemPerm : std::uint8_t { O = 0, E = 1, RO = 2, RX = 3, RW = 4, RWX = 5 };
enum class SealPerm : std::uint8_t { O = 0, S = 1, U = 2, SU = 3 };

// Flows-to lattices. MemPerm: O<=E<=RX<=RWX, O<=RO<=RX, RO<=RW<=RWX;
// E incomparable with RO and RW. SealPerm: O<=S<=SU, O<=U<=SU.
bool perm_leq(MemPerm lo, MemPerm hi);
bool perm_leq(SealPerm lo, SealPerm hi);

std::string_view perm_name(MemPerm p);
std::string_view perm_name(SealPerm sp);
std::optional<MemPerm> mem_perm_of_name(std::string_view s);
std::optional<SealPerm> seal_perm_of_name(std::string_view s);
std::optional<MemPerm> mem_perm_of_code(const Int& z);
std::optional<SealPerm> seal_perm_of_code(const Int& z);

struct Cap {
  MemPerm p{MemPerm::O};
  Addr b{0};
  Addr e{0};
  Addr a{0};
  bool operator==(const Cap&) const = default;
};

struct SealRange {
  SealPerm sp{SealPerm::O};
  OType ob{0};
  OType oe{0};
  OType oa{0};
  bool operator==(const SealRange&) const = default;
};

using Sealable = std::variant<Cap, SealRange>;

struct Sealed {
  OType otype{0};
  Sealable sc{Cap{}};
  bool operator==(const Sealed&) const = default;
};

// Variant order fixes the getwtype kind codes: 0=Int 1=Cap 2=SealRange 3=Sealed.
using Word = std::variant<Int, Cap, SealRange, Sealed>;

// Registers: index 0 is pc, 1..32 are r0..r31.
enum class Reg : std::uint8_t {};
inline constexpr Reg kPC{0};
inline constexpr std::size_t kNumRegs = 33;
constexpr Reg gpr(unsigned n) { return Reg(n + 1); }
constexpr std::uint8_t reg_index(Reg r) { return static_cast<std::uint8_t>(r); }
std::string reg_name(Reg r);
std::optional<Reg> reg_of_name(std::string_view s);

enum class Opcode : std::uint8_t {
  jmp = 1,
  jnz,
  fail,
  halt,
  mov,
  add,
  sub,
  lt,
  lea,
  load,
  store,
  restrict_,
  subseg,
  getp,
  getb,
  gete,
  geta,
  cseal,
  cunseal,
  getwtype,
  getotype,
  isunique,
  einit,
  edeinit,
  estoreid,
  hash,
  hashconcat,
};
inline constexpr int kNumOpcodes = 27;
inline constexpr int kFirstOpcode = 1;

// Operand slots: R takes a register only, A takes a register or an
// arbitrary-precision immediate.
enum class Slot : std::uint8_t { R, A };

struct OpSig {
  std::string_view mnemonic;
  std::uint8_t arity;
  std::array<Slot, 3> slots;
};

const OpSig& sig(Opcode op);
std::optional<Opcode> opcode_of_mnemonic(std::string_view m);

using Operand = std::variant<Int, Reg>;

struct Instr {
  Opcode op{Opcode::fail};
  std::vector<Operand> ops;
  bool operator==(const Instr&) const = default;
};

inline Instr make_instr(Opcode op, std::vector<Operand> ops = {}) {
  return Instr{op, std::move(ops)};
}

bool well_formed(const Instr& i);

// Bijective integer encoding, documented in docs/isa.md. encode is total on
// well-formed instructions; decode is total on all integers and maps
// everything outside encode's image (all negatives included) to `fail`.
Int encode(const Instr& i);
Instr decode(const Int& z);

}  // namespace cerisier
