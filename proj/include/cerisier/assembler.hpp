// Two-pass assembler for .casm sources and the matching disassembler.
// Grammar (one item per line, ';' starts a comment, labels end with ':'):
//   instructions   mnemonic operands; operands are registers (pc, r0..r31),
//                  decimal immediates of any size, or @label (absolute addr)
//   adr rd label   pseudo-instruction: mov rd pc; lea rd <delta> (2 words)
//   assert r1 r2 rf  macro comparing r1 and r2; on mismatch stores Int(1)
//                  through rf (the assert-flag capability) and halts.
//                  Expands to 9 words and clobbers r30/r31.
//   .word X        one integer word; X is decimal, @label, or a named
//                  constant (resolved from env or deferred to the loader)
//   .cap p:b:e:a   capability word; fields decimal, @label, or env constant
//   .srange p:ob:oe:oa   seal-range word
//   .sealed o:cap:...    sealed word (cap or srange payload)
//   .identity U    integer word: the measured identity of unit U
//   .preid U L1 L2 integer word: embedded hash of U's words in [L1, L2)
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cerisier/isa.hpp"

namespace cerisier {

struct ProgramImage {
  Addr base = 0;
  std::vector<Word> words;
  std::map<std::string, Addr> symbols;  // label -> absolute address
};

// A word whose value only the loader can compute (identity.*, preid.*).
// The assembler leaves Int(0) at the offset and reports the constant key.
struct PendingWord {
  Addr offset = 0;  // index into ProgramImage::words
  std::string key;
};

using AsmEnv = std::map<std::string, Int>;

struct AsmResult {
  ProgramImage image;
  std::vector<PendingWord> pending;
  std::vector<std::string> errors;  // "line N: message"
  bool ok() const { return errors.empty(); }
};

AsmResult assemble(std::string_view src, Addr base, const AsmEnv& env = {});

// Textual instruction rendering. Integers outside the encoding image render
// as "fail ; raw=<z>", so parse_instruction(disassemble(z)) == decode(z)
// for every integer.
std::string disassemble(const Int& z);

// Parses one label-free instruction line (the disassembler's output syntax).
std::optional<Instr> parse_instruction(std::string_view text);

}  // namespace cerisier
