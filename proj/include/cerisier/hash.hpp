// Hashing model backing the hash/hashconcat instructions and enclave
// measurement. A hash value is a byte string made of framed atoms (varint
// length prefix + canonical word serialization); concatenation of hashes is
// plain byte concatenation, so region hashes distribute over every split of
// the word list. Hash values are embedded into machine integers by prefixing
// a 0x01 byte and reading big-endian, which keeps leading zero bytes.
#pragma once

#include <optional>
#include <vector>

#include "cerisier/isa.hpp"

namespace cerisier {

using Bytes = std::vector<std::uint8_t>;

// Atom payloads: exact keeps the full serialization (injective); digest32
// replaces it with a SHA-256 digest (collision-resistant, fixed size).
enum class HashMode : std::uint8_t { exact, digest32 };

// Canonical, injective serialization of one word.
Bytes serialize_word(const Word& w);

// One framed atom for w.
Bytes hash_word(const Word& w, HashMode mode = HashMode::exact);

// Byte concatenation; associative with the empty string as identity.
Bytes hash_concat(Bytes h1, const Bytes& h2);

// Concatenation of per-word atoms in list order.
Bytes region_hash(const std::vector<Word>& ws, HashMode mode = HashMode::exact);

// Integer embedding of hash byte strings and its inverse. The inverse
// returns nullopt for integers that are not embeddings (z < 1 or missing
// 0x01 prefix byte).
Int int_of_hash(const Bytes& h);
std::optional<Bytes> bytes_of_hash_int(const Int& z);

// Enclave identity: hash of the base address atom followed by the code
// region's atoms, embedded as an integer.
Int measure_identity(Addr b, const std::vector<Word>& code,
                     HashMode mode = HashMode::exact);

}  // namespace cerisier
