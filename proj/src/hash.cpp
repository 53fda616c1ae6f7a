#include "cerisier/hash.hpp"

#include <openssl/evp.h>

#include <algorithm>

namespace cerisier {

namespace {

void put_uleb(Bytes& out, std::uint64_t v) {
  do {
    std::uint8_t g = v & 0x7f;
    v >>= 7;
    if (v != 0) g |= 0x80;
    out.push_back(g);
  } while (v != 0);
}

// Minimal big-endian magnitude bytes of a non-negative integer.
void put_magnitude(Bytes& out, const Int& z) {
  if (z == 0) return;
  std::size_t at = out.size();
  Int m = z;
  while (m != 0) {
    out.push_back((m & 0xff).convert_to<std::uint8_t>());
    m >>= 8;
  }
  std::reverse(out.begin() + at, out.end());
}

Bytes sha256(const Bytes& data) {
  Bytes md(32);
  unsigned int n = 0;
  EVP_Digest(data.data(), data.size(), md.data(), &n, EVP_sha256(), nullptr);
  md.resize(n);
  return md;
}

void serialize_sealable(Bytes& out, const Sealable& sc);

void serialize_into(Bytes& out, const Word& w) {
  switch (w.index()) {
    case 0: {
      const Int& z = std::get<Int>(w);
      out.push_back(0x00);
      out.push_back(z < 0 ? 1 : 0);
      put_magnitude(out, z < 0 ? Int(-z) : z);
      break;
    }
    case 1:
      serialize_sealable(out, std::get<Cap>(w));
      break;
    case 2:
      serialize_sealable(out, std::get<SealRange>(w));
      break;
    default: {
      const Sealed& sw = std::get<Sealed>(w);
      out.push_back(0x03);
      put_uleb(out, sw.otype);
      serialize_sealable(out, sw.sc);
      break;
    }
  }
}

void serialize_sealable(Bytes& out, const Sealable& sc) {
  if (std::holds_alternative<Cap>(sc)) {
    const Cap& c = std::get<Cap>(sc);
    out.push_back(0x01);
    out.push_back(static_cast<std::uint8_t>(c.p));
    put_uleb(out, c.b);
    put_uleb(out, c.e);
    put_uleb(out, c.a);
  } else {
    const SealRange& sr = std::get<SealRange>(sc);
    out.push_back(0x02);
    out.push_back(static_cast<std::uint8_t>(sr.sp));
    put_uleb(out, sr.ob);
    put_uleb(out, sr.oe);
    put_uleb(out, sr.oa);
  }
}

}  // namespace

Bytes serialize_word(const Word& w) {
  Bytes out;
  serialize_into(out, w);
  return out;
}

Bytes hash_word(const Word& w, HashMode mode) {
  Bytes ser = serialize_word(w);
  if (mode == HashMode::digest32) ser = sha256(ser);
  Bytes atom;
  atom.reserve(ser.size() + 2);
  put_uleb(atom, ser.size());
  atom.insert(atom.end(), ser.begin(), ser.end());
  return atom;
}

Bytes hash_concat(Bytes h1, const Bytes& h2) {
  h1.insert(h1.end(), h2.begin(), h2.end());
  return h1;
}

Bytes region_hash(const std::vector<Word>& ws, HashMode mode) {
  Bytes out;
  for (const Word& w : ws) {
    Bytes atom = hash_word(w, mode);
    out.insert(out.end(), atom.begin(), atom.end());
  }
  return out;
}

Int int_of_hash(const Bytes& h) {
  Int z = 1;  // the 0x01 prefix byte
  for (std::uint8_t b : h) {
    z <<= 8;
    z |= b;
  }
  return z;
}

std::optional<Bytes> bytes_of_hash_int(const Int& z) {
  if (z < 1) return std::nullopt;
  Bytes be;
  put_magnitude(be, z);
  if (be.empty() || be[0] != 0x01) return std::nullopt;
  return Bytes(be.begin() + 1, be.end());
}

Int measure_identity(Addr b, const std::vector<Word>& code, HashMode mode) {
  return int_of_hash(hash_concat(hash_word(Word(Int(b)), mode), region_hash(code, mode)));
}

}  // namespace cerisier
