#include <doctest.h>

#include <set>
#include <string>

#include "cerisier/hash.hpp"

using namespace cerisier;

namespace {

Bytes uleb(std::uint64_t v) {
  Bytes out;
  do {
    std::uint8_t g = v & 0x7f;
    v >>= 7;
    if (v) g |= 0x80;
    out.push_back(g);
  } while (v);
  return out;
}

Bytes cat(Bytes a, const Bytes& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Small but representative word universe.
std::vector<Word> universe() {
  std::vector<Word> ws;
  for (int z = -40; z <= 40; ++z) ws.emplace_back(Int(z));
  for (int k = 8; k <= 130; k += 7) {
    ws.emplace_back(Int(Int(1) << k));
    ws.emplace_back(Int(-(Int(1) << k)));
    ws.emplace_back(Int((Int(1) << k) - 1));
  }
  for (int p = 0; p < 6; ++p)
    for (Addr b = 0; b < 3; ++b)
      for (Addr e = 0; e < 4; ++e)
        for (Addr a = 0; a < 3; ++a) ws.emplace_back(Cap{MemPerm(p), b, e, a});
  for (int sp = 0; sp < 4; ++sp)
    for (OType ob = 0; ob < 3; ++ob)
      for (OType oe = 0; oe < 4; ++oe)
        for (OType oa = 0; oa < 3; ++oa) ws.emplace_back(SealRange{SealPerm(sp), ob, oe, oa});
  for (OType o = 0; o < 3; ++o) {
    ws.emplace_back(Sealed{o, Cap{MemPerm::RW, 0, 2, 1}});
    ws.emplace_back(Sealed{o, Cap{MemPerm::RW, 0, 2, 0}});
    ws.emplace_back(Sealed{o, SealRange{SealPerm::SU, 0, 2, 0}});
  }
  return ws;
}

std::string hex(const Bytes& b) {
  static const char* d = "0123456789abcdef";
  std::string s;
  for (auto x : b) {
    s += d[x >> 4];
    s += d[x & 15];
  }
  return s;
}

}  // namespace

TEST_CASE("word serialization bytes are pinned") {
  CHECK(serialize_word(Int(0)) == Bytes{0x00, 0x00});
  CHECK(serialize_word(Int(1)) == Bytes{0x00, 0x00, 0x01});
  CHECK(serialize_word(Int(-5)) == Bytes{0x00, 0x01, 0x05});
  CHECK(serialize_word(Int(300)) == Bytes{0x00, 0x00, 0x01, 0x2c});
  CHECK(serialize_word(Cap{MemPerm::RWX, 0, 4, 2}) == Bytes{0x01, 0x05, 0x00, 0x04, 0x02});
  CHECK(serialize_word(Cap{MemPerm::E, 300, 301, 300}) ==
        Bytes{0x01, 0x01, 0xac, 0x02, 0xad, 0x02, 0xac, 0x02});
  CHECK(serialize_word(SealRange{SealPerm::SU, 2, 4, 2}) == Bytes{0x02, 0x03, 0x02, 0x04, 0x02});
  CHECK(serialize_word(Sealed{6, Cap{MemPerm::RO, 1, 2, 1}}) ==
        Bytes{0x03, 0x06, 0x01, 0x02, 0x01, 0x02, 0x01});
}

TEST_CASE("word serialization is injective over the small-word universe") {
  auto ws = universe();
  std::set<Bytes> seen;
  for (const Word& w : ws) seen.insert(serialize_word(w));
  CHECK(seen.size() == ws.size());
}

TEST_CASE("atoms are length-prefixed serializations") {
  for (const Word& w : universe()) {
    Bytes ser = serialize_word(w);
    CHECK(hash_word(w) == cat(uleb(ser.size()), ser));
  }
}

TEST_CASE("digest atoms are fixed size and pinned") {
  Bytes a0 = hash_word(Int(0), HashMode::digest32);
  REQUIRE(a0.size() == 33);
  CHECK(a0[0] == 32);  // length prefix
  CHECK(hex(Bytes(a0.begin() + 1, a0.end())) ==
        "96a296d224f285c67bee93c30f8a309157f0daa35dc5b87e410b78630a09cfc7");
  Bytes a1 = hash_word(Cap{MemPerm::RWX, 0, 4, 2}, HashMode::digest32);
  REQUIRE(a1.size() == 33);
  CHECK(hex(Bytes(a1.begin() + 1, a1.end())) ==
        "c51231b9383e38a4e0f63b438fb3e69b17ee9ffe2d0ba8da3c0f25644e540976");
  CHECK(hash_word(Int(0), HashMode::digest32) == a0);  // deterministic
  std::set<Bytes> seen;
  auto ws = universe();
  for (const Word& w : ws) seen.insert(hash_word(w, HashMode::digest32));
  CHECK(seen.size() == ws.size());
}

TEST_CASE("hash_concat is associative with the empty identity") {
  const Bytes a = {1, 2, 3}, b = {}, c = {0, 0, 7, 9};
  CHECK(hash_concat(a, b) == a);
  CHECK(hash_concat(b, a) == a);
  CHECK(hash_concat(hash_concat(a, b), c) == hash_concat(a, hash_concat(b, c)));
  CHECK(hash_concat(hash_concat(a, c), c) == hash_concat(a, hash_concat(c, c)));
}

TEST_CASE("region_hash equals the fold of hash_concat over atoms") {
  auto ws = universe();
  for (auto mode : {HashMode::exact, HashMode::digest32}) {
    std::vector<Word> list(ws.begin(), ws.begin() + 24);
    Bytes fold;
    for (const Word& w : list) fold = hash_concat(std::move(fold), hash_word(w, mode));
    CHECK(region_hash(list, mode) == fold);
    CHECK(region_hash({}, mode) == Bytes{});
    CHECK(region_hash({ws[0]}, mode) == hash_word(ws[0], mode));
  }
}

TEST_CASE("region_hash distributes over every split point") {
  auto ws = universe();
  std::vector<Word> list(ws.begin() + 70, ws.begin() + 78);
  for (std::size_t k = 0; k <= list.size(); ++k) {
    std::vector<Word> lo(list.begin(), list.begin() + k);
    std::vector<Word> hi(list.begin() + k, list.end());
    CHECK(region_hash(list) == hash_concat(region_hash(lo), region_hash(hi)));
  }
}

TEST_CASE("integer embedding of hashes round-trips, leading zeros included") {
  CHECK(int_of_hash({}) == 1);
  CHECK(bytes_of_hash_int(Int(1)) == Bytes{});
  CHECK(int_of_hash({0x00}) == 256);
  CHECK(int_of_hash({0x07}) == 263);
  CHECK(int_of_hash({0x00, 0x07}) == 65543);
  const Bytes cases[] = {{}, {0x00}, {0x00, 0x00}, {0x00, 0x07}, {0xff}, {0x01, 0x00},
                          {0x00, 0x00, 0x00, 0xab}, {7, 6, 5, 4, 3, 2, 1, 0}};
  std::set<Int> seen;
  for (const Bytes& h : cases) {
    Int z = int_of_hash(h);
    auto back = bytes_of_hash_int(z);
    REQUIRE(back.has_value());
    CHECK(*back == h);
    seen.insert(z);
  }
  CHECK(seen.size() == std::size(cases));
  CHECK_FALSE(bytes_of_hash_int(Int(0)));
  CHECK_FALSE(bytes_of_hash_int(Int(-5)));
  CHECK_FALSE(bytes_of_hash_int(Int(255)));  // 0xff: wrong prefix
  CHECK_FALSE(bytes_of_hash_int(Int(513)));  // 0x0201: wrong prefix
  CHECK(bytes_of_hash_int(Int(511)) == Bytes{0xff});  // 0x01ff
}

TEST_CASE("identity measurement is pinned and sensitive to every input") {
  // atoms: Int(2) -> 03 00 00 02, Int(3) -> 03 00 00 03; embedding prefix 0x01
  CHECK(measure_identity(2, {Int(3)}) == Int("0x010300000203000003"));
  CHECK(measure_identity(0, {}) == int_of_hash(hash_word(Int(0))));
  CHECK(measure_identity(2, {Int(3)}) != measure_identity(1, {Int(3)}));
  CHECK(measure_identity(2, {Int(3)}) != measure_identity(2, {Int(4)}));
  CHECK(measure_identity(2, {Int(3), Int(4)}) != measure_identity(2, {Int(3)}));
  CHECK(measure_identity(5, {Int(900), Int(-3)}, HashMode::digest32) ==
        measure_identity(5, {Int(900), Int(-3)}, HashMode::digest32));
  CHECK(measure_identity(5, {Int(900), Int(-3)}, HashMode::digest32) !=
        measure_identity(5, {Int(900), Int(-2)}, HashMode::digest32));
}
