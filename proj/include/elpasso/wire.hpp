#pragma once
// Byte-level encode/decode helpers shared by the wire formats in this
// library.  Integers are big-endian; variable-length payloads carry their
// own u32 length or count prefix at the call site.

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "elpasso/groups.hpp"

namespace elpasso::wire {

struct Writer {
  std::vector<uint8_t> out;

  void u8(uint8_t v) { out.push_back(v); }
  void u32(uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(uint8_t(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 7; i >= 0; --i) out.push_back(uint8_t(v >> (8 * i)));
  }
  void bytes(std::span<const uint8_t> b) { out.insert(out.end(), b.begin(), b.end()); }
  void str(std::string_view s) {
    out.insert(out.end(), reinterpret_cast<const uint8_t*>(s.data()),
               reinterpret_cast<const uint8_t*>(s.data()) + s.size());
  }
};

// failed reads return false and leave the cursor untouched, so callers can
// bail out with a single check per field
struct Reader {
  std::span<const uint8_t> buf;
  size_t pos = 0;

  Reader(std::span<const uint8_t> b) : buf(b) {}

  size_t remaining() const { return buf.size() - pos; }
  bool done() const { return pos == buf.size(); }

  bool u8(uint8_t& v) {
    if (remaining() < 1) return false;
    v = buf[pos++];
    return true;
  }
  bool u32(uint32_t& v) {
    if (remaining() < 4) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | buf[pos++];
    return true;
  }
  bool u64(uint64_t& v) {
    if (remaining() < 8) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | buf[pos++];
    return true;
  }
  bool bytes(std::span<uint8_t> dst) {
    if (remaining() < dst.size()) return false;
    std::memcpy(dst.data(), buf.data() + pos, dst.size());
    pos += dst.size();
    return true;
  }
  bool slice(size_t n, std::span<const uint8_t>& dst) {
    if (remaining() < n) return false;
    dst = buf.subspan(pos, n);
    pos += n;
    return true;
  }
};

template <class G>
void put_point(Writer& w, const G& p) {
  auto b = p.serialize();
  w.bytes(b);
}

// decodes and fully validates one group element (curve membership, subgroup,
// canonical encoding)
template <class G>
bool get_point(Reader& r, G& p) {
  std::span<const uint8_t> raw;
  if (!r.slice(G::BYTES, raw)) return false;
  auto d = G::deserialize(raw);
  if (!d) return false;
  p = *d;
  return true;
}

inline void put_scalar(Writer& w, const Scalar& s) {
  auto b = s.to_bytes();
  w.bytes(b);
}

inline bool get_scalar(Reader& r, Scalar& s) {
  std::span<const uint8_t> raw;
  if (!r.slice(Scalar::BYTES, raw)) return false;
  auto d = Scalar::from_bytes(raw);
  if (!d) return false;
  s = *d;
  return true;
}

}  // namespace elpasso::wire
