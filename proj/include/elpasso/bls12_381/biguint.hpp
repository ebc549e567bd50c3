#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace elpasso::bls {

// Arbitrary-precision unsigned integer. Used for one-time derivations at
// startup (pairing exponents, Frobenius tables) and as an independent oracle
// for field arithmetic in tests. Never on a hot path, so clarity wins over
// speed everywhere.
struct BigUint {
  // little-endian limbs, canonical (no trailing zero limbs, empty == 0)
  std::vector<uint64_t> limbs;

  BigUint() = default;
  explicit BigUint(uint64_t v) {
    if (v != 0) limbs.push_back(v);
  }

  static BigUint from_limbs(std::span<const uint64_t> le) {
    BigUint out;
    out.limbs.assign(le.begin(), le.end());
    out.normalize();
    return out;
  }

  static BigUint from_dec(std::string_view s) {
    if (s.empty()) throw std::invalid_argument("BigUint: empty decimal string");
    BigUint out;
    for (char c : s) {
      if (c < '0' || c > '9') throw std::invalid_argument("BigUint: bad decimal digit");
      out = out.mul_u64(10).add(BigUint(uint64_t(c - '0')));
    }
    return out;
  }

  void normalize() {
    while (!limbs.empty() && limbs.back() == 0) limbs.pop_back();
  }

  bool is_zero() const { return limbs.empty(); }

  size_t bit_length() const {
    if (limbs.empty()) return 0;
    uint64_t top = limbs.back();
    size_t bits = limbs.size() * 64;
    while (!(top >> 63)) {
      top <<= 1;
      --bits;
    }
    return bits;
  }

  bool bit(size_t i) const {
    size_t limb = i / 64;
    if (limb >= limbs.size()) return false;
    return (limbs[limb] >> (i % 64)) & 1;
  }

  void set_bit(size_t i) {
    size_t limb = i / 64;
    if (limb >= limbs.size()) limbs.resize(limb + 1, 0);
    limbs[limb] |= uint64_t(1) << (i % 64);
  }

  // -1 / 0 / +1
  int cmp(const BigUint& o) const {
    if (limbs.size() != o.limbs.size()) return limbs.size() < o.limbs.size() ? -1 : 1;
    for (size_t i = limbs.size(); i-- > 0;) {
      if (limbs[i] != o.limbs[i]) return limbs[i] < o.limbs[i] ? -1 : 1;
    }
    return 0;
  }
  bool operator==(const BigUint& o) const { return cmp(o) == 0; }
  bool operator<(const BigUint& o) const { return cmp(o) < 0; }
  bool operator<=(const BigUint& o) const { return cmp(o) <= 0; }

  BigUint add(const BigUint& o) const {
    BigUint out;
    size_t n = std::max(limbs.size(), o.limbs.size());
    out.limbs.resize(n + 1, 0);
    unsigned __int128 carry = 0;
    for (size_t i = 0; i < n; ++i) {
      unsigned __int128 cur = carry;
      if (i < limbs.size()) cur += limbs[i];
      if (i < o.limbs.size()) cur += o.limbs[i];
      out.limbs[i] = uint64_t(cur);
      carry = cur >> 64;
    }
    out.limbs[n] = uint64_t(carry);
    out.normalize();
    return out;
  }

  BigUint sub(const BigUint& o) const {
    if (cmp(o) < 0) throw std::invalid_argument("BigUint: subtraction underflow");
    BigUint out;
    out.limbs.resize(limbs.size(), 0);
    uint64_t borrow = 0;
    for (size_t i = 0; i < limbs.size(); ++i) {
      uint64_t rhs = (i < o.limbs.size()) ? o.limbs[i] : 0;
      uint64_t d = limbs[i] - rhs;
      uint64_t b1 = limbs[i] < rhs;
      uint64_t d2 = d - borrow;
      uint64_t b2 = d < borrow;
      out.limbs[i] = d2;
      borrow = b1 | b2;
    }
    out.normalize();
    return out;
  }

  BigUint mul_u64(uint64_t m) const {
    BigUint out;
    out.limbs.resize(limbs.size() + 1, 0);
    unsigned __int128 carry = 0;
    for (size_t i = 0; i < limbs.size(); ++i) {
      unsigned __int128 cur = (unsigned __int128)limbs[i] * m + carry;
      out.limbs[i] = uint64_t(cur);
      carry = cur >> 64;
    }
    if (!limbs.empty()) out.limbs[limbs.size()] = uint64_t(carry);
    out.normalize();
    return out;
  }

  BigUint mul(const BigUint& o) const {
    if (is_zero() || o.is_zero()) return BigUint();
    BigUint out;
    out.limbs.resize(limbs.size() + o.limbs.size(), 0);
    for (size_t i = 0; i < limbs.size(); ++i) {
      unsigned __int128 carry = 0;
      for (size_t j = 0; j < o.limbs.size(); ++j) {
        unsigned __int128 cur =
            (unsigned __int128)limbs[i] * o.limbs[j] + out.limbs[i + j] + carry;
        out.limbs[i + j] = uint64_t(cur);
        carry = cur >> 64;
      }
      out.limbs[i + o.limbs.size()] += uint64_t(carry);
    }
    out.normalize();
    return out;
  }

  BigUint shl(size_t bits) const {
    if (is_zero()) return BigUint();
    size_t limb_shift = bits / 64, bit_shift = bits % 64;
    BigUint out;
    out.limbs.resize(limbs.size() + limb_shift + 1, 0);
    for (size_t i = 0; i < limbs.size(); ++i) {
      out.limbs[i + limb_shift] |= limbs[i] << bit_shift;
      if (bit_shift != 0) out.limbs[i + limb_shift + 1] |= limbs[i] >> (64 - bit_shift);
    }
    out.normalize();
    return out;
  }

  // shift-subtract long division; quotient and remainder
  std::pair<BigUint, BigUint> divmod(const BigUint& d) const {
    if (d.is_zero()) throw std::invalid_argument("BigUint: division by zero");
    BigUint q, r;
    for (size_t i = bit_length(); i-- > 0;) {
      r = r.shl(1);
      if (bit(i)) {
        if (r.limbs.empty()) r.limbs.push_back(1);
        else r.limbs[0] |= 1;
      }
      if (d <= r) {
        r = r.sub(d);
        q.set_bit(i);
      }
    }
    return {q, r};
  }

  BigUint mod(const BigUint& m) const { return divmod(m).second; }

  BigUint mul_mod(const BigUint& o, const BigUint& m) const { return mul(o).mod(m); }

  BigUint pow_mod(const BigUint& e, const BigUint& m) const {
    BigUint result(1);
    BigUint base = mod(m);
    for (size_t i = e.bit_length(); i-- > 0;) {
      result = result.mul_mod(result, m);
      if (e.bit(i)) result = result.mul_mod(base, m);
    }
    return result;
  }

  std::string to_dec() const {
    if (is_zero()) return "0";
    std::string out;
    BigUint cur = *this;
    BigUint ten(10);
    while (!cur.is_zero()) {
      auto [q, r] = cur.divmod(ten);
      out.push_back(char('0' + (r.is_zero() ? 0 : r.limbs[0])));
      cur = q;
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  // fixed-width little-endian limb view, zero padded; throws if it does not fit
  std::vector<uint64_t> to_limbs(size_t n) const {
    if (limbs.size() > n) throw std::invalid_argument("BigUint: value too wide");
    std::vector<uint64_t> out(n, 0);
    std::copy(limbs.begin(), limbs.end(), out.begin());
    return out;
  }
};

// Miller-Rabin with fixed pseudo-random bases; plenty for sanity-checking
// hard-coded moduli in tests.
inline bool probably_prime(const BigUint& n, int rounds = 40) {
  if (n.bit_length() < 2) return false;  // 0, 1
  BigUint two(2);
  if (n == two) return true;
  if (!n.bit(0)) return false;
  BigUint one(1);
  BigUint n1 = n.sub(one);
  // n-1 = d * 2^s
  size_t s = 0;
  while (!n1.bit(s)) ++s;
  BigUint d = n1;
  for (size_t i = 0; i < s; ++i) d = d.divmod(two).first;

  uint64_t seed = 0x9e3779b97f4a7c15ULL;
  for (int round = 0; round < rounds; ++round) {
    seed = seed * 6364136223846793005ULL + 1442695040888963407ULL;
    BigUint a = BigUint(2 + (seed % 0xffffffff)).mod(n);
    if (a.bit_length() < 2) continue;
    BigUint x = a.pow_mod(d, n);
    if (x == one || x == n1) continue;
    bool witness = true;
    for (size_t i = 0; i + 1 < s; ++i) {
      x = x.mul_mod(x, n);
      if (x == n1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

}  // namespace elpasso::bls
