#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>

namespace elpasso::bls {

namespace detail {

using u128 = unsigned __int128;

template <size_t N>
constexpr int cmp_limbs(const uint64_t* a, const uint64_t* b) {
  for (size_t i = N; i-- > 0;) {
    if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  }
  return 0;
}

template <size_t N>
constexpr uint64_t add_limbs(uint64_t* out, const uint64_t* a, const uint64_t* b) {
  u128 carry = 0;
  for (size_t i = 0; i < N; ++i) {
    u128 cur = (u128)a[i] + b[i] + carry;
    out[i] = uint64_t(cur);
    carry = cur >> 64;
  }
  return uint64_t(carry);
}

template <size_t N>
constexpr uint64_t sub_limbs(uint64_t* out, const uint64_t* a, const uint64_t* b) {
  uint64_t borrow = 0;
  for (size_t i = 0; i < N; ++i) {
    uint64_t d = a[i] - b[i];
    uint64_t b1 = a[i] < b[i];
    uint64_t d2 = d - borrow;
    uint64_t b2 = d < borrow;
    out[i] = d2;
    borrow = b1 | b2;
  }
  return borrow;
}

// -m^-1 mod 2^64 by Newton iteration (m odd)
constexpr uint64_t mont_inv64(uint64_t m0) {
  uint64_t x = 1;
  for (int i = 0; i < 6; ++i) x *= 2 - m0 * x;  // doubles correct low bits
  return ~x + 1;
}

// CIOS Montgomery multiplication: out = a*b*2^(-64N) mod m.
// Requires a, b < m and m odd with headroom (m < 2^(64N-1)); both moduli
// here are 381 and 255 bits wide, well inside that.
template <size_t N>
constexpr void mont_mul(uint64_t* out, const uint64_t* a, const uint64_t* b,
                        const uint64_t* m, uint64_t inv) {
  uint64_t t[N + 2] = {};
  for (size_t i = 0; i < N; ++i) {
    u128 carry = 0;
    for (size_t j = 0; j < N; ++j) {
      u128 cur = (u128)a[i] * b[j] + t[j] + carry;
      t[j] = uint64_t(cur);
      carry = cur >> 64;
    }
    u128 cur = (u128)t[N] + carry;
    t[N] = uint64_t(cur);
    t[N + 1] = uint64_t(cur >> 64);

    uint64_t mf = t[0] * inv;
    cur = (u128)mf * m[0] + t[0];
    carry = cur >> 64;
    for (size_t j = 1; j < N; ++j) {
      cur = (u128)mf * m[j] + t[j] + carry;
      t[j - 1] = uint64_t(cur);
      carry = cur >> 64;
    }
    cur = (u128)t[N] + carry;
    t[N - 1] = uint64_t(cur);
    t[N] = t[N + 1] + uint64_t(cur >> 64);
  }
  if (t[N] != 0 || cmp_limbs<N>(t, m) >= 0) {
    sub_limbs<N>(out, t, m);
  } else {
    for (size_t i = 0; i < N; ++i) out[i] = t[i];
  }
}

// 2^k mod m by repeated doubling; derives the Montgomery constants R and R^2
// instead of hard-coding them.
template <size_t N>
constexpr std::array<uint64_t, N> pow2_mod(const std::array<uint64_t, N>& m, size_t k) {
  std::array<uint64_t, N> v{};
  v[0] = 1;
  for (size_t i = 0; i < k; ++i) {
    uint64_t carry = add_limbs<N>(v.data(), v.data(), v.data());
    if (carry != 0 || cmp_limbs<N>(v.data(), m.data()) >= 0) {
      sub_limbs<N>(v.data(), v.data(), m.data());
    }
  }
  return v;
}

template <size_t N>
constexpr std::array<uint64_t, N> sub_small(const std::array<uint64_t, N>& a, uint64_t s) {
  std::array<uint64_t, N> out = a;
  uint64_t borrow = s;
  for (size_t i = 0; i < N && borrow != 0; ++i) {
    uint64_t d = out[i] - borrow;
    borrow = out[i] < borrow;
    out[i] = d;
  }
  return out;
}

template <size_t N>
constexpr std::array<uint64_t, N> add_small(const std::array<uint64_t, N>& a, uint64_t s) {
  std::array<uint64_t, N> out = a;
  uint64_t carry = s;
  for (size_t i = 0; i < N && carry != 0; ++i) {
    uint64_t d = out[i] + carry;
    carry = d < out[i];
    out[i] = d;
  }
  return out;
}

template <size_t N>
constexpr std::array<uint64_t, N> shr(const std::array<uint64_t, N>& a, size_t bits) {
  std::array<uint64_t, N> out{};
  size_t limb_shift = bits / 64, bit_shift = bits % 64;
  for (size_t i = 0; i + limb_shift < N; ++i) {
    out[i] = a[i + limb_shift] >> bit_shift;
    if (bit_shift != 0 && i + limb_shift + 1 < N) {
      out[i] |= a[i + limb_shift + 1] << (64 - bit_shift);
    }
  }
  return out;
}

}  // namespace detail

// Prime field element in Montgomery form, parameterized by the modulus.
template <class Params>
struct Fe {
  static constexpr size_t N = Params::N;
  static constexpr std::array<uint64_t, N> MOD = Params::MOD;
  static constexpr uint64_t INV = detail::mont_inv64(MOD[0]);
  // R mod m and R^2 mod m for R = 2^(64N)
  static constexpr std::array<uint64_t, N> R1 = detail::pow2_mod<N>(MOD, 64 * N);
  static constexpr std::array<uint64_t, N> R2 = detail::pow2_mod<N>(MOD, 128 * N);
  static constexpr std::array<uint64_t, N> R3 = detail::pow2_mod<N>(MOD, 192 * N);
  static constexpr size_t BYTES = 8 * N;

  std::array<uint64_t, N> v{};  // Montgomery form, always reduced below MOD

  static constexpr Fe zero() { return {}; }
  static constexpr Fe one() {
    Fe r;
    r.v = R1;
    return r;
  }

  static constexpr Fe from_u64(uint64_t x) {
    Fe raw;
    raw.v[0] = x;
    Fe r2;
    r2.v = R2;
    Fe out;
    detail::mont_mul<N>(out.v.data(), raw.v.data(), r2.v.data(), MOD.data(), INV);
    return out;
  }

  constexpr bool is_zero() const {
    for (size_t i = 0; i < N; ++i) {
      if (v[i] != 0) return false;
    }
    return true;
  }

  constexpr bool operator==(const Fe& o) const { return v == o.v; }

  constexpr Fe operator+(const Fe& o) const {
    Fe out;
    uint64_t carry = detail::add_limbs<N>(out.v.data(), v.data(), o.v.data());
    if (carry != 0 || detail::cmp_limbs<N>(out.v.data(), MOD.data()) >= 0) {
      detail::sub_limbs<N>(out.v.data(), out.v.data(), MOD.data());
    }
    return out;
  }

  constexpr Fe operator-(const Fe& o) const {
    Fe out;
    uint64_t borrow = detail::sub_limbs<N>(out.v.data(), v.data(), o.v.data());
    if (borrow != 0) detail::add_limbs<N>(out.v.data(), out.v.data(), MOD.data());
    return out;
  }

  constexpr Fe operator-() const {
    if (is_zero()) return *this;
    Fe out;
    detail::sub_limbs<N>(out.v.data(), MOD.data(), v.data());
    return out;
  }

  constexpr Fe operator*(const Fe& o) const {
    Fe out;
    detail::mont_mul<N>(out.v.data(), v.data(), o.v.data(), MOD.data(), INV);
    return out;
  }

  Fe& operator+=(const Fe& o) { return *this = *this + o; }
  Fe& operator-=(const Fe& o) { return *this = *this - o; }
  Fe& operator*=(const Fe& o) { return *this = *this * o; }

  constexpr Fe square() const { return *this * *this; }

  constexpr Fe dbl() const { return *this + *this; }

  // MSB-first square-and-multiply over little-endian exponent limbs
  constexpr Fe pow(std::span<const uint64_t> exp) const {
    size_t top = exp.size() * 64;
    while (top > 0 && ((exp[(top - 1) / 64] >> ((top - 1) % 64)) & 1) == 0) --top;
    Fe result = one();
    for (size_t i = top; i-- > 0;) {
      result = result.square();
      if ((exp[i / 64] >> (i % 64)) & 1) result *= *this;
    }
    return result;
  }

  // Fermat inversion; maps 0 to 0, which doubles as the inv0 needed by the
  // curve-mapping code.
  constexpr Fe inverse() const {
    constexpr auto e = detail::sub_small<N>(MOD, 2);
    return pow(std::span<const uint64_t>(e.data(), N));
  }

  constexpr bool is_square() const {
    constexpr auto e = detail::shr<N>(detail::sub_small<N>(MOD, 1), 1);
    Fe l = pow(std::span<const uint64_t>(e.data(), N));
    return l.is_zero() || l == one();
  }

  // valid only for moduli = 3 mod 4 (holds for the base field)
  constexpr std::optional<Fe> sqrt() const {
    static_assert(MOD[0] % 4 == 3);
    constexpr auto e = detail::shr<N>(detail::add_small<N>(MOD, 1), 2);
    Fe cand = pow(std::span<const uint64_t>(e.data(), N));
    if (cand.square() == *this) return cand;
    return std::nullopt;
  }

  // canonical (non-Montgomery) little-endian limbs
  constexpr std::array<uint64_t, N> canonical() const {
    std::array<uint64_t, N> unit{};
    unit[0] = 1;
    std::array<uint64_t, N> out{};
    detail::mont_mul<N>(out.data(), v.data(), unit.data(), MOD.data(), INV);
    return out;
  }

  constexpr uint64_t sgn0() const { return canonical()[0] & 1; }

  // lexicographic compare of canonical values (for point compression sign)
  static constexpr int cmp_canonical(const Fe& a, const Fe& b) {
    auto ca = a.canonical(), cb = b.canonical();
    return detail::cmp_limbs<N>(ca.data(), cb.data());
  }

  std::array<uint8_t, BYTES> to_bytes() const {
    auto c = canonical();
    std::array<uint8_t, BYTES> out{};
    for (size_t i = 0; i < BYTES; ++i) {
      size_t bit = 8 * (BYTES - 1 - i);
      out[i] = uint8_t(c[bit / 64] >> (bit % 64));
    }
    return out;
  }

  // big-endian canonical bytes; rejects values >= modulus
  static std::optional<Fe> from_bytes(std::span<const uint8_t> in) {
    if (in.size() != BYTES) return std::nullopt;
    Fe raw;
    for (size_t i = 0; i < BYTES; ++i) {
      size_t bit = 8 * (BYTES - 1 - i);
      raw.v[bit / 64] |= uint64_t(in[i]) << (bit % 64);
    }
    if (detail::cmp_limbs<N>(raw.v.data(), MOD.data()) >= 0) return std::nullopt;
    Fe r2;
    r2.v = R2;
    Fe out;
    detail::mont_mul<N>(out.v.data(), raw.v.data(), r2.v.data(), MOD.data(), INV);
    return out;
  }

  // big-endian bytes of up to 2N limbs, reduced mod m; used for hashing and
  // unbiased random sampling
  static Fe from_bytes_wide(std::span<const uint8_t> in) {
    if (in.size() > 2 * BYTES) throw std::invalid_argument("from_bytes_wide: input too long");
    std::array<uint64_t, 2 * N> limbs{};
    for (size_t i = 0; i < in.size(); ++i) {
      size_t bit = 8 * (in.size() - 1 - i);
      limbs[bit / 64] |= uint64_t(in[i]) << (bit % 64);
    }
    // value = hi * 2^(64N) + lo; multiply by R via R^3 and R^2 respectively
    Fe lo, hi, r2, r3;
    for (size_t i = 0; i < N; ++i) {
      lo.v[i] = limbs[i];
      hi.v[i] = limbs[N + i];
    }
    r2.v = R2;
    r3.v = R3;
    Fe a, b;
    detail::mont_mul<N>(a.v.data(), hi.v.data(), r3.v.data(), MOD.data(), INV);
    detail::mont_mul<N>(b.v.data(), lo.v.data(), r2.v.data(), MOD.data(), INV);
    return a + b;
  }
};

// base field: p = 3 mod 4, 381 bits
struct FpParams {
  static constexpr size_t N = 6;
  static constexpr std::array<uint64_t, 6> MOD = {
      0xb9feffffffffaaabULL, 0x1eabfffeb153ffffULL, 0x6730d2a0f6b0f624ULL,
      0x64774b84f38512bfULL, 0x4b1ba7b6434bacd7ULL, 0x1a0111ea397fe69aULL};
};

// scalar field: prime order of G1/G2/GT, 255 bits
struct FrParams {
  static constexpr size_t N = 4;
  static constexpr std::array<uint64_t, 4> MOD = {
      0xffffffff00000001ULL, 0x53bda402fffe5bfeULL, 0x3339d80809a1d805ULL,
      0x73eda753299d7d48ULL};
};

using Fp = Fe<FpParams>;
using Fr = Fe<FrParams>;

// curve parameter: the BLS12-381 generator polynomial is evaluated at z = -X_ABS
inline constexpr uint64_t X_ABS = 0xd201000000010000ULL;

}  // namespace elpasso::bls
