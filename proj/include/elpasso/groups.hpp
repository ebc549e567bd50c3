#pragma once

#include "elpasso/bls12_381/hash_to_curve.hpp"
#include "elpasso/bls12_381/pairing.hpp"
#include "elpasso/rng.hpp"

#include <string_view>

namespace elpasso {

// Bilinear-group facade. Everything above this header talks only in terms of
// Scalar, G1, G2, GT and PublicParams; the curve lives below it.

using Scalar = bls::Fr;
using G1 = bls::G1;
using G2 = bls::G2;

struct GT {
  bls::Fp12 v = bls::Fp12::one();

  static GT identity() { return {}; }
  bool is_identity() const { return v == bls::Fp12::one(); }
  bool operator==(const GT& o) const { return v == o.v; }
  GT operator*(const GT& o) const { return {v * o.v}; }

  GT pow(const Scalar& k) const {
    auto c = k.canonical();
    return {bls::pow_limbs(v, std::span<const uint64_t>(c.data(), c.size()))};
  }

  static constexpr size_t BYTES = 576;

  // twelve base-field coordinates in structural order (c0 before c1 at every
  // tower level, real part before the u coefficient)
  std::array<uint8_t, BYTES> serialize() const {
    std::array<uint8_t, BYTES> out{};
    const bls::Fp2* coords[6] = {&v.c0.c0, &v.c0.c1, &v.c0.c2, &v.c1.c0, &v.c1.c1, &v.c1.c2};
    size_t off = 0;
    for (const auto* c2 : coords) {
      auto a = c2->a.to_bytes();
      auto b = c2->b.to_bytes();
      std::copy(a.begin(), a.end(), out.begin() + off);
      std::copy(b.begin(), b.end(), out.begin() + off + 48);
      off += 96;
    }
    return out;
  }

  // rejects non-canonical coordinates and anything outside the r-order
  // subgroup of the multiplicative group
  static std::optional<GT> deserialize(std::span<const uint8_t> in) {
    if (in.size() != BYTES) return std::nullopt;
    bls::Fp12 f;
    bls::Fp2* coords[6] = {&f.c0.c0, &f.c0.c1, &f.c0.c2, &f.c1.c0, &f.c1.c1, &f.c1.c2};
    size_t off = 0;
    for (auto* c2 : coords) {
      auto a = bls::Fp::from_bytes(in.subspan(off, 48));
      auto b = bls::Fp::from_bytes(in.subspan(off + 48, 48));
      if (!a || !b) return std::nullopt;
      c2->a = *a;
      c2->b = *b;
      off += 96;
    }
    if (!(bls::pow_limbs(f, std::span<const uint64_t>(Scalar::MOD.data(), Scalar::N)) ==
          bls::Fp12::one())) {
      return std::nullopt;
    }
    return GT{f};
  }
};

struct PublicParams {
  G1 g;
  G2 g_tilde;

  static constexpr size_t SCALAR_BYTES = Scalar::BYTES;  // 32
  static constexpr size_t G1_BYTES = G1::BYTES;          // 48
  static constexpr size_t G2_BYTES = G2::BYTES;          // 96
  static constexpr size_t GT_BYTES = GT::BYTES;          // 576

  std::vector<uint8_t> serialize() const {
    std::vector<uint8_t> out;
    auto gb = g.serialize();
    auto hb = g_tilde.serialize();
    out.insert(out.end(), gb.begin(), gb.end());
    out.insert(out.end(), hb.begin(), hb.end());
    return out;
  }
};

// Deterministic: the generators are the fixed standard ones, so every party
// derives bit-identical parameters. Only the 128-bit level is wired up.
inline PublicParams setup(unsigned security_level) {
  if (security_level != 128) {
    throw std::invalid_argument("setup: unsupported security level");
  }
  return {G1::generator(), G2::generator()};
}

template <class G>
G exp(const G& base, const Scalar& k) {
  return base.mul(k);
}
inline GT exp(const GT& base, const Scalar& k) { return base.pow(k); }

template <class G>
G multi_exp(std::span<const G> bases, std::span<const Scalar> scalars) {
  if (bases.size() != scalars.size()) {
    throw std::invalid_argument("multi_exp: length mismatch");
  }
  if (bases.empty()) return G::identity();
  return bls::curve_multi_mul(bases, scalars);
}

inline GT pairing(const G1& p, const G2& q) { return {bls::ate_pairing(p, q)}; }

inline GT pairing_product(std::span<const std::pair<G1, G2>> pairs) {
  return {bls::ate_pairing_product(pairs)};
}

inline bool pairing_equal(const G1& a1, const G2& a2, const G1& b1, const G2& b2) {
  return bls::ate_pairing_equal(a1, a2, b1, b2);
}

namespace detail {
inline std::span<const uint8_t> str_bytes(std::string_view s) {
  return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}
}  // namespace detail

inline constexpr std::string_view HASH_TO_G1_DST = "ELPASSO-V1-BLS12381G1-XMD-SHA256-SVDW-RO";

inline G1 hash_to_g1(std::span<const uint8_t> input) {
  return bls::hash_to_g1(input, detail::str_bytes(HASH_TO_G1_DST));
}
inline G1 hash_to_g1(std::string_view input) { return hash_to_g1(detail::str_bytes(input)); }

// uniform scalar via an oversized draw
inline Scalar random_scalar(Rng& rng) {
  std::array<uint8_t, 64> buf{};
  rng.fill(buf);
  return Scalar::from_bytes_wide(buf);
}

inline Scalar random_nonzero_scalar(Rng& rng) {
  for (;;) {
    Scalar s = random_scalar(rng);
    if (!s.is_zero()) return s;
  }
}

// scalar from a SHA-512 digest of the input; the doubled width removes
// reduction bias
inline Scalar hash_to_scalar(std::span<const uint8_t> input) {
  ensure_sodium();
  std::array<uint8_t, crypto_hash_sha512_BYTES> digest{};
  crypto_hash_sha512(digest.data(), input.data(), input.size());
  return Scalar::from_bytes_wide(digest);
}
inline Scalar hash_to_scalar(std::string_view input) {
  return hash_to_scalar(detail::str_bytes(input));
}

}  // namespace elpasso
