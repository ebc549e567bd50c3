#pragma once

#include "elpasso/bls12_381/tower.hpp"
#include "elpasso/hex.hpp"

#include <vector>

namespace elpasso::bls {

// Shared Jacobian point arithmetic for short Weierstrass curves with a = 0.
// P is a point struct with fields X, Y, Z of some tower field; Z == 0 marks
// the identity. Formulas are the standard dbl-2009-l and add-2007-bl.

template <class P>
P curve_dbl(const P& pt) {
  if (pt.Z.is_zero()) return pt;
  auto A = pt.X.square();
  auto B = pt.Y.square();
  auto C = B.square();
  auto D = ((pt.X + B).square() - A - C).dbl();
  auto E = A + A + A;
  auto F = E.square();
  P out;
  out.X = F - D.dbl();
  out.Y = E * (D - out.X) - C.dbl().dbl().dbl();
  out.Z = (pt.Y * pt.Z).dbl();
  return out;
}

template <class P>
P curve_add(const P& a, const P& b) {
  if (a.Z.is_zero()) return b;
  if (b.Z.is_zero()) return a;
  auto Z1Z1 = a.Z.square();
  auto Z2Z2 = b.Z.square();
  auto U1 = a.X * Z2Z2;
  auto U2 = b.X * Z1Z1;
  auto S1 = a.Y * b.Z * Z2Z2;
  auto S2 = b.Y * a.Z * Z1Z1;
  auto H = U2 - U1;
  auto rr = (S2 - S1).dbl();
  if (H.is_zero()) {
    if (rr.is_zero()) return curve_dbl(a);
    return P{};  // P + (-P)
  }
  auto I = H.dbl().square();
  auto J = H * I;
  auto V = U1 * I;
  P out;
  out.X = rr.square() - J - V.dbl();
  out.Y = rr * (V - out.X) - (S1 * J).dbl();
  out.Z = ((a.Z + b.Z).square() - Z1Z1 - Z2Z2) * H;
  return out;
}

template <class P>
bool curve_eq(const P& a, const P& b) {
  bool ia = a.Z.is_zero(), ib = b.Z.is_zero();
  if (ia || ib) return ia == ib;
  auto Z1Z1 = a.Z.square();
  auto Z2Z2 = b.Z.square();
  if (!(a.X * Z2Z2 == b.X * Z1Z1)) return false;
  return a.Y * Z2Z2 * b.Z == b.Y * Z1Z1 * a.Z;
}

template <class P>
P curve_mul(const P& pt, std::span<const uint64_t> scalar) {
  size_t top = scalar.size() * 64;
  while (top > 0 && ((scalar[(top - 1) / 64] >> ((top - 1) % 64)) & 1) == 0) --top;
  P acc{};
  for (size_t i = top; i-- > 0;) {
    acc = curve_dbl(acc);
    if ((scalar[i / 64] >> (i % 64)) & 1) acc = curve_add(acc, pt);
  }
  return acc;
}

// Interleaved fixed-window multi-scalar multiplication (Straus). The naive
// per-term fallback in the tests doubles as its oracle.
template <class P>
P curve_multi_mul(std::span<const P> points, std::span<const Fr> scalars) {
  if (points.size() != scalars.size()) {
    throw std::invalid_argument("multi_mul: size mismatch");
  }
  constexpr size_t W = 4;
  size_t n = points.size();
  std::vector<std::array<P, (1 << W)>> tables(n);
  for (size_t t = 0; t < n; ++t) {
    tables[t][0] = P{};
    for (size_t k = 1; k < (1 << W); ++k) {
      tables[t][k] = curve_add(tables[t][k - 1], points[t]);
    }
  }
  std::vector<std::array<uint64_t, Fr::N>> exps(n);
  for (size_t t = 0; t < n; ++t) exps[t] = scalars[t].canonical();
  P acc{};
  for (size_t win = (64 * Fr::N) / W; win-- > 0;) {
    for (size_t s = 0; s < W; ++s) acc = curve_dbl(acc);
    for (size_t t = 0; t < n; ++t) {
      size_t bit = win * W;
      uint64_t nib = (exps[t][bit / 64] >> (bit % 64)) & ((1 << W) - 1);
      if (nib != 0) acc = curve_add(acc, tables[t][nib]);
    }
  }
  return acc;
}

namespace detail {

// flag bits of the 48/96-byte compressed encodings
inline constexpr uint8_t FLAG_COMPRESSED = 0x80;
inline constexpr uint8_t FLAG_INFINITY = 0x40;
inline constexpr uint8_t FLAG_SORT = 0x20;

}  // namespace detail

// G1: points of order r on y^2 = x^3 + 4 over Fp
struct G1 {
  Fp X = Fp::zero(), Y = Fp::one(), Z = Fp::zero();

  static Fp b() { return Fp::from_u64(4); }

  static G1 identity() { return {}; }

  static const G1& generator() {
    static const G1 g = [] {
      auto x = from_hex(
          "17f1d3a73197d7942695638c4fa9ac0fc3688c4f9774b905a14e3a3f171bac58"
          "6c55e83ff97a1aeffb3af00adb22c6bb");
      auto y = from_hex(
          "08b3f481e3aaa0f1a09e30ed741d8ae4fcf5e095d5d00af600db18cb2c04b3ed"
          "d03cc744a2888ae40caa232946c5e7e1");
      G1 g1{Fp::from_bytes(*x).value(), Fp::from_bytes(*y).value(), Fp::one()};
      if (!g1.on_curve()) throw std::logic_error("bad G1 generator constant");
      return g1;
    }();
    return g;
  }

  bool is_identity() const { return Z.is_zero(); }

  G1 dbl() const { return curve_dbl(*this); }
  G1 operator+(const G1& o) const { return curve_add(*this, o); }
  G1 operator-() const { return {X, -Y, Z}; }
  G1 operator-(const G1& o) const { return *this + (-o); }
  bool operator==(const G1& o) const { return curve_eq(*this, o); }

  G1 mul(const Fr& k) const {
    auto c = k.canonical();
    return curve_mul(*this, std::span<const uint64_t>(c.data(), c.size()));
  }
  G1 mul_u64(uint64_t k) const {
    return curve_mul(*this, std::span<const uint64_t>(&k, 1));
  }

  std::pair<Fp, Fp> affine() const {
    if (is_identity()) throw std::logic_error("affine() on the identity");
    Fp zi = Z.inverse();
    Fp zi2 = zi.square();
    return {X * zi2, Y * zi2 * zi};
  }

  bool on_curve() const {
    if (is_identity()) return true;
    auto [x, y] = affine();
    return y.square() == x.square() * x + b();
  }

  bool in_subgroup() const {
    return curve_mul(*this, std::span<const uint64_t>(Fr::MOD.data(), Fr::N)).is_identity();
  }

  static constexpr size_t BYTES = 48;

  std::array<uint8_t, BYTES> serialize() const {
    std::array<uint8_t, BYTES> out{};
    if (is_identity()) {
      out[0] = detail::FLAG_COMPRESSED | detail::FLAG_INFINITY;
      return out;
    }
    auto [x, y] = affine();
    out = x.to_bytes();
    out[0] |= detail::FLAG_COMPRESSED;
    if (Fp::cmp_canonical(y, -y) > 0) out[0] |= detail::FLAG_SORT;
    return out;
  }

  // rejects malformed encodings, off-curve x, and points outside the r-order
  // subgroup; this is the only path from untrusted bytes to a G1 value
  static std::optional<G1> deserialize(std::span<const uint8_t> in) {
    if (in.size() != BYTES) return std::nullopt;
    uint8_t flags = in[0];
    if (!(flags & detail::FLAG_COMPRESSED)) return std::nullopt;
    if (flags & detail::FLAG_INFINITY) {
      if (flags != (detail::FLAG_COMPRESSED | detail::FLAG_INFINITY)) return std::nullopt;
      for (size_t i = 1; i < BYTES; ++i) {
        if (in[i] != 0) return std::nullopt;
      }
      return identity();
    }
    std::array<uint8_t, BYTES> xb{};
    std::copy(in.begin(), in.end(), xb.begin());
    xb[0] &= 0x1f;
    auto x = Fp::from_bytes(xb);
    if (!x) return std::nullopt;
    auto y = (x->square() * *x + b()).sqrt();
    if (!y) return std::nullopt;
    bool big = Fp::cmp_canonical(*y, -*y) > 0;
    if (big != bool(flags & detail::FLAG_SORT)) *y = -*y;
    G1 out{*x, *y, Fp::one()};
    if (!out.in_subgroup()) return std::nullopt;
    return out;
  }
};

// G2: points of order r on the sextic twist y^2 = x^3 + 4(1+u) over Fp2
struct G2 {
  Fp2 X = Fp2::zero(), Y = Fp2::one(), Z = Fp2::zero();

  static Fp2 b() { return xi().mul_fp(Fp::from_u64(4)); }

  static G2 identity() { return {}; }

  static const G2& generator() {
    static const G2 g = [] {
      auto xc0 = from_hex(
          "024aa2b2f08f0a91260805272dc51051c6e47ad4fa403b02b4510b647ae3d177"
          "0bac0326a805bbefd48056c8c121bdb8");
      auto xc1 = from_hex(
          "13e02b6052719f607dacd3a088274f65596bd0d09920b61ab5da61bbdc7f5049"
          "334cf11213945d57e5ac7d055d042b7e");
      auto yc0 = from_hex(
          "0ce5d527727d6e118cc9cdc6da2e351aadfd9baa8cbdd3a76d429a695160d12c"
          "923ac9cc3baca289e193548608b82801");
      auto yc1 = from_hex(
          "0606c4a02ea734cc32acd2b02bc28b99cb3e287e85a763af267492ab572e99ab"
          "3f370d275cec1da1aaa9075ff05f79be");
      G2 g2{{Fp::from_bytes(*xc0).value(), Fp::from_bytes(*xc1).value()},
            {Fp::from_bytes(*yc0).value(), Fp::from_bytes(*yc1).value()},
            Fp2::one()};
      if (!g2.on_curve()) throw std::logic_error("bad G2 generator constant");
      return g2;
    }();
    return g;
  }

  bool is_identity() const { return Z.is_zero(); }

  G2 dbl() const { return curve_dbl(*this); }
  G2 operator+(const G2& o) const { return curve_add(*this, o); }
  G2 operator-() const { return {X, -Y, Z}; }
  G2 operator-(const G2& o) const { return *this + (-o); }
  bool operator==(const G2& o) const { return curve_eq(*this, o); }

  G2 mul(const Fr& k) const {
    auto c = k.canonical();
    return curve_mul(*this, std::span<const uint64_t>(c.data(), c.size()));
  }
  G2 mul_u64(uint64_t k) const {
    return curve_mul(*this, std::span<const uint64_t>(&k, 1));
  }

  std::pair<Fp2, Fp2> affine() const {
    if (is_identity()) throw std::logic_error("affine() on the identity");
    Fp2 zi = Z.inverse();
    Fp2 zi2 = zi.square();
    return {X * zi2, Y * zi2 * zi};
  }

  bool on_curve() const {
    if (is_identity()) return true;
    auto [x, y] = affine();
    return y.square() == x.square() * x + b();
  }

  bool in_subgroup() const {
    return curve_mul(*this, std::span<const uint64_t>(Fr::MOD.data(), Fr::N)).is_identity();
  }

  // lexicographic order on Fp2: compare the u coefficient first
  static int cmp_lex(const Fp2& l, const Fp2& r) {
    int c = Fp::cmp_canonical(l.b, r.b);
    if (c != 0) return c;
    return Fp::cmp_canonical(l.a, r.a);
  }

  static constexpr size_t BYTES = 96;

  std::array<uint8_t, BYTES> serialize() const {
    std::array<uint8_t, BYTES> out{};
    if (is_identity()) {
      out[0] = detail::FLAG_COMPRESSED | detail::FLAG_INFINITY;
      return out;
    }
    auto [x, y] = affine();
    auto c1 = x.b.to_bytes();  // u coefficient leads on the wire
    auto c0 = x.a.to_bytes();
    std::copy(c1.begin(), c1.end(), out.begin());
    std::copy(c0.begin(), c0.end(), out.begin() + 48);
    out[0] |= detail::FLAG_COMPRESSED;
    if (cmp_lex(y, -y) > 0) out[0] |= detail::FLAG_SORT;
    return out;
  }

  static std::optional<G2> deserialize(std::span<const uint8_t> in) {
    if (in.size() != BYTES) return std::nullopt;
    uint8_t flags = in[0];
    if (!(flags & detail::FLAG_COMPRESSED)) return std::nullopt;
    if (flags & detail::FLAG_INFINITY) {
      if (flags != (detail::FLAG_COMPRESSED | detail::FLAG_INFINITY)) return std::nullopt;
      for (size_t i = 1; i < BYTES; ++i) {
        if (in[i] != 0) return std::nullopt;
      }
      return identity();
    }
    std::array<uint8_t, 48> c1{}, c0{};
    std::copy(in.begin(), in.begin() + 48, c1.begin());
    std::copy(in.begin() + 48, in.end(), c0.begin());
    c1[0] &= 0x1f;
    auto xb = Fp::from_bytes(c1);
    auto xa = Fp::from_bytes(c0);
    if (!xa || !xb) return std::nullopt;
    Fp2 x{*xa, *xb};
    auto y = (x.square() * x + b()).sqrt();
    if (!y) return std::nullopt;
    bool big = cmp_lex(*y, -*y) > 0;
    if (big != bool(flags & detail::FLAG_SORT)) *y = -*y;
    G2 out{x, *y, Fp2::one()};
    if (!out.in_subgroup()) return std::nullopt;
    return out;
  }
};

// the G1 cofactor shortcut 1 - z, enough to clear into the r-order subgroup
inline constexpr uint64_t G1_H_EFF = X_ABS + 1;

}  // namespace elpasso::bls
