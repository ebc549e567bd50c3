#pragma once

#include "elpasso/bls12_381/curve.hpp"

#include <utility>
#include <vector>

namespace elpasso::bls {

namespace detail {

// T accumulator of the Miller loop, kept in affine coordinates on the twist
struct TwistAffine {
  Fp2 x, y;
};

// A line through points of the (untwisted) curve, evaluated at a G1 point and
// pre-multiplied by xi so every coefficient stays in Fp2. In the W-power view
// of Fp12 only the W^0, W^3 and W^5 slots are populated:
//   xi*yP + (lambda*xT - yT) W^3 - lambda*xP W^5
// The dropped xi factor lies in a proper subfield, so the final exponentiation
// erases it.
struct Line {
  Fp2 c0, c3, c5;
};

inline Fp12 mul_by_line(const Fp12& f, const Line& l) {
  Fp12 sparse = Fp12::from_w_coeffs({l.c0, Fp2::zero(), Fp2::zero(), l.c3, Fp2::zero(), l.c5});
  return f * sparse;
}

inline Line line_through(const TwistAffine& t, const Fp2& lambda, const Fp& xp, const Fp& yp) {
  return {xi().mul_fp(yp), lambda * t.x - t.y, -(lambda.mul_fp(xp))};
}

// tangent step: T <- 2T, returning the tangent line at the old T
inline Line dbl_step(TwistAffine& t, const Fp& xp, const Fp& yp) {
  Fp2 x2 = t.x.square();
  Fp2 lambda = (x2 + x2 + x2) * t.y.dbl().inverse();
  Line l = line_through(t, lambda, xp, yp);
  Fp2 x3 = lambda.square() - t.x.dbl();
  t.y = lambda * (t.x - x3) - t.y;
  t.x = x3;
  return l;
}

// chord step: T <- T + Q, returning the line through T and Q
inline Line add_step(TwistAffine& t, const TwistAffine& q, const Fp& xp, const Fp& yp) {
  Fp2 lambda = (q.y - t.y) * (q.x - t.x).inverse();
  Line l = line_through(t, lambda, xp, yp);
  Fp2 x3 = lambda.square() - t.x - q.x;
  t.y = lambda * (t.x - x3) - t.y;
  t.x = x3;
  return l;
}

}  // namespace detail

// Product Miller loop over the ate parameter |z|; pairs with an identity on
// either side contribute the neutral element and are skipped. The shared
// squaring of f is what makes multi-pair products cheaper than separate
// pairings.
inline Fp12 miller_loop(std::span<const std::pair<G1, G2>> pairs) {
  struct Item {
    Fp xp, yp;
    detail::TwistAffine q, t;
  };
  std::vector<Item> items;
  items.reserve(pairs.size());
  for (const auto& [p, q] : pairs) {
    if (p.is_identity() || q.is_identity()) continue;
    auto [xp, yp] = p.affine();
    auto [xq, yq] = q.affine();
    detail::TwistAffine qa{xq, yq};
    items.push_back({xp, yp, qa, qa});
  }
  Fp12 f = Fp12::one();
  if (items.empty()) return f;
  for (int i = 62; i >= 0; --i) {
    f = f.square();
    for (auto& it : items) f = mul_by_line(f, detail::dbl_step(it.t, it.xp, it.yp));
    if ((X_ABS >> i) & 1) {
      for (auto& it : items) f = mul_by_line(f, detail::add_step(it.t, it.q, it.xp, it.yp));
    }
  }
  return f.conj();  // the curve parameter z is negative
}

namespace detail {

// x^|z| followed by conjugation; inside the cyclotomic subgroup conjugation
// is inversion, so this computes x^z
inline Fp12 pow_z(const Fp12& x) {
  Fp12 acc = Fp12::one();
  for (int i = 63; i >= 0; --i) {
    acc = acc.square();
    if ((X_ABS >> i) & 1) acc = acc * x;
  }
  return acc.conj();
}

inline Fp12 final_exp_easy(const Fp12& f) {
  Fp12 m = f.conj() * f.inverse();  // f^(p^6 - 1)
  return frobenius_p2(m) * m;       // ^(p^2 + 1)
}

// d = (p^4 - p^2 + 1) / r, the hard exponent; derived once and checked for
// exact divisibility
inline const BigUint& hard_exponent() {
  static const BigUint d = [] {
    BigUint p = BigUint::from_limbs(std::span<const uint64_t>(Fp::MOD.data(), 6));
    BigUint r = BigUint::from_limbs(std::span<const uint64_t>(Fr::MOD.data(), 4));
    BigUint p2 = p.mul(p);
    BigUint num = p2.mul(p2).sub(p2).add(BigUint(1));
    auto [q, rem] = num.divmod(r);
    if (!rem.is_zero()) throw std::logic_error("pairing exponent not divisible by r");
    return q;
  }();
  return d;
}

}  // namespace detail

// Reference final exponentiation: raises straight to (p^6-1)(p^2+1)d. Slow;
// kept as the oracle for the production chain below.
inline Fp12 final_exp_generic(const Fp12& f) {
  return pow_big(detail::final_exp_easy(f), detail::hard_exponent());
}

// Production final exponentiation. The hard part uses the decomposition
//   3d = (z-1)^2 (z+p) (z^2 + p^2 - 1) + 3
// so the result is the generic one cubed: still a non-degenerate bilinear
// pairing (3 is invertible mod r), at a quarter of the cost. The test suite
// checks both the integer identity and the functional equivalence.
inline Fp12 final_exp(const Fp12& f) {
  using detail::pow_z;
  Fp12 m = detail::final_exp_easy(f);
  Fp12 a = pow_z(m) * m.conj();                            // m^(z-1)
  a = pow_z(a) * a.conj();                                 // m^((z-1)^2)
  Fp12 b = pow_z(a) * frobenius_p1(a);                     // ^(z+p)
  Fp12 c = pow_z(pow_z(b)) * frobenius_p2(b) * b.conj();   // ^(z^2+p^2-1)
  return c * m * m * m;
}

inline Fp12 ate_pairing(const G1& p, const G2& q) {
  std::pair<G1, G2> pq{p, q};
  return final_exp(miller_loop(std::span<const std::pair<G1, G2>>(&pq, 1)));
}

inline Fp12 ate_pairing_product(std::span<const std::pair<G1, G2>> pairs) {
  return final_exp(miller_loop(pairs));
}

// e(a1, a2) == e(b1, b2), evaluated as one product with the first argument
// negated
inline bool ate_pairing_equal(const G1& a1, const G2& a2, const G1& b1, const G2& b2) {
  std::array<std::pair<G1, G2>, 2> pairs{{{-a1, a2}, {b1, b2}}};
  return ate_pairing_product(pairs) == Fp12::one();
}

}  // namespace elpasso::bls
