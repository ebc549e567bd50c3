#pragma once

#include "elpasso/bls12_381/biguint.hpp"
#include "elpasso/bls12_381/fields.hpp"

namespace elpasso::bls {

// generic square-and-multiply over little-endian exponent limbs
template <class T>
T pow_limbs(const T& base, std::span<const uint64_t> exp) {
  size_t top = exp.size() * 64;
  while (top > 0 && ((exp[(top - 1) / 64] >> ((top - 1) % 64)) & 1) == 0) --top;
  T result = T::one();
  for (size_t i = top; i-- > 0;) {
    result = result.square();
    if ((exp[i / 64] >> (i % 64)) & 1) result = result * base;
  }
  return result;
}

template <class T>
T pow_big(const T& base, const BigUint& e) {
  return pow_limbs(base, std::span<const uint64_t>(e.limbs.data(), e.limbs.size()));
}

// Fp2 = Fp[u] / (u^2 + 1)
struct Fp2 {
  Fp a, b;  // a + b*u

  static Fp2 zero() { return {}; }
  static Fp2 one() { return {Fp::one(), Fp::zero()}; }
  static Fp2 from_u64(uint64_t x) { return {Fp::from_u64(x), Fp::zero()}; }

  bool is_zero() const { return a.is_zero() && b.is_zero(); }
  bool operator==(const Fp2& o) const { return a == o.a && b == o.b; }

  Fp2 operator+(const Fp2& o) const { return {a + o.a, b + o.b}; }
  Fp2 operator-(const Fp2& o) const { return {a - o.a, b - o.b}; }
  Fp2 operator-() const { return {-a, -b}; }

  Fp2 operator*(const Fp2& o) const {
    // Karatsuba with u^2 = -1
    Fp t0 = a * o.a;
    Fp t1 = b * o.b;
    Fp t2 = (a + b) * (o.a + o.b);
    return {t0 - t1, t2 - t0 - t1};
  }

  Fp2 square() const { return *this * *this; }
  Fp2 dbl() const { return *this + *this; }

  Fp2 mul_fp(const Fp& s) const { return {a * s, b * s}; }

  Fp2 conj() const { return {a, -b}; }  // the p-power Frobenius on Fp2

  // (1+u) * (a+bu) = (a-b) + (a+b)u
  Fp2 mul_by_xi() const { return {a - b, a + b}; }

  Fp norm() const { return a.square() + b.square(); }

  Fp2 inverse() const {
    Fp n = norm().inverse();
    return {a * n, -(b * n)};
  }

  bool is_square() const {
    // x is a square in Fp2 iff its norm x^(p+1) is a square in Fp
    return norm().is_square();
  }

  // norm-based square root; result verified before returning
  std::optional<Fp2> sqrt() const {
    if (is_zero()) return zero();
    if (b.is_zero()) {
      if (auto r = a.sqrt()) return Fp2{*r, Fp::zero()};
      if (auto r = (-a).sqrt()) return Fp2{Fp::zero(), *r};  // (ru)^2 = -r^2 = a
      return std::nullopt;
    }
    auto s = norm().sqrt();
    if (!s) return std::nullopt;
    Fp half = Fp::from_u64(2).inverse();
    Fp t = (a + *s) * half;
    if (!t.is_square()) t = (a - *s) * half;
    auto x0 = t.sqrt();
    if (!x0) return std::nullopt;
    Fp x1 = b * half * x0->inverse();
    Fp2 cand{*x0, x1};
    if (cand.square() == *this) return cand;
    return std::nullopt;
  }
};

// the cubic/sextic non-residue used by both tower steps
inline Fp2 xi() { return {Fp::one(), Fp::one()}; }

// Fp6 = Fp2[v] / (v^3 - xi)
struct Fp6 {
  Fp2 c0, c1, c2;

  static Fp6 zero() { return {}; }
  static Fp6 one() { return {Fp2::one(), Fp2::zero(), Fp2::zero()}; }

  bool is_zero() const { return c0.is_zero() && c1.is_zero() && c2.is_zero(); }
  bool operator==(const Fp6& o) const { return c0 == o.c0 && c1 == o.c1 && c2 == o.c2; }

  Fp6 operator+(const Fp6& o) const { return {c0 + o.c0, c1 + o.c1, c2 + o.c2}; }
  Fp6 operator-(const Fp6& o) const { return {c0 - o.c0, c1 - o.c1, c2 - o.c2}; }
  Fp6 operator-() const { return {-c0, -c1, -c2}; }

  Fp6 operator*(const Fp6& o) const {
    Fp2 t00 = c0 * o.c0, t11 = c1 * o.c1, t22 = c2 * o.c2;
    Fp2 r0 = t00 + ((c1 * o.c2) + (c2 * o.c1)).mul_by_xi();
    Fp2 r1 = (c0 * o.c1) + (c1 * o.c0) + t22.mul_by_xi();
    Fp2 r2 = (c0 * o.c2) + t11 + (c2 * o.c0);
    return {r0, r1, r2};
  }

  Fp6 square() const { return *this * *this; }

  Fp6 mul_fp2(const Fp2& s) const { return {c0 * s, c1 * s, c2 * s}; }

  // multiply by v: (c0 + c1 v + c2 v^2) v = xi c2 + c0 v + c1 v^2
  Fp6 mul_by_v() const { return {c2.mul_by_xi(), c0, c1}; }

  Fp6 inverse() const {
    Fp2 A = c0.square() - (c1 * c2).mul_by_xi();
    Fp2 B = c2.square().mul_by_xi() - c0 * c1;
    Fp2 C = c1.square() - c0 * c2;
    Fp2 T = (c0 * A + ((c2 * B) + (c1 * C)).mul_by_xi()).inverse();
    return {A * T, B * T, C * T};
  }
};

// Fp12 = Fp6[w] / (w^2 - v)
struct Fp12 {
  Fp6 c0, c1;

  static Fp12 zero() { return {}; }
  static Fp12 one() { return {Fp6::one(), Fp6::zero()}; }

  bool is_zero() const { return c0.is_zero() && c1.is_zero(); }
  bool operator==(const Fp12& o) const { return c0 == o.c0 && c1 == o.c1; }

  Fp12 operator+(const Fp12& o) const { return {c0 + o.c0, c1 + o.c1}; }
  Fp12 operator-(const Fp12& o) const { return {c0 - o.c0, c1 - o.c1}; }

  Fp12 operator*(const Fp12& o) const {
    Fp6 t0 = c0 * o.c0;
    Fp6 t1 = c1 * o.c1;
    Fp6 mid = (c0 + c1) * (o.c0 + o.c1) - t0 - t1;  // c0*o.c1 + c1*o.c0
    return {t0 + t1.mul_by_v(), mid};
  }

  Fp12 square() const { return *this * *this; }

  // conjugation over Fp6; equals inversion inside the cyclotomic subgroup
  Fp12 conj() const { return {c0, -c1}; }

  Fp12 inverse() const {
    Fp6 t = (c0.square() - c1.square().mul_by_v()).inverse();
    return {c0 * t, -(c1 * t)};
  }

  // view as sum_{i<6} coeff[i] W^i over Fp2, where W^2 = v and W^6 = xi
  std::array<Fp2, 6> w_coeffs() const {
    return {c0.c0, c1.c0, c0.c1, c1.c1, c0.c2, c1.c2};
  }
  static Fp12 from_w_coeffs(const std::array<Fp2, 6>& c) {
    return {Fp6{c[0], c[2], c[4]}, Fp6{c[1], c[3], c[5]}};
  }
};

// gamma1[i] = xi^(i(p-1)/6) and gamma2[i] = xi^(i(p^2-1)/6), derived once at
// startup rather than hard-coded
struct FrobeniusTables {
  std::array<Fp2, 6> gamma1;
  std::array<Fp2, 6> gamma2;

  static const FrobeniusTables& get() {
    static const FrobeniusTables t;
    return t;
  }

 private:
  FrobeniusTables() {
    BigUint p = BigUint::from_limbs(std::span<const uint64_t>(Fp::MOD.data(), 6));
    auto [e1, rem1] = p.sub(BigUint(1)).divmod(BigUint(6));
    if (!rem1.is_zero()) throw std::logic_error("p - 1 not divisible by 6");
    auto [e2, rem2] = p.mul(p).sub(BigUint(1)).divmod(BigUint(6));
    if (!rem2.is_zero()) throw std::logic_error("p^2 - 1 not divisible by 6");
    gamma1[0] = Fp2::one();
    gamma2[0] = Fp2::one();
    Fp2 g1 = pow_big(xi(), e1);
    Fp2 g2 = pow_big(xi(), e2);
    for (int i = 1; i < 6; ++i) {
      gamma1[i] = gamma1[i - 1] * g1;
      gamma2[i] = gamma2[i - 1] * g2;
    }
  }
};

// f^p: conjugate each W-coefficient, then fold W^p = W * xi^((p-1)/6 * i)
inline Fp12 frobenius_p1(const Fp12& f) {
  const auto& t = FrobeniusTables::get();
  auto c = f.w_coeffs();
  for (int i = 0; i < 6; ++i) c[i] = c[i].conj() * t.gamma1[i];
  return Fp12::from_w_coeffs(c);
}

// f^(p^2): Fp2 coefficients are fixed, only the W powers twist
inline Fp12 frobenius_p2(const Fp12& f) {
  const auto& t = FrobeniusTables::get();
  auto c = f.w_coeffs();
  for (int i = 0; i < 6; ++i) c[i] = c[i] * t.gamma2[i];
  return Fp12::from_w_coeffs(c);
}

}  // namespace elpasso::bls
