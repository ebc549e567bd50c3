#include <catch2/catch_amalgamated.hpp>

#include "elpasso/bls12_381/tower.hpp"
#include "elpasso/rng.hpp"

using namespace elpasso::bls;
using elpasso::DeterministicRng;

namespace {

Fp random_fp(elpasso::Rng& rng) {
  std::array<uint8_t, 96> buf{};
  rng.fill(buf);
  return Fp::from_bytes_wide(buf);
}
Fp2 random_fp2(elpasso::Rng& rng) { return {random_fp(rng), random_fp(rng)}; }
Fp6 random_fp6(elpasso::Rng& rng) { return {random_fp2(rng), random_fp2(rng), random_fp2(rng)}; }
Fp12 random_fp12(elpasso::Rng& rng) { return {random_fp6(rng), random_fp6(rng)}; }

BigUint p_big() {
  return BigUint::from_limbs(std::span<const uint64_t>(Fp::MOD.data(), 6));
}

}  // namespace

TEST_CASE("tower construction is valid", "[tower]") {
  // u^2 + 1 irreducible: -1 must be a non-square in Fp (p = 3 mod 4, checked
  // in the field suite). The quadratic and cubic extensions on top require xi
  // to be neither a square nor a cube in Fp2.
  BigUint p = p_big();
  BigUint p2_1 = p.mul(p).sub(BigUint(1));
  auto [half, rem2] = p2_1.divmod(BigUint(2));
  REQUIRE(rem2.is_zero());
  auto [third, rem3] = p2_1.divmod(BigUint(3));
  REQUIRE(rem3.is_zero());
  CHECK_FALSE(pow_big(xi(), half) == Fp2::one());
  CHECK_FALSE(pow_big(xi(), third) == Fp2::one());
}

TEST_CASE("quadratic extension multiplication matches the schoolbook formula", "[tower]") {
  DeterministicRng rng("fp2-mul");
  for (int i = 0; i < 100; ++i) {
    Fp2 x = random_fp2(rng), y = random_fp2(rng);
    Fp2 z = x * y;
    CHECK(z.a == x.a * y.a - x.b * y.b);
    CHECK(z.b == x.a * y.b + x.b * y.a);
  }
}

TEST_CASE("degree-12 multiplication matches polynomial arithmetic mod W^6 - xi", "[tower]") {
  DeterministicRng rng("fp12-mul");
  for (int i = 0; i < 25; ++i) {
    Fp12 x = random_fp12(rng), y = random_fp12(rng);
    auto cx = x.w_coeffs(), cy = y.w_coeffs();
    std::array<Fp2, 11> prod{};
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) prod[a + b] = prod[a + b] + cx[a] * cy[b];
    }
    std::array<Fp2, 6> folded{};
    for (int k = 0; k < 6; ++k) folded[k] = prod[k];
    for (int k = 6; k < 11; ++k) folded[k - 6] = folded[k - 6] + prod[k].mul_by_xi();
    CHECK(Fp12::from_w_coeffs(folded) == x * y);
  }
}

TEST_CASE("w-coefficient view round-trips", "[tower]") {
  DeterministicRng rng("wcoeff");
  for (int i = 0; i < 10; ++i) {
    Fp12 x = random_fp12(rng);
    CHECK(Fp12::from_w_coeffs(x.w_coeffs()) == x);
  }
}

TEST_CASE("ring axioms hold at every tower level", "[tower]") {
  DeterministicRng rng("axioms");
  auto check = [](auto x, auto y, auto z) {
    using T = decltype(x);
    CHECK((x * y) * z == x * (y * z));
    CHECK(x * (y + z) == x * y + x * z);
    CHECK(x * y == y * x);
    CHECK(x + (y - y) == x);
    CHECK(x * T::one() == x);
  };
  for (int i = 0; i < 20; ++i) {
    check(random_fp2(rng), random_fp2(rng), random_fp2(rng));
    check(random_fp6(rng), random_fp6(rng), random_fp6(rng));
    check(random_fp12(rng), random_fp12(rng), random_fp12(rng));
  }
}

TEST_CASE("inverses at every tower level", "[tower]") {
  DeterministicRng rng("tower-inv");
  for (int i = 0; i < 20; ++i) {
    Fp2 a = random_fp2(rng);
    Fp6 b = random_fp6(rng);
    Fp12 c = random_fp12(rng);
    if (!a.is_zero()) CHECK(a * a.inverse() == Fp2::one());
    if (!b.is_zero()) CHECK(b * b.inverse() == Fp6::one());
    if (!c.is_zero()) CHECK(c * c.inverse() == Fp12::one());
  }
}

TEST_CASE("quadratic extension square roots", "[tower]") {
  DeterministicRng rng("fp2-sqrt");
  int nonsquares = 0;
  for (int i = 0; i < 50; ++i) {
    Fp2 a = random_fp2(rng);
    Fp2 sq = a.square();
    REQUIRE(sq.is_square());
    auto root = sq.sqrt();
    REQUIRE(root.has_value());
    CHECK(root->square() == sq);
    if (!a.is_square()) {
      ++nonsquares;
      CHECK_FALSE(a.sqrt().has_value());
    }
  }
  CHECK(nonsquares > 5);  // random elements are non-squares about half the time
  // subfield edge cases: b == 0 and a == 0 branches
  Fp2 real{random_fp(rng).square(), Fp::zero()};
  CHECK(real.sqrt()->square() == real);
  Fp2 imag{Fp::zero(), random_fp(rng)};
  Fp2 imag_sq = imag.square();
  CHECK(imag_sq.sqrt()->square() == imag_sq);
  CHECK(Fp2::zero().sqrt()->is_zero());
}

TEST_CASE("frobenius maps match generic exponentiation", "[tower]") {
  DeterministicRng rng("frobenius");
  BigUint p = p_big();
  BigUint p2 = p.mul(p);
  for (int i = 0; i < 5; ++i) {
    Fp12 f = random_fp12(rng);
    CHECK(frobenius_p1(f) == pow_big(f, p));
    CHECK(frobenius_p2(f) == pow_big(f, p2));
    CHECK(frobenius_p1(frobenius_p1(f)) == frobenius_p2(f));
  }
}

TEST_CASE("conjugation over the half tower gives the Fp6 norm", "[tower]") {
  DeterministicRng rng("conj");
  for (int i = 0; i < 10; ++i) {
    Fp12 f = random_fp12(rng);
    Fp12 n = f * f.conj();
    CHECK(n.c1.is_zero());
  }
}
