#include <catch2/catch_amalgamated.hpp>

#include "elpasso/bls12_381/pairing.hpp"
#include "elpasso/rng.hpp"

using namespace elpasso::bls;
using elpasso::DeterministicRng;

namespace {

Fr random_fr(elpasso::Rng& rng) {
  std::array<uint8_t, 64> buf{};
  rng.fill(buf);
  return Fr::from_bytes_wide(buf);
}

Fp12 random_fp12(elpasso::Rng& rng) {
  auto fp = [&] {
    std::array<uint8_t, 96> buf{};
    rng.fill(buf);
    return Fp::from_bytes_wide(buf);
  };
  auto fp2 = [&] { return Fp2{fp(), fp()}; };
  auto fp6 = [&] { return Fp6{fp2(), fp2(), fp2()}; };
  return Fp12{fp6(), fp6()};
}

Fp12 gt_pow(const Fp12& base, const Fr& e) {
  auto c = e.canonical();
  return pow_limbs(base, std::span<const uint64_t>(c.data(), c.size()));
}

BigUint p_big() { return BigUint::from_limbs(std::span<const uint64_t>(Fp::MOD.data(), 6)); }
BigUint r_big() { return BigUint::from_limbs(std::span<const uint64_t>(Fr::MOD.data(), 4)); }

}  // namespace

TEST_CASE("hard exponent decomposition holds over the integers", "[pairing]") {
  BigUint p = p_big(), r = r_big(), z(X_ABS);
  BigUint p2 = p.mul(p);
  BigUint d = detail::hard_exponent();
  CHECK(d.mul(r) == p2.mul(p2).sub(p2).add(BigUint(1)));
  // 3d = (z-1)^2 (z+p) (z^2+p^2-1) + 3 with z = -X_ABS, all factors positive
  BigUint zp1 = z.add(BigUint(1));
  BigUint rhs = zp1.mul(zp1).mul(p.sub(z)).mul(z.mul(z).add(p2).sub(BigUint(1))).add(BigUint(3));
  CHECK(BigUint(3).mul(d) == rhs);
}

TEST_CASE("production final exponentiation cubes the generic one", "[pairing]") {
  DeterministicRng rng("finalexp");
  for (int i = 0; i < 3; ++i) {
    Fp12 f = random_fp12(rng);
    Fp12 generic = final_exp_generic(f);
    CHECK(final_exp(f) == generic * generic * generic);
  }
}

TEST_CASE("pairing is non-degenerate and lands in the r-order subgroup", "[pairing]") {
  Fp12 e = ate_pairing(G1::generator(), G2::generator());
  CHECK_FALSE(e == Fp12::one());
  CHECK(pow_big(e, r_big()) == Fp12::one());
  // identity in either slot gives the neutral element
  CHECK(ate_pairing(G1::identity(), G2::generator()) == Fp12::one());
  CHECK(ate_pairing(G1::generator(), G2::identity()) == Fp12::one());
}

TEST_CASE("pairing is bilinear", "[pairing]") {
  DeterministicRng rng("bilinear");
  const G1& g1 = G1::generator();
  const G2& g2 = G2::generator();
  Fp12 base = ate_pairing(g1, g2);
  for (int i = 0; i < 10; ++i) {
    Fr a = random_fr(rng), b = random_fr(rng);
    CHECK(ate_pairing(g1.mul(a), g2.mul(b)) == gt_pow(base, a * b));
  }
  // additivity in each slot
  Fr a = random_fr(rng), b = random_fr(rng);
  G1 pa = g1.mul(a), pb = g1.mul(b);
  CHECK(ate_pairing(pa + pb, g2) == ate_pairing(pa, g2) * ate_pairing(pb, g2));
  G2 qa = g2.mul(a), qb = g2.mul(b);
  CHECK(ate_pairing(g1, qa + qb) == ate_pairing(g1, qa) * ate_pairing(g1, qb));
}

TEST_CASE("product pairing matches the product of single pairings", "[pairing]") {
  DeterministicRng rng("product");
  std::vector<std::pair<G1, G2>> pairs;
  Fp12 expected = Fp12::one();
  for (int i = 0; i < 3; ++i) {
    G1 p = G1::generator().mul(random_fr(rng));
    G2 q = G2::generator().mul(random_fr(rng));
    pairs.emplace_back(p, q);
    expected = expected * ate_pairing(p, q);
  }
  pairs.emplace_back(G1::identity(), G2::generator());  // must be a no-op
  CHECK(ate_pairing_product(pairs) == expected);
}

TEST_CASE("pairing equality helper", "[pairing]") {
  DeterministicRng rng("paircheck");
  Fr a = random_fr(rng);
  // e(a g1, g2) == e(g1, a g2)
  CHECK(ate_pairing_equal(G1::generator().mul(a), G2::generator(), G1::generator(),
                      G2::generator().mul(a)));
  CHECK_FALSE(ate_pairing_equal(G1::generator().mul(a), G2::generator(), G1::generator(),
                            G2::generator().mul(a + Fr::one())));
}
