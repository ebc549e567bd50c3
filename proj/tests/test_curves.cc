#include <catch2/catch_amalgamated.hpp>

#include "elpasso/bls12_381/curve.hpp"
#include "elpasso/rng.hpp"

using namespace elpasso::bls;
using elpasso::DeterministicRng;

namespace {

Fr random_fr(elpasso::Rng& rng) {
  std::array<uint8_t, 64> buf{};
  rng.fill(buf);
  return Fr::from_bytes_wide(buf);
}

}  // namespace

TEMPLATE_TEST_CASE("generators have order r", "[curves]", G1, G2) {
  using G = TestType;
  const G& g = G::generator();
  CHECK_FALSE(g.is_identity());
  CHECK(g.on_curve());
  CHECK(g.in_subgroup());  // r * g == identity
  CHECK_FALSE(g.dbl().is_identity());
}

TEMPLATE_TEST_CASE("scalar multiplication matches repeated addition", "[curves]", G1, G2) {
  using G = TestType;
  const G& g = G::generator();
  G acc = G::identity();
  for (uint64_t k = 0; k < 20; ++k) {
    CHECK(g.mul(Fr::from_u64(k)) == acc);
    CHECK(g.mul_u64(k) == acc);
    acc = acc + g;
  }
}

TEMPLATE_TEST_CASE("group law basics", "[curves]", G1, G2) {
  using G = TestType;
  const G& g = G::generator();
  G o = G::identity();
  CHECK(o + o == o);
  CHECK(g + o == g);
  CHECK(o + g == g);
  CHECK(g + (-g) == o);
  CHECK(g + g == g.dbl());
  CHECK(o.on_curve());
  CHECK((-o) == o);
  // same point in different Jacobian representations
  G two_g = g.dbl();                         // Z != 1
  G two_g2 = g.mul(Fr::from_u64(5)) - g - g - g;  // different history
  CHECK(two_g == two_g2);
}

TEMPLATE_TEST_CASE("scalar multiplication is linear", "[curves]", G1, G2) {
  using G = TestType;
  DeterministicRng rng("linear");
  const G& g = G::generator();
  for (int i = 0; i < 15; ++i) {
    Fr a = random_fr(rng), b = random_fr(rng);
    CHECK(g.mul(a) + g.mul(b) == g.mul(a + b));
    CHECK(g.mul(a).mul(b) == g.mul(a * b));
  }
  CHECK(g.mul(Fr::zero()).is_identity());
  CHECK(g.mul(-Fr::one()) == -g);
}

TEMPLATE_TEST_CASE("point serialization round-trips", "[curves]", G1, G2) {
  using G = TestType;
  DeterministicRng rng("point-serial");
  for (int i = 0; i < 15; ++i) {
    G p = G::generator().mul(random_fr(rng));
    auto bytes = p.serialize();
    auto back = G::deserialize(bytes);
    REQUIRE(back.has_value());
    CHECK(*back == p);
  }
  auto id_bytes = G::identity().serialize();
  CHECK(id_bytes[0] == 0xc0);
  auto id_back = G::deserialize(id_bytes);
  REQUIRE(id_back.has_value());
  CHECK(id_back->is_identity());
}

TEMPLATE_TEST_CASE("deserialization rejects malformed encodings", "[curves]", G1, G2) {
  using G = TestType;
  auto bytes = G::generator().serialize();

  SECTION("wrong length") {
    CHECK_FALSE(G::deserialize(std::span<const uint8_t>(bytes.data(), G::BYTES - 1)).has_value());
  }
  SECTION("compression bit clear") {
    auto bad = bytes;
    bad[0] &= 0x7f;
    CHECK_FALSE(G::deserialize(bad).has_value());
    std::array<uint8_t, G::BYTES> zeros{};
    CHECK_FALSE(G::deserialize(zeros).has_value());
  }
  SECTION("infinity with trailing garbage") {
    std::array<uint8_t, G::BYTES> inf{};
    inf[0] = 0xc0;
    inf[G::BYTES - 1] = 1;
    CHECK_FALSE(G::deserialize(inf).has_value());
    inf[0] = 0xe0;  // stray sort bit on the identity
    inf[G::BYTES - 1] = 0;
    CHECK_FALSE(G::deserialize(inf).has_value());
  }
  SECTION("coordinate above the field modulus") {
    std::array<uint8_t, G::BYTES> bad{};
    for (size_t i = 0; i < 48; ++i) {
      size_t bit = 8 * (47 - i);
      bad[i] = uint8_t(Fp::MOD[bit / 64] >> (bit % 64));
    }
    bad[0] |= 0x80;
    CHECK_FALSE(G::deserialize(bad).has_value());
  }
  SECTION("sort bit flip decodes to the negated point") {
    auto flipped = bytes;
    flipped[0] ^= 0x20;
    auto back = G::deserialize(flipped);
    REQUIRE(back.has_value());
    CHECK(*back == -G::generator());
  }
}

TEST_CASE("deserialization rejects x without a matching y", "[curves]") {
  // find a small x where x^3 + 4 is a non-residue
  for (uint64_t xv = 1;; ++xv) {
    Fp x = Fp::from_u64(xv);
    if ((x.square() * x + G1::b()).is_square()) continue;
    auto bytes = x.to_bytes();
    bytes[0] |= 0x80;
    CHECK_FALSE(G1::deserialize(bytes).has_value());
    break;
  }
}

TEST_CASE("deserialization rejects curve points outside the r-order subgroup", "[curves]") {
  // find a small x that is on the curve; with cofactor ~10^37 it will not be
  // in the prime-order subgroup
  for (uint64_t xv = 1;; ++xv) {
    Fp x = Fp::from_u64(xv);
    auto y = (x.square() * x + G1::b()).sqrt();
    if (!y) continue;
    G1 raw{x, *y, Fp::one()};
    REQUIRE(raw.on_curve());
    REQUIRE_FALSE(raw.in_subgroup());
    CHECK_FALSE(G1::deserialize(raw.serialize()).has_value());
    break;
  }
}

TEST_CASE("random byte strings do not decode", "[curves]") {
  DeterministicRng rng("fuzz-points");
  int decoded = 0;
  for (int i = 0; i < 200; ++i) {
    std::array<uint8_t, G1::BYTES> buf{};
    rng.fill(buf);
    if (G1::deserialize(buf).has_value()) ++decoded;
  }
  // hitting the subgroup by chance has probability ~2^-125
  CHECK(decoded == 0);
}

TEMPLATE_TEST_CASE("multi-scalar multiplication matches the naive sum", "[curves]", G1, G2) {
  using G = TestType;
  DeterministicRng rng("msm");
  for (size_t n = 0; n <= 6; ++n) {
    std::vector<G> points;
    std::vector<Fr> scalars;
    for (size_t i = 0; i < n; ++i) {
      points.push_back(G::generator().mul(random_fr(rng)));
      scalars.push_back(random_fr(rng));
    }
    G naive = G::identity();
    for (size_t i = 0; i < n; ++i) naive = naive + points[i].mul(scalars[i]);
    CHECK(curve_multi_mul<G>(points, scalars) == naive);
  }
  std::vector<G> one_point{G::generator()};
  std::vector<Fr> no_scalars;
  CHECK_THROWS_AS(curve_multi_mul<G>(one_point, no_scalars), std::invalid_argument);
}
