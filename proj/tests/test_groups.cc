#include <catch2/catch_amalgamated.hpp>

#include "elpasso/groups.hpp"

#include <set>
#include <string>

using namespace elpasso;

namespace {

DeterministicRng& test_rng() {
  static DeterministicRng rng("groups-suite");
  return rng;
}

}  // namespace

TEST_CASE("setup is deterministic and rejects unknown levels", "[groups]") {
  PublicParams p1 = setup(128);
  PublicParams p2 = setup(128);
  CHECK(p1.serialize() == p2.serialize());
  CHECK(PublicParams::SCALAR_BYTES == 32);
  CHECK(PublicParams::G1_BYTES == 48);
  CHECK(PublicParams::G2_BYTES == 96);
  CHECK_FALSE(p1.g.is_identity());
  CHECK_FALSE(p1.g_tilde.is_identity());
  CHECK_THROWS_AS(setup(9999), std::invalid_argument);
  CHECK_THROWS_AS(setup(0), std::invalid_argument);
}

TEST_CASE("exponentiation respects the group law", "[groups]") {
  auto params = setup(128);
  CHECK(exp(params.g, Scalar::zero()).is_identity());
  CHECK(exp(params.g_tilde, Scalar::zero()).is_identity());
  Scalar a = Scalar::from_u64(3), b = Scalar::from_u64(5);
  CHECK(exp(exp(params.g, a), b) == exp(params.g, a * b));
  CHECK(exp(exp(params.g_tilde, a), b) == exp(params.g_tilde, a * b));
  GT base = pairing(params.g, params.g_tilde);
  CHECK(exp(base, Scalar::zero()).is_identity());
}

TEMPLATE_TEST_CASE("multi-exponentiation folds correctly", "[groups]", G1, G2) {
  using G = TestType;
  auto params = setup(128);
  const G& g = [&]() -> const G& {
    if constexpr (std::is_same_v<G, G1>) return params.g;
    else return params.g_tilde;
  }();

  CHECK(multi_exp<G>({}, {}).is_identity());

  Scalar a = random_scalar(test_rng()), b = random_scalar(test_rng());
  std::vector<G> two_g{g, g};
  std::vector<Scalar> ab{a, b};
  CHECK(multi_exp<G>(two_g, ab) == exp(g, a + b));

  // random 5-term instance against the naive fold
  std::vector<G> bases;
  std::vector<Scalar> scalars;
  G naive = G::identity();
  for (int i = 0; i < 5; ++i) {
    bases.push_back(exp(g, random_scalar(test_rng())));
    scalars.push_back(random_scalar(test_rng()));
    naive = naive + exp(bases.back(), scalars.back());
  }
  CHECK(multi_exp<G>(bases, scalars) == naive);

  std::vector<Scalar> short_scalars{a};
  CHECK_THROWS_AS(multi_exp<G>(bases, short_scalars), std::invalid_argument);
}

TEST_CASE("pairing facade", "[groups]") {
  auto params = setup(128);
  CHECK(pairing(G1::identity(), params.g_tilde).is_identity());
  CHECK(pairing(params.g, G2::identity()).is_identity());
  Scalar seven = Scalar::from_u64(7);
  CHECK(pairing(exp(params.g, seven), params.g_tilde) ==
        pairing(params.g, exp(params.g_tilde, seven)));
  GT base = pairing(params.g, params.g_tilde);
  CHECK(pairing(exp(params.g, Scalar::from_u64(2)), exp(params.g_tilde, Scalar::from_u64(3))) ==
        exp(base, Scalar::from_u64(6)));
}

TEST_CASE("pairing is bilinear across random scalars", "[groups]") {
  auto params = setup(128);
  GT base = pairing(params.g, params.g_tilde);
  for (int i = 0; i < 100; ++i) {
    Scalar a = random_scalar(test_rng()), b = random_scalar(test_rng());
    CHECK(pairing(exp(params.g, a), exp(params.g_tilde, b)) == exp(base, a * b));
  }
}

TEST_CASE("hash to G1 facade", "[groups]") {
  G1 a = hash_to_g1("example.com");
  G1 b = hash_to_g1("example.com");
  CHECK(a == b);
  CHECK_FALSE(hash_to_g1("a.com") == hash_to_g1("b.com"));
  CHECK(a.in_subgroup());
  CHECK_FALSE(a.is_identity());
}

TEST_CASE("hashed points collide for no small input set", "[groups]") {
  std::set<std::array<uint8_t, 48>> seen;
  for (int i = 0; i < 10000; ++i) {
    auto p = hash_to_g1("probe:" + std::to_string(i));
    CHECK(seen.insert(p.serialize()).second);
  }
}

TEST_CASE("element serialization rules", "[groups]") {
  auto params = setup(128);
  // all-zero strings carry no compression flag and are rejected, never identity
  std::array<uint8_t, 48> z1{};
  std::array<uint8_t, 96> z2{};
  std::array<uint8_t, 576> zt{};
  CHECK_FALSE(G1::deserialize(z1).has_value());
  CHECK_FALSE(G2::deserialize(z2).has_value());
  CHECK_FALSE(GT::deserialize(zt).has_value());

  GT t = pairing(params.g, params.g_tilde);
  auto tb = t.serialize();
  auto back = GT::deserialize(tb);
  REQUIRE(back.has_value());
  CHECK(*back == t);
  CHECK(GT::identity().serialize() != tb);
  auto id_back = GT::deserialize(GT::identity().serialize());
  REQUIRE(id_back.has_value());
  CHECK(id_back->is_identity());
}

TEMPLATE_TEST_CASE("single-bit flips never decode to an unrelated element", "[groups]", G1, G2) {
  // one flipped bit either fails to decode or (for the sign-of-y flag alone)
  // decodes to the negation of the original point
  using G = TestType;
  auto params = setup(128);
  const G& g = [&]() -> const G& {
    if constexpr (std::is_same_v<G, G1>) return params.g;
    else return params.g_tilde;
  }();
  G p = exp(g, random_scalar(test_rng()));
  auto bytes = p.serialize();
  int rejected = 0, negated = 0;
  for (size_t bit = 0; bit < bytes.size() * 8; ++bit) {
    auto mutated = bytes;
    mutated[bit / 8] ^= uint8_t(1u << (bit % 8));
    auto got = G::deserialize(mutated);
    if (!got) {
      ++rejected;
    } else {
      REQUIRE(*got == -p);  // only the sort bit can do this
      ++negated;
    }
  }
  CHECK(negated == 1);
  CHECK(rejected == int(bytes.size() * 8) - 1);
}

TEST_CASE("target-group bit flips are rejected", "[groups]") {
  auto params = setup(128);
  GT t = pairing(params.g, params.g_tilde);
  auto bytes = t.serialize();
  std::array<uint8_t, 8> pick{};
  for (int i = 0; i < 100; ++i) {
    test_rng().fill(pick);
    size_t bit = (size_t(pick[0]) << 8 | pick[1]) % (bytes.size() * 8);
    auto mutated = bytes;
    mutated[bit / 8] ^= uint8_t(1u << (bit % 8));
    CHECK_FALSE(GT::deserialize(mutated).has_value());
  }
}

TEST_CASE("scalar sampling and hashing", "[groups]") {
  std::set<std::array<uint8_t, 32>> seen;
  for (int i = 0; i < 1000; ++i) {
    CHECK(seen.insert(random_scalar(test_rng()).to_bytes()).second);
  }
  CHECK(hash_to_scalar("alpha") == hash_to_scalar("alpha"));
  CHECK_FALSE(hash_to_scalar("alpha") == hash_to_scalar("beta"));
  CHECK_FALSE(random_nonzero_scalar(test_rng()).is_zero());
}
