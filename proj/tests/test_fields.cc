#include <catch2/catch_amalgamated.hpp>

#include "elpasso/bls12_381/biguint.hpp"
#include "elpasso/bls12_381/fields.hpp"
#include "elpasso/rng.hpp"

using elpasso::DeterministicRng;
using elpasso::bls::BigUint;
using elpasso::bls::Fp;
using elpasso::bls::Fr;
using elpasso::bls::X_ABS;
using elpasso::bls::probably_prime;

namespace {

template <class F>
BigUint to_big(const F& x) {
  auto c = x.canonical();
  return BigUint::from_limbs(std::span<const uint64_t>(c.data(), c.size()));
}

template <class F>
BigUint modulus_big() {
  return BigUint::from_limbs(std::span<const uint64_t>(F::MOD.data(), F::MOD.size()));
}

template <class F>
F random_fe(elpasso::Rng& rng) {
  std::array<uint8_t, 2 * F::BYTES> buf{};
  rng.fill(buf);
  return F::from_bytes_wide(buf);
}

}  // namespace

TEST_CASE("modulus limbs match their decimal expansions", "[fields]") {
  // two independent encodings of the same constants cross-check each other
  CHECK(modulus_big<Fp>().to_dec() ==
        "4002409555221667393417789825735904156556882819939007885332058136124031650490"
        "837864442687629129015664037894272559787");
  CHECK(modulus_big<Fr>().to_dec() ==
        "52435875175126190479447740508185965837690552500527637822603658699938581184513");
}

TEST_CASE("moduli derive from the curve parameter z", "[fields]") {
  // r = z^4 - z^2 + 1 and 3p = (z-1)^2 * r + 3z, with z = -X_ABS
  BigUint z(X_ABS);
  BigUint z2 = z.mul(z);
  BigUint r = z2.mul(z2).sub(z2).add(BigUint(1));
  CHECK(r == modulus_big<Fr>());

  BigUint zp1 = z.add(BigUint(1));  // (z-1)^2 = (|z|+1)^2
  BigUint three_p = zp1.mul(zp1).mul(r).sub(BigUint(3).mul(z));
  auto [p, rem] = three_p.divmod(BigUint(3));
  CHECK(rem.is_zero());
  CHECK(p == modulus_big<Fp>());
}

TEST_CASE("moduli are prime with expected residues", "[fields]") {
  CHECK(probably_prime(modulus_big<Fp>()));
  CHECK(probably_prime(modulus_big<Fr>()));
  CHECK(Fp::MOD[0] % 4 == 3);                            // enables the simple square-root rule
  CHECK(modulus_big<Fp>().mod(BigUint(6)).to_dec() == "1");  // needed by the Frobenius tables
  CHECK((Fr::MOD[0] - 1) % (uint64_t(1) << 32) == 0);  // high 2-adicity of r-1
}

TEMPLATE_TEST_CASE("montgomery constants match their definitions", "[fields]", Fp, Fr) {
  using F = TestType;
  BigUint m = modulus_big<F>();
  BigUint r_big = BigUint(1).shl(64 * F::N).mod(m);
  BigUint r2_big = BigUint(1).shl(128 * F::N).mod(m);
  CHECK(BigUint::from_limbs(std::span<const uint64_t>(F::R1.data(), F::N)) == r_big);
  CHECK(BigUint::from_limbs(std::span<const uint64_t>(F::R2.data(), F::N)) == r2_big);
  CHECK(F::MOD[0] * F::INV == ~uint64_t(0));  // INV = -m^-1 mod 2^64
}

TEMPLATE_TEST_CASE("field arithmetic agrees with a bignum oracle", "[fields]", Fp, Fr) {
  using F = TestType;
  DeterministicRng rng("field-oracle");
  BigUint m = modulus_big<F>();
  for (int i = 0; i < 200; ++i) {
    F a = random_fe<F>(rng), b = random_fe<F>(rng);
    BigUint ab = to_big(a), bb = to_big(b);
    CHECK(to_big(a * b) == ab.mul_mod(bb, m));
    CHECK(to_big(a + b) == ab.add(bb).mod(m));
    CHECK(to_big(a - b) == ab.add(m).sub(bb).mod(m));
    CHECK(to_big(-a) == m.sub(ab).mod(m));
  }
}

TEMPLATE_TEST_CASE("exponentiation agrees with a bignum oracle", "[fields]", Fp, Fr) {
  using F = TestType;
  DeterministicRng rng("pow-oracle");
  BigUint m = modulus_big<F>();
  for (int i = 0; i < 10; ++i) {
    F a = random_fe<F>(rng);
    std::array<uint8_t, 16> ebytes{};
    rng.fill(ebytes);
    std::array<uint64_t, 2> elimbs{};
    std::memcpy(elimbs.data(), ebytes.data(), 16);
    F got = a.pow(std::span<const uint64_t>(elimbs.data(), 2));
    BigUint e = BigUint::from_limbs(std::span<const uint64_t>(elimbs.data(), 2));
    CHECK(to_big(got) == to_big(a).pow_mod(e, m));
  }
}

TEMPLATE_TEST_CASE("inversion and identities", "[fields]", Fp, Fr) {
  using F = TestType;
  DeterministicRng rng("inverse");
  CHECK(F::zero().inverse().is_zero());  // inv0 convention
  CHECK(F::one().inverse() == F::one());
  for (int i = 0; i < 50; ++i) {
    F a = random_fe<F>(rng);
    if (a.is_zero()) continue;
    CHECK(a * a.inverse() == F::one());
    CHECK(a + (-a) == F::zero());
    CHECK(a * F::one() == a);
  }
}

TEST_CASE("base field square roots", "[fields]") {
  DeterministicRng rng("sqrt");
  CHECK_FALSE((-Fp::one()).is_square());  // -1 is a non-residue when p = 3 mod 4
  CHECK_FALSE((-Fp::one()).sqrt().has_value());
  CHECK(Fp::zero().sqrt().value() == Fp::zero());
  for (int i = 0; i < 50; ++i) {
    Fp a = random_fe<Fp>(rng);
    Fp sq = a.square();
    CHECK(sq.is_square());
    auto root = sq.sqrt();
    REQUIRE(root.has_value());
    CHECK(root->square() == sq);
  }
}

TEMPLATE_TEST_CASE("byte serialization round-trips and rejects junk", "[fields]", Fp, Fr) {
  using F = TestType;
  DeterministicRng rng("bytes");
  for (int i = 0; i < 50; ++i) {
    F a = random_fe<F>(rng);
    auto bytes = a.to_bytes();
    auto back = F::from_bytes(bytes);
    REQUIRE(back.has_value());
    CHECK(*back == a);
  }
  // the modulus itself is the smallest non-canonical encoding
  std::array<uint8_t, F::BYTES> mod_bytes{};
  for (size_t i = 0; i < F::BYTES; ++i) {
    size_t bit = 8 * (F::BYTES - 1 - i);
    mod_bytes[i] = uint8_t(F::MOD[bit / 64] >> (bit % 64));
  }
  CHECK_FALSE(F::from_bytes(mod_bytes).has_value());
  std::array<uint8_t, F::BYTES - 1> short_bytes{};
  CHECK_FALSE(F::from_bytes(short_bytes).has_value());
}

TEMPLATE_TEST_CASE("wide reduction agrees with a bignum oracle", "[fields]", Fp, Fr) {
  using F = TestType;
  DeterministicRng rng("wide");
  BigUint m = modulus_big<F>();
  for (int i = 0; i < 50; ++i) {
    std::array<uint8_t, 64> buf{};
    rng.fill(buf);
    F got = F::from_bytes_wide(buf);
    // oracle: interpret big-endian bytes as an integer, reduce
    BigUint val;
    for (uint8_t byte : buf) val = val.shl(8).add(BigUint(byte));
    CHECK(to_big(got) == val.mod(m));
  }
}

TEST_CASE("bignum self-checks", "[fields]") {
  CHECK(BigUint::from_dec("340282366920938463463374607431768211456").to_dec() ==
        BigUint(1).shl(128).to_dec());
  auto [q, r] = BigUint::from_dec("1000000000000000000000001").divmod(BigUint::from_dec("7"));
  CHECK(q.mul(BigUint(7)).add(r) == BigUint::from_dec("1000000000000000000000001"));
  CHECK(probably_prime(BigUint::from_dec("65537")));
  CHECK_FALSE(probably_prime(BigUint::from_dec("65541")));  // 3 * 21847
  CHECK_FALSE(probably_prime(BigUint::from_dec("561")));    // Carmichael number
}
