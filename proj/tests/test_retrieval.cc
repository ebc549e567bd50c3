#include <catch2/catch_amalgamated.hpp>

#include "elpasso/retrieval.hpp"

using namespace elpasso;
using retrieval::AuthorityKeySet;
using retrieval::PartialDecryption;
using retrieval::PublicKeySet;
using retrieval::RetrievalToken;

namespace {

DeterministicRng& test_rng() {
  static DeterministicRng rng("retrieval-suite");
  return rng;
}

std::vector<PartialDecryption> all_partials(const PublicParams& params, const AuthorityKeySet& ks,
                                            const RetrievalToken& token) {
  std::vector<PartialDecryption> out;
  for (const auto& sh : ks.shares)
    out.push_back(retrieval::partial_decrypt(params, sh, token, test_rng()));
  return out;
}

}  // namespace

TEST_CASE("the dealer splits a key any threshold subset can rebuild", "[retrieval]") {
  auto params = setup(128);
  auto ks = retrieval::authority_keygen(params, 3, 2, test_rng());
  REQUIRE(ks.shares.size() == 3);
  REQUIRE(ks.pub.share_commitments.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(ks.shares[i].index == i + 1);
    CHECK(ks.pub.share_commitments[i] == exp(params.g, ks.shares[i].value));
  }
  // interpolating shares {1,2} at zero recovers the exponent behind y:
  // lambda = (2, -1) for evaluation points (1, 2)
  Scalar master = Scalar::from_u64(2) * ks.shares[0].value - ks.shares[1].value;
  CHECK(exp(params.g, master) == ks.pub.y);

  CHECK_THROWS_AS(retrieval::authority_keygen(params, 3, 4, test_rng()), std::invalid_argument);
  CHECK_THROWS_AS(retrieval::authority_keygen(params, 3, 0, test_rng()), std::invalid_argument);

  auto bytes = ks.pub.serialize();
  auto back = PublicKeySet::deserialize(bytes);
  REQUIRE(back.has_value());
  CHECK(back->serialize() == bytes);
  CHECK_FALSE(PublicKeySet::deserialize(std::span(bytes).first(bytes.size() - 1)));
}

TEST_CASE("a single authority degenerates to plain encryption", "[retrieval]") {
  auto params = setup(128);
  auto ks = retrieval::authority_keygen(params, 1, 1, test_rng());
  Scalar gamma = random_scalar(test_rng());
  auto enc = retrieval::encrypt(params, ks.pub.y, ks.pub.h, gamma, test_rng());
  auto partials = all_partials(params, ks, enc.token);
  CHECK(retrieval::combine(params, partials, enc.token, ks.pub) == exp(ks.pub.h, gamma));
}

TEST_CASE("encryption is fresh per call and handles a zero randomizer", "[retrieval]") {
  auto params = setup(128);
  auto ks = retrieval::authority_keygen(params, 3, 2, test_rng());
  Scalar gamma = random_scalar(test_rng());

  auto e1 = retrieval::encrypt(params, ks.pub.y, ks.pub.h, gamma, test_rng());
  auto e2 = retrieval::encrypt(params, ks.pub.y, ks.pub.h, gamma, test_rng());
  CHECK_FALSE(e1.token.c1 == e2.token.c1);

  // a zero randomizer leaves the handle in the clear but everything stays
  // consistent: partials are identities and combination returns c2 itself
  RetrievalToken bare{G1::identity(), exp(ks.pub.h, gamma)};
  auto partials = all_partials(params, ks, bare);
  for (const auto& pd : partials) {
    CHECK(pd.d.is_identity());
    CHECK(retrieval::verify_partial(params, ks.pub, pd, bare));
  }
  CHECK(retrieval::combine(params, partials, bare, ks.pub) == exp(ks.pub.h, gamma));
}

TEST_CASE("every threshold subset recovers and every smaller one fails", "[retrieval]") {
  auto params = setup(128);
  for (uint32_t n = 1; n <= 5; ++n) {
    for (uint32_t t = 1; t <= n; ++t) {
      auto ks = retrieval::authority_keygen(params, n, t, test_rng());
      Scalar gamma = random_scalar(test_rng());
      auto enc = retrieval::encrypt(params, ks.pub.y, ks.pub.h, gamma, test_rng());
      G1 handle = exp(ks.pub.h, gamma);
      auto partials = all_partials(params, ks, enc.token);

      for (uint32_t mask = 0; mask < (1u << n); ++mask) {
        auto bits = uint32_t(__builtin_popcount(mask));
        if (bits != t && bits + 1 != t) continue;
        std::vector<PartialDecryption> subset;
        for (uint32_t i = 0; i < n; ++i)
          if (mask & (1u << i)) subset.push_back(partials[i]);
        if (bits == t) {
          CHECK(retrieval::combine(params, subset, enc.token, ks.pub) == handle);
        } else {
          CHECK_THROWS_AS(retrieval::combine(params, subset, enc.token, ks.pub),
                          std::invalid_argument);
        }
      }
    }
  }
}

TEST_CASE("combination ignores the order partials arrive in", "[retrieval]") {
  auto params = setup(128);
  auto ks = retrieval::authority_keygen(params, 4, 3, test_rng());
  Scalar gamma = random_scalar(test_rng());
  auto enc = retrieval::encrypt(params, ks.pub.y, ks.pub.h, gamma, test_rng());
  auto partials = all_partials(params, ks, enc.token);
  auto forward = retrieval::combine(params, partials, enc.token, ks.pub);
  std::reverse(partials.begin(), partials.end());
  CHECK(retrieval::combine(params, partials, enc.token, ks.pub) == forward);
  CHECK(forward == exp(ks.pub.h, gamma));
}

TEST_CASE("a forged partial is rejected by authority index", "[retrieval]") {
  auto params = setup(128);
  auto ks = retrieval::authority_keygen(params, 3, 2, test_rng());
  Scalar gamma = random_scalar(test_rng());
  auto enc = retrieval::encrypt(params, ks.pub.y, ks.pub.h, gamma, test_rng());
  auto partials = all_partials(params, ks, enc.token);

  auto forged = partials;
  forged[1].d = forged[1].d + params.g;
  CHECK_FALSE(retrieval::verify_partial(params, ks.pub, forged[1], enc.token));
  try {
    retrieval::combine(params, forged, enc.token, ks.pub);
    FAIL("combine accepted a forged partial");
  } catch (const retrieval::BadPartial& e) {
    CHECK(e.authority_index == 2);
  }

  // a proof transplanted from a different token also fails
  auto other = retrieval::encrypt(params, ks.pub.y, ks.pub.h, gamma, test_rng());
  auto transplanted = retrieval::partial_decrypt(params, ks.shares[0], other.token, test_rng());
  CHECK_FALSE(retrieval::verify_partial(params, ks.pub, transplanted, enc.token));

  auto dup = std::vector<PartialDecryption>{partials[0], partials[0]};
  CHECK_THROWS_AS(retrieval::combine(params, dup, enc.token, ks.pub), std::invalid_argument);

  auto bytes = partials[0].serialize();
  auto back = PartialDecryption::deserialize(bytes);
  REQUIRE(back.has_value());
  CHECK(back->serialize() == bytes);
  CHECK(retrieval::verify_partial(params, ks.pub, *back, enc.token));
}

TEST_CASE("tokens bind into credential shows and decrypt to the identity slot", "[retrieval]") {
  auto params = setup(128);
  auto ks = retrieval::authority_keygen(params, 3, 2, test_rng());

  // issue a credential whose slot 1 holds the identity exponent
  pscred::AttributeSchema schema{{{"sec", pscred::AttrKind::always_hidden},
                                  {"pseu", pscred::AttrKind::idp_assigned},
                                  {"expiry", pscred::AttrKind::idp_assigned}}};
  auto kp = pscred::keygen(params, schema, test_rng());
  std::vector<Scalar> attrs{random_scalar(test_rng()), random_scalar(test_rng()),
                            Scalar::from_u64(424242)};
  auto prep = pscred::prepare_blind_sign(params, kp.pk, {{0, attrs[0]}}, test_rng());
  auto blinded = pscred::blind_sign(params, kp, {{1, attrs[1]}, {2, attrs[2]}}, prep.request,
                                    test_rng());
  auto cred = pscred::unblind(prep.d, blinded);

  auto enc = retrieval::encrypt(params, ks.pub.y, ks.pub.h, attrs[1], test_rng());
  auto frag = retrieval::statement_fragment_for_token(params, 3, ks.pub.y, ks.pub.h, enc.token);
  std::vector<Scalar> extra{enc.eps};
  auto proof = pscred::prove(params, kp.pk, cred, attrs, {2}, frag, extra, test_rng());

  // the relying party checks well-formedness alone, no authority involved
  CHECK(pscred::verify(params, kp.pk, proof, frag));

  // swapping in a re-encrypted token invalidates the stored proof
  auto renc = retrieval::encrypt(params, ks.pub.y, ks.pub.h, attrs[1], test_rng());
  auto frag2 = retrieval::statement_fragment_for_token(params, 3, ks.pub.y, ks.pub.h, renc.token);
  CHECK_FALSE(pscred::verify(params, kp.pk, proof, frag2));

  // a token encrypting anything but the credential's slot 1 cannot be proven
  auto wrong = retrieval::encrypt(params, ks.pub.y, ks.pub.h, attrs[1] + Scalar::one(),
                                  test_rng());
  auto fragw = retrieval::statement_fragment_for_token(params, 3, ks.pub.y, ks.pub.h, wrong.token);
  std::vector<Scalar> extraw{wrong.eps};
  CHECK_THROWS_AS(pscred::prove(params, kp.pk, cred, attrs, {2}, fragw, extraw, test_rng()),
                  std::invalid_argument);

  // and when authorities do cooperate, the token opens to the identity handle
  auto partials = all_partials(params, ks, enc.token);
  std::vector<PartialDecryption> two{partials[0], partials[2]};
  CHECK(retrieval::combine(params, two, enc.token, ks.pub) == exp(ks.pub.h, attrs[1]));

  auto bytes = enc.token.serialize();
  auto back = RetrievalToken::deserialize(bytes);
  REQUIRE(back.has_value());
  CHECK(back->c1 == enc.token.c1);
  CHECK(back->c2 == enc.token.c2);
}
