#pragma once
// Threshold ElGamal identity-retrieval tokens.  A user encrypts their
// issuer-assigned identity handle h^gamma under an aggregated authority key;
// no single authority can open it, but any t of n can jointly recover the
// handle during an authorized investigation.  Shares come from a trusted
// dealer; each partial decryption carries an equality proof so a cheating
// authority is identified by index.

#include "elpasso/pscred.hpp"

namespace elpasso::retrieval {

inline constexpr std::string_view H_GENERATOR_SEED = "elpasso:h";

// everything a combiner or verifier needs; holds no secrets
struct PublicKeySet {
  uint32_t n_auth = 0;
  uint32_t threshold = 0;
  G1 y;  // g^{master}
  G1 h;  // second generator with unknown discrete log w.r.t. g
  std::vector<G1> share_commitments;  // g^{share_i}, position i-1 for authority i

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(pscred::WIRE_VERSION);
    w.u32(n_auth);
    w.u32(threshold);
    wire::put_point(w, y);
    wire::put_point(w, h);
    for (const auto& c : share_commitments) wire::put_point(w, c);
    return w.out;
  }

  static std::optional<PublicKeySet> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0;
    PublicKeySet ks;
    if (!r.u8(ver) || ver != pscred::WIRE_VERSION) return std::nullopt;
    if (!r.u32(ks.n_auth) || !r.u32(ks.threshold)) return std::nullopt;
    if (ks.n_auth == 0 || ks.n_auth > 0xffff || ks.threshold == 0 || ks.threshold > ks.n_auth)
      return std::nullopt;
    if (!wire::get_point(r, ks.y) || !wire::get_point(r, ks.h)) return std::nullopt;
    ks.share_commitments.resize(ks.n_auth);
    for (auto& c : ks.share_commitments)
      if (!wire::get_point(r, c)) return std::nullopt;
    if (!r.done()) return std::nullopt;
    return ks;
  }
};

struct SecretShare {
  uint32_t index = 0;  // 1-based; 0 is the dealer's evaluation point
  Scalar value;
};

struct AuthorityKeySet {
  PublicKeySet pub;
  std::vector<SecretShare> shares;  // handed out to the authorities, one each
};

inline AuthorityKeySet authority_keygen(const PublicParams& params, uint32_t n_auth, uint32_t t,
                                        Rng& rng) {
  if (t == 0 || n_auth == 0 || t > n_auth)
    throw std::invalid_argument("authority_keygen: need 1 <= t <= n");
  // Shamir: random degree t-1 polynomial, master secret at x = 0
  std::vector<Scalar> coeff;
  for (uint32_t k = 0; k < t; ++k) coeff.push_back(random_scalar(rng));

  AuthorityKeySet ks;
  ks.pub.n_auth = n_auth;
  ks.pub.threshold = t;
  ks.pub.y = exp(params.g, coeff[0]);
  ks.pub.h = hash_to_g1(H_GENERATOR_SEED);
  for (uint32_t i = 1; i <= n_auth; ++i) {
    Scalar x = Scalar::from_u64(i);
    Scalar v = Scalar::zero();
    for (size_t k = coeff.size(); k-- > 0;) v = v * x + coeff[k];
    ks.shares.push_back({i, v});
    ks.pub.share_commitments.push_back(exp(params.g, v));
  }
  for (auto& c : coeff) sodium_memzero(&c, sizeof(c));
  return ks;
}

struct RetrievalToken {
  G1 c1, c2;

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(pscred::WIRE_VERSION);
    wire::put_point(w, c1);
    wire::put_point(w, c2);
    return w.out;
  }

  static std::optional<RetrievalToken> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0;
    RetrievalToken t;
    if (!r.u8(ver) || ver != pscred::WIRE_VERSION) return std::nullopt;
    if (!wire::get_point(r, t.c1) || !wire::get_point(r, t.c2) || !r.done()) return std::nullopt;
    return t;
  }
};

struct Encryption {
  Scalar eps;  // randomizer, needed as a witness when proving well-formedness
  RetrievalToken token;
};

inline Encryption encrypt(const PublicParams& params, const G1& y, const G1& h,
                          const Scalar& gamma, Rng& rng) {
  Encryption e;
  e.eps = random_scalar(rng);
  e.token.c1 = exp(params.g, e.eps);
  e.token.c2 = exp(y, e.eps) + exp(h, gamma);
  return e;
}

struct PartialDecryption {
  uint32_t index = 0;
  G1 d;  // c1^{share_index}
  nizk::SigmaProof proof;  // equality of the exponent in d and in the share commitment

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(pscred::WIRE_VERSION);
    w.u32(index);
    wire::put_point(w, d);
    auto p = proof.serialize();
    w.u32(uint32_t(p.size()));
    w.bytes(p);
    return w.out;
  }

  static std::optional<PartialDecryption> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0;
    PartialDecryption pd;
    if (!r.u8(ver) || ver != pscred::WIRE_VERSION) return std::nullopt;
    if (!r.u32(pd.index)) return std::nullopt;
    if (!wire::get_point(r, pd.d)) return std::nullopt;
    uint32_t plen = 0;
    std::span<const uint8_t> p;
    if (!r.u32(plen) || !r.slice(plen, p) || !r.done()) return std::nullopt;
    auto sp = nizk::SigmaProof::deserialize(p, 1);
    if (!sp) return std::nullopt;
    pd.proof = std::move(*sp);
    return pd;
  }
};

namespace detail {

// both the share commitment and the partial open under the same exponent
inline nizk::Statement partial_statement(const PublicParams& params, const G1& commitment,
                                         const RetrievalToken& token, const G1& d,
                                         uint32_t index) {
  nizk::Statement st;
  st.witness_count = 1;
  st.g1_eqs.push_back({commitment, {{params.g, 0}}});
  st.g1_eqs.push_back({d, {{token.c1, 0}}});
  nizk::Transcript ctx;
  ctx.append("retrieval-partial-v1");
  ctx.append_u32(index);
  ctx.append(token.c2.serialize());  // c1 is a base above; bind the rest of E too
  st.context = std::move(ctx.bytes);
  return st;
}

}  // namespace detail

inline PartialDecryption partial_decrypt(const PublicParams& params, const SecretShare& share,
                                         const RetrievalToken& token, Rng& rng) {
  PartialDecryption pd;
  pd.index = share.index;
  pd.d = exp(token.c1, share.value);
  G1 commitment = exp(params.g, share.value);
  auto st = detail::partial_statement(params, commitment, token, pd.d, pd.index);
  std::vector<Scalar> w{share.value};
  pd.proof = nizk::prove(params, st, w, rng);
  return pd;
}

inline bool verify_partial(const PublicParams& params, const PublicKeySet& pub,
                           const PartialDecryption& pd, const RetrievalToken& token) {
  if (pd.index == 0 || pd.index > pub.n_auth) return false;
  auto st = detail::partial_statement(params, pub.share_commitments[pd.index - 1], token, pd.d,
                                      pd.index);
  return nizk::verify(params, st, pd.proof);
}

// thrown by combine when a partial's correctness proof fails, naming the
// authority that produced it
struct BadPartial : std::invalid_argument {
  uint32_t authority_index;
  explicit BadPartial(uint32_t idx)
      : std::invalid_argument("invalid partial decryption from authority " + std::to_string(idx)),
        authority_index(idx) {}
};

// Lagrange-combine at least threshold many verified partials back into h^gamma
inline G1 combine(const PublicParams& params, std::span<const PartialDecryption> partials,
                  const RetrievalToken& token, const PublicKeySet& pub) {
  std::set<uint32_t> seen;
  for (const auto& pd : partials) {
    if (pd.index == 0 || pd.index > pub.n_auth)
      throw std::invalid_argument("combine: authority index out of range");
    if (!seen.insert(pd.index).second)
      throw std::invalid_argument("combine: duplicate authority index");
  }
  for (const auto& pd : partials)
    if (!verify_partial(params, pub, pd, token)) throw BadPartial(pd.index);
  if (partials.size() < pub.threshold)
    throw std::invalid_argument("combine: not enough partial decryptions");

  // interpolate c1^{master} in the exponent at x = 0
  std::vector<G1> bases;
  std::vector<Scalar> coeffs;
  for (const auto& pd : partials) {
    Scalar num = Scalar::one(), den = Scalar::one();
    Scalar xi = Scalar::from_u64(pd.index);
    for (const auto& other : partials) {
      if (other.index == pd.index) continue;
      Scalar xj = Scalar::from_u64(other.index);
      num = num * xj;
      den = den * (xj - xi);
    }
    bases.push_back(pd.d);
    coeffs.push_back(num * den.inverse());
  }
  return token.c2 + (-multi_exp<G1>(bases, coeffs));
}

// equations tying a token to the credential's identity slot: c1 = g^eps and
// c2 = y^eps * h^gamma, with gamma shared with attribute 1 and eps the first
// extra witness.  attr_count fixes where the extra-witness index space starts.
inline pscred::StatementFragment statement_fragment_for_token(const PublicParams& params,
                                                              uint32_t attr_count, const G1& y,
                                                              const G1& h,
                                                              const RetrievalToken& token) {
  pscred::StatementFragment frag;
  frag.extra_witness_count = 1;
  uint32_t eps_idx = attr_count;
  frag.g1_eqs.push_back({token.c1, {{params.g, eps_idx}}});
  frag.g1_eqs.push_back({token.c2, {{y, eps_idx}, {h, 1}}});
  nizk::Transcript ctx;
  ctx.append("retrieval-token-v1");
  frag.context = std::move(ctx.bytes);
  return frag;
}

}  // namespace elpasso::retrieval
