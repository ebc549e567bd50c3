#pragma once
// Randomizable anonymous credentials over the pairing groups.  An issuer
// certifies a vector of attribute scalars without seeing the hidden ones
// (blind issuance); the holder later shows a re-randomized credential,
// disclosing a chosen subset of attributes and proving knowledge of the
// rest.  Shows can be conjoined with caller-supplied equations that share
// witnesses with the hidden attributes (e.g. "this pseudonym uses the same
// secret the credential certifies").

#include <algorithm>
#include <map>
#include <set>
#include <sodium.h>

#include "elpasso/nizk.hpp"
#include "elpasso/wire.hpp"

namespace elpasso::pscred {

inline constexpr uint8_t WIRE_VERSION = 1;

// how an attribute slot is populated and whether it may ever be disclosed
enum class AttrKind : uint8_t {
  always_hidden = 0,  // only the holder ever learns it (their long-term secret)
  idp_assigned = 1,   // chosen by the issuer at issuance
  user_info = 2,      // supplied by the holder, hidden or public at issuance
};

struct AttributeDesc {
  std::string label;
  AttrKind kind = AttrKind::user_info;
};

struct AttributeSchema {
  std::vector<AttributeDesc> attrs;

  size_t n() const { return attrs.size(); }

  bool valid() const {
    if (attrs.empty() || attrs.size() > 0xffff) return false;
    std::set<std::string_view> seen;
    for (const auto& a : attrs) {
      if (a.label.empty() || a.label.size() > 255) return false;
      if (uint8_t(a.kind) > 2) return false;
      if (!seen.insert(a.label).second) return false;
    }
    return true;
  }

  void append_to(wire::Writer& w) const {
    for (const auto& a : attrs) {
      w.u8(uint8_t(a.label.size()));
      w.str(a.label);
      w.u8(uint8_t(a.kind));
    }
  }

  static std::optional<AttributeSchema> read_from(wire::Reader& r, uint32_t count) {
    AttributeSchema s;
    for (uint32_t i = 0; i < count; ++i) {
      uint8_t len = 0, kind = 0;
      std::span<const uint8_t> label;
      if (!r.u8(len) || !r.slice(len, label) || !r.u8(kind)) return std::nullopt;
      s.attrs.push_back({std::string(label.begin(), label.end()), AttrKind(kind)});
    }
    if (!s.valid()) return std::nullopt;
    return s;
  }
};

struct IdpPublicKey {
  G1 g;
  std::vector<G1> Y;  // one base per attribute slot, G1 side
  G2 g_tilde;
  G2 X_tilde;                // verification key for the signing exponent
  std::vector<G2> Y_tilde;   // per-attribute bases, G2 side
  AttributeSchema schema;

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(WIRE_VERSION);
    w.u32(uint32_t(schema.n()));
    wire::put_point(w, g);
    for (const auto& y : Y) wire::put_point(w, y);
    wire::put_point(w, g_tilde);
    wire::put_point(w, X_tilde);
    for (const auto& y : Y_tilde) wire::put_point(w, y);
    schema.append_to(w);
    return w.out;
  }

  static std::optional<IdpPublicKey> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0;
    uint32_t n = 0;
    if (!r.u8(ver) || ver != WIRE_VERSION) return std::nullopt;
    if (!r.u32(n) || n == 0 || n > 0xffff) return std::nullopt;
    IdpPublicKey pk;
    if (!wire::get_point(r, pk.g)) return std::nullopt;
    pk.Y.resize(n);
    for (auto& y : pk.Y)
      if (!wire::get_point(r, y)) return std::nullopt;
    if (!wire::get_point(r, pk.g_tilde)) return std::nullopt;
    if (!wire::get_point(r, pk.X_tilde)) return std::nullopt;
    pk.Y_tilde.resize(n);
    for (auto& y : pk.Y_tilde)
      if (!wire::get_point(r, y)) return std::nullopt;
    auto schema = AttributeSchema::read_from(r, n);
    if (!schema || !r.done()) return std::nullopt;
    pk.schema = std::move(*schema);
    return pk;
  }

  // transcript handle binding every base and the schema
  std::array<uint8_t, 32> digest() const {
    auto bytes = serialize();
    std::array<uint8_t, 32> out{};
    crypto_hash_sha256(out.data(), bytes.data(), bytes.size());
    return out;
  }
};

struct IdpKeyPair {
  G1 sk;  // g^x; the exponent itself is erased during keygen
  IdpPublicKey pk;
};

inline IdpKeyPair keygen(const PublicParams& params, AttributeSchema schema, Rng& rng) {
  if (!schema.valid()) throw std::invalid_argument("keygen: invalid schema");
  IdpKeyPair kp;
  kp.pk.g = params.g;
  kp.pk.g_tilde = params.g_tilde;
  Scalar x = random_nonzero_scalar(rng);
  kp.sk = exp(params.g, x);
  kp.pk.X_tilde = exp(params.g_tilde, x);
  sodium_memzero(&x, sizeof(x));
  for (size_t i = 0; i < schema.n(); ++i) {
    Scalar y = random_nonzero_scalar(rng);
    kp.pk.Y.push_back(exp(params.g, y));
    kp.pk.Y_tilde.push_back(exp(params.g_tilde, y));
    sodium_memzero(&y, sizeof(y));
  }
  kp.pk.schema = std::move(schema);
  return kp;
}

// holder -> issuer: commitment to the hidden attributes plus a proof of
// knowledge of its opening
struct BlindSignRequest {
  G1 commitment;                        // g^d * prod Y_i^{a_i} over hidden i
  std::vector<uint32_t> hidden_indices; // sorted, duplicate-free
  nizk::SigmaProof opening_proof;

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(WIRE_VERSION);
    wire::put_point(w, commitment);
    w.u32(uint32_t(hidden_indices.size()));
    for (uint32_t i : hidden_indices) w.u32(i);
    auto proof = opening_proof.serialize();
    w.u32(uint32_t(proof.size()));
    w.bytes(proof);
    return w.out;
  }

  static std::optional<BlindSignRequest> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0;
    if (!r.u8(ver) || ver != WIRE_VERSION) return std::nullopt;
    BlindSignRequest req;
    if (!wire::get_point(r, req.commitment)) return std::nullopt;
    uint32_t count = 0;
    if (!r.u32(count) || count > 0xffff) return std::nullopt;
    req.hidden_indices.resize(count);
    for (auto& i : req.hidden_indices)
      if (!r.u32(i)) return std::nullopt;
    uint32_t plen = 0;
    std::span<const uint8_t> proof;
    if (!r.u32(plen) || !r.slice(plen, proof) || !r.done()) return std::nullopt;
    auto p = nizk::SigmaProof::deserialize(proof, 1 + count);
    if (!p) return std::nullopt;
    req.opening_proof = std::move(*p);
    return req;
  }
};

struct PreparedRequest {
  Scalar d;  // unblinding secret, kept by the holder
  BlindSignRequest request;
};

struct BlindedCredential {
  G1 s1, s2;

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(WIRE_VERSION);
    wire::put_point(w, s1);
    wire::put_point(w, s2);
    return w.out;
  }

  static std::optional<BlindedCredential> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0;
    BlindedCredential c;
    if (!r.u8(ver) || ver != WIRE_VERSION) return std::nullopt;
    if (!wire::get_point(r, c.s1) || !wire::get_point(r, c.s2) || !r.done()) return std::nullopt;
    return c;
  }
};

struct Credential {
  G1 s1, s2;

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(WIRE_VERSION);
    wire::put_point(w, s1);
    wire::put_point(w, s2);
    return w.out;
  }

  static std::optional<Credential> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0;
    Credential c;
    if (!r.u8(ver) || ver != WIRE_VERSION) return std::nullopt;
    if (!wire::get_point(r, c.s1) || !wire::get_point(r, c.s2) || !r.done()) return std::nullopt;
    return c;
  }
};

namespace detail {

inline void check_indices_sorted(const IdpPublicKey& pk, std::span<const uint32_t> idx) {
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= pk.schema.n()) throw std::invalid_argument("attribute index out of range");
    if (i > 0 && idx[i] <= idx[i - 1]) throw std::invalid_argument("indices not strictly sorted");
  }
}

// statement for the issuance request: commitment opens over (g, Y_i for the
// hidden i), witness 0 is the blinding d, then hidden attributes in index
// order
inline nizk::Statement issue_statement(const IdpPublicKey& pk, const G1& commitment,
                                       std::span<const uint32_t> hidden) {
  nizk::Statement st;
  st.witness_count = uint32_t(1 + hidden.size());
  nizk::Equation<G1> eq;
  eq.target = commitment;
  eq.terms.emplace_back(pk.g, 0);
  for (size_t i = 0; i < hidden.size(); ++i) eq.terms.emplace_back(pk.Y[hidden[i]], uint32_t(1 + i));
  st.g1_eqs.push_back(std::move(eq));
  nizk::Transcript ctx;
  ctx.append("pscred-issue-v1");
  ctx.append(pk.digest());
  for (uint32_t i : hidden) ctx.append_u32(i);
  st.context = std::move(ctx.bytes);
  return st;
}

}  // namespace detail

inline PreparedRequest prepare_blind_sign(const PublicParams& params, const IdpPublicKey& pk,
                                          const std::map<uint32_t, Scalar>& hidden, Rng& rng) {
  PreparedRequest out;
  for (const auto& [i, _] : hidden) out.request.hidden_indices.push_back(i);
  detail::check_indices_sorted(pk, out.request.hidden_indices);

  out.d = random_scalar(rng);
  std::vector<G1> bases{pk.g};
  std::vector<Scalar> exps{out.d};
  std::vector<Scalar> witnesses{out.d};
  for (uint32_t i : out.request.hidden_indices) {
    bases.push_back(pk.Y[i]);
    exps.push_back(hidden.at(i));
    witnesses.push_back(hidden.at(i));
  }
  out.request.commitment = multi_exp<G1>(bases, exps);
  auto st = detail::issue_statement(pk, out.request.commitment, out.request.hidden_indices);
  out.request.opening_proof = nizk::prove(params, st, witnesses, rng);
  return out;
}

inline BlindedCredential blind_sign(const PublicParams& params, const IdpKeyPair& kp,
                                    const std::map<uint32_t, Scalar>& public_attrs,
                                    const BlindSignRequest& request, Rng& rng) {
  const auto& pk = kp.pk;
  detail::check_indices_sorted(pk, request.hidden_indices);
  // hidden and public slots must partition the schema exactly
  std::vector<bool> covered(pk.schema.n(), false);
  for (uint32_t i : request.hidden_indices) covered[i] = true;
  for (const auto& [i, _] : public_attrs) {
    if (i >= pk.schema.n()) throw std::invalid_argument("public attribute index out of range");
    if (covered[i]) throw std::invalid_argument("attribute is both hidden and public");
    covered[i] = true;
  }
  if (!std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }))
    throw std::invalid_argument("attribute vector has gaps");

  auto st = detail::issue_statement(pk, request.commitment, request.hidden_indices);
  if (!nizk::verify(params, st, request.opening_proof))
    throw std::invalid_argument("request opening proof does not verify");

  G1 full = request.commitment;
  for (const auto& [i, a] : public_attrs) full = full + exp(pk.Y[i], a);
  Scalar u = random_nonzero_scalar(rng);
  BlindedCredential out;
  out.s1 = exp(pk.g, u);
  out.s2 = exp(kp.sk + full, u);
  return out;
}

inline Credential unblind(const Scalar& d, const BlindedCredential& blinded) {
  return {blinded.s1, blinded.s2 + exp(blinded.s1, -d)};
}

// sanity check for a key fetched from an untrusted channel: both halves of
// every attribute key must commit to the same exponent, and the generators
// must be the deployment's.  X_tilde has no public counterpart to check; a
// wrong one just makes every credential fail to verify.
inline bool pk_consistent(const PublicParams& params, const IdpPublicKey& pk) {
  if (!pk.schema.valid() || pk.Y.size() != pk.schema.n() || pk.Y_tilde.size() != pk.schema.n())
    return false;
  if (!(pk.g == params.g) || !(pk.g_tilde == params.g_tilde)) return false;
  for (size_t i = 0; i < pk.Y.size(); ++i)
    if (!pairing_equal(pk.Y[i], params.g_tilde, params.g, pk.Y_tilde[i])) return false;
  return true;
}

// pairing check that a credential certifies exactly this attribute vector
inline bool credential_valid(const PublicParams& params, const IdpPublicKey& pk,
                             const Credential& cred, std::span<const Scalar> attrs) {
  if (attrs.size() != pk.schema.n()) return false;
  if (cred.s1.is_identity()) return false;
  G2 acc = pk.X_tilde + multi_exp<G2>(pk.Y_tilde, attrs);
  return pairing_equal(cred.s1, acc, cred.s2, params.g_tilde);
}

// caller-supplied equations conjoined into a show.  Term witness indices use
// the shared convention: 0..n-1 selects that (hidden) attribute, n+j selects
// the j-th extra witness supplied alongside.
struct StatementFragment {
  std::vector<nizk::Equation<G1>> g1_eqs;
  std::vector<nizk::Equation<G2>> g2_eqs;
  uint32_t extra_witness_count = 0;
  std::vector<uint8_t> context;  // bound into the show transcript verbatim
};

struct ShowProof {
  G1 s1, s2;  // re-randomized credential
  G2 commitment;  // covers the hidden attributes and the fold-in exponent t
  nizk::SigmaProof proof;
  std::map<uint32_t, Scalar> disclosed;

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(WIRE_VERSION);
    wire::put_point(w, s1);
    wire::put_point(w, s2);
    wire::put_point(w, commitment);
    w.u32(uint32_t(disclosed.size()));
    for (const auto& [i, v] : disclosed) {
      w.u32(i);
      wire::put_scalar(w, v);
    }
    auto p = proof.serialize();
    w.u32(uint32_t(p.size()));
    w.bytes(p);
    return w.out;
  }

  static std::optional<ShowProof> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0;
    if (!r.u8(ver) || ver != WIRE_VERSION) return std::nullopt;
    ShowProof sp;
    if (!wire::get_point(r, sp.s1) || !wire::get_point(r, sp.s2) ||
        !wire::get_point(r, sp.commitment))
      return std::nullopt;
    uint32_t dcount = 0;
    if (!r.u32(dcount) || dcount > 0xffff) return std::nullopt;
    uint32_t prev = 0;
    for (uint32_t k = 0; k < dcount; ++k) {
      uint32_t i = 0;
      Scalar v;
      if (!r.u32(i) || !wire::get_scalar(r, v)) return std::nullopt;
      if (k > 0 && i <= prev) return std::nullopt;  // canonical order, no dupes
      prev = i;
      sp.disclosed.emplace(i, v);
    }
    uint32_t plen = 0;
    std::span<const uint8_t> proof;
    if (!r.u32(plen) || plen < 2 * 32 || plen % 32 != 0) return std::nullopt;
    if (!r.slice(plen, proof) || !r.done()) return std::nullopt;
    auto p = nizk::SigmaProof::deserialize(proof, plen / 32 - 1);
    if (!p) return std::nullopt;
    sp.proof = std::move(*p);
    return sp;
  }
};

namespace detail {

// statement shared by show/verify: the G2 commitment opens over the hidden
// attribute bases plus g~ for t, conjoined with the remapped caller
// equations.  Returns nullopt when the pieces don't fit together (unknown
// indices, fragment referencing a disclosed attribute).
inline std::optional<nizk::Statement> show_statement(const IdpPublicKey& pk, const G1& s1,
                                                     const G1& s2, const G2& commitment,
                                                     const std::map<uint32_t, Scalar>& disclosed,
                                                     const StatementFragment& extra) {
  const size_t n = pk.schema.n();
  for (const auto& [i, _] : disclosed)
    if (i >= n) return std::nullopt;

  // hidden attributes, in index order, are witnesses 0..h-1; t is witness h;
  // extra witnesses follow
  std::vector<uint32_t> rank(n, UINT32_MAX);
  uint32_t h = 0;
  for (uint32_t i = 0; i < n; ++i)
    if (!disclosed.count(i)) rank[i] = h++;

  nizk::Statement st;
  st.witness_count = h + 1 + extra.extra_witness_count;

  nizk::Equation<G2> open;
  open.target = commitment + (-pk.X_tilde);
  for (uint32_t i = 0; i < n; ++i)
    if (rank[i] != UINT32_MAX) open.terms.emplace_back(pk.Y_tilde[i], rank[i]);
  open.terms.emplace_back(pk.g_tilde, h);
  st.g2_eqs.push_back(std::move(open));

  auto remap = [&](uint32_t w) -> std::optional<uint32_t> {
    if (w < n) {
      if (rank[w] == UINT32_MAX) return std::nullopt;  // disclosed attrs aren't witnesses
      return rank[w];
    }
    uint32_t j = w - uint32_t(n);
    if (j >= extra.extra_witness_count) return std::nullopt;
    return h + 1 + j;
  };
  for (const auto& eq : extra.g1_eqs) {
    nizk::Equation<G1> e;
    e.target = eq.target;
    for (const auto& [base, w] : eq.terms) {
      auto m = remap(w);
      if (!m) return std::nullopt;
      e.terms.emplace_back(base, *m);
    }
    st.g1_eqs.push_back(std::move(e));
  }
  for (const auto& eq : extra.g2_eqs) {
    nizk::Equation<G2> e;
    e.target = eq.target;
    for (const auto& [base, w] : eq.terms) {
      auto m = remap(w);
      if (!m) return std::nullopt;
      e.terms.emplace_back(base, *m);
    }
    st.g2_eqs.push_back(std::move(e));
  }

  nizk::Transcript ctx;
  ctx.append("pscred-show-v1");
  ctx.append(pk.digest());
  ctx.append(s1.serialize());
  ctx.append(s2.serialize());
  ctx.append_u32(uint32_t(disclosed.size()));
  for (const auto& [i, v] : disclosed) {
    ctx.append_u32(i);
    ctx.append(v.to_bytes());
  }
  ctx.append(extra.context);
  st.context = std::move(ctx.bytes);
  return st;
}

}  // namespace detail

inline ShowProof prove(const PublicParams& params, const IdpPublicKey& pk, const Credential& cred,
                       std::span<const Scalar> attrs, const std::set<uint32_t>& disclose,
                       const StatementFragment& extra, std::span<const Scalar> extra_witnesses,
                       Rng& rng) {
  const size_t n = pk.schema.n();
  if (!credential_valid(params, pk, cred, attrs))
    throw std::invalid_argument("prove: credential does not certify these attributes");
  if (extra_witnesses.size() != extra.extra_witness_count)
    throw std::invalid_argument("prove: extra witness count mismatch");
  for (uint32_t i : disclose) {
    if (i >= n) throw std::invalid_argument("prove: disclosed index out of range");
    // slots 0 and 1 hold the holder secret and the long-term pseudonym
    // exponent; revealing either defeats the scheme
    if (i < 2 || pk.schema.attrs[i].kind == AttrKind::always_hidden)
      throw std::invalid_argument("prove: attribute must stay hidden");
  }

  Scalar r = random_nonzero_scalar(rng);
  Scalar t = random_scalar(rng);
  ShowProof sp;
  sp.s1 = exp(cred.s1, r);
  sp.s2 = exp(cred.s2 + exp(cred.s1, t), r);

  std::vector<G2> bases;
  std::vector<Scalar> exps;
  std::vector<Scalar> witnesses;
  for (uint32_t i = 0; i < n; ++i) {
    if (disclose.count(i)) {
      sp.disclosed.emplace(i, attrs[i]);
    } else {
      bases.push_back(pk.Y_tilde[i]);
      exps.push_back(attrs[i]);
      witnesses.push_back(attrs[i]);
    }
  }
  bases.push_back(params.g_tilde);
  exps.push_back(t);
  witnesses.push_back(t);
  sp.commitment = pk.X_tilde + multi_exp<G2>(bases, exps);
  witnesses.insert(witnesses.end(), extra_witnesses.begin(), extra_witnesses.end());

  auto st = detail::show_statement(pk, sp.s1, sp.s2, sp.commitment, sp.disclosed, extra);
  if (!st) throw std::invalid_argument("prove: fragment references unusable witnesses");
  sp.proof = nizk::prove(params, *st, witnesses, rng);
  return sp;
}

inline bool verify(const PublicParams& params, const IdpPublicKey& pk, const ShowProof& sp,
                   const StatementFragment& extra) {
  if (sp.s1.is_identity()) return false;
  auto st = detail::show_statement(pk, sp.s1, sp.s2, sp.commitment, sp.disclosed, extra);
  if (!st) return false;
  if (!nizk::verify(params, *st, sp.proof)) return false;
  // the disclosed attributes enter on the verifier's side of the pairing
  G2 acc = sp.commitment;
  for (const auto& [i, v] : sp.disclosed) acc = acc + exp(pk.Y_tilde[i], v);
  return pairing_equal(sp.s1, acc, sp.s2, params.g_tilde);
}

}  // namespace elpasso::pscred
