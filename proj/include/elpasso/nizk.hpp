#pragma once

#include "elpasso/groups.hpp"

#include <vector>

namespace elpasso::nizk {

// Non-interactive proofs of knowledge for conjunctions of discrete-log
// representation equations: given equations T_j = prod_i B_{j,i}^{x_{w(j,i)}}
// over G1 and G2 with a shared witness vector x, prove knowledge of x without
// revealing it. One sigma protocol per equation, one shared Fiat-Shamir
// challenge across all of them.

inline constexpr std::string_view TRANSCRIPT_TAG = "elpasso-nizk-v1";

struct Transcript {
  std::vector<uint8_t> bytes;

  // length-prefixed so distinct append sequences never collide
  void append(std::span<const uint8_t> chunk) {
    append_u32(uint32_t(chunk.size()));
    bytes.insert(bytes.end(), chunk.begin(), chunk.end());
  }
  void append(std::string_view s) {
    append(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
  }
  void append_u32(uint32_t v) {
    bytes.push_back(uint8_t(v >> 24));
    bytes.push_back(uint8_t(v >> 16));
    bytes.push_back(uint8_t(v >> 8));
    bytes.push_back(uint8_t(v));
  }
};

// SHA-512 over the accumulated bytes, wide-reduced into the scalar field
inline Scalar derive_challenge(const Transcript& t) {
  return hash_to_scalar(std::span<const uint8_t>(t.bytes.data(), t.bytes.size()));
}

template <class G>
struct Equation {
  G target;
  std::vector<std::pair<G, uint32_t>> terms;  // (base, witness index)
};

struct Statement {
  uint32_t witness_count = 0;
  std::vector<Equation<G1>> g1_eqs;
  std::vector<Equation<G2>> g2_eqs;
  std::vector<uint8_t> context;

  // structural validity: at least one equation, every term index in range,
  // every witness referenced somewhere
  bool well_formed() const {
    if (witness_count == 0 || (g1_eqs.empty() && g2_eqs.empty())) return false;
    std::vector<bool> seen(witness_count, false);
    auto scan = [&](const auto& eqs) {
      for (const auto& eq : eqs) {
        for (const auto& [base, idx] : eq.terms) {
          if (idx >= witness_count) return false;
          seen[idx] = true;
        }
      }
      return true;
    };
    if (!scan(g1_eqs) || !scan(g2_eqs)) return false;
    for (bool s : seen) {
      if (!s) return false;
    }
    return true;
  }

  // canonical byte form of the equations (context is hashed separately);
  // this is the normative transcript input and must stay byte-stable
  std::vector<uint8_t> serialize_equations() const {
    Transcript t;
    t.bytes.push_back(1);  // format version
    t.append_u32(witness_count);
    auto emit = [&t](const auto& eqs) {
      t.append_u32(uint32_t(eqs.size()));
      for (const auto& eq : eqs) {
        t.append(eq.target.serialize());
        t.append_u32(uint32_t(eq.terms.size()));
        for (const auto& [base, idx] : eq.terms) {
          t.append(base.serialize());
          t.append_u32(idx);
        }
      }
    };
    emit(g1_eqs);
    emit(g2_eqs);
    return std::move(t.bytes);
  }
};

struct SigmaProof {
  Scalar challenge;
  std::vector<Scalar> responses;

  // challenge || responses, each a fixed-length scalar
  std::vector<uint8_t> serialize() const {
    std::vector<uint8_t> out;
    auto c = challenge.to_bytes();
    out.insert(out.end(), c.begin(), c.end());
    for (const auto& r : responses) {
      auto b = r.to_bytes();
      out.insert(out.end(), b.begin(), b.end());
    }
    return out;
  }

  static std::optional<SigmaProof> deserialize(std::span<const uint8_t> in,
                                               size_t response_count) {
    if (in.size() != Scalar::BYTES * (1 + response_count)) return std::nullopt;
    SigmaProof p;
    auto c = Scalar::from_bytes(in.subspan(0, Scalar::BYTES));
    if (!c) return std::nullopt;
    p.challenge = *c;
    for (size_t i = 0; i < response_count; ++i) {
      auto r = Scalar::from_bytes(in.subspan(Scalar::BYTES * (1 + i), Scalar::BYTES));
      if (!r) return std::nullopt;
      p.responses.push_back(*r);
    }
    return p;
  }
};

namespace detail {

template <class G>
G eval_terms(const Equation<G>& eq, std::span<const Scalar> values) {
  std::vector<G> bases;
  std::vector<Scalar> scalars;
  bases.reserve(eq.terms.size());
  for (const auto& [base, idx] : eq.terms) {
    bases.push_back(base);
    scalars.push_back(values[idx]);
  }
  return multi_exp<G>(bases, scalars);
}

// recomputed commitment during verification: prod B^z * T^(-c)
template <class G>
G recompute_commitment(const Equation<G>& eq, std::span<const Scalar> z, const Scalar& c) {
  std::vector<G> bases;
  std::vector<Scalar> scalars;
  for (const auto& [base, idx] : eq.terms) {
    bases.push_back(base);
    scalars.push_back(z[idx]);
  }
  bases.push_back(eq.target);
  scalars.push_back(-c);
  return multi_exp<G>(bases, scalars);
}

inline Scalar challenge_from(const PublicParams& params, const Statement& st,
                             const std::vector<std::vector<uint8_t>>& commitments) {
  Transcript t;
  t.append(TRANSCRIPT_TAG);
  auto pb = params.serialize();
  t.append(std::span<const uint8_t>(pb.data(), pb.size()));
  auto eqs = st.serialize_equations();
  t.append(std::span<const uint8_t>(eqs.data(), eqs.size()));
  for (const auto& c : commitments) t.append(std::span<const uint8_t>(c.data(), c.size()));
  t.append(std::span<const uint8_t>(st.context.data(), st.context.size()));
  return derive_challenge(t);
}

}  // namespace detail

// Throws if the statement is malformed or the witnesses do not satisfy it;
// an unsatisfiable statement must fail loudly before any proof bytes exist.
inline SigmaProof prove(const PublicParams& params, const Statement& st,
                        std::span<const Scalar> witnesses, Rng& rng) {
  if (!st.well_formed()) throw std::invalid_argument("prove: malformed statement");
  if (witnesses.size() != st.witness_count) {
    throw std::invalid_argument("prove: witness count mismatch");
  }
  for (const auto& eq : st.g1_eqs) {
    if (!(detail::eval_terms(eq, witnesses) == eq.target)) {
      throw std::invalid_argument("prove: witnesses do not satisfy a G1 equation");
    }
  }
  for (const auto& eq : st.g2_eqs) {
    if (!(detail::eval_terms(eq, witnesses) == eq.target)) {
      throw std::invalid_argument("prove: witnesses do not satisfy a G2 equation");
    }
  }

  std::vector<Scalar> nonces;
  nonces.reserve(st.witness_count);
  for (uint32_t i = 0; i < st.witness_count; ++i) nonces.push_back(random_scalar(rng));

  std::vector<std::vector<uint8_t>> commitments;
  for (const auto& eq : st.g1_eqs) {
    auto a = detail::eval_terms(eq, nonces).serialize();
    commitments.emplace_back(a.begin(), a.end());
  }
  for (const auto& eq : st.g2_eqs) {
    auto a = detail::eval_terms(eq, nonces).serialize();
    commitments.emplace_back(a.begin(), a.end());
  }

  Scalar c = detail::challenge_from(params, st, commitments);
  SigmaProof proof;
  proof.challenge = c;
  proof.responses.reserve(st.witness_count);
  for (uint32_t i = 0; i < st.witness_count; ++i) {
    proof.responses.push_back(nonces[i] + c * witnesses[i]);
  }
  return proof;
}

// Never throws on bad input: malformed statements or proofs simply fail.
inline bool verify(const PublicParams& params, const Statement& st, const SigmaProof& proof) {
  if (!st.well_formed()) return false;
  if (proof.responses.size() != st.witness_count) return false;
  std::span<const Scalar> z(proof.responses.data(), proof.responses.size());
  std::vector<std::vector<uint8_t>> commitments;
  for (const auto& eq : st.g1_eqs) {
    auto a = detail::recompute_commitment(eq, z, proof.challenge).serialize();
    commitments.emplace_back(a.begin(), a.end());
  }
  for (const auto& eq : st.g2_eqs) {
    auto a = detail::recompute_commitment(eq, z, proof.challenge).serialize();
    commitments.emplace_back(a.begin(), a.end());
  }
  return detail::challenge_from(params, st, commitments) == proof.challenge;
}

}  // namespace elpasso::nizk
