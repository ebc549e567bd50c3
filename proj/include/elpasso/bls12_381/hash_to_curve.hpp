#pragma once

#include <sodium.h>

#include "elpasso/bls12_381/curve.hpp"
#include "elpasso/rng.hpp"

namespace elpasso::bls {

// expand_message_xmd over SHA-256: deterministically stretches (msg, dst)
// into len_in_bytes uniform bytes using the b_0/b_i chaining construction.
inline std::vector<uint8_t> expand_message_xmd(std::span<const uint8_t> msg,
                                               std::span<const uint8_t> dst,
                                               size_t len_in_bytes) {
  ensure_sodium();
  constexpr size_t HASH_BYTES = crypto_hash_sha256_BYTES;  // 32
  constexpr size_t BLOCK_BYTES = 64;
  size_t ell = (len_in_bytes + HASH_BYTES - 1) / HASH_BYTES;
  if (ell > 255 || len_in_bytes == 0 || len_in_bytes > 65535 || dst.empty() || dst.size() > 255) {
    throw std::invalid_argument("expand_message_xmd: bad length or domain tag");
  }

  std::vector<uint8_t> dst_prime(dst.begin(), dst.end());
  dst_prime.push_back(uint8_t(dst.size()));

  auto sha = [](std::initializer_list<std::span<const uint8_t>> parts) {
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    for (auto part : parts) crypto_hash_sha256_update(&st, part.data(), part.size());
    std::array<uint8_t, HASH_BYTES> out{};
    crypto_hash_sha256_final(&st, out.data());
    return out;
  };

  std::array<uint8_t, BLOCK_BYTES> z_pad{};
  std::array<uint8_t, 2> lib{uint8_t(len_in_bytes >> 8), uint8_t(len_in_bytes)};
  std::array<uint8_t, 1> zero{0};
  auto b0 = sha({z_pad, msg, lib, zero, dst_prime});

  std::vector<uint8_t> out;
  out.reserve(ell * HASH_BYTES);
  std::array<uint8_t, HASH_BYTES> prev{};
  for (size_t i = 1; i <= ell; ++i) {
    std::array<uint8_t, HASH_BYTES> block;
    if (i == 1) {
      block = b0;
    } else {
      for (size_t j = 0; j < HASH_BYTES; ++j) block[j] = b0[j] ^ prev[j];
    }
    std::array<uint8_t, 1> ctr{uint8_t(i)};
    prev = sha({block, ctr, dst_prime});
    out.insert(out.end(), prev.begin(), prev.end());
  }
  out.resize(len_in_bytes);
  return out;
}

// two base-field elements per message, each reduced from 64 oversized bytes
inline std::pair<Fp, Fp> hash_to_field_fp2x(std::span<const uint8_t> msg,
                                            std::span<const uint8_t> dst) {
  constexpr size_t L = 64;
  auto uniform = expand_message_xmd(msg, dst, 2 * L);
  Fp e0 = Fp::from_bytes_wide(std::span<const uint8_t>(uniform.data(), L));
  Fp e1 = Fp::from_bytes_wide(std::span<const uint8_t>(uniform.data() + L, L));
  return {e0, e1};
}

// Shallue-van de Woestijne map constants for y^2 = g(x) = x^3 + 4. Z is the
// smallest-magnitude candidate satisfying the standard criteria; everything
// else follows from it. Deriving at startup avoids trusting copied tables.
struct SvdwConstants {
  Fp Z, c1, c2, c3, c4;

  static const SvdwConstants& get() {
    static const SvdwConstants s;
    return s;
  }

 private:
  static Fp g(const Fp& x) { return x.square() * x + Fp::from_u64(4); }

  SvdwConstants() {
    Fp four_inv = Fp::from_u64(4).inverse();
    bool found = false;
    for (uint64_t mag = 1; mag < 16 && !found; ++mag) {
      for (Fp cand : {Fp::from_u64(mag), -Fp::from_u64(mag)}) {
        Fp gz = g(cand);
        if (gz.is_zero()) continue;
        Fp h = -(cand.square() * Fp::from_u64(3)) * four_inv * gz.inverse();
        if (h.is_zero() || !h.is_square()) continue;
        Fp half = Fp::from_u64(2).inverse();
        if (!gz.is_square() && !g(-cand * half).is_square()) continue;
        Z = cand;
        found = true;
        break;
      }
    }
    if (!found) throw std::logic_error("no usable curve-map constant");
    c1 = g(Z);
    c2 = -Z * Fp::from_u64(2).inverse();
    Fp three_z2 = Z.square() * Fp::from_u64(3);
    auto root = (-c1 * three_z2).sqrt();
    if (!root) throw std::logic_error("curve-map constant c3 is not a square");
    c3 = root->sgn0() == 0 ? *root : -*root;
    c4 = -(Fp::from_u64(4) * c1) * three_z2.inverse();
  }
};

// field element -> curve point (not yet in the r-order subgroup)
inline G1 map_to_curve_svdw(const Fp& u) {
  const auto& k = SvdwConstants::get();
  Fp four = Fp::from_u64(4);
  Fp tv1 = u.square() * k.c1;
  Fp tv2 = Fp::one() + tv1;
  tv1 = Fp::one() - tv1;
  Fp tv3 = (tv1 * tv2).inverse();  // inverse(0) == 0 handles the exceptional case
  Fp tv4 = u * tv1 * tv3 * k.c3;
  Fp x1 = k.c2 - tv4;
  Fp gx1 = x1.square() * x1 + four;
  Fp x2 = k.c2 + tv4;
  Fp gx2 = x2.square() * x2 + four;
  Fp x3 = (tv2.square() * tv3).square() * k.c4 + k.Z;
  bool e1 = gx1.is_square();
  bool e2 = gx2.is_square() && !e1;
  Fp x = e1 ? x1 : (e2 ? x2 : x3);
  Fp gx = x.square() * x + four;
  auto y = gx.sqrt();
  if (!y) throw std::logic_error("curve map produced a non-residue");
  Fp yv = (u.sgn0() == y->sgn0()) ? *y : -*y;
  return G1{x, yv, Fp::one()};
}

// full hash to the prime-order subgroup of G1
inline G1 hash_to_g1(std::span<const uint8_t> msg, std::span<const uint8_t> dst) {
  auto [u0, u1] = hash_to_field_fp2x(msg, dst);
  G1 q = map_to_curve_svdw(u0) + map_to_curve_svdw(u1);
  return q.mul_u64(G1_H_EFF);
}

}  // namespace elpasso::bls
