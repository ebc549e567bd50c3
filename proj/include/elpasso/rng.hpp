#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string_view>

namespace elpasso {

inline void ensure_sodium() {
  static const int ok = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialization failed");
    return 0;
  }();
  (void)ok;
}

// Randomness source. All key- and nonce-generating code takes one of these so
// tests and benchmarks can run reproducibly.
struct Rng {
  virtual ~Rng() = default;
  virtual void fill(std::span<uint8_t> out) = 0;
};

struct SystemRng final : Rng {
  SystemRng() { ensure_sodium(); }
  void fill(std::span<uint8_t> out) override { randombytes_buf(out.data(), out.size()); }
};

// ChaCha20 keystream keyed by a seed string; each fill() uses a fresh nonce.
struct DeterministicRng final : Rng {
  std::array<uint8_t, crypto_stream_chacha20_KEYBYTES> key{};
  uint64_t counter = 0;

  explicit DeterministicRng(std::string_view seed) {
    ensure_sodium();
    static_assert(crypto_stream_chacha20_KEYBYTES == crypto_hash_sha256_BYTES);
    crypto_hash_sha256(key.data(), reinterpret_cast<const unsigned char*>(seed.data()),
                       seed.size());
  }

  void fill(std::span<uint8_t> out) override {
    std::array<uint8_t, crypto_stream_chacha20_NONCEBYTES> nonce{};
    uint64_t c = counter++;
    std::memcpy(nonce.data(), &c, sizeof(c));
    crypto_stream_chacha20(out.data(), out.size(), nonce.data(), key.data());
  }
};

}  // namespace elpasso
