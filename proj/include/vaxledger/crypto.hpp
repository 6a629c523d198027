#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vaxledger/error.hpp"

namespace vaxledger {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline constexpr std::size_t kDigestSize = crypto_hash_sha256_BYTES;
inline constexpr std::size_t kPublicKeySize = crypto_sign_PUBLICKEYBYTES;
inline constexpr std::size_t kSecretKeySize = crypto_sign_SECRETKEYBYTES;
inline constexpr std::size_t kSignatureSize = crypto_sign_BYTES;
inline constexpr std::size_t kSeedSize = crypto_sign_SEEDBYTES;

using Digest = std::array<std::uint8_t, kDigestSize>;

namespace detail {
inline void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialise");
    return true;
  }();
  (void)ready;
}
}  // namespace detail

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

inline Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  require(hex.size() % 2 == 0, Errc::parse_error, "hex string has odd length");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    require(hi >= 0 && lo >= 0, Errc::parse_error, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

inline Digest sha256(ByteView data) {
  detail::ensure_sodium();
  Digest out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

inline Digest sha256(std::string_view data) { return sha256(as_bytes(data)); }

// Ed25519: deterministic signatures, 32-byte seed derivation.
struct SigningKeys {
  Bytes public_key;
  Bytes secret_key;
};

inline SigningKeys derive_signing_keys(ByteView seed_material) {
  detail::ensure_sodium();
  Digest seed = sha256(seed_material);
  SigningKeys keys{Bytes(kPublicKeySize), Bytes(kSecretKeySize)};
  crypto_sign_seed_keypair(keys.public_key.data(), keys.secret_key.data(), seed.data());
  return keys;
}

inline Bytes sign(ByteView message, ByteView secret_key) {
  detail::ensure_sodium();
  require(secret_key.size() == kSecretKeySize, Errc::invalid_argument, "bad secret key length");
  Bytes sig(kSignatureSize);
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_key.data());
  return sig;
}

inline bool verify_signature(ByteView message, ByteView signature, ByteView public_key) {
  detail::ensure_sodium();
  if (signature.size() != kSignatureSize || public_key.size() != kPublicKeySize) return false;
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                     public_key.data()) == 0;
}

/// Append-only builder for the length-prefixed encodings used for hashing and
/// signing. Every field is a 4-byte big-endian length followed by its bytes;
/// integers are written as 8-byte big-endian fields.
class CanonicalWriter {
 public:
  explicit CanonicalWriter(std::string_view magic = {}) { raw(as_bytes(magic)); }

  CanonicalWriter& field(ByteView bytes) {
    auto n = static_cast<std::uint32_t>(bytes.size());
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(n >> shift));
    raw(bytes);
    return *this;
  }

  CanonicalWriter& field(std::string_view s) { return field(as_bytes(s)); }

  CanonicalWriter& field(std::uint64_t v) {
    std::array<std::uint8_t, 8> be{};
    for (int i = 7; i >= 0; --i) {
      be[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v & 0xff);
      v >>= 8;
    }
    return field(ByteView(be));
  }

  CanonicalWriter& field(std::int64_t v) { return field(static_cast<std::uint64_t>(v)); }

  CanonicalWriter& raw(ByteView bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
    return *this;
  }

  const Bytes& bytes() const& { return out_; }
  Bytes bytes() && { return std::move(out_); }

 private:
  Bytes out_;
};

}  // namespace vaxledger
