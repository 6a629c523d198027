#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "vaxledger/crypto.hpp"
#include "vaxledger/error.hpp"

namespace vaxledger {

// ---------------------------------------------------------------------------
// Decentralized identifiers
// ---------------------------------------------------------------------------

namespace detail {
inline bool is_did_method_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }

inline bool is_uri_safe_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
         c == '-' || c == '_' || c == ':';
}

inline bool looks_like_uri(std::string_view s) {
  auto colon = s.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == s.size()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
  if (!alpha(s.front())) return false;
  for (char c : s.substr(0, colon)) {
    if (!alpha(c) && !(c >= '0' && c <= '9') && c != '+' && c != '.' && c != '-') return false;
  }
  return std::none_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n'; });
}
}  // namespace detail

/// `did:<method>:<identifier>`. The method is lowercase alphanumeric, the
/// identifier is non-empty and restricted to URI-safe characters.
class Did {
 public:
  Did() = default;

  Did(std::string method, std::string identifier)
      : method_(std::move(method)), identifier_(std::move(identifier)) {
    require(!method_.empty() && std::all_of(method_.begin(), method_.end(), detail::is_did_method_char),
            Errc::invalid_argument, "DID method must be non-empty lowercase alphanumeric");
    require(!identifier_.empty() &&
                std::all_of(identifier_.begin(), identifier_.end(), detail::is_uri_safe_char),
            Errc::invalid_argument, "DID identifier must be non-empty and URI-safe");
  }

  static Did parse(std::string_view text) {
    constexpr std::string_view kPrefix = "did:";
    require(text.starts_with(kPrefix), Errc::parse_error, "DID must start with 'did:'");
    auto rest = text.substr(kPrefix.size());
    auto colon = rest.find(':');
    require(colon != std::string_view::npos, Errc::parse_error, "DID is missing its identifier");
    try {
      return Did(std::string(rest.substr(0, colon)), std::string(rest.substr(colon + 1)));
    } catch (const Error& e) {
      fail(Errc::parse_error, e.what());
    }
  }

  const std::string& method() const { return method_; }
  const std::string& identifier() const { return identifier_; }
  bool empty() const { return method_.empty(); }
  std::string text() const { return "did:" + method_ + ":" + identifier_; }

  friend bool operator==(const Did&, const Did&) = default;
  friend auto operator<=>(const Did&, const Did&) = default;

 private:
  std::string method_;
  std::string identifier_;
};

/// Deterministic DID derived from the first 16 bytes of SHA-256(method || 0x00 || seed).
inline Did generate_did(std::string_view method, ByteView seed) {
  require(!method.empty(), Errc::invalid_argument, "DID method is empty");
  require(!seed.empty(), Errc::invalid_argument, "DID seed is empty");
  Bytes material(method.begin(), method.end());
  material.push_back(0);
  material.insert(material.end(), seed.begin(), seed.end());
  Digest d = sha256(material);
  return Did(std::string(method), to_hex(ByteView(d.data(), 16)));
}

inline Did generate_did(std::string_view method, std::string_view seed) {
  return generate_did(method, as_bytes(seed));
}

// ---------------------------------------------------------------------------
// Keys, hashes, credentials
// ---------------------------------------------------------------------------

struct KeyPair {
  Bytes public_key;
  Bytes private_key;
  Did owner;
};

inline KeyPair make_keypair(const Did& owner, ByteView seed) {
  require(!seed.empty(), Errc::invalid_argument, "key seed is empty");
  auto keys = derive_signing_keys(seed);
  return KeyPair{std::move(keys.public_key), std::move(keys.secret_key), owner};
}

inline KeyPair make_keypair(const Did& owner, std::string_view seed) {
  return make_keypair(owner, as_bytes(seed));
}

struct CertificateHash {
  Digest digest{};

  std::string hex() const { return to_hex(digest); }

  static CertificateHash from_bytes(ByteView bytes) {
    require(bytes.size() == kDigestSize, Errc::invalid_argument, "certificate hash must be 32 bytes");
    CertificateHash h;
    std::copy(bytes.begin(), bytes.end(), h.digest.begin());
    return h;
  }

  static CertificateHash from_hex(std::string_view hex) { return from_bytes(vaxledger::from_hex(hex)); }

  friend bool operator==(const CertificateHash&, const CertificateHash&) = default;
};

inline constexpr std::string_view kSignatureScheme = "Ed25519Signature2020";
inline constexpr std::string_view kDefaultContext = "https://www.w3.org/2018/credentials/v1";
inline constexpr std::int64_t kSecondsPerYear = 31'536'000;

struct Proof {
  std::string scheme_id;
  Did verification_method;
  Bytes signature;

  friend bool operator==(const Proof&, const Proof&) = default;
};

struct VaccineMetadata {
  std::string product;
  std::uint32_t dose_number = 0;
  std::uint32_t total_doses = 0;
  std::string batch_id;
};

struct VaccinationCredential {
  std::string context{kDefaultContext};
  Did issuer;
  Did subject;
  std::string vaccine_product;
  std::uint32_t dose_number = 0;
  std::uint32_t total_doses = 0;
  std::string batch_id;
  std::int64_t issuance_date = 0;
  std::int64_t expiration_date = 0;
  std::optional<Proof> proof;

  friend bool operator==(const VaccinationCredential&, const VaccinationCredential&) = default;
};

/// Throws invalid-credential on any invariant breach.
inline void check_invariants(const VaccinationCredential& c) {
  auto bad = [](const std::string& why) { fail(Errc::invalid_credential, why); };
  if (!detail::looks_like_uri(c.context)) bad("context must be a non-empty URI");
  if (c.issuer.empty() || c.subject.empty()) bad("issuer and subject DIDs are required");
  if (c.vaccine_product.empty() || c.batch_id.empty()) bad("vaccine metadata must be non-empty");
  if (c.dose_number == 0 || c.total_doses == 0) bad("dose counts must be positive");
  if (c.dose_number > c.total_doses) bad("dose_number exceeds total_doses");
  if (c.expiration_date <= c.issuance_date) bad("expiration must follow issuance");
}

/// Byte form of the credential body, proof excluded. Field order:
/// context, issuer, subject, vaccine_product, dose_number, total_doses,
/// batch_id, issuance_date, expiration_date.
inline Bytes canonicalize(const VaccinationCredential& c) {
  check_invariants(c);
  return CanonicalWriter("VXC1")
      .field(c.context)
      .field(c.issuer.text())
      .field(c.subject.text())
      .field(c.vaccine_product)
      .field(std::uint64_t{c.dose_number})
      .field(std::uint64_t{c.total_doses})
      .field(c.batch_id)
      .field(c.issuance_date)
      .field(c.expiration_date)
      .bytes();
}

inline Bytes canonicalize(const Proof& p) {
  return CanonicalWriter("VXP1")
      .field(p.scheme_id)
      .field(p.verification_method.text())
      .field(ByteView(p.signature))
      .bytes();
}

inline CertificateHash hash_credential(const VaccinationCredential& c) {
  require(c.proof.has_value(), Errc::missing_proof, "credential is unsigned");
  Bytes material = canonicalize(c);
  Bytes proof = canonicalize(*c.proof);
  material.insert(material.end(), proof.begin(), proof.end());
  return CertificateHash{sha256(material)};
}

inline VaccinationCredential issue_credential(const KeyPair& issuer_key, const Did& issuer,
                                              const Did& subject, const VaccineMetadata& vaccine,
                                              std::int64_t issuance, std::int64_t validity_seconds) {
  require(validity_seconds > 0, Errc::invalid_argument, "validity must be positive");
  VaccinationCredential c;
  c.issuer = issuer;
  c.subject = subject;
  c.vaccine_product = vaccine.product;
  c.dose_number = vaccine.dose_number;
  c.total_doses = vaccine.total_doses;
  c.batch_id = vaccine.batch_id;
  c.issuance_date = issuance;
  c.expiration_date = issuance + validity_seconds;
  Bytes body = canonicalize(c);
  c.proof = Proof{std::string(kSignatureScheme), issuer_key.owner, sign(body, issuer_key.private_key)};
  return c;
}

enum class RejectReason { none, unknown_issuer, signature, expired, incomplete_doses };

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::none: return "none";
    case RejectReason::unknown_issuer: return "unknown-issuer";
    case RejectReason::signature: return "signature";
    case RejectReason::expired: return "expired";
    case RejectReason::incomplete_doses: return "incomplete-doses";
  }
  return "unknown";
}

struct VerificationOutcome {
  RejectReason reason = RejectReason::none;

  bool accepted() const { return reason == RejectReason::none; }
  static VerificationOutcome accept() { return {}; }
  static VerificationOutcome reject(RejectReason r) { return {r}; }
  friend bool operator==(const VerificationOutcome&, const VerificationOutcome&) = default;
};

using IssuerKeys = std::map<std::string, Bytes>;  // DID text -> public key

/// Checks run in a fixed order: issuer known, signature, expiration
/// (exclusive), dose completeness.
inline VerificationOutcome verify_credential(const VaccinationCredential& c, const IssuerKeys& issuer_keys,
                                             std::int64_t now) {
  auto key = issuer_keys.find(c.issuer.text());
  if (key == issuer_keys.end()) return VerificationOutcome::reject(RejectReason::unknown_issuer);
  if (!c.proof || c.proof->scheme_id != kSignatureScheme) {
    return VerificationOutcome::reject(RejectReason::signature);
  }
  Bytes body;
  try {
    body = canonicalize(c);
  } catch (const Error&) {
    return VerificationOutcome::reject(RejectReason::signature);
  }
  if (!verify_signature(body, c.proof->signature, key->second)) {
    return VerificationOutcome::reject(RejectReason::signature);
  }
  if (now >= c.expiration_date) return VerificationOutcome::reject(RejectReason::expired);
  if (c.dose_number != c.total_doses) return VerificationOutcome::reject(RejectReason::incomplete_doses);
  return VerificationOutcome::accept();
}

}  // namespace vaxledger
