#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vaxledger/credential.hpp"
#include "vaxledger/ledger.hpp"

namespace vaxledger {

enum class ChaincodeStatus { ok, access_denied, nonconformant_message, unknown_issuer, already_registered };

inline std::string_view to_string(ChaincodeStatus s) {
  switch (s) {
    case ChaincodeStatus::ok: return "ok";
    case ChaincodeStatus::access_denied: return "access-denied";
    case ChaincodeStatus::nonconformant_message: return "nonconformant-message";
    case ChaincodeStatus::unknown_issuer: return "unknown-issuer";
    case ChaincodeStatus::already_registered: return "already-registered";
  }
  return "unknown";
}

struct ProposalResponse {
  ChaincodeStatus status = ChaincodeStatus::ok;
  std::vector<ReadEntry> read_set;
  std::vector<WriteEntry> write_set;

  bool ok() const { return status == ChaincodeStatus::ok; }
};

/// Execution context for one invocation. Every state access goes through
/// get()/put() so the read and write sets are complete.
class ChaincodeContext {
 public:
  ChaincodeContext(MemberStateId caller, bool caller_signature_valid, const WorldState& view)
      : caller_(std::move(caller)), signature_valid_(caller_signature_valid), view_(view) {}

  const MemberStateId& caller() const { return caller_; }
  bool caller_signature_valid() const { return signature_valid_; }
  const WorldState& view() const { return view_; }

  const StateEntry* get(const std::string& key) {
    const StateEntry* e = view_.find(key);
    record_read(key, e ? std::optional<Version>(e->version) : std::nullopt);
    return e;
  }

  void record_read(const std::string& key, std::optional<Version> version) {
    for (const auto& r : response_.read_set) {
      if (r.key == key) return;
    }
    response_.read_set.push_back(ReadEntry{key, version});
  }

  void put(std::string key, Document value) { response_.write_set.push_back(WriteEntry{std::move(key), std::move(value)}); }

  ProposalResponse finish(ChaincodeStatus status) {
    ProposalResponse out = std::move(response_);
    out.status = status;
    if (status != ChaincodeStatus::ok) out.write_set.clear();
    response_ = {};
    return out;
  }

 private:
  MemberStateId caller_;
  bool signature_valid_;
  const WorldState& view_;
  ProposalResponse response_;
};

struct MedicalCenterRecord {
  std::string center_id;
  MemberStateId ms;
  std::string name;
  std::string address;
  Did issuer_did;

  Document to_document() const {
    return Document{{"docType", kCenterType}, {"centerId", center_id}, {"ms", ms.code()},
                    {"name", name},           {"address", address},    {"issuerDid", issuer_did.text()}};
  }

  static MedicalCenterRecord from_document(const Document& d) {
    return MedicalCenterRecord{d.at("centerId").get<std::string>(), MemberStateId(d.at("ms").get<std::string>()),
                               d.at("name").get<std::string>(), d.at("address").get<std::string>(),
                               Did::parse(d.at("issuerDid").get<std::string>())};
  }
};

inline std::string center_key(const MemberStateId& ms, std::string_view center_id) {
  return ms.ns() + std::string(kCenterType) + "/" + std::string(center_id);
}

/// Index from an issuer DID to the center that owns it.
inline std::string issuer_key(const MemberStateId& ms, const Did& issuer) { return ms.ns() + "issuer/" + issuer.text(); }

namespace detail {
inline bool conformant_id(std::string_view id) {
  return !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), is_uri_safe_char) &&
         id.find(':') == std::string_view::npos;
}
}  // namespace detail

inline ProposalResponse register_medical_center(ChaincodeContext& ctx, const MedicalCenterRecord& center) {
  if (!ctx.caller_signature_valid() || ctx.caller() != center.ms) return ctx.finish(ChaincodeStatus::access_denied);
  if (!detail::conformant_id(center.center_id) || center.name.empty() || center.address.empty() ||
      center.issuer_did.empty()) {
    return ctx.finish(ChaincodeStatus::nonconformant_message);
  }
  auto key = center_key(center.ms, center.center_id);
  auto did_key = issuer_key(center.ms, center.issuer_did);
  if (ctx.get(key) || ctx.get(did_key)) return ctx.finish(ChaincodeStatus::already_registered);
  ctx.put(key, center.to_document());
  ctx.put(did_key, Document{{"docType", "issuer"}, {"centerId", center.center_id}});
  return ctx.finish(ChaincodeStatus::ok);
}

/// Anchors a certificate hash in the caller's namespace. The issuer's center
/// entries land in the read set, so a center that disappears or changes
/// before commit invalidates the transaction.
inline ProposalResponse register_certificate(ChaincodeContext& ctx, ByteView cert_hash, const Did& issuer_did,
                                             const Document& metadata) {
  if (!ctx.caller_signature_valid()) return ctx.finish(ChaincodeStatus::access_denied);
  if (cert_hash.size() != kDigestSize || issuer_did.empty() || !metadata.is_object()) {
    return ctx.finish(ChaincodeStatus::nonconformant_message);
  }
  const StateEntry* idx = ctx.get(issuer_key(ctx.caller(), issuer_did));
  if (!idx) return ctx.finish(ChaincodeStatus::unknown_issuer);
  if (!ctx.get(center_key(ctx.caller(), idx->value.at("centerId").get<std::string>()))) {
    return ctx.finish(ChaincodeStatus::unknown_issuer);
  }
  auto hash = CertificateHash::from_bytes(cert_hash);
  auto key = cert_key(ctx.caller(), hash);
  if (ctx.get(key)) return ctx.finish(ChaincodeStatus::already_registered);
  CertificateRecord record{hash, ctx.caller(), issuer_did, {}, metadata};
  ctx.put(key, record.to_document());
  return ctx.finish(ChaincodeStatus::ok);
}

enum class QueryMode { worst_case_scan, exact_lookup };

struct VerifyResult {
  std::optional<CertificateRecord> record;
  std::size_t scan_count = 0;
  ProposalResponse response;

  bool found() const { return record.has_value(); }
};

/// Read-only lookup of an anchored hash. worst_case_scan runs a content
/// query over every certificate record; exact_lookup probes keys directly,
/// starting with `issuing_ms` when known and otherwise walking the roster.
inline VerifyResult verify_certificate(ChaincodeContext& ctx, const CertificateHash& cert_hash,
                                       QueryMode mode = QueryMode::worst_case_scan,
                                       std::optional<MemberStateId> issuing_ms = std::nullopt) {
  VerifyResult out;
  if (mode == QueryMode::worst_case_scan) {
    auto q = rich_query(ctx.view(), RecordQuery{}.where("certHash", cert_hash.hex()));
    out.scan_count = q.scan_count;
    if (!q.matches.empty()) {
      out.record = q.matches.front();
      ctx.record_read(cert_key(out.record->ms, cert_hash), out.record->registered_at);
    }
  } else {
    std::vector<MemberStateId> probes;
    if (issuing_ms) {
      probes.push_back(*issuing_ms);
    } else {
      probes = roster();
    }
    for (const auto& ms : probes) {
      auto key = cert_key(ms, cert_hash);
      auto hit = get_record(ctx.view(), key);
      out.scan_count += hit.scan_count;
      if (hit.record) {
        ctx.record_read(key, hit.record->registered_at);
        out.record = std::move(hit.record);
        break;
      }
    }
  }
  out.response = ctx.finish(ChaincodeStatus::ok);
  return out;
}

/// Wraps an endorsed proposal into a self-signed transaction. payload_size is
/// the canonical encoding size plus `overhead_bytes` (certificates, headers).
inline Transaction make_transaction(const ProposalResponse& response, ChaincodeCall call, const MemberStateId& submitter,
                                    const KeyPair& key, std::string_view nonce, std::uint64_t overhead_bytes = 0) {
  Transaction tx;
  Bytes id_material = CanonicalWriter("VTID").field(submitter.code()).field(nonce).field(ByteView(call.encode())).bytes();
  tx.tx_id = to_hex(sha256(id_material));
  tx.submitter = submitter;
  tx.call = std::move(call);
  tx.read_set = response.read_set;
  tx.write_set = response.write_set;
  endorse(tx, submitter, key);
  tx.payload_size = encode_transaction(tx).size() + overhead_bytes;
  return tx;
}

inline ChaincodeCall register_certificate_call(const CertificateHash& h, const Did& issuer) {
  return ChaincodeCall{"registerCertificate", {Bytes(h.digest.begin(), h.digest.end()), to_bytes(issuer.text())}};
}

inline ChaincodeCall verify_certificate_call(const CertificateHash& h) {
  return ChaincodeCall{"verifyCertificate", {Bytes(h.digest.begin(), h.digest.end())}};
}

inline ChaincodeCall register_center_call(const MedicalCenterRecord& c) {
  return ChaincodeCall{"registerMedicalCenter", {to_bytes(c.to_document().dump())}};
}

}  // namespace vaxledger
