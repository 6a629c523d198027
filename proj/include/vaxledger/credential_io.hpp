#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vaxledger/credential.hpp"

namespace vaxledger {

// Credential fixture document, one credential per file:
//
//   {
//     "schema": "vaxledger.credential/1",
//     "context": "<uri>",
//     "issuer": "did:<method>:<id>",
//     "subject": "did:<method>:<id>",
//     "vaccine": {"product": "...", "doseNumber": 2, "totalDoses": 2, "batchId": "..."},
//     "issuanceDate": <unix seconds>,
//     "expirationDate": <unix seconds>,
//     "proof": {"type": "...", "verificationMethod": "did:...", "signatureValue": "<hex>"}   // optional
//   }
//
// Unknown keys are rejected.
inline constexpr std::string_view kCredentialSchema = "vaxledger.credential/1";

inline nlohmann::ordered_json credential_to_json(const VaccinationCredential& c) {
  nlohmann::ordered_json j;
  j["schema"] = kCredentialSchema;
  j["context"] = c.context;
  j["issuer"] = c.issuer.text();
  j["subject"] = c.subject.text();
  j["vaccine"] = {{"product", c.vaccine_product},
                  {"doseNumber", c.dose_number},
                  {"totalDoses", c.total_doses},
                  {"batchId", c.batch_id}};
  j["issuanceDate"] = c.issuance_date;
  j["expirationDate"] = c.expiration_date;
  if (c.proof) {
    j["proof"] = {{"type", c.proof->scheme_id},
                  {"verificationMethod", c.proof->verification_method.text()},
                  {"signatureValue", to_hex(c.proof->signature)}};
  }
  return j;
}

namespace detail {
inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                std::string_view where) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) {
      fail(Errc::parse_error, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}
}  // namespace detail

inline VaccinationCredential credential_from_json(const nlohmann::json& j) {
  try {
    require(j.is_object(), Errc::parse_error, "credential document must be an object");
    detail::reject_unknown_keys(j,
                                {"schema", "context", "issuer", "subject", "vaccine", "issuanceDate",
                                 "expirationDate", "proof"},
                                "credential");
    require(j.at("schema").get<std::string>() == kCredentialSchema, Errc::parse_error,
            "unsupported credential schema");
    VaccinationCredential c;
    c.context = j.at("context").get<std::string>();
    c.issuer = Did::parse(j.at("issuer").get<std::string>());
    c.subject = Did::parse(j.at("subject").get<std::string>());
    const auto& v = j.at("vaccine");
    detail::reject_unknown_keys(v, {"product", "doseNumber", "totalDoses", "batchId"}, "vaccine");
    c.vaccine_product = v.at("product").get<std::string>();
    c.dose_number = v.at("doseNumber").get<std::uint32_t>();
    c.total_doses = v.at("totalDoses").get<std::uint32_t>();
    c.batch_id = v.at("batchId").get<std::string>();
    c.issuance_date = j.at("issuanceDate").get<std::int64_t>();
    c.expiration_date = j.at("expirationDate").get<std::int64_t>();
    if (j.contains("proof")) {
      const auto& p = j.at("proof");
      detail::reject_unknown_keys(p, {"type", "verificationMethod", "signatureValue"}, "proof");
      c.proof = Proof{p.at("type").get<std::string>(), Did::parse(p.at("verificationMethod").get<std::string>()),
                      from_hex(p.at("signatureValue").get<std::string>())};
    }
    check_invariants(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, e.what());
  }
}

inline VaccinationCredential parse_credential(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, e.what());
  }
  return credential_from_json(j);
}

inline std::string render_credential(const VaccinationCredential& c) { return credential_to_json(c).dump(2) + "\n"; }

inline VaccinationCredential load_credential(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io_error, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_credential(buf.str());
}

inline void save_credential(const VaccinationCredential& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), Errc::io_error, "cannot write " + path.string());
  out << render_credential(c);
  require(static_cast<bool>(out), Errc::io_error, "write failed for " + path.string());
}

}  // namespace vaxledger
