#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vaxledger {

enum class Errc {
  invalid_argument,
  invalid_credential,
  missing_proof,
  parse_error,
  out_of_order,
  broken_chain,
  invalid_query,
  config_error,
  calibration_failure,
  io_error,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::invalid_credential: return "invalid-credential";
    case Errc::missing_proof: return "missing-proof";
    case Errc::parse_error: return "parse-error";
    case Errc::out_of_order: return "out-of-order";
    case Errc::broken_chain: return "broken-chain";
    case Errc::invalid_query: return "invalid-query";
    case Errc::config_error: return "config-error";
    case Errc::calibration_failure: return "calibration-failure";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

// Every failure the library throws carries one of the codes above so callers
// (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, Errc code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace vaxledger
