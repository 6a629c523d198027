#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vaxledger/chaincode.hpp"
#include "vaxledger/error.hpp"
#include "vaxledger/netsim.hpp"
#include "vaxledger/ordering.hpp"
#include "vaxledger/workload.hpp"

namespace vaxledger {

enum class Step : std::uint8_t { register_cert, verify_cert };

inline std::string_view to_string(Step s) { return s == Step::register_cert ? "register" : "verify"; }

inline Step parse_step(std::string_view s) {
  if (s == "register") return Step::register_cert;
  if (s == "verify") return Step::verify_cert;
  fail(Errc::config_error, "unknown step '" + std::string(s) + "'");
}

inline std::string_view to_string(QueryMode m) {
  return m == QueryMode::worst_case_scan ? "worst_case_scan" : "exact_lookup";
}

inline QueryMode parse_query_mode(std::string_view s) {
  if (s == "worst_case_scan") return QueryMode::worst_case_scan;
  if (s == "exact_lookup") return QueryMode::exact_lookup;
  fail(Errc::config_error, "unknown query_mode '" + std::string(s) + "'");
}

/// full: real credentials, signatures and 27 peer ledgers. timing: the same
/// event schedule with ledger work elided; metrics are identical.
enum class Fidelity : std::uint8_t { full, timing };

inline std::string_view to_string(Fidelity f) { return f == Fidelity::full ? "full" : "timing"; }

inline Fidelity parse_fidelity(std::string_view s) {
  if (s == "full") return Fidelity::full;
  if (s == "timing") return Fidelity::timing;
  fail(Errc::config_error, "unknown fidelity '" + std::string(s) + "'");
}

/// Per-role service times and modeled wire sizes.
struct ServiceTimeProfile {
  double rest_overhead_ms = 0;
  double endorse_ms = 0;
  double query_per_record_us = 0;
  double orderer_per_envelope_ms = 0;
  double commit_per_tx_ms = 0;
  double commit_per_readonly_tx_ms = 0;
  double commit_per_block_ms = 0;

  std::uint64_t proposal_bytes = 0;
  std::uint64_t query_response_bytes = 0;
  std::uint64_t register_tx_bytes = 0;
  std::uint64_t verify_tx_bytes = 0;
  std::uint64_t replication_ack_bytes = 0;
  std::uint64_t block_overhead_bytes = 0;
  std::uint64_t ack_bytes = 0;
  std::uint64_t gossip_bytes = 0;
  double gossip_interval_ms = 1000;
  std::uint64_t heartbeat_bytes = 0;
  double heartbeat_interval_ms = 1000;

  void validate() const {
    for (double v : {rest_overhead_ms, endorse_ms, query_per_record_us, orderer_per_envelope_ms, commit_per_tx_ms,
                     commit_per_readonly_tx_ms, commit_per_block_ms}) {
      require(v >= 0 && std::isfinite(v), Errc::config_error, "service times must be finite and non-negative");
    }
    require(gossip_interval_ms > 0 && heartbeat_interval_ms > 0, Errc::config_error,
            "background intervals must be positive");
    require(proposal_bytes > 0 && query_response_bytes > 0 && register_tx_bytes > 0 && verify_tx_bytes > 0 &&
                replication_ack_bytes > 0 && ack_bytes > 0,
            Errc::config_error, "request-path message sizes must be positive");
  }

  friend bool operator==(const ServiceTimeProfile&, const ServiceTimeProfile&) = default;
};

struct FaultEvent {
  double time_seconds = 0;
  OrderingRole role = OrderingRole::coordinator;
  std::size_t index = 0;
  InstanceStatus status = InstanceStatus::down;

  friend bool operator==(const FaultEvent&, const FaultEvent&) = default;
};

/// A fitted profile together with the block-cutting knobs fitted with it.
struct Calibration {
  ServiceTimeProfile profile;
  BatchConfig batch;
};

/// Fitted against the reference benchmark response times and peer bandwidths; mirrors
/// data/calibrated_profile.json.
inline Calibration default_calibration() {
  Calibration c;
  auto& p = c.profile;
  p.rest_overhead_ms = 9.6;
  p.endorse_ms = 0.967;
  p.query_per_record_us = 0.816;
  p.orderer_per_envelope_ms = 1.343;
  p.commit_per_tx_ms = 8.6;
  p.commit_per_readonly_tx_ms = 9.4;
  p.commit_per_block_ms = 1.824;
  p.proposal_bytes = 1462;
  p.query_response_bytes = 1500;
  p.register_tx_bytes = 2075;
  p.verify_tx_bytes = 780;
  p.replication_ack_bytes = 100;
  p.block_overhead_bytes = 15120;
  p.ack_bytes = 300;
  p.gossip_bytes = 7100;
  p.gossip_interval_ms = 1000;
  p.heartbeat_bytes = 200;
  p.heartbeat_interval_ms = 500;
  c.batch.max_message_count = 10;
  c.batch.max_batch_bytes = 512 * 1024;
  c.batch.batch_timeout = from_millis(34.944);
  c.batch.min_block_interval = from_millis(124.6);
  return c;
}

struct ScenarioConfig {
  Step step = Step::register_cert;
  std::vector<double> tps_levels;
  double duration_seconds = 60;
  LinkParams link;
  ServiceTimeProfile service_profile = default_calibration().profile;
  BatchConfig batch = default_calibration().batch;
  QueryMode query_mode = QueryMode::worst_case_scan;
  std::vector<FaultEvent> fault_schedule;
  std::uint64_t seed = 1;
  std::size_t preloaded_records = 0;
  ArrivalMode arrival_mode = ArrivalMode::uniform;
  std::string target_ms = "DE";  // every request enters through this peer
  bool ordered_verify = true;    // verify also orders a read-only transaction
  double request_timeout_ms = 3000;
  Fidelity fidelity = Fidelity::full;

  void validate() const {
    require(!tps_levels.empty(), Errc::config_error, "tps_levels must be nonempty");
    for (double t : tps_levels) require(t > 0 && std::isfinite(t), Errc::config_error, "tps levels must be positive");
    require(duration_seconds > 0 && std::isfinite(duration_seconds), Errc::config_error, "duration must be positive");
    require(request_timeout_ms > 0, Errc::config_error, "request_timeout_ms must be positive");
    try {
      link.validate();
      batch.validate();
      (void)MemberStateId(target_ms);
    } catch (const Error& e) {
      fail(Errc::config_error, e.what());
    }
    service_profile.validate();
    for (const auto& f : fault_schedule) {
      require(f.time_seconds >= 0, Errc::config_error, "fault times must be non-negative");
      require(f.index < role_cardinality(f.role), Errc::config_error, "fault instance index out of range");
    }
  }
};

// ---------------------------------------------------------------------------
// JSON form. Unknown keys are rejected at every level.
// ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                           std::string_view where) {
  require(j.is_object(), Errc::config_error, std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail(Errc::config_error, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_opt(const nlohmann::json& j, std::string_view key, T& out) {
  auto it = j.find(std::string(key));
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config_error, "bad value for '" + std::string(key) + "': " + e.what());
  }
}

inline SimDuration read_ms(const nlohmann::json& j, std::string_view key, SimDuration current) {
  double ms = to_millis(current);
  read_opt(j, key, ms);
  return from_millis(ms);
}

}  // namespace detail

inline nlohmann::ordered_json profile_to_json(const ServiceTimeProfile& p) {
  nlohmann::ordered_json j;
  j["rest_overhead_ms"] = p.rest_overhead_ms;
  j["endorse_ms"] = p.endorse_ms;
  j["query_per_record_us"] = p.query_per_record_us;
  j["orderer_per_envelope_ms"] = p.orderer_per_envelope_ms;
  j["commit_per_tx_ms"] = p.commit_per_tx_ms;
  j["commit_per_readonly_tx_ms"] = p.commit_per_readonly_tx_ms;
  j["commit_per_block_ms"] = p.commit_per_block_ms;
  j["proposal_bytes"] = p.proposal_bytes;
  j["query_response_bytes"] = p.query_response_bytes;
  j["register_tx_bytes"] = p.register_tx_bytes;
  j["verify_tx_bytes"] = p.verify_tx_bytes;
  j["replication_ack_bytes"] = p.replication_ack_bytes;
  j["block_overhead_bytes"] = p.block_overhead_bytes;
  j["ack_bytes"] = p.ack_bytes;
  j["gossip_bytes"] = p.gossip_bytes;
  j["gossip_interval_ms"] = p.gossip_interval_ms;
  j["heartbeat_bytes"] = p.heartbeat_bytes;
  j["heartbeat_interval_ms"] = p.heartbeat_interval_ms;
  return j;
}

inline ServiceTimeProfile profile_from_json(const nlohmann::json& j, ServiceTimeProfile p = default_calibration().profile) {
  detail::reject_unknown(j,
                         {"rest_overhead_ms", "endorse_ms", "query_per_record_us", "orderer_per_envelope_ms",
                          "commit_per_tx_ms", "commit_per_readonly_tx_ms", "commit_per_block_ms", "proposal_bytes",
                          "query_response_bytes", "register_tx_bytes", "verify_tx_bytes", "replication_ack_bytes",
                          "block_overhead_bytes", "ack_bytes", "gossip_bytes", "gossip_interval_ms", "heartbeat_bytes",
                          "heartbeat_interval_ms"},
                         "service_profile");
  detail::read_opt(j, "rest_overhead_ms", p.rest_overhead_ms);
  detail::read_opt(j, "endorse_ms", p.endorse_ms);
  detail::read_opt(j, "query_per_record_us", p.query_per_record_us);
  detail::read_opt(j, "orderer_per_envelope_ms", p.orderer_per_envelope_ms);
  detail::read_opt(j, "commit_per_tx_ms", p.commit_per_tx_ms);
  detail::read_opt(j, "commit_per_readonly_tx_ms", p.commit_per_readonly_tx_ms);
  detail::read_opt(j, "commit_per_block_ms", p.commit_per_block_ms);
  detail::read_opt(j, "proposal_bytes", p.proposal_bytes);
  detail::read_opt(j, "query_response_bytes", p.query_response_bytes);
  detail::read_opt(j, "register_tx_bytes", p.register_tx_bytes);
  detail::read_opt(j, "verify_tx_bytes", p.verify_tx_bytes);
  detail::read_opt(j, "replication_ack_bytes", p.replication_ack_bytes);
  detail::read_opt(j, "block_overhead_bytes", p.block_overhead_bytes);
  detail::read_opt(j, "ack_bytes", p.ack_bytes);
  detail::read_opt(j, "gossip_bytes", p.gossip_bytes);
  detail::read_opt(j, "gossip_interval_ms", p.gossip_interval_ms);
  detail::read_opt(j, "heartbeat_bytes", p.heartbeat_bytes);
  detail::read_opt(j, "heartbeat_interval_ms", p.heartbeat_interval_ms);
  p.validate();
  return p;
}

inline nlohmann::ordered_json batch_to_json(const BatchConfig& b) {
  nlohmann::ordered_json j;
  j["max_message_count"] = b.max_message_count;
  j["max_batch_bytes"] = b.max_batch_bytes;
  j["batch_timeout_ms"] = to_millis(b.batch_timeout);
  j["min_block_interval_ms"] = to_millis(b.min_block_interval);
  return j;
}

inline BatchConfig batch_from_json(const nlohmann::json& j, BatchConfig b = default_calibration().batch) {
  detail::reject_unknown(j, {"max_message_count", "max_batch_bytes", "batch_timeout_ms", "min_block_interval_ms"},
                         "batch");
  detail::read_opt(j, "max_message_count", b.max_message_count);
  detail::read_opt(j, "max_batch_bytes", b.max_batch_bytes);
  b.batch_timeout = detail::read_ms(j, "batch_timeout_ms", b.batch_timeout);
  b.min_block_interval = detail::read_ms(j, "min_block_interval_ms", b.min_block_interval);
  try {
    b.validate();
  } catch (const Error& e) {
    fail(Errc::config_error, e.what());
  }
  return b;
}

inline nlohmann::ordered_json calibration_to_json(const Calibration& c) {
  nlohmann::ordered_json j;
  j["service_profile"] = profile_to_json(c.profile);
  j["batch"] = batch_to_json(c.batch);
  return j;
}

inline Calibration calibration_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"service_profile", "batch"}, "calibration");
  Calibration c = default_calibration();
  if (j.contains("service_profile")) c.profile = profile_from_json(j.at("service_profile"), c.profile);
  if (j.contains("batch")) c.batch = batch_from_json(j.at("batch"), c.batch);
  return c;
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j,
                         {"step", "tps_levels", "duration_seconds", "link", "service_profile", "batch", "query_mode",
                          "fault_schedule", "seed", "preloaded_records", "arrival_mode", "target_ms",
                          "ordered_verify", "request_timeout_ms", "fidelity"},
                         "scenario");
  require(j.contains("step") && j.contains("tps_levels"), Errc::config_error, "scenario needs step and tps_levels");
  ScenarioConfig c;
  std::string text;
  detail::read_opt(j, "step", text);
  c.step = parse_step(text);
  detail::read_opt(j, "tps_levels", c.tps_levels);
  detail::read_opt(j, "duration_seconds", c.duration_seconds);
  if (j.contains("link")) {
    const auto& l = j.at("link");
    detail::reject_unknown(l, {"latency_ms", "bandwidth_bps", "tls_overhead_bytes"}, "link");
    c.link.latency = detail::read_ms(l, "latency_ms", c.link.latency);
    detail::read_opt(l, "bandwidth_bps", c.link.bandwidth_bps);
    detail::read_opt(l, "tls_overhead_bytes", c.link.tls_overhead);
  }
  if (j.contains("service_profile")) c.service_profile = profile_from_json(j.at("service_profile"));
  if (j.contains("batch")) c.batch = batch_from_json(j.at("batch"));
  if (j.contains("query_mode")) {
    detail::read_opt(j, "query_mode", text);
    c.query_mode = parse_query_mode(text);
  }
  if (j.contains("fault_schedule")) {
    const auto& fs = j.at("fault_schedule");
    require(fs.is_array(), Errc::config_error, "fault_schedule must be an array");
    for (const auto& f : fs) {
      detail::reject_unknown(f, {"time_seconds", "role", "index", "status"}, "fault_schedule entry");
      require(f.contains("role") && f.contains("index") && f.contains("status"), Errc::config_error,
              "fault entries need role, index and status");
      FaultEvent e;
      detail::read_opt(f, "time_seconds", e.time_seconds);
      detail::read_opt(f, "index", e.index);
      std::string role, status;
      detail::read_opt(f, "role", role);
      detail::read_opt(f, "status", status);
      try {
        e.role = parse_ordering_role(role);
      } catch (const Error& err) {
        fail(Errc::config_error, err.what());
      }
      require(status == "up" || status == "down", Errc::config_error, "fault status must be up or down");
      e.status = status == "up" ? InstanceStatus::up : InstanceStatus::down;
      c.fault_schedule.push_back(e);
    }
  }
  detail::read_opt(j, "seed", c.seed);
  detail::read_opt(j, "preloaded_records", c.preloaded_records);
  if (j.contains("arrival_mode")) {
    detail::read_opt(j, "arrival_mode", text);
    try {
      c.arrival_mode = parse_arrival_mode(text);
    } catch (const Error& err) {
      fail(Errc::config_error, err.what());
    }
  }
  detail::read_opt(j, "target_ms", c.target_ms);
  detail::read_opt(j, "ordered_verify", c.ordered_verify);
  detail::read_opt(j, "request_timeout_ms", c.request_timeout_ms);
  if (j.contains("fidelity")) {
    detail::read_opt(j, "fidelity", text);
    c.fidelity = parse_fidelity(text);
  }
  c.validate();
  return c;
}

inline nlohmann::ordered_json scenario_to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["step"] = to_string(c.step);
  j["tps_levels"] = c.tps_levels;
  j["duration_seconds"] = c.duration_seconds;
  j["link"] = {{"latency_ms", to_millis(c.link.latency)},
               {"bandwidth_bps", c.link.bandwidth_bps},
               {"tls_overhead_bytes", c.link.tls_overhead}};
  j["service_profile"] = profile_to_json(c.service_profile);
  j["batch"] = batch_to_json(c.batch);
  j["query_mode"] = to_string(c.query_mode);
  auto faults = nlohmann::ordered_json::array();
  for (const auto& f : c.fault_schedule) {
    faults.push_back({{"time_seconds", f.time_seconds},
                      {"role", to_string(f.role)},
                      {"index", f.index},
                      {"status", f.status == InstanceStatus::up ? "up" : "down"}});
  }
  j["fault_schedule"] = faults;
  j["seed"] = c.seed;
  j["preloaded_records"] = c.preloaded_records;
  j["arrival_mode"] = to_string(c.arrival_mode);
  j["target_ms"] = c.target_ms;
  j["ordered_verify"] = c.ordered_verify;
  j["request_timeout_ms"] = c.request_timeout_ms;
  j["fidelity"] = to_string(c.fidelity);
  return j;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io_error, "cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::config_error, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) { return scenario_from_json(read_json_file(path)); }

inline Calibration load_calibration(const std::filesystem::path& path) {
  return calibration_from_json(read_json_file(path));
}

}  // namespace vaxledger
