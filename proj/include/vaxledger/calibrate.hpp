#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vaxledger/bench_config.hpp"
#include "vaxledger/report.hpp"
#include "vaxledger/simulation.hpp"

namespace vaxledger {

struct TargetRow {
  Step step = Step::register_cert;
  double tps = 0;
  double response_ms = 0;
  double peer_kb = 0;
  double ordering_kb = 0;
};

inline std::vector<TargetRow> parse_targets(std::string_view csv_text) {
  auto t = parse_csv(csv_text);
  auto step = t.column("step"), tps = t.column("tps"), resp = t.column("response_time_ms"),
       peer = t.column("peer_bandwidth_kb"), ord = t.column("ordering_bandwidth_kb");
  std::vector<TargetRow> out;
  for (const auto& r : t.rows) {
    try {
      out.push_back({parse_step(r[step]), std::stod(r[tps]), std::stod(r[resp]), std::stod(r[peer]), std::stod(r[ord])});
    } catch (const std::logic_error&) {
      fail(Errc::config_error, "non-numeric value in targets row");
    }
  }
  return out;
}

inline std::vector<TargetRow> load_targets(const std::filesystem::path& path) { return parse_targets(read_text_file(path)); }

struct Residual {
  TargetRow target;
  double response_ms = 0;
  double peer_kb = 0;
  double ordering_kb = 0;
  bool saturated = false;

  double response_rel() const { return response_ms / target.response_ms - 1; }
  double peer_rel() const { return peer_kb / target.peer_kb - 1; }
};

struct CalibrationSetup {
  ScenarioConfig register_base;  // tps_levels are replaced by the targets'
  ScenarioConfig verify_base;
  int max_rounds = 12;
  double initial_step = 0.16;
  double min_step = 0.01;
  double probe_factor = 1.2;     // verify must saturate at this multiple of the top target
  double failure_threshold = 0.25;
};

/// Timing fidelity, reference benchmark bases: 60 s runs, 10,000 preloaded
/// records for verify.
inline CalibrationSetup default_calibration_setup() {
  CalibrationSetup s;
  s.register_base.step = Step::register_cert;
  s.register_base.tps_levels = {1};
  s.register_base.fidelity = Fidelity::timing;
  s.verify_base = s.register_base;
  s.verify_base.step = Step::verify_cert;
  s.verify_base.preloaded_records = 10'000;
  return s;
}

struct Evaluation {
  std::vector<Residual> residuals;
  double mean_rel_error = 0;   // over response times and peer bandwidths
  double max_response_error = 0;
  bool bracket_ok = true;      // no target level saturates; the verify probe does
  double objective = 0;
};

struct CalibrationResult {
  Calibration fitted;
  Evaluation evaluation;
  std::size_t evaluations = 0;
};

inline std::string render_residuals(const std::vector<Residual>& residuals) {
  CsvTable t;
  t.header = {"step", "tps", "target_ms", "model_ms", "err_%", "target_peer_kb", "model_peer_kb", "err_%", "model_ord_kb"};
  auto pct = [](double r) { return detail::fixed1(100 * r); };
  for (const auto& r : residuals) {
    t.rows.push_back({std::string(to_string(r.target.step)), detail::fixed1(r.target.tps),
                      detail::fixed1(r.target.response_ms), detail::fixed1(r.response_ms), pct(r.response_rel()),
                      detail::fixed1(r.target.peer_kb), detail::fixed1(r.peer_kb), pct(r.peer_rel()),
                      detail::fixed1(r.ordering_kb)});
  }
  return render_table(t);
}

inline Evaluation evaluate(const std::vector<TargetRow>& targets, const Calibration& cal, const CalibrationSetup& setup,
                           bool probe = true) {
  Evaluation ev;
  for (Step step : {Step::register_cert, Step::verify_cert}) {
    ScenarioConfig cfg = step == Step::register_cert ? setup.register_base : setup.verify_base;
    cfg.step = step;
    cfg.service_profile = cal.profile;
    cfg.batch = cal.batch;
    cfg.tps_levels.clear();
    std::vector<const TargetRow*> rows;
    for (const auto& t : targets) {
      if (t.step == step) {
        cfg.tps_levels.push_back(t.tps);
        rows.push_back(&t);
      }
    }
    double top = cfg.tps_levels.empty() ? 0 : *std::max_element(cfg.tps_levels.begin(), cfg.tps_levels.end());
    bool with_probe = probe && step == Step::verify_cert && top > 0;
    if (with_probe) cfg.tps_levels.push_back(top * setup.probe_factor);
    if (cfg.tps_levels.empty()) continue;
    auto report = run_scenario(cfg);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& l = report.levels[k];
      ev.residuals.push_back({*rows[k], l.mean_ms, l.peer_bandwidth_kb, l.ordering_bandwidth_kb, l.saturated});
      ev.bracket_ok = ev.bracket_ok && !l.saturated;
    }
    if (with_probe) ev.bracket_ok = ev.bracket_ok && report.levels.back().saturated;
  }
  double sum = 0;
  for (const auto& r : ev.residuals) {
    sum += std::abs(r.response_rel()) + std::abs(r.peer_rel());
    ev.max_response_error = std::max(ev.max_response_error, std::abs(r.response_rel()));
  }
  ev.mean_rel_error = ev.residuals.empty() ? 0 : sum / (2.0 * static_cast<double>(ev.residuals.size()));
  ev.objective = ev.mean_rel_error + 0.5 * ev.max_response_error + (ev.bracket_ok ? 0.0 : 1.0);
  return ev;
}

namespace detail {

struct Knob {
  std::string_view name;
  std::function<double(const Calibration&)> get;
  std::function<void(Calibration&, double)> set;
};

inline std::vector<Knob> calibration_knobs() {
  auto ms = [](double ServiceTimeProfile::*f, std::string_view name) {
    return Knob{name, [f](const Calibration& c) { return c.profile.*f; },
                [f](Calibration& c, double v) { c.profile.*f = v; }};
  };
  auto bytes = [](std::uint64_t ServiceTimeProfile::*f, std::string_view name) {
    return Knob{name, [f](const Calibration& c) { return static_cast<double>(c.profile.*f); },
                [f](Calibration& c, double v) { c.profile.*f = static_cast<std::uint64_t>(std::max(1.0, std::round(v))); }};
  };
  auto dur = [](SimDuration BatchConfig::*f, std::string_view name) {
    return Knob{name, [f](const Calibration& c) { return to_millis(c.batch.*f); },
                [f](Calibration& c, double v) { c.batch.*f = from_millis(v); }};
  };
  return {ms(&ServiceTimeProfile::rest_overhead_ms, "rest_overhead_ms"),
          ms(&ServiceTimeProfile::query_per_record_us, "query_per_record_us"),
          ms(&ServiceTimeProfile::commit_per_tx_ms, "commit_per_tx_ms"),
          ms(&ServiceTimeProfile::commit_per_readonly_tx_ms, "commit_per_readonly_tx_ms"),
          ms(&ServiceTimeProfile::commit_per_block_ms, "commit_per_block_ms"),
          dur(&BatchConfig::batch_timeout, "batch_timeout_ms"),
          dur(&BatchConfig::min_block_interval, "min_block_interval_ms"),
          ms(&ServiceTimeProfile::endorse_ms, "endorse_ms"),
          ms(&ServiceTimeProfile::orderer_per_envelope_ms, "orderer_per_envelope_ms"),
          bytes(&ServiceTimeProfile::gossip_bytes, "gossip_bytes"),
          bytes(&ServiceTimeProfile::register_tx_bytes, "register_tx_bytes"),
          bytes(&ServiceTimeProfile::verify_tx_bytes, "verify_tx_bytes"),
          bytes(&ServiceTimeProfile::block_overhead_bytes, "block_overhead_bytes"),
          bytes(&ServiceTimeProfile::proposal_bytes, "proposal_bytes")};
}

inline bool has_row(const std::vector<TargetRow>& targets, Step step, double tps) {
  return std::any_of(targets.begin(), targets.end(),
                     [&](const TargetRow& t) { return t.step == step && std::abs(t.tps - tps) < 1e-9; });
}

}  // namespace detail

/// Multiplicative coordinate descent over the profile and batch timing knobs.
/// Each knob is tried at ×(1 ± step); the step halves after a pass without
/// improvement. Deterministic: every evaluation uses the bases' fixed seed.
inline CalibrationResult calibrate(const std::vector<TargetRow>& targets, const Calibration& initial,
                                   const CalibrationSetup& setup = default_calibration_setup()) {
  require(!targets.empty(), Errc::calibration_failure, "no calibration targets");
  for (auto [step, tps] : {std::pair{Step::register_cert, 1.0}, std::pair{Step::register_cert, 28.0},
                           std::pair{Step::verify_cert, 1.0}, std::pair{Step::verify_cert, 100.0}}) {
    require(detail::has_row(targets, step, tps), Errc::calibration_failure,
            "targets must include the " + std::string(to_string(step)) + " " + detail::fixed1(tps) + " TPS row");
  }
  for (const auto& t : targets) {
    require(t.tps > 0 && t.response_ms > 0 && t.peer_kb > 0, Errc::calibration_failure, "targets must be positive");
  }

  CalibrationResult result{initial, evaluate(targets, initial, setup), 1};
  auto knobs = detail::calibration_knobs();
  double step = setup.initial_step;
  for (int round = 0; round < setup.max_rounds && step >= setup.min_step; ++round) {
    bool improved = false;
    for (const auto& knob : knobs) {
      double base = knob.get(result.fitted);
      if (base <= 0) continue;
      for (double dir : {1.0, -1.0}) {
        Calibration trial = result.fitted;
        knob.set(trial, base * (1 + dir * step));
        if (knob.get(trial) == base) continue;
        auto ev = evaluate(targets, trial, setup);
        ++result.evaluations;
        if (ev.objective < result.evaluation.objective - 1e-9) {
          result.fitted = trial;
          result.evaluation = std::move(ev);
          improved = true;
          break;
        }
      }
    }
    if (!improved) step /= 2;
  }

  if (result.evaluation.mean_rel_error > setup.failure_threshold) {
    fail(Errc::calibration_failure, "mean relative error " + detail::fixed1(100 * result.evaluation.mean_rel_error) +
                                        "% exceeds " + detail::fixed1(100 * setup.failure_threshold) + "%\n" +
                                        render_residuals(result.evaluation.residuals));
  }
  return result;
}

}  // namespace vaxledger
