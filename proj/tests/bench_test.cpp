#include <sys/wait.h>

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>

#include "vaxledger/bench_config.hpp"
#include "vaxledger/calibrate.hpp"
#include "vaxledger/report.hpp"
#include "vaxledger/simulation.hpp"

namespace vx = vaxledger;
namespace fs = std::filesystem;

namespace {

const fs::path kData = VAXLEDGER_DATA_DIR;

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / ("vaxledger-test-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

vx::ScenarioConfig timing(vx::ScenarioConfig cfg) {
  cfg.fidelity = vx::Fidelity::timing;
  return cfg;
}

vx::ScenarioConfig quick(vx::Step step, std::vector<double> levels, double seconds, vx::Fidelity f) {
  vx::ScenarioConfig cfg;
  cfg.step = step;
  cfg.tps_levels = std::move(levels);
  cfg.duration_seconds = seconds;
  cfg.fidelity = f;
  if (step == vx::Step::verify_cert) cfg.preloaded_records = 300;
  return cfg;
}

std::map<double, vx::LevelMetrics> by_tps(const vx::MetricsReport& r) {
  std::map<double, vx::LevelMetrics> out;
  for (const auto& l : r.levels) out[l.tps] = l;
  return out;
}

void expect_code(vx::Errc code, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "no error thrown";
  } catch (const vx::Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(VAXLEDGER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TEST(Config, ShippedScenariosLoad) {
  auto reg = vx::load_scenario(kData / "scenarios" / "register.json");
  EXPECT_EQ(reg.step, vx::Step::register_cert);
  EXPECT_EQ(reg.tps_levels, (std::vector<double>{1, 2, 4, 8, 16, 28}));
  auto ver = vx::load_scenario(kData / "scenarios" / "verify.json");
  EXPECT_EQ(ver.tps_levels, (std::vector<double>{1, 2, 4, 8, 16, 28, 50, 100}));
  EXPECT_EQ(ver.preloaded_records, 10'000u);
  EXPECT_EQ(ver.link.latency, std::chrono::milliseconds(3));
  EXPECT_EQ(ver.link.bandwidth_bps, 1'000'000'000u);
}

TEST(Config, ShippedCalibrationMatchesBuiltInDefault) {
  auto file = vx::load_calibration(kData / "calibrated_profile.json");
  auto builtin = vx::default_calibration();
  EXPECT_EQ(file.profile, builtin.profile);
  EXPECT_EQ(file.batch.max_message_count, builtin.batch.max_message_count);
  EXPECT_EQ(file.batch.max_batch_bytes, builtin.batch.max_batch_bytes);
  EXPECT_EQ(file.batch.batch_timeout, builtin.batch.batch_timeout);
  EXPECT_EQ(file.batch.min_block_interval, builtin.batch.min_block_interval);
}

TEST(Config, JsonRoundTrip) {
  vx::ScenarioConfig c = quick(vx::Step::verify_cert, {3, 7}, 12, vx::Fidelity::timing);
  c.fault_schedule.push_back({5, vx::OrderingRole::broker, 2, vx::InstanceStatus::down});
  c.arrival_mode = vx::ArrivalMode::poisson;
  c.query_mode = vx::QueryMode::exact_lookup;
  c.link.bandwidth_bps = 100'000'000;
  auto back = vx::scenario_from_json(nlohmann::json::parse(vx::scenario_to_json(c).dump()));
  EXPECT_EQ(vx::scenario_to_json(back).dump(), vx::scenario_to_json(c).dump());
  EXPECT_EQ(back.fault_schedule, c.fault_schedule);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto base = nlohmann::json::parse(R"({"step": "register", "tps_levels": [1]})");
  EXPECT_NO_THROW(vx::scenario_from_json(base));
  auto with = [&](const std::string& patch) {
    auto j = base;
    j.merge_patch(nlohmann::json::parse(patch));
    return j;
  };
  for (const char* patch :
       {R"({"tps": 3})", R"({"link": {"latency": 3}})", R"({"service_profile": {"rest_ms": 1}})",
        R"({"batch": {"timeout": 1}})", R"({"step": "query"})", R"({"tps_levels": []})", R"({"tps_levels": [0]})",
        R"({"duration_seconds": -1})", R"({"query_mode": "index"})", R"({"fidelity": "exact"})",
        R"({"arrival_mode": "bursty"})", R"({"target_ms": "XX"})", R"({"tps_levels": "many"})",
        R"({"fault_schedule": [{"role": "broker", "index": 4, "status": "down"}]})",
        R"({"fault_schedule": [{"role": "router", "index": 0, "status": "down"}]})",
        R"({"fault_schedule": [{"role": "broker", "index": 0, "status": "dead"}]})",
        R"({"fault_schedule": [{"role": "broker", "index": 0, "status": "down", "why": 1}]})",
        R"({"service_profile": {"proposal_bytes": 0}})", R"({"batch": {"max_message_count": 0}})"}) {
    expect_code(vx::Errc::config_error, [&] { vx::scenario_from_json(with(patch)); });
  }
  expect_code(vx::Errc::config_error, [] { vx::scenario_from_json(nlohmann::json::parse(R"({"tps_levels": [1]})")); });
  expect_code(vx::Errc::io_error, [] { vx::load_scenario("/nonexistent/scenario.json"); });
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

TEST(Simulation, ClientEventsMatchOfferedLoad) {
  auto run = vx::run_level(quick(vx::Step::register_cert, {28}, 60, vx::Fidelity::timing), 28);
  EXPECT_EQ(run.client_request_events, 1680u);
  EXPECT_EQ(run.metrics.submitted, 1680u);
}

TEST(Simulation, TransmissionOnlyResponseWithoutLatencyOrService) {
  // 8 Mbit/s carries one byte per microsecond, so each hop costs size + TLS.
  vx::ScenarioConfig cfg = quick(vx::Step::register_cert, {1}, 5, vx::Fidelity::timing);
  cfg.link = vx::LinkParams{vx::SimDuration{0}, 8'000'000, 60};
  auto& p = cfg.service_profile;
  p.rest_overhead_ms = p.endorse_ms = p.orderer_per_envelope_ms = p.commit_per_tx_ms = p.commit_per_block_ms = 0;
  p.gossip_bytes = p.heartbeat_bytes = 0;
  cfg.batch.max_message_count = 1;
  auto hop = [](std::uint64_t s) { return static_cast<double>(s + 60) / 1000.0; };
  double expected = hop(p.proposal_bytes) + 3 * hop(p.register_tx_bytes) + 2 * hop(p.replication_ack_bytes) +
                    hop(p.block_overhead_bytes + p.register_tx_bytes) + hop(p.ack_bytes);
  auto m = vx::run_level(cfg, 1).metrics;
  EXPECT_EQ(m.completed, 5u);
  EXPECT_NEAR(m.mean_ms, expected, 1e-9);
  EXPECT_NEAR(m.p95_ms, expected, 1e-9);
}

TEST(Simulation, TimingFidelityReproducesFullFidelityMetrics) {
  for (auto step : {vx::Step::register_cert, vx::Step::verify_cert}) {
    auto full = vx::run_scenario(quick(step, {4, 16}, 8, vx::Fidelity::full));
    auto fast = vx::run_scenario(quick(step, {4, 16}, 8, vx::Fidelity::timing));
    ASSERT_EQ(full.levels.size(), fast.levels.size());
    for (std::size_t i = 0; i < full.levels.size(); ++i) EXPECT_EQ(full.levels[i], fast.levels[i]);
  }
}

TEST(Simulation, CommittedLedgerMatchesSuccessfulRequests) {
  auto run = vx::run_scenario_detailed(quick(vx::Step::register_cert, {8, 28}, 10, vx::Fidelity::full));
  for (const auto& l : run.levels) {
    EXPECT_EQ(l.ledger_committed, l.metrics.submitted - l.metrics.error_count());
    EXPECT_EQ(l.ledger_committed, l.metrics.submitted);
    EXPECT_TRUE(l.ledgers_consistent);
    EXPECT_EQ(l.bytes_sent, l.bytes_received);
  }
}

TEST(Simulation, VerifyFindsTheLastPreloadedRecordAfterFullScan) {
  auto run = vx::run_level(quick(vx::Step::verify_cert, {2}, 3, vx::Fidelity::full), 2);
  EXPECT_TRUE(run.first_request.found);
  EXPECT_EQ(run.first_request.scan_count, 300u);
  EXPECT_EQ(run.metrics.error_count(), 0u);
}

TEST(Simulation, SameSeedSameOutputs) {
  vx::RunOptions opt;
  opt.keep_trace = true;
  opt.keep_snapshot = true;
  auto cfg = quick(vx::Step::register_cert, {16}, 5, vx::Fidelity::full);
  cfg.arrival_mode = vx::ArrivalMode::poisson;
  auto a = vx::run_scenario_detailed(cfg, opt);
  auto b = vx::run_scenario_detailed(cfg, opt);
  EXPECT_EQ(vx::render_csv(a.report), vx::render_csv(b.report));
  EXPECT_EQ(a.levels[0].snapshot, b.levels[0].snapshot);
  EXPECT_FALSE(a.levels[0].snapshot.empty());
  EXPECT_EQ(a.levels[0].trace.size(), b.levels[0].trace.size());
  cfg.seed = 2;
  auto c = vx::run_scenario_detailed(cfg, opt);
  EXPECT_NE(a.levels[0].snapshot, c.levels[0].snapshot);
}

TEST(Simulation, RequestStagesAreCausallyOrdered) {
  vx::RunOptions opt;
  opt.keep_trace = true;
  auto run = vx::run_level(quick(vx::Step::register_cert, {16}, 4, vx::Fidelity::timing), 16, opt);
  const std::vector<std::string> stages = {"request.arrive", "request.endorsed", "request.ordered", "request.done"};
  std::map<std::uint64_t, std::vector<std::pair<std::size_t, vx::SimTime>>> seen;
  for (const auto& r : run.trace) {
    auto it = std::find(stages.begin(), stages.end(), r.kind);
    if (it != stages.end()) seen[r.size].emplace_back(static_cast<std::size_t>(it - stages.begin()), r.time);
  }
  ASSERT_EQ(seen.size(), 64u);
  for (const auto& [id, events] : seen) {
    ASSERT_EQ(events.size(), 4u) << id;
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(events[k].first, k);
    for (std::size_t k = 1; k < 4; ++k) EXPECT_GT(events[k].second, events[k - 1].second);
  }
  for (std::size_t k = 1; k < run.trace.size(); ++k) EXPECT_GE(run.trace[k].time, run.trace[k - 1].time);
}

TEST(Simulation, DefaultScenarioShapeAndLoadInvariants) {
  auto reg = vx::run_scenario(timing(vx::load_scenario(kData / "scenarios" / "register.json")));
  auto ver = vx::run_scenario(timing(vx::load_scenario(kData / "scenarios" / "verify.json")));
  ASSERT_EQ(reg.levels.size(), 6u);
  ASSERT_EQ(ver.levels.size(), 8u);
  for (const auto* report : {&reg, &ver}) {
    const auto& ls = report->levels;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      EXPECT_EQ(ls[i].error_count(), 0u);
      EXPECT_FALSE(ls[i].saturated);
      if (ls[i].tps >= 4) EXPECT_GT(ls[i].ordering_bandwidth_kb, ls[i].peer_bandwidth_kb) << ls[i].tps;
      if (i > 0 && ls[i - 1].tps >= 8) {
        EXPECT_GE(ls[i].mean_ms, ls[i - 1].mean_ms) << ls[i].tps;
        EXPECT_GE(ls[i].peer_bandwidth_kb, ls[i - 1].peer_bandwidth_kb);
        EXPECT_GE(ls[i].ordering_bandwidth_kb, ls[i - 1].ordering_bandwidth_kb);
      }
    }
  }
  auto v = by_tps(ver);
  EXPECT_GT(v[100].mean_ms, v[28].mean_ms);
  EXPECT_GT(v[28].mean_ms, v[4].mean_ms);
}

TEST(Simulation, FaultToleranceRequiresTwoDownInOneRole) {
  auto one_each = quick(vx::Step::register_cert, {28}, 10, vx::Fidelity::timing);
  for (auto role : vx::kOrderingRoles) one_each.fault_schedule.push_back({0, role, 0, vx::InstanceStatus::down});
  auto ok = vx::run_level(one_each, 28).metrics;
  EXPECT_EQ(ok.completed, ok.submitted);

  auto two = one_each;
  two.fault_schedule.push_back({5, vx::OrderingRole::broker, 1, vx::InstanceStatus::down});
  auto bad = vx::run_level(two, 28).metrics;
  EXPECT_GT(bad.unavailable, 0u);
  EXPECT_TRUE(bad.saturated);

  auto recovered = two;
  recovered.fault_schedule.push_back({6, vx::OrderingRole::broker, 1, vx::InstanceStatus::up});
  auto back = vx::run_level(recovered, 28).metrics;
  EXPECT_GT(back.unavailable, 0u);
  EXPECT_LT(back.unavailable, bad.unavailable);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

TEST(Report, CsvLayoutAndReexportIdentity) {
  auto report = vx::run_scenario(timing(vx::load_scenario(kData / "scenarios" / "register.json")));
  auto csv = vx::render_csv(report);
  auto table = vx::parse_csv(csv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), vx::kCsvHeader);
  ASSERT_EQ(table.rows.size(), 6u);
  EXPECT_EQ(table.rows[0][0], "register");
  EXPECT_EQ(table.rows[5][1], "28.0");

  auto dir = temp_dir();
  vx::export_csv(report, dir / "a.csv");
  vx::export_csv(report, dir / "b.csv");
  EXPECT_EQ(vx::read_text_file(dir / "a.csv"), vx::read_text_file(dir / "b.csv"));
  EXPECT_EQ(vx::read_text_file(dir / "a.csv"), csv);
  fs::remove_all(dir);

  expect_code(vx::Errc::invalid_argument, [] { vx::render_csv(vx::MetricsReport{}); });
  expect_code(vx::Errc::io_error, [&] { vx::export_csv(report, "/nonexistent/dir/out.csv"); });
}

TEST(Report, TableAlignsNumbersRight) {
  auto t = vx::parse_csv("step,tps\nregister,1.0\nverify,100.0\n");
  EXPECT_EQ(vx::render_table(t), "step        tps\n---------------\nregister    1.0\nverify    100.0\n");
  expect_code(vx::Errc::config_error, [] { vx::parse_csv("a,b\n1\n"); });
  expect_code(vx::Errc::config_error, [] { vx::parse_csv("\n\n"); });
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

namespace {

vx::CalibrationSetup short_setup() {
  auto s = vx::default_calibration_setup();
  s.register_base.duration_seconds = 10;
  s.verify_base.duration_seconds = 10;
  s.verify_base.preloaded_records = 2000;
  return s;
}

std::vector<vx::TargetRow> targets_from(const vx::Calibration& cal, const vx::CalibrationSetup& setup) {
  std::vector<vx::TargetRow> rows;
  for (auto [step, tps] : {std::pair{vx::Step::register_cert, 1.0}, std::pair{vx::Step::register_cert, 28.0},
                           std::pair{vx::Step::verify_cert, 1.0}, std::pair{vx::Step::verify_cert, 100.0}}) {
    rows.push_back({step, tps, 1, 1, 1});
  }
  auto ev = vx::evaluate(rows, cal, setup, false);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].response_ms = ev.residuals[i].response_ms;
    rows[i].peer_kb = ev.residuals[i].peer_kb;
    rows[i].ordering_kb = ev.residuals[i].ordering_kb;
  }
  return rows;
}

}  // namespace

TEST(Calibrate, RejectsEmptyOrIncompleteTargets) {
  expect_code(vx::Errc::calibration_failure, [] { vx::calibrate({}, vx::default_calibration()); });
  auto rows = vx::load_targets(kData / "reference_benchmark.csv");
  ASSERT_EQ(rows.size(), 14u);
  auto missing = rows;
  missing.erase(std::remove_if(missing.begin(), missing.end(),
                               [](const vx::TargetRow& r) { return r.step == vx::Step::verify_cert && r.tps == 100; }),
                missing.end());
  expect_code(vx::Errc::calibration_failure, [&] { vx::calibrate(missing, vx::default_calibration()); });
  auto negative = rows;
  negative[0].response_ms = -1;
  expect_code(vx::Errc::calibration_failure, [&] { vx::calibrate(negative, vx::default_calibration()); });
  expect_code(vx::Errc::config_error, [] { vx::parse_targets("step,tps\nregister,1\n"); });
}

TEST(Calibrate, ReportsFailureWithResidualsWhenTargetsAreUnreachable) {
  auto setup = short_setup();
  setup.max_rounds = 0;
  auto rows = targets_from(vx::default_calibration(), setup);
  for (auto& r : rows) r.response_ms *= 3;
  try {
    vx::calibrate(rows, vx::default_calibration(), setup);
    FAIL();
  } catch (const vx::Error& e) {
    EXPECT_EQ(e.code(), vx::Errc::calibration_failure);
    EXPECT_NE(std::string(e.what()).find("target_ms"), std::string::npos);
  }
}

TEST(Calibrate, RecoversTargetsGeneratedFromAKnownProfile) {
  auto setup = short_setup();
  setup.max_rounds = 4;
  auto truth = vx::default_calibration();
  auto rows = targets_from(truth, setup);

  auto exact = vx::calibrate(rows, truth, setup);
  EXPECT_LT(exact.evaluation.mean_rel_error, 1e-12);

  auto start = truth;
  start.profile.rest_overhead_ms *= 1.16;
  start.profile.commit_per_tx_ms /= 1.16;
  auto fit = vx::calibrate(rows, start, setup);
  EXPECT_TRUE(fit.evaluation.bracket_ok);
  for (const auto& r : fit.evaluation.residuals) {
    EXPECT_LT(std::abs(r.response_rel()), 0.01) << vx::to_string(r.target.step) << " " << r.target.tps;
    EXPECT_LT(std::abs(r.peer_rel()), 0.01);
  }
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

TEST(Cli, ExitCodesFollowErrorKinds) {
  auto dir = temp_dir();
  vx::write_text_file(dir / "bad.json", R"({"step": "register", "tps_levels": [1], "colour": "red"})");
  vx::write_text_file(dir / "empty.csv", "step,tps,response_time_ms,peer_bandwidth_kb,ordering_bandwidth_kb\n");
  vx::write_text_file(dir / "ok.json", R"({"step": "register", "tps_levels": [2], "duration_seconds": 2})");
  EXPECT_EQ(run_cli("simulate --config " + (dir / "ok.json").string()), 0);
  EXPECT_EQ(run_cli("simulate --config " + (dir / "bad.json").string()), 1);
  EXPECT_EQ(run_cli("simulate --config " + (dir / "missing.json").string()), 3);
  EXPECT_EQ(run_cli("calibrate --targets " + (dir / "empty.csv").string()), 2);
  EXPECT_EQ(run_cli("simulate"), 1);
  EXPECT_EQ(run_cli("issue -o " + (dir / "c.json").string()), 0);
  EXPECT_EQ(run_cli("hash " + (dir / "c.json").string()), 0);
  EXPECT_EQ(run_cli("register " + (dir / "c.json").string()), 0);
  EXPECT_EQ(run_cli("verify --preloaded 50 " + (dir / "c.json").string()), 0);
  EXPECT_EQ(run_cli("issue --dose 1 -o " + (dir / "partial.json").string()), 0);
  EXPECT_EQ(run_cli("verify --preloaded 50 " + (dir / "partial.json").string()), 1);
  fs::remove_all(dir);
}
