#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vaxledger/bench_config.hpp"
#include "vaxledger/calibrate.hpp"
#include "vaxledger/credential_io.hpp"
#include "vaxledger/report.hpp"
#include "vaxledger/simulation.hpp"

namespace vx = vaxledger;

namespace {

int exit_code(vx::Errc code) {
  switch (code) {
    case vx::Errc::calibration_failure: return 2;
    case vx::Errc::io_error: return 3;
    default: return 1;
  }
}

void print_timeline(const vx::LevelRun& run) {
  for (const auto& r : run.trace) {
    if (!r.kind.starts_with("request.") && r.kind != "block.cut" && r.kind != "block.commit") continue;
    std::printf("%10.3f ms  %-14s %s\n", vx::to_millis(r.time - vx::kSimEpoch), run.host_names.at(r.host).c_str(),
                r.kind.c_str());
  }
}

/// One request through a fresh network with the default calibration.
vx::ScenarioConfig single_flow(vx::Step step, const vx::MemberStateId& ms) {
  vx::ScenarioConfig cfg;
  cfg.step = step;
  cfg.tps_levels = {1};
  cfg.duration_seconds = 1;
  cfg.target_ms = ms.code();
  return cfg;
}

void write_trace_file(const std::filesystem::path& path, const std::vector<vx::ScenarioRun>& runs) {
  std::string text;
  for (const auto& run : runs) {
    for (const auto& level : run.levels) {
      for (const auto& r : level.trace) {
        nlohmann::ordered_json j;
        j["step"] = vx::to_string(level.metrics.step);
        j["tps"] = level.metrics.tps;
        j["t_us"] = r.time.time_since_epoch().count();
        j["kind"] = r.kind;
        j["host"] = level.host_names.at(r.host);
        j["size"] = r.size;
        text += j.dump() + "\n";
      }
    }
  }
  vx::write_text_file(path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vaccination certificate ledger: credentials, ledger flows and network benchmark simulator"};
  app.require_subcommand(1);

  // issue
  auto* issue = app.add_subcommand("issue", "Issue a signed vaccination credential fixture");
  std::string issue_ms = "DE", issue_subject = "subject-0", issue_product = "Comirnaty", issue_batch = "BATCH-1000",
              issue_out;
  std::uint32_t issue_dose = 2, issue_total = 2;
  std::int64_t issue_date = vx::kIssuanceBase, issue_validity = vx::kSecondsPerYear;
  issue->add_option("--ms", issue_ms, "Member state of the issuing medical center")->capture_default_str();
  issue->add_option("--subject-seed", issue_subject, "Seed for the subject DID")->capture_default_str();
  issue->add_option("--product", issue_product)->capture_default_str();
  issue->add_option("--batch", issue_batch)->capture_default_str();
  issue->add_option("--dose", issue_dose)->capture_default_str();
  issue->add_option("--total-doses", issue_total)->capture_default_str();
  issue->add_option("--issued", issue_date, "Issuance time, Unix seconds")->capture_default_str();
  issue->add_option("--validity", issue_validity, "Validity in seconds")->capture_default_str();
  issue->add_option("-o,--out", issue_out, "Output file (default: stdout)");

  // hash
  auto* hash = app.add_subcommand("hash", "Print the anchor digest of a credential");
  std::string hash_in;
  hash->add_option("credential", hash_in, "Credential JSON file")->required();

  // register / verify
  auto* reg = app.add_subcommand("register", "Anchor a credential through a fresh simulated network");
  std::string reg_in;
  reg->add_option("credential", reg_in, "Credential JSON file")->required();

  auto* ver = app.add_subcommand("verify", "Verify a credential and its anchor on a fresh simulated network");
  std::string ver_in;
  std::size_t ver_preloaded = 1000;
  std::optional<std::int64_t> ver_now;
  ver->add_option("credential", ver_in, "Credential JSON file")->required();
  ver->add_option("--preloaded", ver_preloaded, "Records anchored before the credential")->capture_default_str();
  ver->add_option("--now", ver_now, "Verification time, Unix seconds (default: issuance + 1)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run benchmark scenarios and emit the CSV report");
  std::vector<std::string> sim_configs;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_trace, sim_out, sim_snapshots;
  sim->add_option("--config", sim_configs, "Scenario file (repeatable)")->required();
  sim->add_option("--seed", sim_seed, "Override the scenario seed");
  sim->add_option("--trace", sim_trace, "Write an NDJSON event trace");
  sim->add_option("--out", sim_out, "CSV output (default: stdout)");
  sim->add_option("--snapshots", sim_snapshots, "Directory for target-peer ledger snapshots");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit the service profile to target rows");
  std::string cal_targets, cal_initial, cal_out;
  int cal_rounds = vx::default_calibration_setup().max_rounds;
  cal->add_option("--targets", cal_targets, "Target CSV")->required();
  cal->add_option("--initial", cal_initial, "Starting calibration JSON (default: built-in)");
  cal->add_option("--out", cal_out, "Write the fitted calibration JSON");
  cal->add_option("--rounds", cal_rounds, "Maximum descent passes")->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "Render a CSV report as an aligned table");
  std::string rep_in;
  rep->add_option("csv", rep_in, "CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*issue) {
      vx::MemberStateId ms(issue_ms);
      auto center = vx::center_identity(ms);
      auto subject = vx::generate_did("vax", issue_subject);
      auto c = vx::issue_credential(center.key, center.record.issuer_did, subject,
                                    {issue_product, issue_dose, issue_total, issue_batch}, issue_date, issue_validity);
      if (issue_out.empty()) {
        std::cout << vx::render_credential(c);
      } else {
        vx::save_credential(c, issue_out);
      }
    } else if (*hash) {
      std::cout << vx::hash_credential(vx::load_credential(hash_in)).hex() << "\n";
    } else if (*reg) {
      auto c = vx::load_credential(reg_in);
      auto ms = vx::member_state_of_issuer(c.issuer);
      vx::require(ms.has_value(), vx::Errc::invalid_credential, "issuer is not a registered medical center");
      vx::RunOptions opt;
      opt.keep_trace = true;
      opt.credential = c;
      auto run = vx::run_level(single_flow(vx::Step::register_cert, *ms), 1, opt);
      print_timeline(run);
      bool ok = run.metrics.completed == 1;
      std::printf("anchor %s in %s: %s (%.1f ms)\n", vx::hash_credential(c).hex().c_str(), ms->code().c_str(),
                  ok ? "committed" : "rejected", run.metrics.mean_ms);
      return ok ? 0 : 1;
    } else if (*ver) {
      auto c = vx::load_credential(ver_in);
      auto outcome = vx::verify_credential(c, vx::center_issuer_keys(), ver_now.value_or(c.issuance_date + 1));
      auto ms = vx::member_state_of_issuer(c.issuer).value_or(vx::MemberStateId("DE"));
      auto cfg = single_flow(vx::Step::verify_cert, ms);
      cfg.preloaded_records = ver_preloaded;
      vx::RunOptions opt;
      opt.keep_trace = true;
      opt.credential = c;
      auto run = vx::run_level(cfg, 1, opt);
      print_timeline(run);
      std::printf("credential: %s\n", outcome.accepted() ? "accepted" : std::string(vx::to_string(outcome.reason)).c_str());
      std::printf("anchor %s: %s after scanning %zu records (%.1f ms)\n", vx::hash_credential(c).hex().c_str(),
                  run.first_request.found ? "found" : "not found", run.first_request.scan_count, run.metrics.mean_ms);
      return outcome.accepted() && run.first_request.found ? 0 : 1;
    } else if (*sim) {
      std::vector<vx::ScenarioRun> runs;
      std::vector<vx::MetricsReport> reports;
      vx::RunOptions opt;
      opt.keep_trace = !sim_trace.empty();
      opt.keep_snapshot = !sim_snapshots.empty();
      for (const auto& path : sim_configs) {
        auto cfg = vx::load_scenario(path);
        if (sim_seed) cfg.seed = *sim_seed;
        runs.push_back(vx::run_scenario_detailed(cfg, opt));
        reports.push_back(runs.back().report);
      }
      if (!sim_trace.empty()) write_trace_file(sim_trace, runs);
      if (!sim_snapshots.empty()) {
        std::filesystem::create_directories(sim_snapshots);
        for (const auto& run : runs) {
          for (const auto& level : run.levels) {
            auto name = std::string(vx::to_string(level.metrics.step)) + "-" + vx::detail::fixed1(level.metrics.tps) +
                        ".ndjson";
            vx::write_text_file(std::filesystem::path(sim_snapshots) / name, level.snapshot);
          }
        }
      }
      if (sim_out.empty()) {
        std::cout << vx::render_csv(reports);
      } else {
        vx::export_csv(reports, sim_out);
      }
    } else if (*cal) {
      auto targets = vx::load_targets(cal_targets);
      auto initial = cal_initial.empty() ? vx::default_calibration() : vx::load_calibration(cal_initial);
      auto setup = vx::default_calibration_setup();
      setup.max_rounds = cal_rounds;
      auto result = vx::calibrate(targets, initial, setup);
      std::cout << vx::render_residuals(result.evaluation.residuals);
      std::printf("mean relative error %.1f%%, max response error %.1f%%, %zu evaluations\n",
                  100 * result.evaluation.mean_rel_error, 100 * result.evaluation.max_response_error,
                  result.evaluations);
      auto text = vx::calibration_to_json(result.fitted).dump(2) + "\n";
      if (cal_out.empty()) {
        std::cout << text;
      } else {
        vx::write_text_file(cal_out, text);
      }
    } else if (*rep) {
      std::cout << vx::render_table(vx::parse_csv(vx::read_text_file(rep_in)));
    }
  } catch (const vx::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(vx::to_string(e.code())).c_str(), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
