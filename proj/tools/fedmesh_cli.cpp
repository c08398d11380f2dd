// Command-line front end: run one experiment, compare protocols on a shared
// scenario, or sweep a preset across replicates. Outputs are CSV plus a JSON
// summary per run.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedmesh/errors.hpp"
#include "fedmesh/harness.hpp"
#include "fedmesh/metrics.hpp"
#include "fedmesh/presets.hpp"
#include "fedmesh/util.hpp"

namespace fs = std::filesystem;
using namespace fedmesh;

namespace {

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return out;
}

void print_run_summary(const MetricsLog& log, const ExperimentConfig& cfg) {
  std::cout << log.name << ": " << log.rounds.size() << " rounds, "
            << format_fixed(log.total_sim_ms / 1e3, 3) << " s simulated ("
            << format_fixed(log.total_sim_ms / 6e4, 2) << " min)";
  if (!log.rounds.empty()) {
    std::cout << ", final loss " << format_fixed(log.rounds.back().loss, 6);
  }
  if (cfg.fl.target_loss) {
    if (auto t = time_to_target(log.rounds, *cfg.fl.target_loss)) {
      std::cout << ", target " << format_fixed(*cfg.fl.target_loss, 4) << " reached at "
                << format_fixed(*t / 1e3, 3) << " s";
    } else {
      std::cout << ", target " << format_fixed(*cfg.fl.target_loss, 4) << " not reached";
    }
  }
  std::cout << "\n";
}

MetricsLog run_and_emit(const ExperimentConfig& cfg, const std::string& out_dir) {
  MetricsLog log = run_experiment(cfg);
  if (!out_dir.empty()) {
    emit_metrics(log, out_dir);
    cfg.write_json_file((fs::path(out_dir) / "config.json").string());
  }
  print_run_summary(log, cfg);
  return log;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated learning over a simulated wireless mesh"};
  app.require_subcommand(1);

  std::uint64_t master_seed = 0;
  bool have_seed = false;
  app.add_option("--seed", master_seed, "derive all seed fields from this master seed")
      ->each([&have_seed](const std::string&) { have_seed = true; });

  // run
  auto* run = app.add_subcommand("run", "run one experiment");
  std::string run_config, run_preset, run_arm, run_out;
  run->add_option("--config", run_config, "experiment config (JSON)");
  run->add_option("--preset", run_preset, "preset name (alternative to --config)");
  run->add_option("--arm", run_arm, "arm inside the preset");
  run->add_option("--out", run_out, "output directory for metrics.csv/flows.csv/summary.json");

  // compare
  auto* cmp = app.add_subcommand("compare", "run several configs and rank them");
  std::vector<std::string> cmp_configs;
  double cmp_target = 0;
  std::string cmp_out;
  cmp->add_option("--configs", cmp_configs, "config files differing only in routing")
      ->required()
      ->expected(-1);
  cmp->add_option("--target-loss", cmp_target, "loss level the ranking is measured at")
      ->required();
  cmp->add_option("--out", cmp_out, "directory for per-run outputs");

  // sweep
  auto* swp = app.add_subcommand("sweep", "run every arm of a preset across replicates");
  std::string swp_preset, swp_out = "sweep-out", swp_arm_filter;
  int swp_reps = 1;
  swp->add_option("--preset", swp_preset, "preset name")->required();
  swp->add_option("--replicates", swp_reps, "replicates per arm")->check(CLI::PositiveNumber);
  swp->add_option("--arm", swp_arm_filter, "only arms whose name contains this substring");
  swp->add_option("--out", swp_out, "output root");

  // presets
  auto* lst = app.add_subcommand("presets", "list shipped presets and their arms");

  // dump
  auto* dmp = app.add_subcommand("dump", "write a preset's arm configs as JSON files");
  std::string dmp_preset, dmp_out = ".";
  dmp->add_option("--preset", dmp_preset, "preset name")->required();
  dmp->add_option("--out", dmp_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg;
      if (!run_config.empty()) {
        cfg = ExperimentConfig::from_json_file(run_config);
      } else if (!run_preset.empty()) {
        if (run_arm.empty()) throw ConfigError("run --preset needs --arm (see `presets`)");
        cfg = preset_arm(run_preset, run_arm);
      } else {
        throw ConfigError("run needs --config or --preset/--arm");
      }
      if (have_seed) apply_seed_override(cfg, master_seed);
      run_and_emit(cfg, run_out);
    } else if (*cmp) {
      std::vector<MetricsLog> logs;
      for (const std::string& path : cmp_configs) {
        ExperimentConfig cfg = ExperimentConfig::from_json_file(path);
        if (have_seed) apply_seed_override(cfg, master_seed);
        std::string out =
            cmp_out.empty() ? "" : (fs::path(cmp_out) / sanitize(cfg.name)).string();
        logs.push_back(run_and_emit(cfg, out));
      }
      ComparisonReport rep = compare_runs(logs, cmp_target);
      std::cout << rep.to_text();
    } else if (*swp) {
      std::vector<PresetArm> arms = make_preset(swp_preset);
      std::ofstream summary;
      fs::create_directories(swp_out);
      summary.open(fs::path(swp_out) / "sweep_summary.csv");
      if (!summary) throw SimError("cannot write sweep_summary.csv under " + swp_out);
      summary << "arm,replicate,protocol,rounds,reached_target,time_to_target_ms,total_sim_ms\n";
      for (const PresetArm& arm : arms) {
        if (!swp_arm_filter.empty() && arm.name.find(swp_arm_filter) == std::string::npos) {
          continue;
        }
        for (int r = 0; r < swp_reps; ++r) {
          ExperimentConfig cfg = arm.config;
          if (have_seed) apply_seed_override(cfg, master_seed);
          cfg = replicate_config(cfg, r);
          std::string out =
              (fs::path(swp_out) / sanitize(arm.name) / ("rep" + std::to_string(r))).string();
          MetricsLog log = run_and_emit(cfg, out);
          std::string ttt = "";
          if (cfg.fl.target_loss) {
            if (auto t = time_to_target(log.rounds, *cfg.fl.target_loss)) {
              ttt = format_double(*t);
            }
          }
          summary << arm.name << ',' << r << ',' << log.protocol << ',' << log.rounds.size()
                  << ',' << (log.reached_target ? 1 : 0) << ',' << ttt << ','
                  << format_double(log.total_sim_ms) << '\n';
        }
      }
      std::cout << "sweep summary: " << (fs::path(swp_out) / "sweep_summary.csv").string()
                << "\n";
    } else if (*lst) {
      for (const std::string& p : preset_names()) {
        std::cout << p << "\n";
        for (const PresetArm& arm : make_preset(p)) {
          std::cout << "  " << arm.name << "\n";
        }
      }
    } else if (*dmp) {
      fs::create_directories(dmp_out);
      for (const PresetArm& arm : make_preset(dmp_preset)) {
        std::string path =
            (fs::path(dmp_out) / (sanitize(dmp_preset) + "-" + sanitize(arm.name) + ".json"))
                .string();
        arm.config.write_json_file(path);
        std::cout << path << "\n";
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime fault: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
