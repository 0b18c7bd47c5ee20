// dmae: generate datasets, run clustering experiments, check gradients and
// tabulate reports.
#include "dmae/checkpoint.hpp"
#include "dmae/config.hpp"
#include "dmae/data.hpp"
#include "dmae/gradsuite.hpp"
#include "dmae/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

struct GenerateArgs {
  std::string dataset;
  int n = 1000;
  std::uint64_t seed = 0;
  std::string out;
  double noise = 0.1;
  double radial_std = 0.3;
  double angular_std = 0.05;
  double rate = 0.25;
  double sigma = 0.05;
  double radius_factor = 0.1;
  int groups = 0;
};

int cmd_generate(const GenerateArgs& a) {
  dmae::DatasetSpec spec;
  spec.name = a.dataset;
  spec.n = a.n;
  spec.seed = a.seed;
  spec.noise_std = a.noise;
  spec.radial_std = a.radial_std;
  spec.angular_std = a.angular_std;
  spec.rate = a.rate;
  spec.sigma = a.sigma;
  spec.radius_factor = a.radius_factor;
  spec.groups = a.groups;
  const dmae::LabeledDataset data = dmae::make_dataset(spec);
  dmae::write_csv(data, a.out);
  nlohmann::json meta = data.metadata;
  meta["rows"] = data.size();
  meta["columns"] = data.x.cols();
  meta["classes"] = data.classes();
  dmae::save_json(dmae::metadata_path(a.out), meta);
  std::cout << "wrote " << data.size() << " rows to " << a.out << "\n";
  return kOk;
}

struct RunArgs {
  std::string config;
  std::string out;
  int grid = 0;
  int parallel_trials = 1;
};

int cmd_run(const RunArgs& a) {
  const dmae::ExperimentConfig cfg = dmae::load_config(a.config);
  for (const auto& w : cfg.validate()) std::cerr << "warning: " << w << "\n";

  std::filesystem::path out_dir = a.out;
  if (out_dir.empty()) {
    const char* env = std::getenv("DMAE_OUTPUT_DIR");
    out_dir = std::filesystem::path(env && *env ? env : "runs") / cfg.name;
  }
  const dmae::LabeledDataset data = dmae::make_dataset(cfg.dataset);
  if (a.grid > 0 && data.x.cols() != 2) {
    std::cerr << "error: --grid needs a 2-D dataset, got " << data.x.cols() << " columns\n";
    return kUsageError;
  }

  dmae::RunOptions opts;
  opts.parallel_trials = a.parallel_trials;
  opts.out_dir = out_dir;
  const dmae::TrialReport report = dmae::run_experiment(cfg, data, opts);

  dmae::save_json(out_dir / "report.json", dmae::report_to_json(report, cfg));
  dmae::save_json(out_dir / "timing.json", dmae::timing_to_json(report));
  if (a.grid > 0) {
    for (const auto& t : report.trials) {
      if (!t.model) continue;
      const dmae::GridBounds bounds = dmae::default_bounds(data.x, cfg.kind);
      dmae::write_text_atomic(out_dir / "grid.csv",
                              dmae::grid_to_csv(dmae::decision_grid(*t.model, bounds, a.grid)));
      break;
    }
  }

  const dmae::Aggregate agg = report.aggregate();
  std::printf("%s: %d/%zu trials completed, ACC %.3f +- %.3f, NMI %.3f +- %.3f\n",
              cfg.name.c_str(), agg.completed, report.trials.size(), agg.mean_acc, agg.std_acc,
              agg.mean_nmi, agg.std_nmi);
  for (const auto& t : report.trials) {
    if (!t.completed) std::fprintf(stderr, "trial %d failed: %s\n", t.index, t.error.c_str());
  }
  std::cout << "report: " << (out_dir / "report.json").string() << "\n";
  return agg.completed > 0 ? kOk : kRuntimeError;
}

struct GradcheckArgs {
  std::string component = "all";
  std::uint64_t seed = 0;
  int instances = 20;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  dmae::GradSuiteOptions opts;
  opts.seed = a.seed;
  opts.instances = a.instances;
  opts.inject_fault = a.inject_fault;
  std::vector<dmae::GradSuiteRow> rows;
  auto append = [&rows](std::vector<dmae::GradSuiteRow> more) {
    rows.insert(rows.end(), more.begin(), more.end());
  };
  if (a.component == "dissim" || a.component == "all") append(dmae::gradcheck_dissim(opts));
  if (a.component == "dmm" || a.component == "all") append(dmae::gradcheck_dmm(opts));
  if (a.component == "deepnet" || a.component == "all") append(dmae::gradcheck_deepnet(opts));

  bool ok = true;
  std::printf("%-9s %-32s %9s %12s %10s  %s\n", "component", "case", "instances", "max_rel_err",
              "tolerance", "result");
  for (const auto& r : rows) {
    ok = ok && r.passed();
    std::printf("%-9s %-32s %9d %12.3e %10.1e  %s\n", r.component.c_str(), r.name.c_str(),
                r.instances, r.max_rel_error, r.tolerance, r.passed() ? "pass" : "FAIL");
  }
  return ok ? kOk : kRuntimeError;
}

std::string cell(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ± %.3f", mean, std);
  return buf;
}

std::string method_label(const std::string& mode) {
  if (mode == "dmm") return "DMM";
  if (mode == "ae_dmm") return "AE+DMM";
  if (mode == "dmae") return "DMAE";
  return mode;
}

int cmd_table(const std::vector<std::string>& paths, bool by_name) {
  std::vector<std::string> datasets;
  std::vector<std::string> methods;
  std::map<std::pair<std::string, std::string>, nlohmann::json> cells;
  for (const auto& p : paths) {
    if (!std::filesystem::exists(p)) {
      std::cerr << "error: no such report '" << p << "'\n";
      return kRuntimeError;
    }
    const nlohmann::json j = dmae::load_json(p);
    const std::string dataset = j.at("dataset").get<std::string>();
    const std::string name = j.at("name").get<std::string>();
    std::string method = by_name ? name : method_label(j.at("mode").get<std::string>());
    // Two reports of the same method on one dataset get separate rows.
    if (cells.count({method, dataset})) method += " (" + name + ")";
    if (std::find(datasets.begin(), datasets.end(), dataset) == datasets.end()) {
      datasets.push_back(dataset);
    }
    if (std::find(methods.begin(), methods.end(), method) == methods.end()) {
      methods.push_back(method);
    }
    cells[{method, dataset}] = j.at("aggregate");
  }

  std::string header = "| Method |";
  std::string rule = "|---|";
  for (const auto& d : datasets) {
    header += " " + d + " ACC | " + d + " NMI |";
    rule += "---|---|";
  }
  std::cout << header << "\n" << rule << "\n";
  for (const auto& m : methods) {
    std::string line = "| " + m + " |";
    for (const auto& d : datasets) {
      const auto it = cells.find({m, d});
      if (it == cells.end()) {
        line += " - | - |";
        continue;
      }
      const auto& agg = it->second;
      line += " " + cell(agg.at("mean_acc").get<double>(), agg.at("std_acc").get<double>()) +
              " | " + cell(agg.at("mean_nmi").get<double>(), agg.at("std_nmi").get<double>()) +
              " |";
    }
    std::cout << line << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dissimilarity mixture clustering: datasets, experiments, gradient checks"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as CSV + metadata");
  generate->add_option("dataset", gen.dataset, "pinwheel | toroidal | moons | circles")
      ->required()
      ->check(CLI::IsMember({"pinwheel", "toroidal", "moons", "circles"}));
  generate->add_option("--n", gen.n, "Total number of samples")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  generate->add_option("-o,--out", gen.out, "Output CSV path")->required();
  generate->add_option("--noise", gen.noise, "Noise std (moons, circles)")->capture_default_str();
  generate->add_option("--radial-std", gen.radial_std, "Pinwheel radial std")->capture_default_str();
  generate->add_option("--angular-std", gen.angular_std, "Pinwheel angular std")
      ->capture_default_str();
  generate->add_option("--rate", gen.rate, "Pinwheel twist rate")->capture_default_str();
  generate->add_option("--sigma", gen.sigma, "Toroidal blob std")->capture_default_str();
  generate->add_option("--radius-factor", gen.radius_factor, "Circles inner radius")
      ->capture_default_str();
  generate->add_option("--groups", gen.groups, "Arms (pinwheel) or blobs (toroidal)");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment described by a TOML config");
  run_cmd->add_option("config", run.config, "Config file")->required();
  run_cmd->add_option("--out", run.out,
                      "Output directory (default: $DMAE_OUTPUT_DIR/<name> or runs/<name>)");
  run_cmd->add_option("--grid", run.grid, "Write an N x N decision grid CSV (2-D data only)")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--parallel-trials", run.parallel_trials, "Trials run concurrently")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  GradcheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  gradcheck->add_option("component", gc.component, "dissim | dmm | deepnet | all")
      ->check(CLI::IsMember({"dissim", "dmm", "deepnet", "all"}))
      ->capture_default_str();
  gradcheck->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
  gradcheck->add_option("--instances", gc.instances, "Random instances per case")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gradcheck->add_flag("--inject-fault", gc.inject_fault, "Corrupt the analytic gradients (testing)")
      ->group("");

  std::vector<std::string> report_paths;
  bool by_name = false;
  auto* table = app.add_subcommand("table", "Markdown table of ACC / NMI from report files");
  table->add_option("reports", report_paths, "report.json files")->required();
  table->add_flag("--by-name", by_name, "Label rows by experiment name instead of method");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return kUsageError;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*run_cmd) return cmd_run(run);
    if (*gradcheck) return cmd_gradcheck(gc);
    if (*table) return cmd_table(report_paths, by_name);
  } catch (const dmae::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
