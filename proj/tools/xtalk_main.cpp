// Command-line front end: one experiment step per invocation.
// Exit codes: 0 success, 1 usage or config error, 2 runtime error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "xtalk/errors.hpp"
#include "xtalk/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 0;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--out", c.out, "output directory (overrides output_dir)");
  cmd->add_option("--seed", c.seed, "master seed; replaces every seed in the config");
  cmd->add_option("--jobs", c.jobs, "worker threads, 0 = all cores")->capture_default_str();
}

xtalk::ExperimentConfig resolve(const Common& c) {
  auto cfg = c.config.empty() ? xtalk::ExperimentConfig{} : xtalk::load_config(c.config);
  if (c.seed) xtalk::override_seeds(cfg, *c.seed);
  if (!c.out.empty()) cfg.output_dir = c.out;
  xtalk::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal crosstalk simulation, modelling and compensation for hexagonal photonic meshes"};
  app.require_subcommand(1);

  Common c;
  std::size_t dump_spectra = 0;
  std::vector<std::string> model_names = {"tpm", "thdm", "lr"};
  std::string spectra_dir;
  std::string samples_out = "samples.csv";
  double fsr = xtalk::kDefaultFsrPm;

  auto* gen = app.add_subcommand("gen", "simulate the datasets of every ring");
  add_common(gen, c);
  gen->add_option("--dump-spectra", dump_spectra, "also write raw spectra of the first N samples");

  auto* fit = app.add_subcommand("fit", "fit models on each dataset's train split");
  add_common(fit, c);
  fit->add_option("--model", model_names, "tpm, thdm and/or lr")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "tabulate train/test RMSE and LR weight diagnostics");
  add_common(eval, c);
  auto* cross = app.add_subcommand("cross-eval", "evaluate each ring's ThDM on every ring");
  add_common(cross, c);
  auto* sweep = app.add_subcommand("sweep", "training-set size sweep");
  add_common(sweep, c);
  auto* comp = app.add_subcommand("compensate", "closed-loop compensation with ThDM");
  add_common(comp, c);
  auto* report = app.add_subcommand("report", "render report.md from existing artifacts");
  add_common(report, c, false);
  auto* run = app.add_subcommand("run", "gen, fit, eval, cross-eval, sweep, compensate and report");
  add_common(run, c);

  auto* extract = app.add_subcommand("extract", "extract shifts from raw spectrum triples");
  extract->add_option("--spectra", spectra_dir, "directory with phases.csv and <id>_{before,meas,after}.csv")
      ->required();
  extract->add_option("--fsr", fsr, "free spectral range, pm")->capture_default_str();
  extract->add_option("--out", samples_out, "output CSV")->capture_default_str();
  extract->add_option("--jobs", c.jobs, "worker threads, 0 = all cores");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*extract) {
      xtalk::cmd_extract(spectra_dir, fsr, samples_out, c.jobs);
      return 0;
    }
    if (*report) {
      const std::string out = !c.out.empty() ? c.out : resolve(c).output_dir;
      xtalk::cmd_report(out);
      std::cout << "wrote " << xtalk::artifacts::report(out).string() << '\n';
      return 0;
    }
    const auto cfg = resolve(c);
    const std::filesystem::path out = cfg.output_dir;
    if (*gen) {
      xtalk::cmd_gen(cfg, out, c.jobs, dump_spectra);
    } else if (*fit) {
      std::vector<xtalk::ModelKind> kinds;
      try {
        for (const auto& m : model_names) kinds.push_back(xtalk::model_kind_from_string(m));
      } catch (const xtalk::InputError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
      }
      xtalk::cmd_fit(cfg, out, kinds, c.jobs);
    } else if (*eval) {
      xtalk::cmd_eval(cfg, out);
    } else if (*cross) {
      xtalk::cmd_cross_eval(cfg, out, c.jobs);
    } else if (*sweep) {
      xtalk::cmd_sweep(cfg, out, c.jobs);
    } else if (*comp) {
      xtalk::cmd_compensate(cfg, out, c.jobs);
    } else if (*run) {
      xtalk::cmd_run(cfg, out, c.jobs);
    }
    return 0;
  } catch (const xtalk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
