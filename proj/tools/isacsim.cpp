// Command-line front end: `trial` runs one trial of one arm and prints its
// metrics as key = value lines, `sweep` runs the Monte-Carlo experiment and
// emits the result CSV, `pilotopt-trace` emits the per-iteration pilot-design
// trace. Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "isac/harness.hpp"

namespace {

// Every configuration key doubles as a long flag; flag values override the
// config file. List-valued keys take one argument with comma- or
// space-separated entries.
const char* const kConfigKeys[] = {
    "m",          "p1",
    "p2",         "q",
    "snr_db",     "rho_common",
    "k_targets",  "l_paths",
    "jitter",     "trials",
    "seed",       "arms",
    "detection_threshold",        "calib_scenes",
    "hmm_rho01",  "hmm_rho10",
    "hmm_rho_r",  "hmm_rho_c_cond",
    "hmm_var_r",  "hmm_var_c",
    "estep_i_in", "estep_tol",
    "damping",    "lmmse",
    "banded_printed_form",        "mstep_i_out",
    "grid_tol",   "step_init",
    "restrict_updates",           "support_floor",
    "pilot_epsilon",              "pilot_i_max",
    "pilot_tol",  "subproblem_tol",
    "pilot_continuation",
};

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  isac::KvDoc overrides;
};

void add_common_flags(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path,
                  "Configuration file (key = value lines)");
  cmd->add_option("--out", args->out_path, "Output path ('-' or empty: stdout)");
  for (const char* key : kConfigKeys) {
    isac::KvDoc* doc = &args->overrides;
    const std::string name = key;
    cmd->add_option_function<std::string>(
        "--" + name,
        [doc, name](const std::string& value) { doc->values[name] = value; },
        "Override configuration key '" + name + "'");
  }
}

isac::ScenarioConfig load_config(const CommonArgs& args) {
  isac::KvDoc doc;
  if (!args.config_path.empty())
    doc = isac::KvDoc::parse_file(args.config_path);
  for (const auto& [key, value] : args.overrides.values)
    doc.values[key] = value;
  return isac::ScenarioConfig::from_doc(doc);
}

template <typename Fn>
void with_output(const std::string& path, Fn fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream file(path);
  isac::require(file.good(), "cannot open output file '" + path + "'");
  fn(file);
  file.close();
  if (!file.good()) throw isac::NumericalError("write failed: '" + path + "'");
}

// Picks the paired-seed index of `rho`: its position in the sweep list when
// present, otherwise 0 (the trial is still deterministic in rho).
int rho_index_of(const isac::ScenarioConfig& cfg, double rho) {
  for (int i = 0; i < static_cast<int>(cfg.rho_common.size()); ++i)
    if (cfg.rho_common[i] == rho) return i;
  return 0;
}

int cmd_trial(const CommonArgs& args, double rho, bool rho_given,
              const std::string& arm_name, int trial_index) {
  const isac::ScenarioConfig cfg = load_config(args);
  if (!rho_given) rho = cfg.rho_common.front();
  isac::require(rho >= 0.0 && rho <= 1.0, "trial: rho must be in [0, 1]");
  isac::require(rho < 1.0 || cfg.k_targets == cfg.l_paths,
                "trial: rho = 1 requires equal target and path counts");
  isac::require(trial_index >= 0, "trial: trial index must be non-negative");
  const isac::Arm arm = isac::arm_from_name(arm_name);
  const isac::HmmParams prior = isac::calibrate_hmm(cfg, rho);
  const isac::CalibratedNoise noise = isac::calibrate_noise(cfg, rho);
  const isac::TrialMetrics tm = isac::run_trial(
      cfg, rho_index_of(cfg, rho), rho, trial_index, prior, noise, arm);
  with_output(args.out_path, [&](std::ostream& out) {
    out << "arm = " << isac::arm_name(arm) << "\n"
        << "rho_c = " << isac::format_sci(rho) << "\n"
        << "trial_index = " << trial_index << "\n"
        << "failed = " << (tm.failed ? 1 : 0) << "\n"
        << "nmse_comm = " << isac::format_sci(tm.nmse_comm) << "\n"
        << "nmse_radar = " << isac::format_sci(tm.nmse_radar) << "\n"
        << "aoa_mse_avg = " << isac::format_sci(tm.aoa_mse_avg) << "\n"
        << "aoa_mse_worst = " << isac::format_sci(tm.aoa_mse_worst) << "\n"
        << "p_fa = " << isac::format_sci(tm.p_false_alarm) << "\n"
        << "p_md = " << isac::format_sci(tm.p_miss) << "\n"
        << "matched = " << tm.matched << "\n"
        << "stage1_seconds = " << isac::format_sci(tm.stage1_seconds) << "\n"
        << "stage2_seconds = " << isac::format_sci(tm.stage2_seconds) << "\n";
  });
  if (tm.failed) {
    std::cerr << "trial: inference failed on this realization\n";
    return 2;
  }
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const isac::ScenarioConfig cfg = load_config(args);
  const std::vector<isac::SweepRow> rows = isac::run_experiment(cfg);
  with_output(args.out_path,
              [&](std::ostream& out) { isac::write_csv(out, rows); });
  return 0;
}

int cmd_pilotopt_trace(const CommonArgs& args, double rho, bool rho_given,
                       int trial_index, bool genie) {
  const isac::ScenarioConfig cfg = load_config(args);
  if (!rho_given) rho = cfg.rho_common.front();
  isac::require(rho >= 0.0 && rho <= 1.0, "trace: rho must be in [0, 1]");
  isac::require(rho < 1.0 || cfg.k_targets == cfg.l_paths,
                "trace: rho = 1 requires equal target and path counts");
  isac::require(trial_index >= 0, "trace: trial index must be non-negative");
  const isac::PilotOptResult result =
      isac::trace_pilot_optimization(cfg, rho, trial_index, genie);
  with_output(args.out_path, [&](std::ostream& out) {
    out << "iter,lambda,lmi_margin,max_trace\n";
    for (const isac::PilotOptTraceRow& row : result.trace)
      out << row.iter << ',' << isac::format_sci(row.lambda) << ','
          << isac::format_sci(row.lmi_margin) << ','
          << isac::format_sci(row.max_trace) << '\n';
  });
  std::cerr << "iterations = " << result.iterations << "\n"
            << "converged = " << (result.converged ? 1 : 0) << "\n"
            << "lambda_relaxed = " << isac::format_sci(result.lambda_relaxed)
            << "\n"
            << "lambda_projected = "
            << isac::format_sci(result.lambda_projected) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage joint pilot design and sparse channel inference"};
  app.require_subcommand(1);

  CommonArgs trial_args;
  double trial_rho = 0.0;
  std::string trial_arm = "JPOTDCE";
  int trial_index = 0;
  CLI::App* trial =
      app.add_subcommand("trial", "Run one trial of one arm, print metrics");
  add_common_flags(trial, &trial_args);
  CLI::Option* trial_rho_opt =
      trial->add_option("--rho", trial_rho, "Common-support ratio");
  trial->add_option("--arm", trial_arm,
                    "JPOTDCE | GENIE | JDRP | JDSDR | SD_SBI");
  trial->add_option("--trial-index", trial_index, "Trial number (seed salt)");

  CommonArgs sweep_args;
  CLI::App* sweep =
      app.add_subcommand("sweep", "Monte-Carlo sweep over rho_common, CSV out");
  add_common_flags(sweep, &sweep_args);

  CommonArgs trace_args;
  double trace_rho = 0.0;
  int trace_index = 0;
  bool trace_genie = false;
  CLI::App* trace = app.add_subcommand(
      "pilotopt-trace", "Per-iteration pilot-design trace on one scene");
  add_common_flags(trace, &trace_args);
  CLI::Option* trace_rho_opt =
      trace->add_option("--rho", trace_rho, "Common-support ratio");
  trace->add_option("--trial-index", trace_index, "Trial number (seed salt)");
  trace->add_flag("--genie", trace_genie,
                  "Partition from the true scene instead of stage-1 estimates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (trial->parsed())
      return cmd_trial(trial_args, trial_rho, trial_rho_opt->count() > 0,
                       trial_arm, trial_index);
    if (sweep->parsed()) return cmd_sweep(sweep_args);
    if (trace->parsed())
      return cmd_pilotopt_trace(trace_args, trace_rho,
                                trace_rho_opt->count() > 0, trace_index,
                                trace_genie);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const isac::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
}
