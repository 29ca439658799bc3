#include "isac/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

namespace isac {

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::Jpotdce: return "JPOTDCE";
    case Arm::Genie: return "GENIE";
    case Arm::Jdrp: return "JDRP";
    case Arm::Jdsdr: return "JDSDR";
    case Arm::SdSbi: return "SD_SBI";
  }
  throw ConfigError("unknown arm value");
}

Arm arm_from_name(const std::string& name) {
  for (const Arm a : all_arms())
    if (arm_name(a) == name) return a;
  throw ConfigError("unknown arm name '" + name + "'");
}

std::vector<Arm> all_arms() {
  return {Arm::Jpotdce, Arm::Genie, Arm::Jdrp, Arm::Jdsdr, Arm::SdSbi};
}

void ScenarioConfig::validate() const {
  require(m >= 2, "scenario: need at least two antennas");
  require(p1 >= 1 && p1 <= m, "scenario: p1 must be in [1, m]");
  require(p2 >= 0 && p2 <= m, "scenario: p2 must be in [0, m]");
  require(q >= 1, "scenario: need at least one uplink pilot");
  require(trials >= 1, "scenario: trials must be positive");
  require(calib_scenes >= 1, "scenario: calibration draws must be positive");
  require(k_targets >= 1 && l_paths >= 1,
          "scenario: need at least one target and one path");
  require(jitter >= 0.0 && jitter <= 1.0, "scenario: jitter in [0, 1]");
  require(detection_threshold > 0.0 && detection_threshold < 1.0,
          "scenario: detection threshold in (0, 1)");
  require(!rho_common.empty(), "scenario: empty sparsity-ratio sweep");
  for (const double rho : rho_common) {
    require(rho >= 0.0 && rho <= 1.0, "scenario: rho_common in [0, 1]");
    require(rho < 1.0 || k_targets == l_paths,
            "scenario: rho_common = 1 requires equal target and path counts");
  }
  require(!arms.empty(), "scenario: no arms selected");
  estep.validate();
  mstep.validate();
  require(pilot_epsilon > 0.0 && pilot_i_max >= 1 && pilot_tol > 0.0 &&
              subproblem_tol > 0.0,
          "scenario: pilot-design parameters must be positive");
}

ScenarioConfig ScenarioConfig::from_doc(const KvDoc& doc) {
  static const char* known[] = {
      "m",           "p1",
      "p2",          "q",
      "snr_db",      "rho_common",
      "k_targets",   "l_paths",
      "jitter",      "trials",
      "seed",        "arms",
      "detection_threshold",          "calib_scenes",
      "hmm_rho01",   "hmm_rho10",
      "hmm_rho_r",   "hmm_rho_c_cond",
      "hmm_var_r",   "hmm_var_c",
      "estep_i_in",  "estep_tol",
      "damping",     "lmmse",
      "banded_printed_form",          "mstep_i_out",
      "grid_tol",    "step_init",
      "restrict_updates",             "support_floor",
      "pilot_epsilon",                "pilot_i_max",
      "pilot_tol",   "subproblem_tol",
      "pilot_continuation",
  };
  for (const auto& [key, value] : doc.values) {
    (void)value;
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    require(ok, "config: unknown key '" + key + "'");
  }

  ScenarioConfig cfg;
  cfg.m = doc.get_int("m", cfg.m);
  cfg.p1 = doc.get_int("p1", cfg.p1);
  cfg.p2 = doc.get_int("p2", cfg.p2);
  cfg.q = doc.get_int("q", cfg.q);
  cfg.snr_db = doc.get_double("snr_db", cfg.snr_db);
  cfg.rho_common = doc.get_double_list("rho_common", cfg.rho_common);
  cfg.k_targets = doc.get_int("k_targets", cfg.k_targets);
  cfg.l_paths = doc.get_int("l_paths", cfg.l_paths);
  cfg.jitter = doc.get_double("jitter", cfg.jitter);
  cfg.trials = doc.get_int("trials", cfg.trials);
  cfg.seed = doc.get_uint64("seed", cfg.seed);
  if (doc.has("arms")) {
    cfg.arms.clear();
    for (const std::string& name : doc.get_string_list("arms", {}))
      cfg.arms.push_back(arm_from_name(name));
  }
  cfg.detection_threshold =
      doc.get_double("detection_threshold", cfg.detection_threshold);
  cfg.calib_scenes = doc.get_int("calib_scenes", cfg.calib_scenes);

  const auto opt = [&doc](const char* key) -> std::optional<double> {
    if (!doc.has(key)) return std::nullopt;
    return doc.get_double(key, 0.0);
  };
  cfg.hmm_rho01 = opt("hmm_rho01");
  cfg.hmm_rho10 = opt("hmm_rho10");
  cfg.hmm_rho_r = opt("hmm_rho_r");
  cfg.hmm_rho_c_cond = opt("hmm_rho_c_cond");
  cfg.hmm_var_r = opt("hmm_var_r");
  cfg.hmm_var_c = opt("hmm_var_c");

  cfg.estep.i_in = doc.get_int("estep_i_in", cfg.estep.i_in);
  cfg.estep.tol = doc.get_double("estep_tol", cfg.estep.tol);
  cfg.estep.damping = doc.get_double("damping", cfg.estep.damping);
  const std::string lmmse = doc.get_string("lmmse", "exact");
  if (lmmse == "exact") {
    cfg.estep.variant = LmmseVariant::Exact;
  } else if (lmmse == "banded") {
    cfg.estep.variant = LmmseVariant::Banded;
  } else if (lmmse == "po") {
    cfg.estep.variant = LmmseVariant::PoApprox;
  } else {
    throw ConfigError("config: lmmse must be exact, banded, or po");
  }
  cfg.estep.banded_printed_form =
      doc.get_bool("banded_printed_form", cfg.estep.banded_printed_form);
  cfg.mstep.i_out = doc.get_int("mstep_i_out", cfg.mstep.i_out);
  cfg.mstep.grid_tol = doc.get_double("grid_tol", cfg.mstep.grid_tol);
  cfg.mstep.step_init = doc.get_double("step_init", cfg.mstep.step_init);
  cfg.mstep.restrict_updates =
      doc.get_bool("restrict_updates", cfg.mstep.restrict_updates);
  cfg.mstep.support_floor =
      doc.get_double("support_floor", cfg.mstep.support_floor);

  cfg.pilot_epsilon = doc.get_double("pilot_epsilon", cfg.pilot_epsilon);
  cfg.pilot_i_max = doc.get_int("pilot_i_max", cfg.pilot_i_max);
  cfg.pilot_tol = doc.get_double("pilot_tol", cfg.pilot_tol);
  cfg.subproblem_tol = doc.get_double("subproblem_tol", cfg.subproblem_tol);
  cfg.pilot_continuation =
      doc.get_bool("pilot_continuation", cfg.pilot_continuation);

  cfg.validate();
  return cfg;
}

namespace {

std::uint64_t rho_salt(double rho) {
  return static_cast<std::uint64_t>(std::llround(rho * 1e9));
}

// Chain with the requested stationary activity and a mean burst length
// matching the scene generator's 2..4-index clusters.
HmmParams chain_params(double lambda, double rho_r, double rho_c_cond,
                       double var_r, double var_c) {
  require(lambda > 0.0 && lambda < 0.95,
          "prior calibration: activity rate out of range");
  HmmParams p;
  p.rho10 = 1.0 / 3.0;
  p.rho01 = lambda * p.rho10 / (1.0 - lambda);
  p.rho_r = std::min(1.0, rho_r);
  p.rho_c_cond = std::min(1.0, rho_c_cond);
  p.var_r = var_r;
  p.var_c = var_c;
  p.validate();
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

HmmParams calibrate_hmm(const ScenarioConfig& cfg, double rho) {
  const double e_union = (cfg.k_targets + cfg.l_paths) / (1.0 + rho);
  HmmParams p = chain_params(e_union / cfg.m, cfg.k_targets / e_union,
                             cfg.l_paths / e_union, 1.0, 1.0);
  if (cfg.hmm_rho01) p.rho01 = *cfg.hmm_rho01;
  if (cfg.hmm_rho10) p.rho10 = *cfg.hmm_rho10;
  if (cfg.hmm_rho_r) p.rho_r = *cfg.hmm_rho_r;
  if (cfg.hmm_rho_c_cond) p.rho_c_cond = *cfg.hmm_rho_c_cond;
  if (cfg.hmm_var_r) p.var_r = *cfg.hmm_var_r;
  if (cfg.hmm_var_c) p.var_c = *cfg.hmm_var_c;
  p.validate();
  return p;
}

CalibratedNoise calibrate_noise(const ScenarioConfig& cfg, double rho) {
  const double snr = std::pow(10.0, cfg.snr_db / 10.0);
  double power_r = 0.0, power_c = 0.0;
  for (int i = 0; i < cfg.calib_scenes; ++i) {
    const SceneTruth scene = make_cdl_like_scene(
        rho, cfg.k_targets, cfg.l_paths, cfg.m,
        derive_seed(cfg.seed, Stream::Calibration, rho_salt(rho), 2 * i),
        cfg.jitter);
    const Channels ch = synthesize_channels(scene);
    Rng prng =
        make_rng(cfg.seed, Stream::Calibration, rho_salt(rho), 2 * i + 1);
    const CMat dps = make_omni_dps(cfg.m, cfg.p1, 1.0, prng);
    double acc = 0.0;
    for (int p = 0; p < dps.cols(); ++p)
      acc += (ch.h_radar * dps.col(p)).squaredNorm();
    power_r += acc / dps.cols();
    power_c += ch.h_comm.squaredNorm();
  }
  power_r /= cfg.calib_scenes;
  power_c /= cfg.calib_scenes;
  require(power_r > 0.0 && power_c > 0.0,
          "noise calibration: degenerate scene power");
  CalibratedNoise noise;
  noise.var_r = power_r / (cfg.m * snr);
  noise.var_c = power_c / (cfg.m * snr);
  return noise;
}

TrialMetrics compute_metrics(const SceneTruth& scene, const RVec& theta_radar,
                             const RVec& pi_r, const CVec& xr_mean,
                             const RVec& theta_comm, const CVec& xc_mean,
                             double threshold) {
  const int m = scene.m;
  require(theta_radar.size() == m && pi_r.size() == m &&
              xr_mean.size() == m && theta_comm.size() == m &&
              xc_mean.size() == m,
          "compute_metrics: estimate sizes must match the grid");
  TrialMetrics out;
  const Channels truth = synthesize_channels(scene);

  CMat ar(m, m), ac(m, m);
  for (int k = 0; k < m; ++k) {
    ar.col(k) = steering_vector(theta_radar(k), m);
    ac.col(k) = steering_vector(theta_comm(k), m);
  }
  const CMat h_hat = ar * xr_mean.asDiagonal() * ar.adjoint();
  const CVec hc_hat = ac * xc_mean;
  out.nmse_radar =
      (h_hat - truth.h_radar).squaredNorm() / truth.h_radar.squaredNorm();
  out.nmse_comm =
      (hc_hat - truth.h_comm).squaredNorm() / truth.h_comm.squaredNorm();

  std::vector<int> dets, truths;
  for (int i = 0; i < m; ++i) {
    if (pi_r(i) > threshold) dets.push_back(i);  // strict: 0.5 is "absent"
    if (scene.s_r(i) == 1) truths.push_back(i);
  }

  // Nearest-neighbor matching in sin-space, one grid bin of slack; greedy
  // over candidate pairs sorted by distance is exact for this tolerance.
  struct Cand {
    double d;
    int di, ti;
  };
  std::vector<Cand> cands;
  const double tol = AngularGrid::sin_bin_width(m);
  for (int di = 0; di < static_cast<int>(dets.size()); ++di)
    for (int ti = 0; ti < static_cast<int>(truths.size()); ++ti) {
      const double d = std::abs(std::sin(theta_radar(dets[di])) -
                                std::sin(scene.theta(truths[ti])));
      if (d <= tol) cands.push_back({d, di, ti});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.di != b.di) return a.di < b.di;
    return a.ti < b.ti;
  });
  std::vector<bool> det_used(dets.size(), false), truth_used(truths.size(),
                                                             false);
  double sq_sum = 0.0, sq_max = 0.0;
  for (const Cand& c : cands) {
    if (det_used[c.di] || truth_used[c.ti]) continue;
    det_used[c.di] = true;
    truth_used[c.ti] = true;
    const double err = theta_radar(dets[c.di]) - scene.theta(truths[c.ti]);
    sq_sum += err * err;
    sq_max = std::max(sq_max, err * err);
    ++out.matched;
  }

  const int n_true = static_cast<int>(truths.size());
  const int n_fa = static_cast<int>(dets.size()) - out.matched;
  out.p_false_alarm =
      (m - n_true) > 0 ? static_cast<double>(n_fa) / (m - n_true) : 0.0;
  out.p_miss =
      n_true > 0 ? static_cast<double>(n_true - out.matched) / n_true : 0.0;
  if (out.matched > 0) {
    out.aoa_mse_avg = sq_sum / out.matched;
    out.aoa_mse_worst = sq_max;
  }
  return out;
}

namespace {

PilotSet radar_only(const PilotSet& p) {
  PilotSet r = p;
  r.up = CVec(0);
  return r;
}

PilotSet comm_only(const PilotSet& p) {
  PilotSet r = p;
  r.dp1 = CMat(p.m(), 0);
  r.dp2 = CMat(p.m(), 0);
  return r;
}

Observation radar_slice(const Observation& o) {
  Observation r = o;
  r.y_c = CVec(0);
  return r;
}

Observation comm_slice(const Observation& o) {
  Observation r = o;
  r.y_r = CVec(0);
  return r;
}

// Separate-design priors: each modality gets its own chain matched to its
// own support density, with the conditional masks pinned to one (the chain
// state IS the modality support).
HmmParams sd_radar_prior(const ScenarioConfig& cfg, const HmmParams& joint) {
  return chain_params(static_cast<double>(cfg.k_targets) / cfg.m, 1.0, 1.0,
                      joint.var_r, joint.var_c);
}

HmmParams sd_comm_prior(const ScenarioConfig& cfg, const HmmParams& joint) {
  return chain_params(static_cast<double>(cfg.l_paths) / cfg.m, 1.0, 1.0,
                      joint.var_r, joint.var_c);
}

AoaPartition stage1_partition(const TurboResult& r1, double threshold) {
  const int mg = r1.grid.size();
  return AoaPartition::from_detections(
      r1.grid.theta, r1.support.pi_r, r1.support.pi_c,
      r1.belief.mean.head(mg), r1.belief.mean.tail(mg), threshold);
}

PilotOptConfig pilot_config(const ScenarioConfig& cfg,
                            const CalibratedNoise& noise) {
  PilotOptConfig pcfg;
  pcfg.p2 = cfg.p2;
  pcfg.power = 1.0;
  pcfg.epsilon = cfg.pilot_epsilon;
  pcfg.i_max = cfg.pilot_i_max;
  pcfg.tol = cfg.pilot_tol;
  pcfg.subproblem_tol = cfg.subproblem_tol;
  pcfg.continuation = cfg.pilot_continuation;
  pcfg.noise_var_r = noise.var_r;
  pcfg.noise_var_c = noise.var_c;
  return pcfg;
}

}  // namespace

TrialMetrics run_trial(const ScenarioConfig& cfg, int rho_index, double rho,
                       int trial_index, const HmmParams& prior,
                       const CalibratedNoise& noise, Arm arm) {
  TrialMetrics out;
  // All streams derive from (seed, rho, trial) only: arms stay paired.
  const std::uint64_t ts =
      derive_seed(cfg.seed, 0x7269616cULL, rho_index, trial_index);
  try {
    const SceneTruth scene =
        make_cdl_like_scene(rho, cfg.k_targets, cfg.l_paths, cfg.m,
                            derive_seed(ts, Stream::Scene), cfg.jitter);
    Rng pilot_rng = make_rng(ts, Stream::PilotsStage1);
    Rng up_rng = make_rng(ts, Stream::UplinkPilots);
    PilotSet pilots1;
    pilots1.dp1 = make_omni_dps(cfg.m, cfg.p1, 1.0, pilot_rng);
    pilots1.dp2 = CMat(cfg.m, 0);
    pilots1.up = make_unit_modulus_ups(cfg.q, up_rng);
    pilots1.power_budget = 1.0;
    Rng noise1_rng = make_rng(ts, Stream::NoiseStage1);
    const Observation obs1 = observe(scene, pilots1, Stage::One, noise.var_r,
                                     noise.var_c, noise1_rng);

    const auto t0 = std::chrono::steady_clock::now();
    const bool separate = arm == Arm::SdSbi;
    TurboResult r1, comm_run;
    if (separate) {
      r1 = run_turbo_sbi(radar_only(pilots1), Stage::One, radar_slice(obs1),
                         sd_radar_prior(cfg, prior), cfg.estep, cfg.mstep);
      comm_run = run_turbo_sbi(comm_only(pilots1), Stage::One,
                               comm_slice(obs1), sd_comm_prior(cfg, prior),
                               cfg.estep, cfg.mstep);
    } else {
      r1 = run_turbo_sbi(pilots1, Stage::One, obs1, prior, cfg.estep,
                         cfg.mstep);
    }
    out.stage1_seconds = seconds_since(t0);

    if (cfg.p2 == 0) {
      const int mg = cfg.m;
      const TrialMetrics metrics =
          separate ? compute_metrics(scene, r1.grid.theta, r1.support.pi_r,
                                     r1.belief.mean.head(mg),
                                     comm_run.grid.theta,
                                     comm_run.belief.mean.tail(mg),
                                     cfg.detection_threshold)
                   : compute_metrics(scene, r1.grid.theta, r1.support.pi_r,
                                     r1.belief.mean.head(mg), r1.grid.theta,
                                     r1.belief.mean.tail(mg),
                                     cfg.detection_threshold);
      const double t_stage1 = out.stage1_seconds;
      out = metrics;
      out.stage1_seconds = t_stage1;
      return out;
    }

    // Stage-2 pilot selection.
    const auto t1 = std::chrono::steady_clock::now();
    CMat dp2;
    if (arm == Arm::Jdrp || arm == Arm::SdSbi) {
      Rng r2rng = make_rng(ts, Stream::RandomStage2);
      dp2 = make_omni_dps(cfg.m, cfg.p2, 1.0, r2rng);
    } else {
      const AoaPartition partition =
          arm == Arm::Genie ? AoaPartition::from_scene(scene)
                            : stage1_partition(r1, cfg.detection_threshold);
      if (partition.n_radar() == 0) {
        // Nothing detected to aim at; fall back to fresh random pilots.
        Rng r2rng = make_rng(ts, Stream::RandomStage2);
        dp2 = make_omni_dps(cfg.m, cfg.p2, 1.0, r2rng);
      } else if (arm == Arm::Jdsdr) {
        dp2 = sdr_baseline(partition, pilots1, pilot_config(cfg, noise))
                  .vectors;
      } else {
        dp2 = optimize_pilots(partition, pilots1, pilot_config(cfg, noise))
                  .vectors;
      }
    }

    PilotSet pilots2 = pilots1;
    pilots2.dp2 = dp2;
    Rng noise2_rng = make_rng(ts, Stream::NoiseStage2);
    const Observation obs2 = observe(scene, pilots2, Stage::Two, noise.var_r,
                                     noise.var_c, noise2_rng);
    const Observation stacked = stack_observations(obs1, obs2);

    const int mg = cfg.m;
    if (separate) {
      // Comm data is untouched by stage 2; its stage-1 estimate stands.
      const TurboResult r2 = run_turbo_sbi(
          radar_only(pilots2), Stage::Both, radar_slice(stacked),
          sd_radar_prior(cfg, prior), cfg.estep, cfg.mstep);
      out.stage2_seconds = seconds_since(t1);
      const TrialMetrics metrics = compute_metrics(
          scene, r2.grid.theta, r2.support.pi_r, r2.belief.mean.head(mg),
          comm_run.grid.theta, comm_run.belief.mean.tail(mg),
          cfg.detection_threshold);
      out.nmse_comm = metrics.nmse_comm;
      out.nmse_radar = metrics.nmse_radar;
      out.aoa_mse_avg = metrics.aoa_mse_avg;
      out.aoa_mse_worst = metrics.aoa_mse_worst;
      out.p_false_alarm = metrics.p_false_alarm;
      out.p_miss = metrics.p_miss;
      out.matched = metrics.matched;
      return out;
    }
    const TurboResult r2 =
        run_turbo_sbi(pilots2, Stage::Both, stacked, prior, cfg.estep,
                      cfg.mstep);
    out.stage2_seconds = seconds_since(t1);
    const TrialMetrics metrics = compute_metrics(
        scene, r2.grid.theta, r2.support.pi_r, r2.belief.mean.head(mg),
        r2.grid.theta, r2.belief.mean.tail(mg), cfg.detection_threshold);
    out.nmse_comm = metrics.nmse_comm;
    out.nmse_radar = metrics.nmse_radar;
    out.aoa_mse_avg = metrics.aoa_mse_avg;
    out.aoa_mse_worst = metrics.aoa_mse_worst;
    out.p_false_alarm = metrics.p_false_alarm;
    out.p_miss = metrics.p_miss;
    out.matched = metrics.matched;
  } catch (const NumericalError&) {
    out.failed = true;
  }
  return out;
}

std::vector<SweepRow> run_experiment(const ScenarioConfig& cfg) {
  cfg.validate();
  std::vector<SweepRow> rows;
  for (int ri = 0; ri < static_cast<int>(cfg.rho_common.size()); ++ri) {
    const double rho = cfg.rho_common[ri];
    const HmmParams prior = calibrate_hmm(cfg, rho);
    const CalibratedNoise noise = calibrate_noise(cfg, rho);
    for (const Arm arm : cfg.arms) {
      SweepRow row;
      row.rho = rho;
      row.arm = arm;
      double nmse_c = 0.0, nmse_r = 0.0, pfa = 0.0, pmd = 0.0;
      double aoa_avg = 0.0, aoa_worst = 0.0;
      int ok = 0, with_match = 0;
      for (int t = 0; t < cfg.trials; ++t) {
        const TrialMetrics tm =
            run_trial(cfg, ri, rho, t, prior, noise, arm);
        if (tm.failed) {
          ++row.trials_failed;
          continue;
        }
        ++ok;
        nmse_c += tm.nmse_comm;
        nmse_r += tm.nmse_radar;
        pfa += tm.p_false_alarm;
        pmd += tm.p_miss;
        if (tm.matched > 0) {
          ++with_match;
          aoa_avg += tm.aoa_mse_avg;
          aoa_worst += tm.aoa_mse_worst;
        }
      }
      const double qnan = std::nan("");
      row.nmse_comm = ok ? nmse_c / ok : qnan;
      row.nmse_radar = ok ? nmse_r / ok : qnan;
      row.p_fa = ok ? pfa / ok : qnan;
      row.p_md = ok ? pmd / ok : qnan;
      row.aoa_mse_avg = with_match ? aoa_avg / with_match : qnan;
      row.aoa_mse_worst = with_match ? aoa_worst / with_match : qnan;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "rho_c,arm,nmse_comm,nmse_radar,aoa_mse_avg,aoa_mse_worst,p_fa,"
         "p_md,trials_failed\n";
  for (const SweepRow& r : rows) {
    out << format_sci(r.rho) << ',' << arm_name(r.arm) << ','
        << format_sci(r.nmse_comm) << ',' << format_sci(r.nmse_radar) << ','
        << format_sci(r.aoa_mse_avg) << ',' << format_sci(r.aoa_mse_worst)
        << ',' << format_sci(r.p_fa) << ',' << format_sci(r.p_md) << ','
        << r.trials_failed << '\n';
  }
}

PilotOptResult trace_pilot_optimization(const ScenarioConfig& cfg, double rho,
                                        int trial_index, bool genie) {
  cfg.validate();
  require(cfg.p2 >= 1, "pilot trace: needs at least one stage-two pilot");
  int rho_index = 0;
  for (int i = 0; i < static_cast<int>(cfg.rho_common.size()); ++i)
    if (cfg.rho_common[i] == rho) rho_index = i;
  const HmmParams prior = calibrate_hmm(cfg, rho);
  const CalibratedNoise noise = calibrate_noise(cfg, rho);

  const std::uint64_t ts =
      derive_seed(cfg.seed, 0x7269616cULL, rho_index, trial_index);
  const SceneTruth scene =
      make_cdl_like_scene(rho, cfg.k_targets, cfg.l_paths, cfg.m,
                          derive_seed(ts, Stream::Scene), cfg.jitter);
  Rng pilot_rng = make_rng(ts, Stream::PilotsStage1);
  Rng up_rng = make_rng(ts, Stream::UplinkPilots);
  PilotSet pilots1;
  pilots1.dp1 = make_omni_dps(cfg.m, cfg.p1, 1.0, pilot_rng);
  pilots1.dp2 = CMat(cfg.m, 0);
  pilots1.up = make_unit_modulus_ups(cfg.q, up_rng);
  pilots1.power_budget = 1.0;

  AoaPartition partition;
  if (genie) {
    partition = AoaPartition::from_scene(scene);
  } else {
    Rng noise1_rng = make_rng(ts, Stream::NoiseStage1);
    const Observation obs1 = observe(scene, pilots1, Stage::One, noise.var_r,
                                     noise.var_c, noise1_rng);
    const TurboResult r1 = run_turbo_sbi(pilots1, Stage::One, obs1, prior,
                                         cfg.estep, cfg.mstep);
    partition = stage1_partition(r1, cfg.detection_threshold);
    require(partition.n_radar() > 0,
            "pilot trace: stage one detected no targets on this trial");
  }
  return optimize_pilots(partition, pilots1, pilot_config(cfg, noise));
}

}  // namespace isac
