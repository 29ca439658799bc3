#include "isac/scene.hpp"

#include <algorithm>
#include <vector>

namespace isac {

void HmmParams::validate() const {
  require(rho01 > 0.0 && rho01 <= 1.0, "HmmParams: rho01 must be in (0,1]");
  require(rho10 > 0.0 && rho10 <= 1.0, "HmmParams: rho10 must be in (0,1]");
  require(rho_r >= 0.0 && rho_r <= 1.0, "HmmParams: rho_r must be in [0,1]");
  require(rho_c_cond >= 0.0 && rho_c_cond <= 1.0, "HmmParams: rho_c_cond must be in [0,1]");
  require(var_r > 0.0, "HmmParams: var_r must be positive");
  require(var_c > 0.0, "HmmParams: var_c must be positive");
}

SupportTriple sample_supports(const HmmParams& p, int m, Rng& rng) {
  p.validate();
  require(m >= 1, "sample_supports: m must be >= 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SupportTriple t;
  t.s.setZero(m);
  t.s_r.setZero(m);
  t.s_c.setZero(m);
  int prev = u(rng) < p.lambda() ? 1 : 0;
  for (int i = 0; i < m; ++i) {
    if (i > 0) {
      const double p1 = prev ? 1.0 - p.rho10 : p.rho01;
      prev = u(rng) < p1 ? 1 : 0;
    }
    t.s(i) = prev;
    if (prev) {
      t.s_r(i) = u(rng) < p.rho_r ? 1 : 0;
      t.s_c(i) = u(rng) < p.rho_c_cond ? 1 : 0;
    }
  }
  return t;
}

SceneTruth sample_scene(const HmmParams& p, const SupportTriple& sup,
                        const AngularGrid& grid, double jitter, Rng& rng) {
  const int m = grid.size();
  require(sup.s.size() == m, "sample_scene: support/grid size mismatch");
  require(jitter >= 0.0, "sample_scene: jitter must be >= 0");
  SceneTruth sc;
  sc.m = m;
  sc.theta = grid.theta;
  sc.s = sup.s;
  sc.s_r = sup.s_r;
  sc.s_c = sup.s_c;
  sc.x_r.setZero(m);
  sc.x_c.setZero(m);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double half_bin = 0.5 * AngularGrid::sin_bin_width(m);
  for (int i = 0; i < m; ++i) {
    if (!sup.s(i)) continue;
    if (jitter > 0.0) {
      double sv = std::sin(grid.theta(i)) + jitter * half_bin * u(rng);
      sv = std::clamp(sv, -1.0 + 1e-9, 1.0 - 1e-9);
      sc.theta(i) = std::asin(sv);
    }
    if (sup.s_r(i)) sc.x_r(i) = cnormal(rng, p.var_r);
    if (sup.s_c(i)) sc.x_c(i) = cnormal(rng, p.var_c);
  }
  return sc;
}

namespace {

// Lays out `total` indices as bursts of 2..4 adjacent slots, avoiding `used`.
// Returns the chosen indices and marks them used. Burst-size bookkeeping
// avoids a trailing singleton when it can (3 -> one burst of 3, 5 -> 2+3).
std::vector<int> place_bursts(int m, int total, std::vector<char>& used,
                              Rng& rng) {
  std::vector<int> out;
  std::uniform_int_distribution<int> size_dist(2, 4);
  int remaining = total;
  while (remaining > 0) {
    int c = std::min(size_dist(rng), remaining);
    if (remaining - c == 1) c = (c < 4) ? c + 1 : c - 1;  // no stranded 1
    c = std::min(c, remaining);

    bool placed = false;
    std::uniform_int_distribution<int> start_dist(0, std::max(0, m - c));
    for (int attempt = 0; attempt < 256 && !placed; ++attempt) {
      const int s = start_dist(rng);
      bool free = true;
      for (int i = s; i < s + c; ++i) free = free && !used[i];
      if (!free) continue;
      for (int i = s; i < s + c; ++i) {
        used[i] = 1;
        out.push_back(i);
      }
      placed = true;
    }
    if (!placed) {
      // Dense grid: fall back to the first free run of length c, then to
      // single free slots (only reachable when the grid is nearly full).
      for (int s = 0; s + c <= m && !placed; ++s) {
        bool free = true;
        for (int i = s; i < s + c; ++i) free = free && !used[i];
        if (!free) continue;
        for (int i = s; i < s + c; ++i) {
          used[i] = 1;
          out.push_back(i);
        }
        placed = true;
      }
    }
    if (!placed) {
      for (int i = 0; i < m && c > 0; ++i) {
        if (used[i]) continue;
        used[i] = 1;
        out.push_back(i);
        --c;
      }
      if (c > 0) throw ConfigError("make_cdl_like_scene: grid too small");
      c = 0;
    }
    remaining = static_cast<int>(total - out.size());
  }
  return out;
}

// Splits a sorted index list into maximal runs of adjacent indices.
std::vector<std::vector<int>> runs_of(std::vector<int> idx) {
  std::sort(idx.begin(), idx.end());
  std::vector<std::vector<int>> runs;
  for (int i : idx) {
    if (!runs.empty() && runs.back().back() + 1 == i)
      runs.back().push_back(i);
    else
      runs.push_back({i});
  }
  return runs;
}

}  // namespace

SceneTruth make_cdl_like_scene(double rho_common, int k_targets, int l_paths,
                               int m, std::uint64_t seed, double jitter,
                               double gain_var_r, double gain_var_c) {
  require(rho_common >= 0.0 && rho_common <= 1.0,
          "make_cdl_like_scene: rho_common must be in [0,1]");
  require(k_targets >= 1 && l_paths >= 1,
          "make_cdl_like_scene: need at least one target and one path");
  require(k_targets + l_paths <= m,
          "make_cdl_like_scene: supports cannot exceed the grid");

  // Overlap o solves  rho = o / (k + l - o); randomized rounding keeps the
  // realized ratio unbiased and within one index of the request.
  const double o_exact = rho_common * (k_targets + l_paths) / (1.0 + rho_common);
  Rng rng = make_rng(seed, Stream::Scene);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double frac = o_exact - std::floor(o_exact);
  int o = static_cast<int>(std::floor(o_exact)) + (u01(rng) < frac ? 1 : 0);
  o = std::min(o, std::min(k_targets, l_paths));
  const double hi = static_cast<double>(std::min(k_targets, l_paths));
  if (std::abs(o_exact - std::clamp(o_exact, 0.0, hi)) > 1e-9)
    throw ConfigError(
        "make_cdl_like_scene: requested overlap infeasible for (k, l)");

  std::vector<char> used(m, 0);
  const std::vector<int> comm_idx = place_bursts(m, l_paths, used, rng);

  // Shared indices: whole comm clusters first, then a contiguous chunk of one
  // more, so the radar support stays bursty.
  std::vector<std::vector<int>> comm_runs = runs_of(comm_idx);
  std::shuffle(comm_runs.begin(), comm_runs.end(), rng);
  std::vector<int> shared;
  for (const auto& run : comm_runs) {
    if (static_cast<int>(shared.size()) >= o) break;
    const int need = o - static_cast<int>(shared.size());
    if (static_cast<int>(run.size()) <= need) {
      shared.insert(shared.end(), run.begin(), run.end());
    } else {
      shared.insert(shared.end(), run.begin(), run.begin() + need);
    }
  }

  std::vector<int> radar_idx = shared;
  const int fresh = k_targets - o;
  if (fresh == 1) {
    // Try to extend an existing radar run by one adjacent slot instead of
    // creating a singleton cluster.
    bool extended = false;
    for (const auto& run : runs_of(radar_idx)) {
      const int lo = run.front() - 1, hi2 = run.back() + 1;
      if (lo >= 0 && !used[lo]) {
        used[lo] = 1;
        radar_idx.push_back(lo);
        extended = true;
        break;
      }
      if (hi2 < m && !used[hi2]) {
        used[hi2] = 1;
        radar_idx.push_back(hi2);
        extended = true;
        break;
      }
    }
    if (!extended) {
      const auto extra = place_bursts(m, 1, used, rng);
      radar_idx.insert(radar_idx.end(), extra.begin(), extra.end());
    }
  } else if (fresh > 0) {
    const auto extra = place_bursts(m, fresh, used, rng);
    radar_idx.insert(radar_idx.end(), extra.begin(), extra.end());
  }

  SupportTriple sup;
  sup.s.setZero(m);
  sup.s_r.setZero(m);
  sup.s_c.setZero(m);
  for (int i : comm_idx) sup.s_c(i) = 1;
  for (int i : radar_idx) sup.s_r(i) = 1;
  sup.s = (sup.s_r.array() + sup.s_c.array()).min(1);

  HmmParams gains;
  gains.var_r = gain_var_r;
  gains.var_c = gain_var_c;
  return sample_scene(gains, sup, AngularGrid::uniform(m), jitter, rng);
}

Channels synthesize_channels(const SceneTruth& scene) {
  Channels ch;
  ch.h_radar.setZero(scene.m, scene.m);
  ch.h_comm.setZero(scene.m);
  for (int i = 0; i < scene.m; ++i) {
    if (!scene.s(i)) continue;
    const CVec a = steering_vector(scene.theta(i), scene.m);
    if (scene.s_r(i)) ch.h_radar += scene.x_r(i) * (a * a.adjoint());
    if (scene.s_c(i)) ch.h_comm += scene.x_c(i) * a;
  }
  return ch;
}

}  // namespace isac
