#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qkd/channel.hpp"
#include "qkd/config.hpp"
#include "qkd/decoy.hpp"
#include "qkd/rates.hpp"

namespace qkd {

struct OptimizerSettings {
  double mu_lo = 1e-5;
  double mu_hi = 2.0;
  int grid_points = 32;   // log-spaced scan selecting the golden bracket
  double mu_tol = 1e-4;   // absolute convergence tolerance in mu
};

struct VariantEval {
  RateInputs inputs;
  RateBreakdown breakdown;
};

/// Evaluate one rate variant at fixed length and intensity. In decoy mode
/// the koashi/gllp vacuum and single-photon inputs come from the
/// vacuum + weak bounds on noiseless measurements at (mu, nu, 0).
inline VariantEval evaluate_variant(const DeviceConfig& config,
                                    double length_km, double mu,
                                    RateVariant variant) {
  const LinkParams link = config.link(length_km);
  const DetectorParams det = config.detector();
  const EcModel ec = config.ec_model();

  if (variant == RateVariant::ideal_single) {
    const double eta = transmittance(link, det);
    const double d = combined_dark(det.dark0, det.dark1);
    const double gain = config.sift_factor * yield_n(eta, d, 1);
    const double qber = error_n(eta, d, link.e_mis, 1);
    VariantEval ev;
    ev.inputs = {gain, qber, 0.0, gain, qber, ec.at(qber), 0.0};
    ev.breakdown =
        rate_ideal_single_photon(gain, qber, ev.inputs.ec_inefficiency);
    return ev;
  }

  const YieldTable table =
      build_yield_table(config.source(mu), link, det);
  VariantEval ev;
  ev.inputs = make_rate_inputs(table, ec);

  const bool untagged =
      variant == RateVariant::koashi || variant == RateVariant::gllp;
  if (untagged && config.mode == EstimationMode::decoy) {
    const auto meas = analytic_measurements({mu, config.decoy_nu, 0.0},
                                            config.sift_factor, link, det);
    const DecoyEstimate est =
        estimate_vacuum_weak(meas[0], meas[1], meas[2], config.sift_factor);
    ev.inputs.vacuum_gain = est.vacuum_gain;
    ev.inputs.single_gain = est.single_gain_lower;
    ev.inputs.single_qber = est.single_qber_upper;
  }

  switch (variant) {
    case RateVariant::koashi:
      ev.breakdown = rate_koashi(ev.inputs);
      break;
    case RateVariant::gllp:
      ev.breakdown = rate_gllp(ev.inputs);
      break;
    case RateVariant::no_decoy:
      ev.breakdown = rate_no_decoy_baseline(ev.inputs);
      break;
    case RateVariant::ideal_single:
      break;  // handled above
  }
  return ev;
}

struct OptimizeResult {
  double mu_opt;
  RateBreakdown breakdown;
  bool positive;  // false: no positive rate anywhere in the bracket
};

/// Maximize the key rate over the source intensity: a log-spaced grid scan
/// picks the bracket (guarding against non-unimodal rates), golden-section
/// search refines it. The best evaluation ever seen is returned, so the
/// result is never worse than the grid optimum. The ideal single-photon
/// source has no intensity; its mu_opt is reported as 1 (the deterministic
/// photon number).
inline OptimizeResult optimize_mu(const DeviceConfig& config, double length_km,
                                  RateVariant variant,
                                  const OptimizerSettings& settings = {}) {
  if (variant == RateVariant::ideal_single) {
    const VariantEval ev =
        evaluate_variant(config, length_km, 1.0, variant);
    return {1.0, ev.breakdown, ev.breakdown.rate > 0.0};
  }

  double lo = settings.mu_lo;
  const double hi = settings.mu_hi;
  const bool untagged =
      variant == RateVariant::koashi || variant == RateVariant::gllp;
  if (untagged && config.mode == EstimationMode::decoy) {
    // The vacuum + weak estimator needs nu < mu.
    lo = std::max(lo, config.decoy_nu * (1.0 + 1e-9));
  }
  if (!(lo < hi) || settings.grid_points < 2) {
    throw std::invalid_argument("optimize_mu: invalid bracket or grid");
  }

  double best_mu = lo;
  RateBreakdown best_bd{};
  double best_rate = -std::numeric_limits<double>::infinity();
  auto eval = [&](double mu) {
    const VariantEval ev = evaluate_variant(config, length_km, mu, variant);
    if (ev.breakdown.rate > best_rate) {
      best_rate = ev.breakdown.rate;
      best_mu = mu;
      best_bd = ev.breakdown;
    }
    return ev.breakdown.rate;
  };

  const int g = settings.grid_points;
  std::vector<double> grid(g);
  const double ratio = hi / lo;
  int best_idx = 0;
  double best_grid_rate = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < g; ++i) {
    grid[i] = lo * std::pow(ratio, static_cast<double>(i) / (g - 1));
    const double r = eval(grid[i]);
    if (r > best_grid_rate) {
      best_grid_rate = r;
      best_idx = i;
    }
  }

  double a = grid[std::max(0, best_idx - 1)];
  double b = grid[std::min(g - 1, best_idx + 1)];
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - (b - a) * kInvPhi;
  double d = a + (b - a) * kInvPhi;
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > settings.mu_tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - (b - a) * kInvPhi;
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + (b - a) * kInvPhi;
      fd = eval(d);
    }
  }
  eval(0.5 * (a + b));

  return {best_mu, best_bd, best_rate > 0.0};
}

struct SweepPoint {
  double length_km;
  std::array<OptimizeResult, 4> by_variant;  // indexed as kAllVariants

  const OptimizeResult& at(RateVariant v) const {
    return by_variant[static_cast<std::size_t>(v)];
  }
};

struct CurveResult {
  std::vector<SweepPoint> points;
  // Largest swept length with a positive optimized rate, per variant.
  std::array<std::optional<double>, 4> max_distance_km;

  std::optional<double> max_distance(RateVariant v) const {
    return max_distance_km[static_cast<std::size_t>(v)];
  }
};

/// Optimize every variant independently at each length (ascending order
/// required) and record where each curve stays positive.
inline CurveResult distance_sweep(const DeviceConfig& config,
                                  const std::vector<double>& lengths,
                                  const OptimizerSettings& settings = {}) {
  if (!std::is_sorted(lengths.begin(), lengths.end())) {
    throw std::invalid_argument("distance_sweep: lengths must be ascending");
  }
  CurveResult curve;
  curve.points.reserve(lengths.size());
  for (double length : lengths) {
    SweepPoint point;
    point.length_km = length;
    for (std::size_t i = 0; i < kAllVariants.size(); ++i) {
      point.by_variant[i] =
          optimize_mu(config, length, kAllVariants[i], settings);
      if (point.by_variant[i].breakdown.rate > 0.0) {
        curve.max_distance_km[i] = length;
      }
    }
    curve.points.push_back(std::move(point));
  }
  return curve;
}

/// Bisect the optimized rate's sign change to tol_km. Requires a valid
/// bracket: positive rate at lo_km, non-positive at hi_km. Returns the
/// largest length known to have a positive rate.
inline double find_max_distance(const DeviceConfig& config,
                                RateVariant variant, double lo_km,
                                double hi_km, double tol_km = 0.1,
                                const OptimizerSettings& settings = {}) {
  auto rate_at = [&](double length) {
    return optimize_mu(config, length, variant, settings).breakdown.rate;
  };
  if (!(rate_at(lo_km) > 0.0)) {
    throw std::invalid_argument(
        "find_max_distance: rate not positive at bracket start");
  }
  if (rate_at(hi_km) > 0.0) {
    throw std::invalid_argument(
        "find_max_distance: rate still positive at bracket end");
  }
  while (hi_km - lo_km > tol_km) {
    const double mid = 0.5 * (lo_km + hi_km);
    (rate_at(mid) > 0.0 ? lo_km : hi_km) = mid;
  }
  return lo_km;
}

}  // namespace qkd
