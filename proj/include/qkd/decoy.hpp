#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/channel.hpp"

namespace qkd {

/// One decoy measurement: sifted gain and QBER observed at intensity mu.
struct IntensityMeasurement {
  double mu;
  double gain;  // Q_mu
  double qber;  // E_mu
};

/// Bounds on the vacuum and single-photon contributions derived from the
/// vacuum + one weak decoy scheme.
struct DecoyEstimate {
  double vacuum_yield = 0.0;        // Y_0, measured directly
  double single_yield_lower = 0.0;  // lower bound on Y_1
  double vacuum_gain = 0.0;         // Q^(0) at the signal intensity
  double single_gain_lower = 0.0;   // lower bound on Q^(1)
  double single_qber_upper = 0.5;   // upper bound on e^(1)
  bool vacuous = false;             // a clamp fired; bounds carry no content
};

/// Vacuum + weak decoy estimation (three intensities: signal mu, weak nu,
/// vacuum). Requires 0 < nu < mu and an exact-vacuum third measurement.
/// Gains are converted to per-pulse yields by dividing out the sift factor;
/// the vacuum error rate is fixed at 1/2 (dark counts carry random bits).
inline DecoyEstimate estimate_vacuum_weak(const IntensityMeasurement& signal,
                                          const IntensityMeasurement& weak,
                                          const IntensityMeasurement& vacuum,
                                          double sift_factor) {
  const double mu = signal.mu;
  const double nu = weak.mu;
  if (!(nu > 0.0) || !(nu < mu)) {
    throw std::invalid_argument(
        "estimate_vacuum_weak: requires 0 < nu < mu, got nu=" +
        std::to_string(nu) + " mu=" + std::to_string(mu));
  }
  if (vacuum.mu != 0.0) {
    throw std::invalid_argument(
        "estimate_vacuum_weak: vacuum measurement must have mu = 0");
  }
  if (!(sift_factor > 0.0 && sift_factor <= 1.0)) {
    throw std::invalid_argument("sift_factor must lie in (0,1]");
  }

  DecoyEstimate est;
  est.vacuum_yield = vacuum.gain / sift_factor;

  const double q_signal = signal.gain * std::exp(mu) / sift_factor;
  const double q_weak = weak.gain * std::exp(nu) / sift_factor;
  const double raw =
      (mu / (mu * nu - nu * nu)) *
      (q_weak - (nu * nu / (mu * mu)) * q_signal -
       ((mu * mu - nu * nu) / (mu * mu)) * est.vacuum_yield);

  if (raw > 0.0) {
    est.single_yield_lower = raw;
    const double err_upper =
        (weak.qber * q_weak - 0.5 * est.vacuum_yield) /
        (est.single_yield_lower * nu);
    if (err_upper < 0.5) {
      est.single_qber_upper = std::max(0.0, err_upper);
    } else {
      est.single_qber_upper = 0.5;
      est.vacuous = true;
    }
  } else {
    est.single_yield_lower = 0.0;
    est.single_qber_upper = 0.5;
    est.vacuous = true;
  }

  est.vacuum_gain = sift_factor * std::exp(-mu) * est.vacuum_yield;
  est.single_gain_lower =
      sift_factor * mu * std::exp(-mu) * est.single_yield_lower;
  return est;
}

/// Noiseless measurements straight from the analytic channel model, one per
/// intensity (infinite-statistics limit).
inline std::vector<IntensityMeasurement> analytic_measurements(
    const std::vector<double>& intensities, double sift_factor,
    const LinkParams& link, const DetectorParams& det) {
  std::vector<IntensityMeasurement> out;
  out.reserve(intensities.size());
  for (double mu : intensities) {
    const YieldTable t = build_yield_table({mu, sift_factor}, link, det);
    out.push_back({mu, t.total_gain, t.total_qber});
  }
  return out;
}

/// Result of checking one-sidedness of the decoy bounds against the true
/// per-photon-number table. Slack is relative to the true value.
struct BracketReport {
  bool single_yield_ok = false;
  bool single_qber_ok = false;
  bool single_gain_ok = false;
  double single_yield_slack = 0.0;  // (Y1 - Y1_lower) / Y1
  double single_qber_slack = 0.0;   // (e1_upper - e1) / e1
  double single_gain_slack = 0.0;   // (Q1 - Q1_lower) / Q1
  bool pass = false;
};

inline BracketReport bounds_bracket_check(const DecoyEstimate& est,
                                          const YieldTable& truth) {
  const double y1 = truth.yields.at(1);
  const double e1 = truth.qbers.at(1);
  const double q1 = truth.gains.at(1);

  BracketReport r;
  r.single_yield_ok = est.single_yield_lower <= y1;
  r.single_qber_ok = est.single_qber_upper >= e1;
  r.single_gain_ok = est.single_gain_lower <= q1;
  r.single_yield_slack = y1 > 0.0 ? (y1 - est.single_yield_lower) / y1 : 0.0;
  r.single_qber_slack = e1 > 0.0 ? (est.single_qber_upper - e1) / e1 : 0.0;
  r.single_gain_slack = q1 > 0.0 ? (q1 - est.single_gain_lower) / q1 : 0.0;
  r.pass = r.single_yield_ok && r.single_qber_ok && r.single_gain_ok;
  return r;
}

}  // namespace qkd
