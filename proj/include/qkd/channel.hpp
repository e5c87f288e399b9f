#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/math.hpp"

namespace qkd {

namespace detail {

inline void check_probability(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument(std::string(name) +
                                " must lie in [0,1], got " +
                                std::to_string(value));
  }
}

inline void check_nonnegative(double value, const char* name) {
  if (!(value >= 0.0)) {
    throw std::invalid_argument(std::string(name) + " must be >= 0, got " +
                                std::to_string(value));
  }
}

}  // namespace detail

/// Receiver: two threshold detectors of equal efficiency behind a
/// polarizing beam splitter, each with its own per-gate dark probability.
struct DetectorParams {
  double eta_d;
  double dark0;
  double dark1;

  void validate() const {
    detail::check_probability(eta_d, "eta_d");
    detail::check_probability(dark0, "dark0");
    detail::check_probability(dark1, "dark1");
  }
};

struct LinkParams {
  double alpha_db_per_km;
  double length_km;
  double e_mis;  // distance-independent misalignment error

  void validate() const {
    detail::check_nonnegative(alpha_db_per_km, "alpha_db_per_km");
    detail::check_nonnegative(length_km, "length_km");
    detail::check_probability(e_mis, "e_mis");
    if (e_mis > 0.5) {
      throw std::invalid_argument("e_mis must be <= 0.5, got " +
                                  std::to_string(e_mis));
    }
  }
};

struct SourceParams {
  double mu;                 // mean photon number of the phase-randomized pulse
  double sift_factor = 0.5;  // probability a pulse's basis pair is kept

  void validate() const {
    detail::check_nonnegative(mu, "mu");
    detail::check_probability(sift_factor, "sift_factor");
  }
};

/// Probability that at least one of the two detectors fires from dark
/// counts alone: d = d0 + d1 - d0*d1.
inline double combined_dark(double dark0, double dark1) {
  detail::check_probability(dark0, "dark0");
  detail::check_probability(dark1, "dark1");
  return dark0 + dark1 - dark0 * dark1;
}

/// Symmetric per-detector split of a combined dark probability,
/// 1 - sqrt(1-d) in the cancellation-free form d / (1 + sqrt(1-d)).
inline double split_dark_symmetric(double total) {
  detail::check_probability(total, "total dark probability");
  return total / (1.0 + std::sqrt(1.0 - total));
}

/// Overall transmittance fiber + detector: eta_d * 10^(-alpha L / 10).
inline double transmittance(const LinkParams& link, const DetectorParams& det) {
  link.validate();
  det.validate();
  return det.eta_d *
         std::pow(10.0, -link.alpha_db_per_km * link.length_km / 10.0);
}

/// Probability that at least one of n photons survives independent
/// Bernoulli(eta) transmission. Returns exactly 0 for n = 0.
inline double signal_fraction(double eta, unsigned n) {
  if (n == 0 || eta == 0.0) {
    return 0.0;
  }
  if (eta >= 1.0) {
    return 1.0;
  }
  return -std::expm1(static_cast<double>(n) * std::log1p(-eta));
}

/// Yield of an n-photon pulse behind loss eta and combined dark d:
/// Y_n = 1 - (1-d)(1-eta)^n, written as d + (1-d) s_n so Y_0 == d exactly
/// and monotonicity in n is preserved under rounding.
inline double yield_n(double eta, double d, unsigned n) {
  detail::check_probability(eta, "eta");
  detail::check_probability(d, "d");
  return d + (1.0 - d) * signal_fraction(eta, n);
}

/// QBER of detected n-photon events. Dark-only clicks carry a random bit
/// (rate 1/2), signal clicks err with the misalignment probability;
/// second-order cross terms (simultaneous dark + signal, multiphoton
/// double clicks) are neglected and covered by the Monte Carlo agreement
/// checks. Convention: 1/2 when Y_n = 0 (the value is never weighted).
inline double error_n(double eta, double d, double e_mis, unsigned n) {
  detail::check_probability(eta, "eta");
  detail::check_probability(d, "d");
  detail::check_probability(e_mis, "e_mis");
  const double s = signal_fraction(eta, n);
  const double y = d + (1.0 - d) * s;
  if (y == 0.0) {
    return 0.5;
  }
  return (0.5 * d * (1.0 - s) + e_mis * s) / y;
}

/// Photon-number-resolved gains and error rates, truncated where the
/// Poisson tail drops below kTailBudget; the tail is lumped into the gain
/// as fully detected multiphoton contribution with QBER 1/2.
struct YieldTable {
  double mu = 0.0;
  double sift_factor = 0.5;
  unsigned n_max = 0;
  std::vector<double> yields;  // Y_n
  std::vector<double> gains;   // Q_n = sift * pmf(mu,n) * Y_n
  std::vector<double> qbers;   // e_n
  double tail_gain = 0.0;
  double total_gain = 0.0;  // Q
  double total_qber = 0.5;  // E
};

inline constexpr double kTailBudget = 1e-12;
inline constexpr unsigned kMinTruncation = 4;
inline constexpr unsigned kMaxTruncation = 256;

inline unsigned pick_truncation(double mu) {
  unsigned n = kMinTruncation;
  while (poisson_tail(mu, n) >= kTailBudget && n < kMaxTruncation) {
    ++n;
  }
  return n;
}

inline YieldTable build_yield_table(const SourceParams& src,
                                    const LinkParams& link,
                                    const DetectorParams& det) {
  src.validate();
  const double eta = transmittance(link, det);
  const double d = combined_dark(det.dark0, det.dark1);

  YieldTable t;
  t.mu = src.mu;
  t.sift_factor = src.sift_factor;
  t.n_max = pick_truncation(src.mu);
  t.yields.resize(t.n_max + 1);
  t.gains.resize(t.n_max + 1);
  t.qbers.resize(t.n_max + 1);
  t.tail_gain = src.sift_factor * poisson_tail(src.mu, t.n_max);

  double gain = t.tail_gain;
  double weighted_error = 0.5 * t.tail_gain;
  for (unsigned n = 0; n <= t.n_max; ++n) {
    t.yields[n] = yield_n(eta, d, n);
    t.gains[n] = src.sift_factor * poisson_pmf(src.mu, n) * t.yields[n];
    t.qbers[n] = error_n(eta, d, link.e_mis, n);
    gain += t.gains[n];
    weighted_error += t.gains[n] * t.qbers[n];
  }
  t.total_gain = gain;
  t.total_qber = gain > 0.0 ? weighted_error / gain : 0.5;
  return t;
}

}  // namespace qkd
