#pragma once

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qkd/channel.hpp"
#include "qkd/math.hpp"

namespace qkd {

enum class RateVariant { koashi, gllp, ideal_single, no_decoy };

inline constexpr std::array<RateVariant, 4> kAllVariants = {
    RateVariant::koashi, RateVariant::gllp, RateVariant::ideal_single,
    RateVariant::no_decoy};

inline const char* variant_name(RateVariant v) {
  switch (v) {
    case RateVariant::koashi:
      return "koashi";
    case RateVariant::gllp:
      return "gllp";
    case RateVariant::ideal_single:
      return "ideal";
    case RateVariant::no_decoy:
      return "nodecoy";
  }
  return "unknown";
}

/// Error-correction inefficiency f(E) >= 1. Default is a constant; an
/// optional table of (qber, f) pairs is interpolated piecewise-linearly
/// with clamped ends.
struct EcModel {
  double constant = 1.22;
  std::vector<std::pair<double, double>> table;  // sorted by qber

  double at(double qber) const {
    if (table.empty()) {
      return constant;
    }
    if (qber <= table.front().first) {
      return std::max(1.0, table.front().second);
    }
    if (qber >= table.back().first) {
      return std::max(1.0, table.back().second);
    }
    for (std::size_t i = 1; i < table.size(); ++i) {
      if (qber <= table[i].first) {
        const auto& [x0, y0] = table[i - 1];
        const auto& [x1, y1] = table[i];
        const double w = (qber - x0) / (x1 - x0);
        return std::max(1.0, y0 + w * (y1 - y0));
      }
    }
    return std::max(1.0, table.back().second);
  }
};

struct RateInputs {
  double gain;             // Q, sifted gain per pulse
  double qber;             // E
  double vacuum_gain;      // Q^(0)
  double single_gain;      // Q^(1)
  double single_qber;      // e^(1)
  double ec_inefficiency;  // f(E)
  double multi_fraction = 0.0;  // tagged multiphoton fraction, no-decoy only

  void validate() const {
    detail::check_nonnegative(gain, "gain");
    detail::check_probability(qber, "qber");
    detail::check_nonnegative(vacuum_gain, "vacuum_gain");
    detail::check_nonnegative(single_gain, "single_gain");
    detail::check_probability(single_qber, "single_qber");
    detail::check_probability(multi_fraction, "multi_fraction");
    if (!(ec_inefficiency >= 1.0)) {
      throw std::invalid_argument("ec_inefficiency must be >= 1, got " +
                                  std::to_string(ec_inefficiency));
    }
    if (vacuum_gain + single_gain > gain * (1.0 + 1e-9) + 1e-300) {
      throw std::invalid_argument(
          "vacuum_gain + single_gain exceeds total gain");
    }
  }
};

/// Term-by-term decomposition of a key rate. The rate is always the signed
/// sum (-ec_cost + single_photon_term) + vacuum_credit, in that evaluation
/// order, so cross-variant identities survive at the last ulp.
struct RateBreakdown {
  RateVariant variant;
  double rate;                // G, bits per pulse; negative means no key
  double ec_cost;             // Q f(E) h(E)
  double vacuum_credit;       // Q^(0) term
  double single_photon_term;  // Q^(1) [1 - h(e^(1))]
  double entropy_h;           // H = 1 - q0 - q1 [1 - h(e1)]
};

namespace detail {

inline RateBreakdown rate_untagged(const RateInputs& in, bool with_vacuum,
                                   RateVariant variant) {
  in.validate();
  const double h_qber = binary_entropy(in.qber);
  const double h_single = binary_entropy(in.single_qber);

  RateBreakdown b;
  b.variant = variant;
  b.ec_cost = in.gain * in.ec_inefficiency * h_qber;
  b.vacuum_credit = with_vacuum ? in.vacuum_gain : 0.0;
  b.single_photon_term = in.single_gain * (1.0 - h_single);
  b.rate = (-b.ec_cost + b.single_photon_term) + b.vacuum_credit;
  if (in.gain > 0.0) {
    b.entropy_h = 1.0 - b.vacuum_credit / in.gain -
                  (in.single_gain / in.gain) * (1.0 - h_single);
  } else {
    b.entropy_h = 1.0;
  }
  return b;
}

}  // namespace detail

/// Threshold-detector rate with the vacuum credit:
/// G = -Q f(E) h(E) + Q^(0) + Q^(1) [1 - h(e^(1))].
inline RateBreakdown rate_koashi(const RateInputs& in) {
  return detail::rate_untagged(in, true, RateVariant::koashi);
}

/// GLLP rate: G = -Q f(E) h(E) + Q^(1) [1 - h(e^(1))].
inline RateBreakdown rate_gllp(const RateInputs& in) {
  return detail::rate_untagged(in, false, RateVariant::gllp);
}

/// Deterministic single-photon source: G = Q [1 - f(E) h(E) - h(E)].
inline RateBreakdown rate_ideal_single_photon(double gain, double qber,
                                              double ec_inefficiency) {
  detail::check_nonnegative(gain, "gain");
  detail::check_probability(qber, "qber");
  if (!(ec_inefficiency >= 1.0)) {
    throw std::invalid_argument("ec_inefficiency must be >= 1");
  }
  const double h_qber = binary_entropy(qber);
  RateBreakdown b;
  b.variant = RateVariant::ideal_single;
  b.ec_cost = gain * ec_inefficiency * h_qber;
  b.vacuum_credit = 0.0;
  b.single_photon_term = gain * (1.0 - h_qber);
  b.rate = (-b.ec_cost + b.single_photon_term) + b.vacuum_credit;
  b.entropy_h = h_qber;
  return b;
}

/// No-decoy baseline: every multiphoton emission is presumed detected and
/// tagged, so only the fraction 1 - multi_fraction is claimable:
/// G = Q { -f(E) h(E) + (1-D) [1 - h(E/(1-D))] }. With nothing claimable
/// (D >= 1 or E/(1-D) > 1) the rate collapses to -ec_cost.
inline RateBreakdown rate_no_decoy_baseline(const RateInputs& in) {
  in.validate();
  const double h_qber = binary_entropy(in.qber);
  const double delta = in.multi_fraction;

  RateBreakdown b;
  b.variant = RateVariant::no_decoy;
  b.ec_cost = in.gain * in.ec_inefficiency * h_qber;
  b.vacuum_credit = 0.0;
  b.single_photon_term = 0.0;
  b.entropy_h = 1.0;
  if (delta < 1.0) {
    const double scaled_qber = in.qber / (1.0 - delta);
    if (scaled_qber <= 1.0) {
      const double claim = (1.0 - delta) * (1.0 - binary_entropy(scaled_qber));
      b.single_photon_term = in.gain * claim;
      b.entropy_h = std::clamp(1.0 - claim, 0.0, 1.0);
    }
  }
  b.rate = (-b.ec_cost + b.single_photon_term) + b.vacuum_credit;
  return b;
}

/// Assemble RateInputs from the analytic channel model (oracle mode). The
/// tagged multiphoton fraction is the pessimistic P(n >= 2) / Q.
inline RateInputs make_rate_inputs(const YieldTable& t, const EcModel& ec) {
  RateInputs in;
  in.gain = t.total_gain;
  in.qber = t.total_qber;
  in.vacuum_gain = t.gains.at(0);
  in.single_gain = t.gains.at(1);
  in.single_qber = t.qbers.at(1);
  in.ec_inefficiency = ec.at(in.qber);
  const double multi =
      1.0 - poisson_pmf(t.mu, 0) - poisson_pmf(t.mu, 1);
  in.multi_fraction =
      t.total_gain > 0.0 ? std::clamp(multi / t.total_gain, 0.0, 1.0) : 0.0;
  return in;
}

}  // namespace qkd
