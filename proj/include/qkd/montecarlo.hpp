#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qkd/channel.hpp"
#include "qkd/config.hpp"
#include "qkd/decoy.hpp"
#include "qkd/rng.hpp"

namespace qkd {

enum class PulseResult : std::uint8_t { failure, bit0, bit1 };

struct PulseOutcome {
  unsigned n_emitted;
  std::uint8_t alice_basis;  // 0 = Z, 1 = X
  std::uint8_t alice_bit;
  std::uint8_t bob_basis;
  PulseResult result;
  bool double_click;  // false whenever result == failure
};

/// Exact Poisson sampler by CDF inversion. Means above kMaxDirect are split
/// additively (Poisson(a+b) = Poisson(a) + Poisson(b)) so the sequential
/// search never runs on a mean where exp(-mu) underflows.
class PoissonSampler {
 public:
  explicit PoissonSampler(double mu) {
    if (!(mu >= 0.0)) {
      throw std::invalid_argument("PoissonSampler: mean must be >= 0");
    }
    splits_ = mu > kMaxDirect
                  ? static_cast<unsigned>(std::ceil(mu / kMaxDirect))
                  : 1;
    mu_part_ = mu / splits_;
    exp_neg_ = std::exp(-mu_part_);
  }

  unsigned operator()(Xoshiro256StarStar& rng) const {
    unsigned total = 0;
    for (unsigned s = 0; s < splits_; ++s) {
      const double u = rng.uniform();
      double term = exp_neg_;
      double cum = term;
      unsigned k = 0;
      while (u > cum && k < kSearchCap) {
        ++k;
        term *= mu_part_ / k;
        cum += term;
      }
      total += k;
    }
    return total;
  }

 private:
  static constexpr double kMaxDirect = 32.0;
  static constexpr unsigned kSearchCap = 512;

  unsigned splits_;
  double mu_part_;
  double exp_neg_;
};

/// Per-pulse event model: photon number, bases, per-photon survival and
/// routing, dark counts, threshold click pattern.
struct PulseModel {
  double eta;    // channel loss and detector efficiency folded together
  double dark0;
  double dark1;
  double e_mis;  // per-photon misrouting probability when bases match
  PoissonSampler photon_count;

  static PulseModel from(const DeviceConfig& config) {
    return PulseModel{transmittance(config.link(), config.detector()),
                      config.dark0, config.dark1, config.e_mis,
                      PoissonSampler(config.mu)};
  }
};

inline PulseOutcome simulate_pulse(const PulseModel& m,
                                   Xoshiro256StarStar& rng) {
  PulseOutcome out;
  const std::uint64_t bits = rng.next();
  out.alice_basis = static_cast<std::uint8_t>(bits & 1);
  out.alice_bit = static_cast<std::uint8_t>((bits >> 1) & 1);
  out.bob_basis = static_cast<std::uint8_t>((bits >> 2) & 1);
  out.n_emitted = m.photon_count(rng);
  out.double_click = false;

  const bool matched = out.alice_basis == out.bob_basis;
  bool click0 = false;
  bool click1 = false;
  for (unsigned i = 0; i < out.n_emitted; ++i) {
    if (!rng.bernoulli(m.eta)) {
      continue;
    }
    bool to_detector1;
    if (matched) {
      const bool misrouted = rng.bernoulli(m.e_mis);
      to_detector1 = misrouted ? out.alice_bit == 0 : out.alice_bit == 1;
    } else {
      to_detector1 = rng.bit();
    }
    (to_detector1 ? click1 : click0) = true;
  }
  if (rng.bernoulli(m.dark0)) click0 = true;
  if (rng.bernoulli(m.dark1)) click1 = true;

  if (!click0 && !click1) {
    out.result = PulseResult::failure;
  } else if (click0 && click1) {
    out.double_click = true;
    out.result = rng.bit() ? PulseResult::bit1 : PulseResult::bit0;
  } else {
    out.result = click1 ? PulseResult::bit1 : PulseResult::bit0;
  }
  return out;
}

struct PhotonNumberTally {
  std::uint64_t detections = 0;
  std::uint64_t errors = 0;
  std::uint64_t double_clicks = 0;

  PhotonNumberTally& operator+=(const PhotonNumberTally& o) {
    detections += o.detections;
    errors += o.errors;
    double_clicks += o.double_clicks;
    return *this;
  }
  bool operator==(const PhotonNumberTally&) const = default;
};

/// Photon numbers above this are lumped into the last per_n slot.
inline constexpr unsigned kTallyPhotonCap = 8;

struct TallyReport {
  std::uint64_t pulses = 0;
  std::uint64_t detected = 0;  // any basis
  std::uint64_t double_clicks = 0;
  std::uint64_t sifted_detections = 0;
  std::uint64_t sifted_errors = 0;
  std::uint64_t sifted_double_clicks = 0;
  std::array<std::uint64_t, 2> sifted_by_basis{};         // [Z, X]
  std::array<std::uint64_t, 2> sifted_errors_by_basis{};  // [Z, X]
  // Sifted events by emitted photon number; index kTallyPhotonCap + 1
  // aggregates everything above the cap.
  std::array<PhotonNumberTally, kTallyPhotonCap + 2> per_n{};

  double gain() const {
    return pulses ? static_cast<double>(sifted_detections) / pulses : 0.0;
  }
  double qber() const {
    return sifted_detections ? static_cast<double>(sifted_errors) /
                                   sifted_detections
                             : 0.5;
  }
  double gain_n(unsigned n) const {
    return pulses ? static_cast<double>(per_n.at(n).detections) / pulses : 0.0;
  }
  double qber_n(unsigned n) const {
    const auto& slot = per_n.at(n);
    return slot.detections
               ? static_cast<double>(slot.errors) / slot.detections
               : 0.5;
  }
  double gain_standard_error() const {
    if (pulses == 0) return 0.0;
    const double q = gain();
    return std::sqrt(q * (1.0 - q) / static_cast<double>(pulses));
  }
  double qber_standard_error() const {
    if (sifted_detections == 0) return 0.0;
    const double e = qber();
    return std::sqrt(e * (1.0 - e) /
                     static_cast<double>(sifted_detections));
  }

  TallyReport& operator+=(const TallyReport& o) {
    pulses += o.pulses;
    detected += o.detected;
    double_clicks += o.double_clicks;
    sifted_detections += o.sifted_detections;
    sifted_errors += o.sifted_errors;
    sifted_double_clicks += o.sifted_double_clicks;
    for (std::size_t i = 0; i < 2; ++i) {
      sifted_by_basis[i] += o.sifted_by_basis[i];
      sifted_errors_by_basis[i] += o.sifted_errors_by_basis[i];
    }
    for (std::size_t i = 0; i < per_n.size(); ++i) {
      per_n[i] += o.per_n[i];
    }
    return *this;
  }
  bool operator==(const TallyReport&) const = default;
};

namespace detail {

inline void tally_pulse(TallyReport& t, const PulseOutcome& out) {
  ++t.pulses;
  if (out.result == PulseResult::failure) {
    return;
  }
  ++t.detected;
  if (out.double_click) {
    ++t.double_clicks;
  }
  if (out.alice_basis != out.bob_basis) {
    return;
  }
  ++t.sifted_detections;
  ++t.sifted_by_basis[out.alice_basis];
  if (out.double_click) {
    ++t.sifted_double_clicks;
  }
  const std::uint8_t bob_bit =
      out.result == PulseResult::bit1 ? 1 : 0;
  const bool error = bob_bit != out.alice_bit;
  if (error) {
    ++t.sifted_errors;
    ++t.sifted_errors_by_basis[out.alice_basis];
  }
  const unsigned slot =
      out.n_emitted <= kTallyPhotonCap ? out.n_emitted : kTallyPhotonCap + 1;
  auto& pn = t.per_n[slot];
  ++pn.detections;
  if (error) ++pn.errors;
  if (out.double_click) ++pn.double_clicks;
}

inline TallyReport run_shard(const PulseModel& model, std::uint64_t pulses,
                             std::uint64_t shard_seed) {
  Xoshiro256StarStar rng(shard_seed);
  TallyReport t;
  for (std::uint64_t i = 0; i < pulses; ++i) {
    tally_pulse(t, simulate_pulse(model, rng));
  }
  return t;
}

}  // namespace detail

/// Pulses per shard. Fixed so results depend only on (config, n_pulses,
/// seed), never on how many workers execute the shards.
inline constexpr std::uint64_t kShardPulses = 1u << 20;

/// Seeded pulse-level simulation of the whole source -> fiber -> receiver
/// chain. Shards run concurrently on substreams derive_stream(seed, shard)
/// and tallies merge in shard order, so output is bit-reproducible.
inline TallyReport simulate_run(const DeviceConfig& config,
                                std::uint64_t n_pulses, std::uint64_t seed) {
  if (n_pulses == 0) {
    throw std::invalid_argument("simulate_run: n_pulses must be >= 1");
  }
  if (n_pulses > config.max_pulses) {
    throw ResourceError("simulate_run: n_pulses " + std::to_string(n_pulses) +
                        " exceeds configured max_pulses " +
                        std::to_string(config.max_pulses));
  }
  config.validate();
  const PulseModel model = PulseModel::from(config);

  const std::uint64_t n_shards = (n_pulses + kShardPulses - 1) / kShardPulses;
  std::vector<TallyReport> parts(n_shards);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (std::uint64_t i = next.fetch_add(1); i < n_shards;
         i = next.fetch_add(1)) {
      const std::uint64_t begin = i * kShardPulses;
      const std::uint64_t count = std::min(kShardPulses, n_pulses - begin);
      parts[i] = detail::run_shard(model, count, derive_stream(seed, i));
    }
  };

  unsigned n_workers = std::thread::hardware_concurrency();
  if (n_workers == 0) n_workers = 1;
  n_workers = static_cast<unsigned>(
      std::min<std::uint64_t>(n_workers, n_shards));
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (unsigned w = 0; w < n_workers; ++w) {
    pool.emplace_back(worker);
  }
  for (auto& th : pool) {
    th.join();
  }

  TallyReport total;
  for (const auto& part : parts) {
    total += part;
  }
  return total;
}

/// One simulated decoy session: each intensity runs on its own substream of
/// the master seed, so sessions are reproducible and intensities
/// statistically independent.
inline std::vector<IntensityMeasurement> simulate_decoy_session(
    const DeviceConfig& config, const std::vector<double>& intensities,
    std::uint64_t pulses_per_intensity, std::uint64_t seed) {
  if (intensities.empty()) {
    throw std::invalid_argument("simulate_decoy_session: no intensities");
  }
  for (double mu : intensities) {
    if (!(mu >= 0.0)) {
      throw std::invalid_argument(
          "simulate_decoy_session: intensities must be >= 0");
    }
  }
  std::vector<IntensityMeasurement> out;
  out.reserve(intensities.size());
  for (std::size_t k = 0; k < intensities.size(); ++k) {
    DeviceConfig c = config;
    c.mu = intensities[k];
    const TallyReport t =
        simulate_run(c, pulses_per_intensity, derive_stream(seed, k));
    out.push_back({intensities[k], t.gain(), t.qber()});
  }
  return out;
}

/// One compared quantity: observed frequency vs the analytic model, with
/// the binomial sigma of the null hypothesis.
struct Deviation {
  std::string name;
  double observed = 0.0;
  double expected = 0.0;
  double sigma = 0.0;
  double z = 0.0;
  bool checked = true;  // false when no statistic exists (zero events)
  bool ok = true;
};

struct DeviationReport {
  std::vector<Deviation> entries;
  double sigma_threshold = 4.0;
  bool insufficient = false;
  bool pass = false;
};

namespace detail {

inline Deviation binomial_deviation(std::string name, std::uint64_t count,
                                    std::uint64_t trials, double expected,
                                    double threshold) {
  Deviation dev;
  dev.name = std::move(name);
  dev.expected = expected;
  dev.observed = trials ? static_cast<double>(count) / trials : 0.0;
  dev.sigma =
      std::sqrt(expected * (1.0 - expected) / static_cast<double>(trials));
  if (dev.sigma == 0.0) {
    dev.z = dev.observed == expected
                ? 0.0
                : std::numeric_limits<double>::infinity();
  } else {
    dev.z = (dev.observed - expected) / dev.sigma;
  }
  dev.ok = std::abs(dev.z) <= threshold;
  return dev;
}

}  // namespace detail

/// z-scores of Q, E and the n <= 3 per-photon-number quantities against the
/// analytic table, pass/fail at sigma_threshold. Quantities with no events
/// are reported unchecked rather than failed.
inline DeviationReport compare_to_analytic(const TallyReport& tally,
                                           const YieldTable& table,
                                           double sigma_threshold = 4.0) {
  DeviationReport report;
  report.sigma_threshold = sigma_threshold;
  if (tally.pulses == 0) {
    report.insufficient = true;
    return report;
  }

  report.entries.push_back(detail::binomial_deviation(
      "Q", tally.sifted_detections, tally.pulses, table.total_gain,
      sigma_threshold));
  if (tally.sifted_detections > 0) {
    report.entries.push_back(detail::binomial_deviation(
        "E", tally.sifted_errors, tally.sifted_detections, table.total_qber,
        sigma_threshold));
  } else {
    report.insufficient = true;
  }

  const unsigned n_top = std::min<unsigned>(3, table.n_max);
  for (unsigned n = 0; n <= n_top; ++n) {
    report.entries.push_back(detail::binomial_deviation(
        "Q" + std::to_string(n), tally.per_n[n].detections, tally.pulses,
        table.gains[n], sigma_threshold));
    if (tally.per_n[n].detections > 0) {
      report.entries.push_back(detail::binomial_deviation(
          "e" + std::to_string(n), tally.per_n[n].errors,
          tally.per_n[n].detections, table.qbers[n], sigma_threshold));
    } else {
      Deviation dev;
      dev.name = "e" + std::to_string(n);
      dev.expected = table.qbers[n];
      dev.checked = false;
      report.entries.push_back(dev);
    }
  }

  if (report.insufficient) {
    report.pass = false;
    return report;
  }
  report.pass = true;
  for (const auto& dev : report.entries) {
    if (dev.checked && !dev.ok) {
      report.pass = false;
    }
  }
  return report;
}

}  // namespace qkd
