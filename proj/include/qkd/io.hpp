#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qkd/config.hpp"
#include "qkd/montecarlo.hpp"
#include "qkd/rng.hpp"
#include "qkd/sweep.hpp"
#include "qkd/version.hpp"

namespace qkd {

using ordered_json = nlohmann::ordered_json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fixed-notation decimal string carrying 12 significant digits, with a
/// locale-independent decimal point. Used for every CSV number so reruns
/// are byte-identical.
inline std::string format_fixed12(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) value = 0.0;  // normalize -0

  int precision = 12;
  if (value != 0.0) {
    const int exponent =
        static_cast<int>(std::floor(std::log10(std::abs(value))));
    precision = std::clamp(11 - exponent, 0, 64);
  }
  char buf[128];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value,
                                 std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

// --- config JSON -----------------------------------------------------------

inline ordered_json config_to_json(const DeviceConfig& c) {
  ordered_json j;
  j["mu"] = c.mu;
  j["sift_factor"] = c.sift_factor;
  j["alpha_db_per_km"] = c.alpha_db_per_km;
  j["length_km"] = c.length_km;
  j["e_mis"] = c.e_mis;
  j["eta_d"] = c.eta_d;
  j["dark0"] = c.dark0;
  j["dark1"] = c.dark1;
  j["f_ec"] = c.ec_inefficiency;
  ordered_json table = ordered_json::array();
  for (const auto& [qber, f] : c.ec_table) {
    table.push_back(ordered_json::array({qber, f}));
  }
  j["f_ec_table"] = table;
  j["decoy_nu"] = c.decoy_nu;
  j["mode"] = mode_name(c.mode);
  j["seed"] = c.seed;
  j["pulses"] = c.pulses;
  j["pulses_per_intensity"] = c.pulses_per_intensity;
  j["max_pulses"] = c.max_pulses;
  j["sigma_threshold"] = c.sigma_threshold;
  return j;
}

namespace detail {

inline double as_number(const ordered_json& j, const std::string& key) {
  if (!j.is_number()) {
    throw ConfigError("config field '" + key + "' must be a number");
  }
  return j.get<double>();
}

inline std::uint64_t as_count(const ordered_json& j, const std::string& key) {
  if (!j.is_number_unsigned()) {
    throw ConfigError("config field '" + key +
                      "' must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

}  // namespace detail

/// Parse a flat config document. Unknown keys are errors: a typo in a
/// physics parameter must not silently fall back to a default.
inline DeviceConfig config_from_json(const ordered_json& j) {
  if (!j.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  DeviceConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "mu") {
      c.mu = detail::as_number(value, key);
    } else if (key == "sift_factor") {
      c.sift_factor = detail::as_number(value, key);
    } else if (key == "alpha_db_per_km") {
      c.alpha_db_per_km = detail::as_number(value, key);
    } else if (key == "length_km") {
      c.length_km = detail::as_number(value, key);
    } else if (key == "e_mis") {
      c.e_mis = detail::as_number(value, key);
    } else if (key == "eta_d") {
      c.eta_d = detail::as_number(value, key);
    } else if (key == "dark0") {
      c.dark0 = detail::as_number(value, key);
    } else if (key == "dark1") {
      c.dark1 = detail::as_number(value, key);
    } else if (key == "f_ec") {
      c.ec_inefficiency = detail::as_number(value, key);
    } else if (key == "f_ec_table") {
      if (!value.is_array()) {
        throw ConfigError("config field 'f_ec_table' must be an array");
      }
      c.ec_table.clear();
      for (const auto& entry : value) {
        if (!entry.is_array() || entry.size() != 2 ||
            !entry[0].is_number() || !entry[1].is_number()) {
          throw ConfigError(
              "config field 'f_ec_table' entries must be [qber, f] pairs");
        }
        c.ec_table.emplace_back(entry[0].get<double>(),
                                entry[1].get<double>());
      }
    } else if (key == "decoy_nu") {
      c.decoy_nu = detail::as_number(value, key);
    } else if (key == "mode") {
      if (!value.is_string()) {
        throw ConfigError("config field 'mode' must be a string");
      }
      c.mode = parse_mode(value.get<std::string>());
    } else if (key == "seed") {
      c.seed = detail::as_count(value, key);
    } else if (key == "pulses") {
      c.pulses = detail::as_count(value, key);
    } else if (key == "pulses_per_intensity") {
      c.pulses_per_intensity = detail::as_count(value, key);
    } else if (key == "max_pulses") {
      c.max_pulses = detail::as_count(value, key);
    } else if (key == "sigma_threshold") {
      c.sigma_threshold = detail::as_number(value, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

inline DeviceConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file: " + path);
  }
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open output file: " + path);
  }
  out << content;
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

// --- sweep CSV + metadata ----------------------------------------------------

inline constexpr const char* kSweepCsvHeader =
    "length_km,mu_opt_koashi,G_koashi,mu_opt_gllp,G_gllp,mu_opt_ideal,"
    "G_ideal,mu_opt_nodecoy,G_nodecoy";

/// Rows ascending in length; raw (unclamped) rates.
inline std::string sweep_csv(const CurveResult& curve) {
  std::ostringstream out;
  out << kSweepCsvHeader << "\n";
  for (const auto& point : curve.points) {
    out << format_fixed12(point.length_km);
    for (RateVariant v : kAllVariants) {
      const auto& res = point.at(v);
      out << "," << format_fixed12(res.mu_opt) << ","
          << format_fixed12(res.breakdown.rate);
    }
    out << "\n";
  }
  return out.str();
}

inline ordered_json conventions_json() {
  ordered_json j;
  j["rates_include_sift_factor"] = true;
  j["dark_counts"] =
      "defaults interpret the GYS dark figure as a combined two-detector "
      "probability d = 1.7e-6, split symmetrically per detector";
  j["no_decoy_baseline"] =
      "pessimistic tagged-multiphoton bound (all multiphoton emissions "
      "presumed detected and tagged), a stand-in rather than the exact ILM "
      "rate";
  j["negative_rates"] = "raw rates are reported unclamped; clamp at 0 when "
                        "plotting";
  return j;
}

inline ordered_json optimizer_json(const OptimizerSettings& s) {
  ordered_json j;
  j["mu_bracket"] = ordered_json::array({s.mu_lo, s.mu_hi});
  j["grid_points"] = s.grid_points;
  j["mu_tolerance"] = s.mu_tol;
  j["method"] = "log-spaced grid scan followed by golden-section search";
  return j;
}

inline ordered_json sweep_metadata(const DeviceConfig& config,
                                   const OptimizerSettings& settings,
                                   double l_min, double l_max, double step,
                                   const CurveResult& curve) {
  ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kVersion;
  j["command"] = "sweep";
  j["mode"] = mode_name(config.mode);
  j["range_km"] = ordered_json::array({l_min, l_max, step});
  j["config"] = config_to_json(config);
  j["optimizer"] = optimizer_json(settings);
  j["conventions"] = conventions_json();
  ordered_json maxd;
  for (RateVariant v : kAllVariants) {
    const auto d = curve.max_distance(v);
    if (d.has_value()) {
      maxd[variant_name(v)] = *d;
    } else {
      maxd[variant_name(v)] = nullptr;
    }
  }
  j["max_positive_length_km"] = maxd;
  return j;
}

// --- tally JSON --------------------------------------------------------------

inline ordered_json tally_to_json(const TallyReport& t,
                                  const DeviceConfig& config,
                                  std::uint64_t seed) {
  ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kVersion;
  j["command"] = "simulate";
  j["rng"] = kRngId;
  j["seed"] = seed;
  j["config"] = config_to_json(config);
  j["conventions"] = conventions_json();

  ordered_json counts;
  counts["pulses"] = t.pulses;
  counts["detected"] = t.detected;
  counts["double_clicks"] = t.double_clicks;
  counts["sifted_detections"] = t.sifted_detections;
  counts["sifted_errors"] = t.sifted_errors;
  counts["sifted_double_clicks"] = t.sifted_double_clicks;
  counts["sifted_by_basis"] =
      ordered_json::array({t.sifted_by_basis[0], t.sifted_by_basis[1]});
  counts["sifted_errors_by_basis"] = ordered_json::array(
      {t.sifted_errors_by_basis[0], t.sifted_errors_by_basis[1]});
  ordered_json per_n = ordered_json::array();
  for (const auto& slot : t.per_n) {
    ordered_json s;
    s["detections"] = slot.detections;
    s["errors"] = slot.errors;
    s["double_clicks"] = slot.double_clicks;
    per_n.push_back(s);
  }
  counts["per_photon_number"] = per_n;
  counts["photon_number_cap"] = kTallyPhotonCap;
  j["counts"] = counts;

  ordered_json derived;
  derived["gain"] = t.gain();
  derived["gain_standard_error"] = t.gain_standard_error();
  derived["qber"] = t.qber();
  derived["qber_standard_error"] = t.qber_standard_error();
  j["derived"] = derived;
  return j;
}

}  // namespace qkd
