// Command-line surface for the key-rate engine: rate tables, distance
// sweeps, seeded pulse-level simulation, decoy-bound checks and maximum
// distance reports. Exit codes: 0 success, 1 validation error, 2 I/O
// error, 3 statistical-agreement failure.

#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qkd/io.hpp"
#include "qkd/montecarlo.hpp"
#include "qkd/sweep.hpp"
#include "qkd/version.hpp"

namespace {

constexpr double kMaxDistBracketKm = 400.0;

struct CommandArgs {
  std::string config_path;
  std::string out_path;
  double length_km = 0.0;
  double mu = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t pulses = 0;
  std::string mode;

  CLI::Option* opt_length = nullptr;
  CLI::Option* opt_mu = nullptr;
  CLI::Option* opt_seed = nullptr;
  CLI::Option* opt_pulses = nullptr;
  CLI::Option* opt_mode = nullptr;
};

void add_common_flags(CLI::App* cmd, CommandArgs& args) {
  cmd->add_option("--config", args.config_path,
                  "JSON config file (flat schema, unknown keys rejected)");
  args.opt_length =
      cmd->add_option("--length-km", args.length_km, "fiber length [km]");
  args.opt_mu =
      cmd->add_option("--mu", args.mu, "signal mean photon number");
  args.opt_seed = cmd->add_option("--seed", args.seed, "RNG seed");
  args.opt_pulses =
      cmd->add_option("--pulses", args.pulses, "number of pulses");
  args.opt_mode =
      cmd->add_option("--mode", args.mode,
                      "parameter estimation mode: oracle uses exact "
                      "Q0/Q1/e1, decoy uses vacuum+weak bounds")
          ->check(CLI::IsMember({"oracle", "decoy"}));
}

void print_dark_default_notice(const qkd::DeviceConfig& config) {
  static bool printed = false;
  if (printed || !config.uses_default_darks()) {
    return;
  }
  printed = true;
  std::cerr << "note: default dark counts interpret the GYS figure as a "
               "combined two-detector probability d = 1.7e-6 (the printed "
               "exponent sign is corrected), split symmetrically per "
               "detector\n";
}

qkd::DeviceConfig resolve_config(const CommandArgs& args) {
  qkd::DeviceConfig config = args.config_path.empty()
                                 ? qkd::DeviceConfig{}
                                 : qkd::load_config(args.config_path);
  if (args.opt_length && args.opt_length->count() > 0) {
    config.length_km = args.length_km;
  }
  if (args.opt_mu && args.opt_mu->count() > 0) {
    config.mu = args.mu;
  }
  if (args.opt_seed && args.opt_seed->count() > 0) {
    config.seed = args.seed;
  }
  if (args.opt_pulses && args.opt_pulses->count() > 0) {
    config.pulses = args.pulses;
    config.pulses_per_intensity = args.pulses;
  }
  if (args.opt_mode && args.opt_mode->count() > 0) {
    config.mode = qkd::parse_mode(args.mode);
  }
  config.validate();
  print_dark_default_notice(config);
  return config;
}

void print_conventions_footer(const qkd::DeviceConfig& config) {
  std::cout << "# rates are bits per pulse and include the sifting factor "
            << qkd::format_fixed12(config.sift_factor) << "\n"
            << "# nodecoy is a pessimistic tagged-multiphoton stand-in, not "
               "the exact ILM rate\n";
}

int cmd_rate(const qkd::DeviceConfig& config) {
  std::vector<qkd::VariantEval> evals;
  for (qkd::RateVariant v : qkd::kAllVariants) {
    evals.push_back(
        qkd::evaluate_variant(config, config.length_km, config.mu, v));
  }

  std::cout << "key rates at L = " << qkd::format_fixed12(config.length_km)
            << " km, mu = " << qkd::format_fixed12(config.mu) << ", mode = "
            << qkd::mode_name(config.mode) << "\n\n";
  std::cout << std::left << std::setw(9) << "variant" << std::right
            << std::setw(22) << "G" << std::setw(22) << "ec_cost"
            << std::setw(22) << "vacuum_credit" << std::setw(22)
            << "single_photon_term" << std::setw(22) << "entropy_H" << "\n";
  for (const auto& ev : evals) {
    const auto& b = ev.breakdown;
    std::cout << std::left << std::setw(9) << qkd::variant_name(b.variant)
              << std::right << std::setw(22) << qkd::format_fixed12(b.rate)
              << std::setw(22) << qkd::format_fixed12(b.ec_cost)
              << std::setw(22) << qkd::format_fixed12(b.vacuum_credit)
              << std::setw(22) << qkd::format_fixed12(b.single_photon_term)
              << std::setw(22) << qkd::format_fixed12(b.entropy_h) << "\n";
  }

  std::cout << "\n" << std::left << std::setw(9) << "variant" << std::right
            << std::setw(22) << "Q" << std::setw(22) << "E" << std::setw(22)
            << "Q0" << std::setw(22) << "Q1" << std::setw(22) << "e1"
            << "\n";
  for (const auto& ev : evals) {
    const auto& in = ev.inputs;
    std::cout << std::left << std::setw(9)
              << qkd::variant_name(ev.breakdown.variant) << std::right
              << std::setw(22) << qkd::format_fixed12(in.gain)
              << std::setw(22) << qkd::format_fixed12(in.qber)
              << std::setw(22) << qkd::format_fixed12(in.vacuum_gain)
              << std::setw(22) << qkd::format_fixed12(in.single_gain)
              << std::setw(22) << qkd::format_fixed12(in.single_qber)
              << "\n";
  }

  const double gap = evals[0].breakdown.rate - evals[1].breakdown.rate;
  std::cout << "\nG_koashi - G_gllp = " << qkd::format_fixed12(gap)
            << "  (vacuum gain Q0 = "
            << qkd::format_fixed12(evals[0].inputs.vacuum_gain) << ")\n";
  print_conventions_footer(config);
  return 0;
}

int cmd_sweep(const qkd::DeviceConfig& config, double l_min, double l_max,
              double step, const std::string& out_path) {
  if (!(step > 0.0)) {
    throw qkd::ConfigError("sweep step must be > 0");
  }
  if (!(l_min <= l_max)) {
    throw qkd::ConfigError("sweep requires l-min <= l-max");
  }
  std::vector<double> lengths;
  for (std::uint64_t i = 0;; ++i) {
    const double length = l_min + static_cast<double>(i) * step;
    if (length > l_max + step * 1e-9) {
      break;
    }
    lengths.push_back(length);
  }

  const qkd::OptimizerSettings settings;
  const qkd::CurveResult curve =
      qkd::distance_sweep(config, lengths, settings);
  qkd::write_text_file(out_path, qkd::sweep_csv(curve));
  const qkd::ordered_json meta =
      qkd::sweep_metadata(config, settings, l_min, l_max, step, curve);
  qkd::write_text_file(out_path + ".meta.json", meta.dump(2) + "\n");

  std::cout << "wrote " << curve.points.size() << " rows to " << out_path
            << "\n";
  for (qkd::RateVariant v : qkd::kAllVariants) {
    const auto d = curve.max_distance(v);
    std::cout << std::left << std::setw(9) << qkd::variant_name(v)
              << " max positive length: "
              << (d.has_value() ? qkd::format_fixed12(*d) + " km"
                                : std::string("none in range"))
              << "\n";
  }
  print_conventions_footer(config);
  return 0;
}

void print_deviation_report(const qkd::DeviationReport& report) {
  if (report.insufficient) {
    std::cout << "insufficient statistics: no detected events to compare\n";
    return;
  }
  std::cout << std::left << std::setw(5) << "name" << std::right
            << std::setw(18) << "observed" << std::setw(18) << "expected"
            << std::setw(14) << "sigma" << std::setw(10) << "z"
            << std::setw(8) << "status" << "\n";
  for (const auto& dev : report.entries) {
    std::ostringstream z;
    if (dev.checked) {
      z << std::setprecision(2) << std::fixed << dev.z;
    } else {
      z << "-";
    }
    std::cout << std::left << std::setw(5) << dev.name << std::right
              << std::setw(18) << std::setprecision(8) << std::scientific
              << dev.observed << std::setw(18) << dev.expected
              << std::setw(14) << std::setprecision(2) << dev.sigma
              << std::setw(10) << z.str() << std::setw(8)
              << (dev.checked ? (dev.ok ? "ok" : "FAIL") : "skip") << "\n";
  }
  std::cout.unsetf(std::ios::floatfield);
  std::cout << (report.pass ? "agreement PASS" : "agreement FAIL")
            << " at threshold " << report.sigma_threshold << " sigma\n";
}

int cmd_simulate(const qkd::DeviceConfig& config,
                 const std::string& out_path) {
  const qkd::TallyReport tally =
      qkd::simulate_run(config, config.pulses, config.seed);
  const qkd::YieldTable table = qkd::build_yield_table(
      config.source(), config.link(), config.detector());
  const qkd::DeviationReport report =
      qkd::compare_to_analytic(tally, table, config.sigma_threshold);

  std::cout << "simulated " << tally.pulses << " pulses, seed " << config.seed
            << ", rng: " << qkd::kRngId << "\n";
  print_deviation_report(report);

  if (!out_path.empty()) {
    const qkd::ordered_json j =
        qkd::tally_to_json(tally, config, config.seed);
    qkd::write_text_file(out_path, j.dump(2) + "\n");
    std::cout << "tally written to " << out_path << "\n";
  }
  print_conventions_footer(config);
  return report.pass ? 0 : 3;
}

int cmd_decoy_check(const qkd::DeviceConfig& config) {
  const std::vector<double> intensities = {config.mu, config.decoy_nu, 0.0};
  std::vector<qkd::IntensityMeasurement> meas;
  if (config.mode == qkd::EstimationMode::oracle) {
    meas = qkd::analytic_measurements(intensities, config.sift_factor,
                                      config.link(), config.detector());
    std::cout << "measurements: analytic (infinite statistics)\n";
  } else {
    meas = qkd::simulate_decoy_session(
        config, intensities, config.pulses_per_intensity, config.seed);
    std::cout << "measurements: simulated, " << config.pulses_per_intensity
              << " pulses per intensity, seed " << config.seed
              << ", rng: " << qkd::kRngId << "\n";
  }

  const qkd::DecoyEstimate est = qkd::estimate_vacuum_weak(
      meas[0], meas[1], meas[2], config.sift_factor);
  const qkd::YieldTable truth = qkd::build_yield_table(
      config.source(), config.link(), config.detector());
  const qkd::BracketReport report = qkd::bounds_bracket_check(est, truth);

  auto pct = [](double x) {
    std::ostringstream s;
    s << std::setprecision(3) << std::fixed << 100.0 * x << "%";
    return s.str();
  };
  std::cout << "intensities (mu, nu, vacuum): "
            << qkd::format_fixed12(config.mu) << ", "
            << qkd::format_fixed12(config.decoy_nu) << ", 0\n";
  std::cout << "Y1_lower = " << qkd::format_fixed12(est.single_yield_lower)
            << "  true Y1 = " << qkd::format_fixed12(truth.yields.at(1))
            << "  slack " << pct(report.single_yield_slack) << "  "
            << (report.single_yield_ok ? "ok" : "VIOLATED") << "\n";
  std::cout << "e1_upper = " << qkd::format_fixed12(est.single_qber_upper)
            << "  true e1 = " << qkd::format_fixed12(truth.qbers.at(1))
            << "  slack " << pct(report.single_qber_slack) << "  "
            << (report.single_qber_ok ? "ok" : "VIOLATED") << "\n";
  std::cout << "Q1_lower = " << qkd::format_fixed12(est.single_gain_lower)
            << "  true Q1 = " << qkd::format_fixed12(truth.gains.at(1))
            << "  slack " << pct(report.single_gain_slack) << "  "
            << (report.single_gain_ok ? "ok" : "VIOLATED") << "\n";
  std::cout << "Q0 = " << qkd::format_fixed12(est.vacuum_gain)
            << "  Y0 = " << qkd::format_fixed12(est.vacuum_yield)
            << (est.vacuous ? "  (estimate vacuous: a clamp fired)" : "")
            << "\n";
  std::cout << (report.pass ? "brackets PASS" : "brackets FAIL") << "\n";
  print_conventions_footer(config);
  return report.pass ? 0 : 3;
}

int cmd_maxdist(const qkd::DeviceConfig& config) {
  const qkd::OptimizerSettings settings;
  std::cout << "maximum secure distance, bracket [0, "
            << qkd::format_fixed12(kMaxDistBracketKm)
            << "] km, bisection to 0.1 km\n";

  double koashi_dist = -1.0;
  double gllp_dist = -1.0;
  for (qkd::RateVariant v : qkd::kAllVariants) {
    std::cout << std::left << std::setw(9) << qkd::variant_name(v) << "  ";
    const double rate_at_zero =
        qkd::optimize_mu(config, 0.0, v, settings).breakdown.rate;
    if (!(rate_at_zero > 0.0)) {
      std::cout << "no positive rate at 0 km\n";
      continue;
    }
    const double rate_at_end =
        qkd::optimize_mu(config, kMaxDistBracketKm, v, settings)
            .breakdown.rate;
    if (rate_at_end > 0.0) {
      std::cout << "bracket failure: rate still positive at "
                << qkd::format_fixed12(kMaxDistBracketKm)
                << " km (unbounded within bracket)\n";
      continue;
    }
    const double dist = qkd::find_max_distance(config, v, 0.0,
                                               kMaxDistBracketKm, 0.1,
                                               settings);
    std::cout << qkd::format_fixed12(dist) << " km\n";
    if (v == qkd::RateVariant::koashi) koashi_dist = dist;
    if (v == qkd::RateVariant::gllp) gllp_dist = dist;
  }
  if (koashi_dist > 0.0 && gllp_dist > 0.0) {
    std::cout << "koashi - gllp gap: "
              << qkd::format_fixed12(koashi_dist - gllp_dist)
              << " km (the vacuum-credit term)\n";
  }
  print_conventions_footer(config);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decoy-state BB84 key-rate engine"};
  app.set_version_flag("--version",
                       std::string(qkd::kToolName) + " " + qkd::kVersion);
  app.require_subcommand(1);

  CommandArgs rate_args;
  CLI::App* rate = app.add_subcommand(
      "rate", "rate breakdown for all four variants at fixed L and mu");
  add_common_flags(rate, rate_args);

  CommandArgs sweep_args;
  double l_min = 0.0;
  double l_max = 180.0;
  double l_step = 2.0;
  std::string sweep_out;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "optimized rate vs distance for all variants, CSV output");
  add_common_flags(sweep, sweep_args);
  sweep->add_option("--l-min", l_min, "sweep start [km]");
  sweep->add_option("--l-max", l_max, "sweep end [km]");
  sweep->add_option("--l-step", l_step, "sweep step [km]");
  sweep->add_option("--out", sweep_out, "output CSV path")->required();

  CommandArgs sim_args;
  std::string sim_out;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "pulse-level Monte Carlo run compared against the "
                  "analytic model");
  add_common_flags(simulate, sim_args);
  simulate->add_option("--out", sim_out, "tally JSON output path");

  CommandArgs decoy_args;
  CLI::App* decoy_check = app.add_subcommand(
      "decoy-check", "vacuum+weak decoy bounds vs the true single-photon "
                     "quantities");
  add_common_flags(decoy_check, decoy_args);

  CommandArgs maxdist_args;
  CLI::App* maxdist = app.add_subcommand(
      "maxdist", "maximum secure distance per variant");
  add_common_flags(maxdist, maxdist_args);

  try {
    app.parse(argc, argv);
    if (rate->parsed()) {
      return cmd_rate(resolve_config(rate_args));
    }
    if (sweep->parsed()) {
      return cmd_sweep(resolve_config(sweep_args), l_min, l_max, l_step,
                       sweep_out);
    }
    if (simulate->parsed()) {
      return cmd_simulate(resolve_config(sim_args), sim_out);
    }
    if (decoy_check->parsed()) {
      return cmd_decoy_check(resolve_config(decoy_args));
    }
    if (maxdist->parsed()) {
      return cmd_maxdist(resolve_config(maxdist_args));
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const qkd::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const qkd::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
