// Acceptance suite: one pass/fail line per criterion, nonzero exit when
// any criterion fails. Criterion 9 drives the CLI binary, whose path is
// argv[1].

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "qkd/config.hpp"
#include "qkd/io.hpp"
#include "qkd/math.hpp"
#include "qkd/montecarlo.hpp"
#include "qkd/rates.hpp"
#include "qkd/rng.hpp"
#include "qkd/sweep.hpp"

namespace {

namespace fs = std::filesystem;

int g_failures = 0;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(int id, const std::string& name, bool pass, double seconds,
            double budget_s, const std::string& detail) {
  bool ok = pass;
  std::ostringstream line;
  line << "criterion " << id << ": " << name;
  if (budget_s > 0.0 && seconds > budget_s) {
    ok = false;
    line << " [exceeded runtime budget " << budget_s << " s]";
  }
  if (!detail.empty()) {
    line << " -- " << detail;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", seconds);
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << line.str() << " (" << buf
            << " s)\n";
  if (!ok) {
    ++g_failures;
  }
}

qkd::RateInputs random_inputs(qkd::Xoshiro256StarStar& rng) {
  qkd::RateInputs in;
  in.gain = std::pow(10.0, -8.0 * rng.uniform());
  const double q0 = 0.01 + 0.49 * rng.uniform();
  const double q1 = 0.01 + (0.99 - q0 - 0.01) * rng.uniform();
  in.vacuum_gain = q0 * in.gain;
  in.single_gain = q1 * in.gain;
  in.qber = 0.6 * rng.uniform();
  in.single_qber = 0.6 * rng.uniform();
  in.ec_inefficiency = 1.0 + rng.uniform();
  in.multi_fraction = rng.uniform();
  return in;
}

void criterion_1_and_2() {
  // 1: G_koashi - G_gllp = Q0 within 1e-12 relative, 1000 randomized inputs.
  {
    Timer t;
    qkd::Xoshiro256StarStar rng(20240401);
    int bad = 0;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const qkd::RateInputs in = random_inputs(rng);
      const double gap =
          qkd::rate_koashi(in).rate - qkd::rate_gllp(in).rate;
      const double rel = std::abs(gap - in.vacuum_gain) / in.vacuum_gain;
      worst = std::max(worst, rel);
      if (!(rel <= 1e-12)) {
        ++bad;
      }
    }
    std::ostringstream d;
    d << "worst relative deviation " << worst;
    report(1, "rate identity G_koashi - G_gllp = Q0", bad == 0, t.seconds(),
           1.0, d.str());
  }
  // 2: G_koashi = Q [1 - H - f h(E)] within 1e-12 relative, same set.
  {
    Timer t;
    qkd::Xoshiro256StarStar rng(20240401);
    int bad = 0;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const qkd::RateInputs in = random_inputs(rng);
      const qkd::RateBreakdown b = qkd::rate_koashi(in);
      const double via_h =
          in.gain * (1.0 - b.entropy_h -
                     in.ec_inefficiency * qkd::binary_entropy(in.qber));
      const double scale = std::max(std::abs(b.rate), in.gain);
      const double rel = std::abs(b.rate - via_h) / scale;
      worst = std::max(worst, rel);
      if (!(rel <= 1e-12)) {
        ++bad;
      }
    }
    std::ostringstream d;
    d << "worst relative deviation " << worst;
    report(2, "entropy linkage G = Q[1 - H - f h(E)]", bad == 0, t.seconds(),
           1.0, d.str());
  }
}

void criterion_3() {
  Timer t;
  const qkd::DeviceConfig base;
  std::ostringstream detail;
  bool pass = true;
  for (double length : {0.0, 20.0, 60.0}) {
    qkd::DeviceConfig config = base;
    config.length_km = length;
    config.mu = 0.5;
    const qkd::YieldTable table = qkd::build_yield_table(
        config.source(), config.link(), config.detector());
    int agreeing = 0;
    for (int seed = 0; seed < 20; ++seed) {
      const qkd::TallyReport tally =
          qkd::simulate_run(config, 10'000'000, 9000 + seed);
      if (qkd::compare_to_analytic(tally, table, 4.0).pass) {
        ++agreeing;
      }
    }
    detail << "L=" << length << ": " << agreeing << "/20  ";
    if (agreeing < 19) {
      pass = false;
    }
  }
  report(3, "analytic-Monte Carlo agreement at 4 sigma", pass, t.seconds(),
         120.0, detail.str());
}

void criterion_4() {
  Timer t;
  const qkd::DeviceConfig config;
  bool pass = true;
  std::ostringstream detail;
  for (double length = 0.0; length <= 120.0; length += 20.0) {
    const qkd::LinkParams link = config.link(length);
    const qkd::DetectorParams det = config.detector();
    const qkd::YieldTable truth =
        qkd::build_yield_table(config.source(0.5), link, det);
    const auto meas = qkd::analytic_measurements(
        {0.5, 0.05, 0.0}, config.sift_factor, link, det);
    const qkd::DecoyEstimate est = qkd::estimate_vacuum_weak(
        meas[0], meas[1], meas[2], config.sift_factor);
    if (!(est.single_yield_lower <= truth.yields[1]) ||
        !(est.single_qber_upper >= truth.qbers[1])) {
      pass = false;
      detail << "bracket violated at L=" << length << "  ";
    }
    qkd::RateInputs oracle = qkd::make_rate_inputs(truth, config.ec_model());
    qkd::RateInputs bounded = oracle;
    bounded.vacuum_gain = est.vacuum_gain;
    bounded.single_gain = est.single_gain_lower;
    bounded.single_qber = est.single_qber_upper;
    if (qkd::rate_koashi(bounded).rate > qkd::rate_koashi(oracle).rate) {
      pass = false;
      detail << "bounds beat oracle rate at L=" << length << "  ";
    }
  }
  if (pass) {
    detail << "bounds one-sided and conservative at L = 0..120 km";
  }
  report(4, "decoy bracketing with analytic measurements", pass, t.seconds(),
         5.0, detail.str());
}

std::optional<double> g_koashi_maxdist;

void criterion_5() {
  Timer t;
  const qkd::DeviceConfig config;
  std::vector<double> lengths;
  for (double length = 0.0; length <= 180.0; length += 2.0) {
    lengths.push_back(length);
  }
  const qkd::CurveResult curve = qkd::distance_sweep(config, lengths);
  bool ordered = true;
  for (const auto& p : curve.points) {
    const double ideal =
        std::max(0.0, p.at(qkd::RateVariant::ideal_single).breakdown.rate);
    const double koashi =
        std::max(0.0, p.at(qkd::RateVariant::koashi).breakdown.rate);
    const double gllp =
        std::max(0.0, p.at(qkd::RateVariant::gllp).breakdown.rate);
    const double nodecoy =
        std::max(0.0, p.at(qkd::RateVariant::no_decoy).breakdown.rate);
    if (!(ideal >= koashi && koashi >= gllp && gllp >= nodecoy)) {
      ordered = false;
    }
  }
  const double koashi_dist = qkd::find_max_distance(
      config, qkd::RateVariant::koashi, 100.0, 200.0, 0.1);
  const double gllp_dist = qkd::find_max_distance(
      config, qkd::RateVariant::gllp, 100.0, 200.0, 0.1);
  g_koashi_maxdist = koashi_dist;
  const bool gap_positive = koashi_dist - gllp_dist > 0.0;
  std::ostringstream detail;
  detail << "clamped ordering "
         << (ordered ? "holds on 0-180 km" : "VIOLATED") << "; maxdist "
         << koashi_dist << " vs " << gllp_dist << " km";
  report(5, "curve ordering and koashi > gllp distance limit",
         ordered && gap_positive, t.seconds(), 30.0, detail.str());
}

void criterion_6() {
  Timer t;
  const qkd::DeviceConfig config;
  const double nodecoy_dist = qkd::find_max_distance(
      config, qkd::RateVariant::no_decoy, 0.0, 120.0, 0.1);
  const double koashi_dist = g_koashi_maxdist.value_or(
      qkd::find_max_distance(config, qkd::RateVariant::koashi, 100.0, 200.0,
                             0.1));
  const double ratio = nodecoy_dist / koashi_dist;
  std::ostringstream detail;
  detail << "maxdist ratio nodecoy/koashi = " << ratio;
  report(6, "no-decoy performance drop (ratio < 0.7)", ratio < 0.7,
         t.seconds(), 0.0, detail.str());
}

void criterion_7() {
  Timer t;
  const qkd::DeviceConfig config;
  const double mu_nd_10 =
      qkd::optimize_mu(config, 10.0, qkd::RateVariant::no_decoy).mu_opt;
  const double mu_nd_60 =
      qkd::optimize_mu(config, 60.0, qkd::RateVariant::no_decoy).mu_opt;
  const double mu_k_10 =
      qkd::optimize_mu(config, 10.0, qkd::RateVariant::koashi).mu_opt;
  const double mu_k_60 =
      qkd::optimize_mu(config, 60.0, qkd::RateVariant::koashi).mu_opt;
  const bool pass = mu_nd_60 < 0.5 * mu_nd_10 && mu_k_60 > 0.5 * mu_k_10;
  std::ostringstream detail;
  detail << "nodecoy mu_opt 10/60 km: " << mu_nd_10 << " / " << mu_nd_60
         << "; koashi: " << mu_k_10 << " / " << mu_k_60;
  report(7, "optimal-mu behavior with distance", pass, t.seconds(), 10.0,
         detail.str());
}

void criterion_8() {
  Timer t;
  bool pass = true;
  std::ostringstream detail;

  // Poisson normalization, mu in [0, 10], N <= 100.
  for (double mu : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    for (unsigned n_max : {0u, 1u, 10u, 50u, 100u}) {
      double sum = 0.0;
      for (unsigned n = 0; n <= n_max; ++n) {
        sum += qkd::poisson_pmf(mu, n);
      }
      if (std::abs(sum + qkd::poisson_tail(mu, n_max) - 1.0) > 1e-12) {
        pass = false;
        detail << "normalization failed at mu=" << mu << " N=" << n_max
               << "  ";
      }
    }
  }
  // Endpoints and maximum.
  if (qkd::binary_entropy(0.0) != 0.0 || qkd::binary_entropy(1.0) != 0.0 ||
      qkd::binary_entropy(0.5) != 1.0) {
    pass = false;
    detail << "entropy endpoint values wrong  ";
  }
  // Exact symmetry on a dyadic grid.
  for (int k = 0; k <= 1024; ++k) {
    const double p = static_cast<double>(k) / 1024.0;
    if (qkd::binary_entropy(p) != qkd::binary_entropy(1.0 - p)) {
      pass = false;
      detail << "symmetry broken at p=" << p << "  ";
      break;
    }
  }
  // Midpoint concavity on sampled pairs.
  qkd::Xoshiro256StarStar rng(88);
  for (int i = 0; i < 5000; ++i) {
    const double p = rng.uniform();
    const double q = rng.uniform();
    const double lhs = qkd::binary_entropy(0.5 * (p + q));
    const double rhs =
        0.5 * (qkd::binary_entropy(p) + qkd::binary_entropy(q));
    if (lhs < rhs - 1e-12) {
      pass = false;
      detail << "concavity violated at p=" << p << " q=" << q << "  ";
      break;
    }
  }
  if (pass) {
    detail << "normalization, endpoints, symmetry, concavity all hold";
  }
  report(8, "math-kernel property suites", pass, t.seconds(), 0.0,
         detail.str());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_9(const std::string& cli) {
  Timer t;
  if (cli.empty()) {
    report(9, "CLI determinism", false, t.seconds(), 0.0,
           "CLI binary path not supplied as argv[1]");
    return;
  }
  const fs::path dir =
      fs::temp_directory_path() /
      ("qkdrate_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto run = [&](const std::string& args) {
    const std::string cmd =
        "\"" + cli + "\" " + args + " >/dev/null 2>/dev/null";
    return std::system(cmd.c_str());
  };

  bool pass = true;
  std::ostringstream detail;

  const fs::path sweep_a = dir / "sweep_a.csv";
  const fs::path sweep_b = dir / "sweep_b.csv";
  if (run("sweep --out " + sweep_a.string()) != 0 ||
      run("sweep --out " + sweep_b.string()) != 0) {
    pass = false;
    detail << "sweep command failed  ";
  } else if (slurp(sweep_a) != slurp(sweep_b) || slurp(sweep_a).empty()) {
    pass = false;
    detail << "sweep CSV not byte-identical  ";
  } else if (slurp(fs::path(sweep_a.string() + ".meta.json")) !=
             slurp(fs::path(sweep_b.string() + ".meta.json"))) {
    pass = false;
    detail << "sweep metadata not byte-identical  ";
  }

  const fs::path tally_a = dir / "tally_a.json";
  const fs::path tally_b = dir / "tally_b.json";
  const std::string sim_args = "simulate --pulses 2000000 --seed 7 --out ";
  const int rc_a = run(sim_args + tally_a.string());
  const int rc_b = run(sim_args + tally_b.string());
  if (rc_a != rc_b) {
    pass = false;
    detail << "simulate exit codes differ  ";
  }
  if (slurp(tally_a) != slurp(tally_b) || slurp(tally_a).empty()) {
    pass = false;
    detail << "simulate tally not byte-identical  ";
  }
  if (pass) {
    detail << "sweep CSV+metadata and simulate tally byte-identical";
  }
  fs::remove_all(dir);
  report(9, "CLI determinism", pass, t.seconds(), 0.0, detail.str());
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  criterion_1_and_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9(cli);
  if (g_failures == 0) {
    std::cout << "all acceptance criteria passed\n";
  } else {
    std::cout << g_failures << " acceptance criteria FAILED\n";
  }
  return g_failures == 0 ? 0 : 1;
}
