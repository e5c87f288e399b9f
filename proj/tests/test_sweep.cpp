#include "qkd/sweep.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qkd/config.hpp"

namespace {

qkd::DeviceConfig gys() { return qkd::DeviceConfig{}; }

std::vector<double> range_km(double lo, double hi, double step) {
  std::vector<double> out;
  for (double x = lo; x <= hi + 1e-9; x += step) {
    out.push_back(x);
  }
  return out;
}

TEST(OptimizeMu, KoashiAtTwentyKilometers) {
  const qkd::OptimizeResult r =
      qkd::optimize_mu(gys(), 20.0, qkd::RateVariant::koashi);
  EXPECT_TRUE(r.positive);
  EXPECT_GT(r.mu_opt, 0.1);
  EXPECT_LT(r.mu_opt, 1.0);

  // Exhaustive fine-grid oracle: the optimizer may not be beaten by more
  // than 1e-9 anywhere in the bracket.
  double best = -1.0;
  for (int i = 0; i <= 2000; ++i) {
    const double mu =
        1e-5 * std::pow(2.0 / 1e-5, static_cast<double>(i) / 2000.0);
    best = std::max(best, qkd::evaluate_variant(gys(), 20.0, mu,
                                                qkd::RateVariant::koashi)
                              .breakdown.rate);
  }
  EXPECT_GE(r.breakdown.rate, best - 1e-9);
}

TEST(OptimizeMu, IdealSinglePhotonIgnoresIntensity) {
  const auto a =
      qkd::evaluate_variant(gys(), 20.0, 0.1, qkd::RateVariant::ideal_single);
  const auto b =
      qkd::evaluate_variant(gys(), 20.0, 1.0, qkd::RateVariant::ideal_single);
  EXPECT_EQ(a.breakdown.rate, b.breakdown.rate);
  const qkd::OptimizeResult r =
      qkd::optimize_mu(gys(), 20.0, qkd::RateVariant::ideal_single);
  EXPECT_EQ(r.breakdown.rate, a.breakdown.rate);
  EXPECT_EQ(r.mu_opt, 1.0);
}

TEST(OptimizeMu, NoDecoyOptimalIntensityShrinksWithDistance) {
  const double mu10 =
      qkd::optimize_mu(gys(), 10.0, qkd::RateVariant::no_decoy).mu_opt;
  const double mu60 =
      qkd::optimize_mu(gys(), 60.0, qkd::RateVariant::no_decoy).mu_opt;
  EXPECT_LT(mu60, 0.5 * mu10);
}

TEST(OptimizeMu, KoashiOptimalIntensityStaysOrderOne) {
  const double mu10 =
      qkd::optimize_mu(gys(), 10.0, qkd::RateVariant::koashi).mu_opt;
  const double mu60 =
      qkd::optimize_mu(gys(), 60.0, qkd::RateVariant::koashi).mu_opt;
  EXPECT_GT(mu60, 0.5 * mu10);
}

TEST(OptimizeMu, ReportsNonPositiveBracket) {
  // Far beyond every distance limit no intensity gives a positive rate.
  const qkd::OptimizeResult r =
      qkd::optimize_mu(gys(), 300.0, qkd::RateVariant::koashi);
  EXPECT_FALSE(r.positive);
  EXPECT_LE(r.breakdown.rate, 0.0);
}

TEST(DistanceSweep, ClampedCurveOrderingAndLossMonotonicity) {
  const qkd::CurveResult curve =
      qkd::distance_sweep(gys(), range_km(0.0, 180.0, 2.0));
  ASSERT_EQ(curve.points.size(), 91u);
  std::array<double, 4> first_rates{};
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i];
    const double ideal =
        std::max(0.0, p.at(qkd::RateVariant::ideal_single).breakdown.rate);
    const double koashi =
        std::max(0.0, p.at(qkd::RateVariant::koashi).breakdown.rate);
    const double gllp =
        std::max(0.0, p.at(qkd::RateVariant::gllp).breakdown.rate);
    const double nodecoy =
        std::max(0.0, p.at(qkd::RateVariant::no_decoy).breakdown.rate);
    EXPECT_GE(ideal, koashi) << "L=" << p.length_km;
    EXPECT_GE(koashi, gllp) << "L=" << p.length_km;
    EXPECT_GE(gllp, nodecoy) << "L=" << p.length_km;
    for (std::size_t v = 0; v < 4; ++v) {
      const double rate = p.by_variant[v].breakdown.rate;
      if (i == 0) {
        first_rates[v] = rate;
      } else {
        EXPECT_GE(first_rates[v], rate) << "variant " << v;
      }
    }
  }
}

TEST(DistanceSweep, IdentityAtFixedIntensity) {
  // At the SAME mu the koashi-gllp gap is exactly the vacuum gain.
  for (double length : {0.0, 20.0, 60.0, 100.0}) {
    const double mu =
        qkd::optimize_mu(gys(), length, qkd::RateVariant::koashi).mu_opt;
    const auto k =
        qkd::evaluate_variant(gys(), length, mu, qkd::RateVariant::koashi);
    const auto g =
        qkd::evaluate_variant(gys(), length, mu, qkd::RateVariant::gllp);
    EXPECT_EQ(k.breakdown.vacuum_credit, k.inputs.vacuum_gain);
    const double gap = k.breakdown.rate - g.breakdown.rate;
    const double scale =
        std::max({std::abs(k.breakdown.rate), std::abs(g.breakdown.rate),
                  k.inputs.vacuum_gain});
    EXPECT_NEAR(gap, k.inputs.vacuum_gain, 1e-12 * scale)
        << "L=" << length;
  }
}

TEST(DistanceSweep, MaxDistanceTracksSignChanges) {
  const qkd::CurveResult curve =
      qkd::distance_sweep(gys(), range_km(0.0, 180.0, 2.0));
  for (std::size_t v = 0; v < 4; ++v) {
    double last_positive = -1.0;
    for (const auto& p : curve.points) {
      if (p.by_variant[v].breakdown.rate > 0.0) {
        last_positive = p.length_km;
      }
    }
    const auto reported = curve.max_distance_km[v];
    if (last_positive < 0.0) {
      EXPECT_FALSE(reported.has_value());
    } else {
      ASSERT_TRUE(reported.has_value());
      EXPECT_EQ(*reported, last_positive);
    }
  }
}

TEST(DistanceSweep, RejectsUnsortedLengths) {
  EXPECT_THROW(qkd::distance_sweep(gys(), {10.0, 5.0}),
               std::invalid_argument);
}

TEST(FindMaxDistance, KoashiExceedsGllp) {
  // Frozen windows from an independent high-precision scan of the model.
  const double koashi = qkd::find_max_distance(
      gys(), qkd::RateVariant::koashi, 100.0, 200.0, 0.1);
  const double gllp =
      qkd::find_max_distance(gys(), qkd::RateVariant::gllp, 100.0, 200.0, 0.1);
  EXPECT_GT(koashi, gllp);
  EXPECT_GT(koashi, 147.0);
  EXPECT_LT(koashi, 150.0);
  EXPECT_GT(gllp, 141.0);
  EXPECT_LT(gllp, 144.0);
}

TEST(FindMaxDistance, FullVariantOrdering) {
  const double ideal = qkd::find_max_distance(
      gys(), qkd::RateVariant::ideal_single, 100.0, 250.0, 0.1);
  const double koashi = qkd::find_max_distance(
      gys(), qkd::RateVariant::koashi, 100.0, 200.0, 0.1);
  const double gllp =
      qkd::find_max_distance(gys(), qkd::RateVariant::gllp, 100.0, 200.0, 0.1);
  const double nodecoy = qkd::find_max_distance(
      gys(), qkd::RateVariant::no_decoy, 0.0, 120.0, 0.1);
  EXPECT_GE(ideal, koashi);
  EXPECT_GT(koashi, gllp);
  EXPECT_GT(gllp, nodecoy);
  EXPECT_GT(ideal, 170.0);
  EXPECT_LT(ideal, 173.0);
  EXPECT_GT(nodecoy, 32.0);
  EXPECT_LT(nodecoy, 34.0);
}

TEST(FindMaxDistance, ToleranceRefinementIsConsistent) {
  const double coarse = qkd::find_max_distance(
      gys(), qkd::RateVariant::koashi, 100.0, 200.0, 0.1);
  const double fine = qkd::find_max_distance(
      gys(), qkd::RateVariant::koashi, 100.0, 200.0, 0.01);
  EXPECT_LT(std::abs(coarse - fine), 0.1);
}

TEST(FindMaxDistance, BracketErrors) {
  EXPECT_THROW(qkd::find_max_distance(gys(), qkd::RateVariant::koashi,
                                      300.0, 400.0, 0.1),
               std::invalid_argument);
  qkd::DeviceConfig noiseless;
  noiseless.dark0 = 0.0;
  noiseless.dark1 = 0.0;
  noiseless.e_mis = 0.0;
  EXPECT_THROW(qkd::find_max_distance(noiseless,
                                      qkd::RateVariant::ideal_single, 0.0,
                                      400.0, 0.1),
               std::invalid_argument);
}

TEST(EvaluateVariant, VacuumSourceEarnsNoKeyExceptIdeal) {
  for (qkd::RateVariant v :
       {qkd::RateVariant::koashi, qkd::RateVariant::gllp,
        qkd::RateVariant::no_decoy}) {
    const auto ev = qkd::evaluate_variant(gys(), 20.0, 0.0, v);
    EXPECT_LE(ev.breakdown.rate, 0.0);
  }
  const auto ideal =
      qkd::evaluate_variant(gys(), 20.0, 0.0, qkd::RateVariant::ideal_single);
  EXPECT_GT(ideal.breakdown.rate, 0.0);
}

TEST(EvaluateVariant, DecoyModeIsConservativeButUsable) {
  qkd::DeviceConfig decoy_mode = gys();
  decoy_mode.mode = qkd::EstimationMode::decoy;
  const auto oracle =
      qkd::evaluate_variant(gys(), 30.0, 0.5, qkd::RateVariant::koashi);
  const auto bounded =
      qkd::evaluate_variant(decoy_mode, 30.0, 0.5, qkd::RateVariant::koashi);
  EXPECT_LE(bounded.breakdown.rate, oracle.breakdown.rate);
  EXPECT_GT(bounded.breakdown.rate, 0.0);
  EXPECT_LE(bounded.inputs.single_gain, oracle.inputs.single_gain);
  EXPECT_GE(bounded.inputs.single_qber, oracle.inputs.single_qber);
}

TEST(EvaluateVariant, DecoyModeOptimizerAvoidsEstimatorDomain) {
  qkd::DeviceConfig decoy_mode = gys();
  decoy_mode.mode = qkd::EstimationMode::decoy;
  const qkd::OptimizeResult r =
      qkd::optimize_mu(decoy_mode, 20.0, qkd::RateVariant::koashi);
  EXPECT_GT(r.mu_opt, decoy_mode.decoy_nu);
  EXPECT_TRUE(r.positive);
}

}  // namespace
