#include <doctest.h>

#include <cmath>

#include "snspd/rate_analysis.hpp"

using namespace snspd;

TEST_CASE("extract_mcr interpolates the 50% crossing") {
  std::vector<RatePoint> curve(3);
  curve[0] = {1e6, 1e6, 1.0, 0.0};
  curve[1] = {1e7, 1e7, 0.5, 0.0};
  curve[2] = {1e8, 1e8, 0.1, 0.0};
  // target 0.5 sits exactly on the middle point
  CHECK(extract_mcr(curve) == doctest::Approx(1e7).epsilon(1e-12));

  // log-linear interpolation between bracketing points
  curve[1].sde = 0.6;
  const double f = (0.6 - 0.5) / (0.6 - 0.1);
  const double expected = std::exp(std::log(1e7) + f * (std::log(1e8) - std::log(1e7)));
  CHECK(extract_mcr(curve) == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(extract_mcr({curve[0]}), std::invalid_argument);
  curve[1].sde = curve[2].sde = 1.0;  // never drops below 50%
  CHECK_THROWS_AS(extract_mcr(curve), std::invalid_argument);
}

TEST_CASE("single pixel with step recovery follows the renewal formula") {
  // Poisson arrivals at rate R, detection probability eta once the dead
  // time has elapsed: mean inter-detection time is t_dead + 1/(eta R), so
  // SDE = eta / (1 + eta R t_dead).
  auto cfg = DetectorArrayConfig::uniform(1, 0.8);
  cfg.recovery = RecoveryCurve{RecoveryForm::step, 10.0, 1.0};
  const std::vector<double> rates = {1e6, 1e7, 5e7, 2e8};
  const auto curve = sde_vs_rate(cfg, rates, 2e-3, 77);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double expected = 0.8 / (1.0 + 0.8 * rates[i] * 10e-9);
    CHECK(std::abs(curve[i].sde - expected) <= 0.02 * expected);
    CHECK(std::abs(curve[i].detection_rate_hz - rates[i] * expected) <=
          0.02 * rates[i] * expected);
  }
}

TEST_CASE("array SDE curve is monotone non-increasing in rate") {
  const auto cfg = DetectorArrayConfig::reference_array();
  std::vector<double> rates;
  for (int i = 0; i < 8; ++i) rates.push_back(1e6 * std::pow(10.0, i * 0.5));
  const auto curve = sde_vs_rate(cfg, rates, 5e-4, 123);
  CHECK(curve.front().sde == doctest::Approx(0.895).epsilon(0.02));
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(curve[i].sde <= curve[i - 1].sde + 3.0 * (curve[i].sde_err + curve[i - 1].sde_err));
}

TEST_CASE("rate curve is deterministic per point regardless of grid") {
  const auto cfg = DetectorArrayConfig::reference_array();
  const auto full = sde_vs_rate(cfg, {1e7, 1e8, 1e9}, 1e-4, 9);
  const auto single = sde_vs_rate(cfg, {1e7}, 1e-4, 9);
  CHECK(full[0].sde == single[0].sde);
  CHECK(full[0].detection_rate_hz == single[0].detection_rate_hz);
}

TEST_CASE("rate curve input validation") {
  const auto cfg = DetectorArrayConfig::reference_array();
  CHECK_THROWS_AS(sde_vs_rate(cfg, {1e6, 0.0}, 1e-4, 1), std::invalid_argument);
  auto bad = cfg;
  bad.pixel_efficiencies[0] = 2.0;
  CHECK_THROWS_AS(sde_vs_rate(bad, {1e6}, 1e-4, 1), ConfigError);
}
