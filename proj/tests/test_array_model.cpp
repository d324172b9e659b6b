#include <doctest.h>

#include <cmath>

#include "snspd/array_model.hpp"
#include "snspd/rng.hpp"

using namespace snspd;

TEST_CASE("recovery fraction follows the configured form") {
  RecoveryCurve exp_rc = calibrate_recovery(1.0, 6.0);
  CHECK(exp_rc.tau_ns == doctest::Approx(5.0 / std::log(10.0)).epsilon(1e-12));
  CHECK(exp_rc.fraction(0.5) == 0.0);           // inside the dead time
  CHECK(exp_rc.fraction(6.0) == doctest::Approx(0.9).epsilon(1e-3));

  RecoveryCurve step_rc{RecoveryForm::step, 5.0, 1.0};
  CHECK(step_rc.fraction(4.999) == 0.0);
  CHECK(step_rc.fraction(5.0) == 1.0);  // boundary belongs to the recovered side
  CHECK(step_rc.fraction(100.0) == 1.0);
}

TEST_CASE("calibrate_recovery analytic inversions") {
  CHECK(calibrate_recovery(0.0, 6.0).tau_ns == doctest::Approx(2.6058).epsilon(1e-4));
  CHECK_THROWS_AS(calibrate_recovery(6.0, 6.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_recovery(-1.0, 6.0), std::invalid_argument);
}

TEST_CASE("calibration round trip: r(rt90) = 0.9 for random valid inputs") {
  RandomStream rs(42, 0);
  for (int i = 0; i < 200; ++i) {
    const double t_dead = rs.uniform(0.0, 10.0);
    const double rt90 = t_dead + rs.uniform(0.1, 20.0);
    const auto rc = calibrate_recovery(t_dead, rt90);
    CHECK(rc.fraction(rt90) == doctest::Approx(0.9).epsilon(1e-9));
  }
}

TEST_CASE("recovery fraction is monotone non-decreasing") {
  RandomStream rs(7, 0);
  for (int i = 0; i < 100; ++i) {
    RecoveryCurve rc;
    rc.form = (i % 2 == 0) ? RecoveryForm::exponential : RecoveryForm::step;
    rc.dead_time_ns = rs.uniform(0.0, 8.0);
    rc.tau_ns = rs.uniform(0.1, 5.0);
    double prev = -1.0;
    for (double dt = 0.0; dt <= 40.0; dt += 0.11) {
      const double r = rc.fraction(dt);
      CHECK(r >= prev);
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
      prev = r;
    }
  }
}

TEST_CASE("validate_config accepts the reference array") {
  const auto cfg = DetectorArrayConfig::reference_array();
  CHECK(cfg.validation_errors().empty());
  CHECK(cfg.array_efficiency() == doctest::Approx(0.895).epsilon(1e-12));
  CHECK_NOTHROW(cfg.validated());
}

TEST_CASE("validate_config lists every violated invariant") {
  auto cfg = DetectorArrayConfig::uniform(14, 0.895);

  SUBCASE("weights not normalized") {
    for (auto& w : cfg.illumination_weights) w *= 0.9;
    const auto errs = cfg.validation_errors();
    REQUIRE(errs.size() == 1);
    CHECK(errs[0] == "weights not normalized");
  }
  SUBCASE("efficiency out of range") {
    cfg.pixel_efficiencies[3] = 1.2;
    const auto errs = cfg.validation_errors();
    REQUIRE(!errs.empty());
    CHECK(errs[0] == "efficiency out of range at pixel 3");
  }
  SUBCASE("multiple violations reported together") {
    cfg.pixel_efficiencies[0] = -0.1;
    cfg.jitter_fwhm_ps = -1.0;
    cfg.crosstalk.pairs.push_back({0, 0, 0.5});
    CHECK(cfg.validation_errors().size() == 3);
    CHECK_THROWS_AS(cfg.validated(), ConfigError);
  }
}

TEST_CASE("perturbing any bounded field past its bound flips validation") {
  auto cfg = DetectorArrayConfig::reference_array();
  REQUIRE(cfg.validation_errors().empty());

  auto broken = cfg;
  broken.pixel_efficiencies[7] = std::nextafter(1.0, 2.0) + 1e-9;
  CHECK(!broken.validation_errors().empty());

  broken = cfg;
  broken.illumination_weights[0] += 1e-9;
  CHECK(!broken.validation_errors().empty());

  broken = cfg;
  broken.dark_rate_per_pixel_cps = -1e-9;
  CHECK(!broken.validation_errors().empty());

  broken = cfg;
  broken.crosstalk.pairs[0].probability = 1.0;
  CHECK(!broken.validation_errors().empty());
}

TEST_CASE("config json round trip") {
  auto cfg = DetectorArrayConfig::reference_array();
  cfg.illumination_weights.assign(14, 0.0);
  // two groups of 7 with uneven illumination
  for (int i = 0; i < 7; ++i) cfg.illumination_weights[i] = 0.09;
  for (int i = 7; i < 14; ++i) cfg.illumination_weights[i] = 0.37 / 7;
  REQUIRE(cfg.validation_errors().empty());

  const nlohmann::json j = cfg;
  const auto back = j.get<DetectorArrayConfig>();
  CHECK(back.pixel_count == cfg.pixel_count);
  CHECK(back.pixel_efficiencies == cfg.pixel_efficiencies);
  CHECK(back.illumination_weights == cfg.illumination_weights);
  CHECK(back.recovery.dead_time_ns == cfg.recovery.dead_time_ns);
  CHECK(back.recovery.tau_ns == cfg.recovery.tau_ns);
  CHECK(back.crosstalk.pairs.size() == cfg.crosstalk.pairs.size());
  CHECK(back.crosstalk.pair_probability(3, 4) == cfg.crosstalk.pair_probability(3, 4));
}

TEST_CASE("chain adjacency has 13 unordered pairs for 14 pixels") {
  const auto m = CrosstalkModel::chain(14, 0.005);
  CHECK(m.pairs.size() == 26);
  CHECK(m.pair_probability(0, 1) == 0.005);
  CHECK(m.pair_probability(1, 0) == 0.005);
  CHECK(m.pair_probability(0, 2) == 0.0);  // non-adjacent
}
