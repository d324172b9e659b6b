#include <doctest.h>

#include <cmath>

#include "snspd/calibration.hpp"

using namespace snspd;

TEST_CASE("windowed_click_statistics uses the stream trigger metadata") {
  SimulationRun run;
  run.cfg = DetectorArrayConfig::uniform(14, 0.895);
  run.source = LightSourceSpec::pulsed_poisson(1.0);
  run.pulses = 20000;
  run.seed = 3;
  const auto result = simulate(run);

  ClickWindow window;
  const auto stats = windowed_click_statistics(result.tags, window, 15);
  CHECK(stats.trials == run.pulses);
  double sum = 0.0, mean = 0.0;
  for (std::size_t n = 0; n < stats.probs.size(); ++n) {
    sum += stats.probs[n];
    mean += static_cast<double>(n) * stats.probs[n];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  // mean clicks ~ mu * eta for weak light, darks and crosstalk negligible
  CHECK(mean == doctest::Approx(0.895).epsilon(0.02));
}

TEST_CASE("effective matrix for delta pulses matches the analytic one") {
  const auto cfg = DetectorArrayConfig::uniform(14, 0.895);
  SimulationToggles toggles;
  toggles.recovery = toggles.jitter = toggles.darks = toggles.crosstalk = false;
  ClickWindow window;
  // with recovery off a pixel can emit one tag per photon, so compare on
  // the distinct-channel count the analytic model describes
  window.mode = CountingMode::distinct_channels;
  const auto eff = calibrate_effective_pmatrix(cfg, LightSourceSpec::pulsed_fock(0), window, 4,
                                               40000, 17, toggles);
  const auto analytic = build_uniform_pmatrix(14, 0.895, 4);
  for (int m = 0; m <= 4; ++m) {
    double sum = 0.0;
    for (int n = 0; n <= eff.pixel_count; ++n) sum += eff.at(n, m);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (int n = 0; n <= 8; ++n) {
      const double se = eff.std_error(n, m);
      CHECK(std::abs(eff.at(n, m) - analytic.at(n, m)) <= 3.0 * se + 1e-3);
    }
  }
}

TEST_CASE("effective matrix sees re-triggering on long pulses") {
  // pulse much longer than the recovery: a single pixel can click twice,
  // so the all-tags count for m photons can exceed what the simultaneous
  // model allows on one pixel
  auto cfg = DetectorArrayConfig::uniform(1, 1.0);
  cfg.recovery = RecoveryCurve{RecoveryForm::step, 2.0, 1.0};
  SimulationToggles toggles;
  toggles.jitter = toggles.darks = toggles.crosstalk = false;
  ClickWindow window;
  window.width_ns = 60.0;
  const auto source = LightSourceSpec::pulsed_fock(0, 1e6, PulseShape::square, 50.0);
  const auto eff = calibrate_effective_pmatrix(cfg, source, window, 3, 20000, 19, toggles);
  double multi = 0.0;
  for (int n = 2; n <= eff.pixel_count; ++n) multi += eff.at(n, 3);
  CHECK(multi > 0.5);  // three photons spread over 50 ns nearly always re-trigger
}
