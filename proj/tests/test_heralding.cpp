#include <doctest.h>

#include <cmath>

#include "snspd/heralding.hpp"

using namespace snspd;

TEST_CASE("g2_zero on textbook distributions") {
  CHECK(g2_zero(fock_distribution(1, 10)) == 0.0);
  CHECK(g2_zero(fock_distribution(2, 10)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g2_zero(poisson_distribution(0.7, 60)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g2_zero(thermal_distribution(0.2, 80)) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK_THROWS_AS(g2_zero(fock_distribution(0, 5)), std::invalid_argument);
}

TEST_CASE("perfect PNR herald on a thermal source prepares a pure Fock state") {
  PairSourceSpec src;
  src.statistics = PairStatistics::thermal;
  src.mean_pairs = 0.3;
  src.herald_transmission = 1.0;
  src.signal_transmission = 1.0;
  const auto p = ProbabilityMatrix::identity(40);
  const auto s = heralded_number_distribution(src, p, HeraldCondition::exactly_n, 1, 40);
  CHECK(s.probs[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g2_zero(s) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("heralded distributions are normalized") {
  PairSourceSpec src;
  src.mean_pairs = 0.25;
  src.herald_transmission = 0.95;
  src.signal_transmission = 0.8;
  const auto p = build_uniform_pmatrix(14, 0.895, 60);
  for (auto cond : {HeraldCondition::exactly_n, HeraldCondition::at_least_one}) {
    const auto s = heralded_number_distribution(src, p, cond, 1, 60);
    double sum = 0.0;
    for (double v : s.probs) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("g2 is invariant under signal-arm loss") {
  // binomial thinning scales <m> and <m(m-1)> by t and t^2, leaving g2 fixed
  PairSourceSpec src;
  src.mean_pairs = 0.4;
  src.herald_transmission = 0.9;
  const auto p = build_uniform_pmatrix(14, 0.895, 60);
  src.signal_transmission = 1.0;
  const double g_full = g2_zero(heralded_number_distribution(src, p, HeraldCondition::exactly_n, 1, 60));
  src.signal_transmission = 0.3;
  const double g_lossy = g2_zero(heralded_number_distribution(src, p, HeraldCondition::exactly_n, 1, 60));
  CHECK(std::abs(g_full - g_lossy) <= 1e-9);
}

TEST_CASE("heralded distribution matches an independent truncated sum") {
  // direct oracle: iterate pairs m, herald photons k, signal photons j
  PairSourceSpec src;
  src.statistics = PairStatistics::thermal;
  src.mean_pairs = 0.2;
  src.herald_transmission = 0.95;
  src.signal_transmission = 1.0;
  const double eta = 0.9;
  const int M = 60;

  std::vector<double> oracle(M + 1, 0.0);
  double norm = 0.0;
  for (int m = 0; m <= M; ++m) {
    const double pm = std::pow(0.2 / 1.2, m) / 1.2;  // thermal pmf, nbar = 0.2
    double herald = 0.0;
    for (int k = 0; k <= m; ++k) {
      double binom = 1.0;
      for (int i = 0; i < k; ++i) binom *= static_cast<double>(m - i) / (i + 1);
      const double pk = binom * std::pow(0.95, k) * std::pow(0.05, m - k);
      herald += pk * (1.0 - std::pow(1.0 - eta, k));  // bucket clicks at all
    }
    oracle[m] = pm * herald;
    norm += oracle[m];
  }
  for (auto& v : oracle) v /= norm;

  const auto s = heralded_number_distribution(src, eta, HeraldCondition::at_least_one, 1, M);
  for (int m = 0; m <= 10; ++m)
    CHECK(s.probs[m] == doctest::Approx(oracle[m]).epsilon(1e-10));
  // an efficient bucket herald biases strongly toward single pairs
  CHECK(g2_zero(s) < 1.0);
  CHECK(g2_zero(s) > 0.0);
}

TEST_CASE("PNR heralding never exceeds the bucket g2") {
  PairSourceSpec src;
  src.herald_transmission = 0.95;
  const auto p = build_uniform_pmatrix(14, 0.895, 60);
  std::vector<double> grid;
  for (double nbar = 0.05; nbar <= 1.0; nbar += 0.05) grid.push_back(nbar);
  const auto scan = g2_reduction_scan(src, p, 0.895, grid);
  REQUIRE(scan.size() == grid.size());
  for (const auto& pt : scan) {
    CHECK(pt.g2_pnr <= pt.g2_bucket + 1e-12);
    CHECK(pt.reduction >= -1e-12);
    CHECK(pt.g2_bucket <= 2.0 + 1e-9);
  }
  // the exactly-one-click herald rejects a large share of multi-pair events
  for (const auto& pt : scan) CHECK(pt.reduction > 0.3);
}

TEST_CASE("impossible herald conditions are rejected") {
  PairSourceSpec src;
  src.mean_pairs = 0.0;  // vacuum source can never produce a click
  const auto p = build_uniform_pmatrix(14, 0.895, 20);
  CHECK_THROWS_AS(heralded_number_distribution(src, p, HeraldCondition::exactly_n, 1, 20),
                  std::invalid_argument);
}
