#include <doctest.h>

#include <cmath>
#include <sstream>

#include "snspd/pmatrix.hpp"
#include "reference_pmatrix.hpp"

using namespace snspd;

TEST_CASE("fitch_element reproduces the reference table entries") {
  CHECK(fitch_element(14, 0.895, 2, 2) == doctest::Approx(0.7438).epsilon(1e-4));
  CHECK(fitch_element(14, 0.895, 3, 3) == doctest::Approx(0.5706).epsilon(1e-4));
  CHECK(fitch_element(14, 0.895, 0, 1) == doctest::Approx(0.1050).epsilon(1e-4));
  CHECK(fitch_element(5, 0.3, 0, 0) == 1.0);
}

TEST_CASE("fitch_element matches direct combinatorics for two photons") {
  // both photons detected on distinct pixels: eta^2 * 13/14
  const double direct = 0.895 * 0.895 * 13.0 / 14.0;
  CHECK(fitch_element(14, 0.895, 2, 2) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("recurrence-built matrix agrees with the alternating-sum formula") {
  const auto p = build_uniform_pmatrix(14, 0.895, 10);
  for (int m = 0; m <= 10; ++m)
    for (int n = 0; n <= std::min(m, 14); ++n)
      CHECK(p.at(n, m) == doctest::Approx(fitch_element(14, 0.895, n, m)).epsilon(1e-10));
}

TEST_CASE("uniform matrix matches all 81 reference entries") {
  const auto p = build_uniform_pmatrix(14, 0.895, 8);
  for (int n = 0; n <= 8; ++n)
    for (int m = 0; m <= 8; ++m)
      CHECK(std::abs(p.at(n, m) - kReferenceMatrix[n][m]) <= 0.0001 + 1e-12);
}

TEST_CASE("single pixel reduces to the bucket detector") {
  const double eta = 0.62;
  const auto p = build_uniform_pmatrix(1, eta, 10);
  for (int m = 0; m <= 10; ++m) {
    CHECK(p.at(0, m) == doctest::Approx(std::pow(1.0 - eta, m)).epsilon(1e-12));
    if (m >= 1)
      CHECK(p.at(1, m) == doctest::Approx(1.0 - std::pow(1.0 - eta, m)).epsilon(1e-12));
  }
}

TEST_CASE("unit efficiency diagonal is the distinct-pixel product") {
  const auto p = build_uniform_pmatrix(14, 1.0, 3);
  // m photons all detected, all on distinct pixels: prod_{j<m} (1 - j/14)
  CHECK(p.at(3, 3) == doctest::Approx(13.0 * 12.0 / (14.0 * 14.0)).epsilon(1e-12));
  CHECK(p.at(2, 2) == doctest::Approx(13.0 / 14.0).epsilon(1e-12));
  CHECK(p.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("columns are stochastic and the support is n <= min(m, N)") {
  RandomStream rs(11, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const int N = 1 + static_cast<int>(rs.uniform() * 30);
    const double eta = rs.uniform();
    const int M = 12;
    const auto p = build_uniform_pmatrix(N, eta, M);
    for (int m = 0; m <= M; ++m) {
      detail::KahanSum col;
      for (int n = 0; n <= N; ++n) {
        CHECK(p.at(n, m) >= 0.0);
        CHECK(p.at(n, m) <= 1.0);
        if (n > std::min(m, N)) CHECK(p.at(n, m) == 0.0);
        col.add(p.at(n, m));
      }
      CHECK(col.value() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("weighted matrix equals the uniform one for uniform inputs") {
  std::vector<double> w(14, 1.0 / 14.0), eta(14, 0.895);
  const auto pw = build_weighted_pmatrix(w, eta, 8);
  const auto pu = build_uniform_pmatrix(14, 0.895, 8);
  for (int n = 0; n <= 14; ++n)
    for (int m = 0; m <= 8; ++m)
      CHECK(std::abs(pw.at(n, m) - pu.at(n, m)) <= 1e-10);
}

TEST_CASE("weighted matrix with all light on one pixel") {
  std::vector<double> w = {1.0, 0.0}, eta = {0.5, 0.9};
  const auto p = build_weighted_pmatrix(w, eta, 5);
  CHECK(p.at(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  for (int m = 0; m <= 5; ++m) CHECK(p.at(2, m) == 0.0);
}

TEST_CASE("weighted matrix columns are stochastic for random configs") {
  RandomStream rs(23, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const int N = 2 + static_cast<int>(rs.uniform() * 8);
    std::vector<double> w(N), eta(N);
    double wsum = 0.0;
    for (int i = 0; i < N; ++i) {
      w[i] = rs.uniform(0.01, 1.0);
      wsum += w[i];
      eta[i] = rs.uniform();
    }
    for (auto& x : w) x /= wsum;
    const auto p = build_weighted_pmatrix(w, eta, 10);
    for (int m = 0; m <= 10; ++m) {
      detail::KahanSum col;
      for (int n = 0; n <= N; ++n) col.add(p.at(n, m));
      CHECK(col.value() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("weighted matrix agrees with the Monte Carlo estimate") {
  DetectorArrayConfig cfg;
  cfg.pixel_count = 6;
  cfg.illumination_weights = {0.30, 0.25, 0.20, 0.10, 0.10, 0.05};
  cfg.pixel_efficiencies = {0.9, 0.8, 0.95, 0.5, 0.7, 0.99};
  REQUIRE(cfg.validation_errors().empty());

  const auto analytic =
      build_weighted_pmatrix(cfg.illumination_weights, cfg.pixel_efficiencies, 4);
  const auto mc = estimate_pmatrix_mc(cfg, 4, 200000, 99);
  for (int m = 0; m <= 4; ++m)
    for (int n = 0; n <= 6; ++n) {
      const double se = mc.std_error(n, m);
      CHECK(std::abs(mc.at(n, m) - analytic.at(n, m)) <= 3.0 * se + 1e-9);
    }
}

TEST_CASE("Monte Carlo estimate is deterministic and exact at m=0") {
  const auto cfg = DetectorArrayConfig::uniform(14, 0.895);
  const auto a = estimate_pmatrix_mc(cfg, 3, 5000, 1234);
  const auto b = estimate_pmatrix_mc(cfg, 3, 5000, 1234);
  CHECK(a.entries == b.entries);
  CHECK(a.at(0, 0) == 1.0);
}

TEST_CASE("poisson distribution moments and edge cases") {
  const auto zero = poisson_distribution(0.0, 10);
  CHECK(zero.probs[0] == doctest::Approx(1.0).epsilon(1e-15));

  const auto one = poisson_distribution(1.0, 40);
  CHECK(one.probs[1] / one.probs[0] == doctest::Approx(1.0).epsilon(1e-12));

  const auto four = poisson_distribution(4.0, 40);
  CHECK(four.mean() == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(four.truncation_error < 1e-12);
}

TEST_CASE("forward model: vacuum input gives zero clicks") {
  const auto p = build_uniform_pmatrix(14, 0.895, 8);
  const auto q = forward_click_stats(p, fock_distribution(0, 8));
  CHECK(q.probs[0] == doctest::Approx(1.0).epsilon(1e-15));
  for (int n = 1; n <= 14; ++n) CHECK(q.probs[n] == 0.0);
}

TEST_CASE("forward model: Fock input selects the table column") {
  const auto p = build_uniform_pmatrix(14, 0.895, 8);
  const auto q = forward_click_stats(p, fock_distribution(2, 8));
  for (int n = 0; n <= 8; ++n)
    CHECK(std::abs(q.probs[n] - kReferenceMatrix[n][2]) <= 0.0001 + 1e-12);
}

TEST_CASE("forward model matches the Poisson binomial-thinning closed form") {
  // independent oracle: Poisson(mu) light on a uniform array thins to a
  // per-pixel click probability p = 1 - exp(-mu*eta/N), pixels independent
  const double eta = 0.895;
  const int N = 14;
  const auto p = build_uniform_pmatrix(N, eta, 40);
  for (double mu : {0.1, 1.0, 2.0, 4.0}) {
    const auto q = forward_click_stats(p, poisson_distribution(mu, 40));
    const double pc = 1.0 - std::exp(-mu * eta / N);
    for (int n = 0; n <= N; ++n) {
      const double expected = detail::binomial(N, n) * std::pow(pc, n) *
                              std::pow(1.0 - pc, N - n);
      CHECK(std::abs(q.probs[n] - expected) <= 1e-6 + q.truncation_error);
    }
    if (mu == 1.0)
      CHECK(q.probs[0] == doctest::Approx(std::exp(-0.895)).epsilon(1e-6));
  }
}

TEST_CASE("forward model rejects a distribution beyond the matrix truncation") {
  const auto p = build_uniform_pmatrix(14, 0.895, 8);
  CHECK_THROWS_AS(forward_click_stats(p, poisson_distribution(1.0, 20)), std::invalid_argument);
}

TEST_CASE("matrix csv round trip") {
  const auto p = build_uniform_pmatrix(5, 0.7, 6);
  std::stringstream ss;
  write_matrix_csv(p, ss);
  const auto back = read_matrix_csv(ss);
  CHECK(back.pixel_count == 5);
  CHECK(back.max_photons == 6);
  for (int n = 0; n <= 5; ++n)
    for (int m = 0; m <= 6; ++m)
      CHECK(std::abs(back.at(n, m) - p.at(n, m)) <= 5e-7);  // 6-decimal fixed
}

TEST_CASE("matrix json round trip is exact") {
  const auto p = build_uniform_pmatrix(5, 0.7, 6);
  const nlohmann::json j = p;
  const auto back = j.get<ProbabilityMatrix>();
  CHECK(back.entries == p.entries);
}

TEST_CASE("fitch_element argument validation") {
  CHECK_THROWS_AS(fitch_element(14, 1.2, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(fitch_element(14, 0.5, 15, 0), std::invalid_argument);
  CHECK_THROWS_AS(fitch_element(14, 0.5, 0, -1), std::invalid_argument);
  CHECK_THROWS_AS(fitch_element(0, 0.5, 0, 0), std::invalid_argument);
}
