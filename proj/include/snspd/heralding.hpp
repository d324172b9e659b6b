#pragma once
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "snspd/pmatrix.hpp"

namespace snspd {

enum class PairStatistics { thermal, poisson };

/// Photon-pair source feeding a heralding detector on one arm and the
/// signal mode on the other.
struct PairSourceSpec {
  PairStatistics statistics = PairStatistics::thermal;
  double mean_pairs = 0.1;
  double herald_transmission = 0.95;
  double signal_transmission = 1.0;
};

enum class HeraldCondition { exactly_n, at_least_one };

namespace detail {

inline double binom_pmf(int k, int n, double p) {
  if (k < 0 || k > n) return 0.0;
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(log_binomial(n, k) + k * std::log(p) + (n - k) * std::log(1.0 - p));
}

}  // namespace detail

/// P(herald condition | k photons at the herald detector) for a PNR
/// detector described by its click-probability matrix.
inline double herald_probability(const ProbabilityMatrix& p, HeraldCondition cond, int n_clicks,
                                 int k_photons) {
  if (k_photons > p.max_photons)
    throw std::invalid_argument("herald_probability: photon number exceeds matrix truncation");
  if (cond == HeraldCondition::exactly_n) return p.at(n_clicks, k_photons);
  return 1.0 - p.at(0, k_photons);
}

/// Same for a bucket detector of efficiency eta (click / no-click only).
inline double bucket_herald_probability(double eta, HeraldCondition cond, int n_clicks,
                                        int k_photons) {
  const double p_click = 1.0 - std::pow(1.0 - eta, k_photons);
  if (cond == HeraldCondition::at_least_one || n_clicks >= 1) return p_click;
  return 1.0 - p_click;  // exactly 0 clicks
}

namespace detail {

inline PhotonNumberDistribution pair_distribution(const PairSourceSpec& src, int max_photons) {
  return src.statistics == PairStatistics::thermal
             ? thermal_distribution(src.mean_pairs, max_photons)
             : poisson_distribution(src.mean_pairs, max_photons);
}

template <typename HeraldProb>
PhotonNumberDistribution heralded_signal(const PairSourceSpec& src, HeraldProb&& herald_prob,
                                         int max_photons) {
  const auto pairs = pair_distribution(src, max_photons);
  if (pairs.truncation_error > 1e-10)
    throw std::invalid_argument("heralded_number_distribution: truncation too small for source");

  // Bayes update over the pair number: herald photons are the t_h-thinned
  // pair number, the detector acts on what survives.
  std::vector<double> weight(max_photons + 1, 0.0);
  double total = 0.0;
  for (int m = 0; m <= max_photons; ++m) {
    double cond = 0.0;
    for (int k = 0; k <= m; ++k)
      cond += binom_pmf(k, m, src.herald_transmission) * herald_prob(k);
    weight[m] = pairs.probs[m] * cond;
    total += weight[m];
  }
  if (!(total > 0.0))
    throw std::invalid_argument("heralded_number_distribution: herald condition has zero probability");

  PhotonNumberDistribution signal;
  signal.probs.assign(max_photons + 1, 0.0);
  for (int m = 0; m <= max_photons; ++m) {
    const double w = weight[m] / total;
    if (w == 0.0) continue;
    for (int j = 0; j <= m; ++j)
      signal.probs[j] += w * binom_pmf(j, m, src.signal_transmission);
  }
  return signal;
}

}  // namespace detail

/// Signal-mode photon-number distribution conditioned on the herald
/// detector (PNR matrix) satisfying the herald condition. Exact finite sum.
inline PhotonNumberDistribution heralded_number_distribution(const PairSourceSpec& src,
                                                             const ProbabilityMatrix& detector,
                                                             HeraldCondition cond, int n_clicks,
                                                             int max_photons) {
  return detail::heralded_signal(
      src, [&](int k) { return herald_probability(detector, cond, n_clicks, k); }, max_photons);
}

/// Bucket-detector variant.
inline PhotonNumberDistribution heralded_number_distribution(const PairSourceSpec& src,
                                                             double bucket_eta,
                                                             HeraldCondition cond, int n_clicks,
                                                             int max_photons) {
  return detail::heralded_signal(
      src, [&](int k) { return bucket_herald_probability(bucket_eta, cond, n_clicks, k); },
      max_photons);
}

/// Zero-delay second-order autocorrelation of a photon-number distribution:
/// g2(0) = <m(m-1)> / <m>^2.
inline double g2_zero(const PhotonNumberDistribution& s) {
  double mean = 0.0, fac2 = 0.0;
  for (std::size_t m = 0; m < s.probs.size(); ++m) {
    mean += static_cast<double>(m) * s.probs[m];
    fac2 += static_cast<double>(m) * (static_cast<double>(m) - 1.0) * s.probs[m];
  }
  if (!(mean > 0.0)) throw std::invalid_argument("g2_zero: distribution has zero mean");
  return fac2 / (mean * mean);
}

struct G2Point {
  double nbar = 0.0;
  double g2_bucket = 0.0;
  double g2_pnr = 0.0;
  double reduction = 0.0;  // 1 - g2_pnr / g2_bucket
};

/// Heralded g2(0) with the PNR detector (exactly-1-click herald) vs a
/// bucket detector (any-click herald), scanned over the source mean.
inline std::vector<G2Point> g2_reduction_scan(PairSourceSpec src, const ProbabilityMatrix& pnr,
                                              double bucket_eta,
                                              const std::vector<double>& nbar_grid,
                                              int max_photons = 60) {
  std::vector<G2Point> out;
  out.reserve(nbar_grid.size());
  for (double nbar : nbar_grid) {
    src.mean_pairs = nbar;
    G2Point pt;
    pt.nbar = nbar;
    pt.g2_bucket = g2_zero(heralded_number_distribution(
        src, bucket_eta, HeraldCondition::at_least_one, 1, max_photons));
    pt.g2_pnr = g2_zero(heralded_number_distribution(src, pnr, HeraldCondition::exactly_n, 1,
                                                     max_photons));
    pt.reduction = 1.0 - pt.g2_pnr / pt.g2_bucket;
    out.push_back(pt);
  }
  return out;
}

inline void write_g2_scan_csv(const std::vector<G2Point>& scan, std::ostream& out) {
  out << "nbar,g2_bucket,g2_pnr,reduction\n";
  out << std::setprecision(9);
  for (const auto& p : scan)
    out << p.nbar << "," << p.g2_bucket << "," << p.g2_pnr << "," << p.reduction << "\n";
}

}  // namespace snspd
