#pragma once
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "snspd/array_model.hpp"
#include "snspd/rng.hpp"

namespace snspd {

/// Click-probability matrix: entry (n, m) is the probability of registering
/// exactly n clicks when m photons are sent. Rows n = 0..pixel_count,
/// columns m = 0..max_photons; every column sums to 1.
struct ProbabilityMatrix {
  int pixel_count = 0;
  int max_photons = 0;
  std::vector<double> entries;     // (pixel_count+1) x (max_photons+1), row-major
  std::vector<double> std_errors;  // same layout, only for Monte Carlo estimates

  double at(int clicks, int photons) const {
    return entries[static_cast<std::size_t>(clicks) * (max_photons + 1) + photons];
  }
  double& at(int clicks, int photons) {
    return entries[static_cast<std::size_t>(clicks) * (max_photons + 1) + photons];
  }
  double std_error(int clicks, int photons) const {
    return std_errors.empty()
               ? 0.0
               : std_errors[static_cast<std::size_t>(clicks) * (max_photons + 1) + photons];
  }

  static ProbabilityMatrix zeros(int pixel_count, int max_photons) {
    ProbabilityMatrix p;
    p.pixel_count = pixel_count;
    p.max_photons = max_photons;
    p.entries.assign(static_cast<std::size_t>(pixel_count + 1) * (max_photons + 1), 0.0);
    return p;
  }

  /// Ideal photon-number resolver: n clicks iff n photons.
  static ProbabilityMatrix identity(int size) {
    auto p = zeros(size, size);
    for (int m = 0; m <= size; ++m) p.at(m, m) = 1.0;
    return p;
  }
};

/// Photon-number distribution S_m, m = 0..max_photons. `truncation_error`
/// carries the tail mass removed by truncation (before renormalization).
struct PhotonNumberDistribution {
  std::vector<double> probs;
  double truncation_error = 0.0;

  int max_photons() const { return static_cast<int>(probs.size()) - 1; }

  double mean() const {
    double s = 0.0;
    for (std::size_t m = 0; m < probs.size(); ++m) s += static_cast<double>(m) * probs[m];
    return s;
  }
};

/// Click-count distribution Q_n per pulse window. `counts`/`trials` are
/// present for empirical statistics; `truncation_error` is the mass lost to
/// photon-number truncation in a forward model.
struct ClickStatistics {
  std::vector<double> probs;
  std::vector<std::uint64_t> counts;
  std::uint64_t trials = 0;
  std::vector<double> std_errors;
  double truncation_error = 0.0;
};

namespace detail {

inline double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double binomial(int n, int k) { return std::round(std::exp(log_binomial(n, k))); }

}  // namespace detail

/// P(n clicks | m photons) for a uniform array of N pixels with per-photon
/// detection efficiency eta:
///   P(n|m) = C(N,n) * sum_{k=0..n} (-1)^k C(n,k) (1 - eta + (n-k) eta/N)^m
/// Alternating sum accumulated with compensated summation; binomials go
/// through lgamma above N = 20 where the direct products lose exactness.
inline double fitch_element(int pixel_count, double eta, int clicks, int photons) {
  const int N = pixel_count;
  if (N < 1) throw std::invalid_argument("fitch_element: pixel count must be positive");
  if (clicks < 0 || clicks > N) throw std::invalid_argument("fitch_element: clicks out of range");
  if (photons < 0) throw std::invalid_argument("fitch_element: photons must be non-negative");
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::invalid_argument("fitch_element: efficiency out of [0,1]");

  if (clicks > photons) return 0.0;
  if (photons == 0) return 1.0;  // clicks == 0 here

  const bool log_domain = N > 20;
  detail::KahanSum sum;
  for (int k = 0; k <= clicks; ++k) {
    const double base = 1.0 - eta + (clicks - k) * eta / N;
    double term;
    if (log_domain) {
      if (base <= 0.0) {
        term = 0.0;
      } else {
        term = std::exp(detail::log_binomial(clicks, k) + photons * std::log(base));
      }
    } else {
      term = detail::binomial(clicks, k) * std::pow(base, photons);
    }
    sum.add((k % 2 == 0) ? term : -term);
  }
  double result = log_domain ? std::exp(detail::log_binomial(N, clicks)) * sum.value()
                             : detail::binomial(N, clicks) * sum.value();
  return std::clamp(result, 0.0, 1.0);
}

/// Full P matrix for a uniform array, columns m = 0..max_photons.
///
/// Columns are built by the forward recurrence on the number of distinct
/// clicked pixels: each photon clicks a new pixel with probability
/// eta * (N - n)/N. This is algebraically identical to fitch_element (the
/// agreement is asserted in the tests) but uses only positive arithmetic,
/// so column sums stay at 1 to machine precision for any N.
inline ProbabilityMatrix build_uniform_pmatrix(int pixel_count, double eta, int max_photons) {
  const int N = pixel_count;
  if (N < 1) throw std::invalid_argument("build_uniform_pmatrix: pixel count must be positive");
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::invalid_argument("build_uniform_pmatrix: efficiency out of [0,1]");
  auto p = ProbabilityMatrix::zeros(N, max_photons);
  std::vector<double> col(N + 1, 0.0), next(N + 1, 0.0);
  col[0] = 1.0;
  p.at(0, 0) = 1.0;
  for (int m = 1; m <= max_photons; ++m) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int n = 0; n <= std::min(m - 1, N); ++n) {
      if (col[n] == 0.0) continue;
      const double p_new = eta * static_cast<double>(N - n) / N;
      if (n < N) next[n + 1] += col[n] * p_new;
      next[n] += col[n] * (1.0 - p_new);
    }
    col.swap(next);
    for (int n = 0; n <= std::min(m, N); ++n) p.at(n, m) = col[n];
  }
  return p;
}

/// Exact P matrix for per-pixel landing weights and efficiencies, by
/// inclusion-exclusion over pixel subsets. With q_i = w_i * eta_i and
/// Q = sum q_i, the probability that all clicks are confined to subset T is
/// (1 - Q + q(T))^m, and
///   P(n|m) = sum_{a<=n} (-1)^{n-a} C(N-a, n-a) * sum_{|T|=a} (1-Q+q(T))^m.
/// O(2^N) per column; limited to N <= 20.
inline ProbabilityMatrix build_weighted_pmatrix(std::span<const double> weights,
                                                std::span<const double> efficiencies,
                                                int max_photons) {
  const int N = static_cast<int>(weights.size());
  if (N < 1 || efficiencies.size() != weights.size())
    throw std::invalid_argument("build_weighted_pmatrix: inconsistent inputs");
  if (N > 20)
    throw std::invalid_argument("build_weighted_pmatrix: subset enumeration limited to 20 pixels");

  std::vector<double> q(N);
  double q_total = 0.0;
  for (int i = 0; i < N; ++i) {
    q[i] = weights[i] * efficiencies[i];
    q_total += q[i];
  }

  // subset sums of q, built incrementally from the lowest set bit
  const std::size_t n_masks = std::size_t{1} << N;
  std::vector<double> qsum(n_masks, 0.0);
  for (std::size_t mask = 1; mask < n_masks; ++mask) {
    const std::size_t low = mask & (~mask + 1);
    qsum[mask] = qsum[mask ^ low] + q[std::countr_zero(low)];
  }

  auto p = ProbabilityMatrix::zeros(N, max_photons);
  std::vector<detail::KahanSum> by_size(N + 1);
  for (int m = 0; m <= max_photons; ++m) {
    for (auto& s : by_size) s = {};
    for (std::size_t mask = 0; mask < n_masks; ++mask)
      by_size[std::popcount(mask)].add(std::pow(1.0 - q_total + qsum[mask], m));
    for (int n = 0; n <= std::min(m, N); ++n) {
      detail::KahanSum acc;
      for (int a = 0; a <= n; ++a) {
        const double c = detail::binomial(N - a, n - a) * by_size[a].value();
        acc.add(((n - a) % 2 == 0) ? c : -c);
      }
      p.at(n, m) = std::clamp(acc.value(), 0.0, 1.0);
    }
  }
  return p;
}

/// Monte Carlo P matrix: for each column m, `trials` pulses of exactly m
/// simultaneous photons are simulated (no recovery, crosstalk or darks) and
/// distinct clicked pixels are tallied. Deterministic for a given seed; each
/// column uses its own substream.
inline ProbabilityMatrix estimate_pmatrix_mc(const DetectorArrayConfig& cfg, int max_photons,
                                             std::uint64_t trials, std::uint64_t seed) {
  cfg.validated();
  if (trials < 1) throw std::invalid_argument("estimate_pmatrix_mc: trials must be at least 1");
  const int N = cfg.pixel_count;
  if (N > 64)
    throw std::invalid_argument("estimate_pmatrix_mc: limited to 64 pixels");

  std::vector<double> cum_w(N);
  double acc = 0.0;
  for (int i = 0; i < N; ++i) {
    acc += cfg.illumination_weights[i];
    cum_w[i] = acc;
  }
  cum_w[N - 1] = 1.0;

  auto p = ProbabilityMatrix::zeros(N, max_photons);
  p.std_errors.assign(p.entries.size(), 0.0);
  for (int m = 0; m <= max_photons; ++m) {
    RandomStream rs(seed, static_cast<std::uint64_t>(m));
    std::vector<std::uint64_t> tally(N + 1, 0);
    for (std::uint64_t t = 0; t < trials; ++t) {
      std::uint64_t clicked = 0;
      for (int ph = 0; ph < m; ++ph) {
        const double u = rs.uniform();
        const int pix = static_cast<int>(
            std::upper_bound(cum_w.begin(), cum_w.end(), u) - cum_w.begin());
        if (rs.uniform() < cfg.pixel_efficiencies[pix]) clicked |= std::uint64_t{1} << pix;
      }
      ++tally[std::popcount(clicked)];
    }
    for (int n = 0; n <= N; ++n) {
      const double prob = static_cast<double>(tally[n]) / static_cast<double>(trials);
      p.at(n, m) = prob;
      p.std_errors[static_cast<std::size_t>(n) * (max_photons + 1) + m] =
          std::sqrt(prob * (1.0 - prob) / static_cast<double>(trials));
    }
  }
  return p;
}

/// Forward model Q_n = sum_m P_nm S_m.
inline ClickStatistics forward_click_stats(const ProbabilityMatrix& p,
                                           const PhotonNumberDistribution& s) {
  if (s.max_photons() > p.max_photons)
    throw std::invalid_argument("forward_click_stats: distribution exceeds matrix truncation");
  ClickStatistics q;
  q.probs.assign(p.pixel_count + 1, 0.0);
  detail::KahanSum total;
  for (int n = 0; n <= p.pixel_count; ++n) {
    detail::KahanSum acc;
    for (int m = 0; m <= s.max_photons(); ++m) acc.add(p.at(n, m) * s.probs[m]);
    q.probs[n] = acc.value();
    total.add(acc.value());
  }
  q.truncation_error = std::abs(1.0 - total.value()) + s.truncation_error;
  return q;
}

/// Poisson photon-number distribution with mean mu, truncated at max_photons
/// and renormalized; the removed tail mass is reported.
inline PhotonNumberDistribution poisson_distribution(double mu, int max_photons) {
  if (mu < 0.0) throw std::invalid_argument("poisson_distribution: mu must be non-negative");
  PhotonNumberDistribution s;
  s.probs.assign(max_photons + 1, 0.0);
  double term = std::exp(-mu);
  double sum = 0.0;
  for (int m = 0; m <= max_photons; ++m) {
    s.probs[m] = term;
    sum += term;
    term *= mu / (m + 1);
  }
  s.truncation_error = 1.0 - sum;
  if (sum > 0.0)
    for (auto& v : s.probs) v /= sum;
  return s;
}

/// Thermal (geometric) photon-number distribution with mean nbar.
inline PhotonNumberDistribution thermal_distribution(double nbar, int max_photons) {
  if (nbar < 0.0) throw std::invalid_argument("thermal_distribution: nbar must be non-negative");
  PhotonNumberDistribution s;
  s.probs.assign(max_photons + 1, 0.0);
  double term = 1.0 / (1.0 + nbar);
  const double ratio = nbar / (1.0 + nbar);
  double sum = 0.0;
  for (int m = 0; m <= max_photons; ++m) {
    s.probs[m] = term;
    sum += term;
    term *= ratio;
  }
  s.truncation_error = 1.0 - sum;
  if (sum > 0.0)
    for (auto& v : s.probs) v /= sum;
  return s;
}

/// Fock state: all mass at photon number m.
inline PhotonNumberDistribution fock_distribution(int m, int max_photons) {
  if (m < 0 || m > max_photons) throw std::invalid_argument("fock_distribution: m out of range");
  PhotonNumberDistribution s;
  s.probs.assign(max_photons + 1, 0.0);
  s.probs[m] = 1.0;
  return s;
}

// --- serialization ----------------------------------------------------------

/// CSV layout: row = clicks, column = photons, 6-decimal fixed point.
inline void write_matrix_csv(const ProbabilityMatrix& p, std::ostream& out) {
  out << "clicks";
  for (int m = 0; m <= p.max_photons; ++m) out << ",m" << m;
  out << "\n" << std::fixed << std::setprecision(6);
  for (int n = 0; n <= p.pixel_count; ++n) {
    out << n;
    for (int m = 0; m <= p.max_photons; ++m) out << "," << p.at(n, m);
    out << "\n";
  }
}

inline ProbabilityMatrix read_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("matrix csv: empty input");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        first = false;
        continue;
      }
      row.push_back(std::stod(cell));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("matrix csv: no data rows");
  ProbabilityMatrix p;
  p.pixel_count = static_cast<int>(rows.size()) - 1;
  p.max_photons = static_cast<int>(rows[0].size()) - 1;
  p.entries.reserve(rows.size() * rows[0].size());
  for (const auto& row : rows) {
    if (row.size() != rows[0].size()) throw std::runtime_error("matrix csv: ragged rows");
    p.entries.insert(p.entries.end(), row.begin(), row.end());
  }
  return p;
}

inline void to_json(nlohmann::json& j, const ProbabilityMatrix& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (int n = 0; n <= p.pixel_count; ++n) {
    nlohmann::json row = nlohmann::json::array();
    for (int m = 0; m <= p.max_photons; ++m) row.push_back(p.at(n, m));
    rows.push_back(std::move(row));
  }
  j = {{"pixel_count", p.pixel_count}, {"max_photons", p.max_photons}, {"entries", rows}};
}

inline void from_json(const nlohmann::json& j, ProbabilityMatrix& p) {
  p.pixel_count = j.at("pixel_count").get<int>();
  p.max_photons = j.at("max_photons").get<int>();
  p.entries.clear();
  for (const auto& row : j.at("entries"))
    for (const auto& v : row) p.entries.push_back(v.get<double>());
  if (p.entries.size() !=
      static_cast<std::size_t>(p.pixel_count + 1) * (p.max_photons + 1))
    throw std::invalid_argument("probability matrix json: entry count mismatch");
}

inline void to_json(nlohmann::json& j, const ClickStatistics& q) {
  j = {{"probs", q.probs}, {"trials", q.trials}};
  if (!q.counts.empty()) j["counts"] = q.counts;
  if (!q.std_errors.empty()) j["std_errors"] = q.std_errors;
}

inline void from_json(const nlohmann::json& j, ClickStatistics& q) {
  q.probs = j.at("probs").get<std::vector<double>>();
  q.trials = j.value("trials", std::uint64_t{0});
  if (j.contains("counts")) q.counts = j.at("counts").get<std::vector<std::uint64_t>>();
  if (j.contains("std_errors")) q.std_errors = j.at("std_errors").get<std::vector<double>>();
}

inline void to_json(nlohmann::json& j, const PhotonNumberDistribution& s) {
  j = {{"probs", s.probs}, {"truncation_error", s.truncation_error}};
}

inline void from_json(const nlohmann::json& j, PhotonNumberDistribution& s) {
  s.probs = j.at("probs").get<std::vector<double>>();
  s.truncation_error = j.value("truncation_error", 0.0);
}

}  // namespace snspd
