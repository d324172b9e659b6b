#pragma once
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "snspd/pmatrix.hpp"

namespace snspd {

struct MuFit {
  double mu = 0.0;
  double std_error = 0.0;
  double chi2 = 0.0;
  int chi2_dof = 0;
  double log_likelihood = 0.0;
  bool converged = false;
};

namespace detail {

/// Log-likelihood and its analytic mu-derivative for multinomial click
/// counts under Q(mu) = P * Poisson(mu).
struct PoissonClickLikelihood {
  const ProbabilityMatrix& p;
  const std::vector<double>& weights;  // counts (or probabilities)
  int max_photons;

  double operator()(double mu) const {
    const auto s = poisson_distribution(mu, max_photons);
    double ll = 0.0;
    for (std::size_t n = 0; n < weights.size(); ++n) {
      if (weights[n] <= 0.0) continue;
      double qn = 0.0;
      for (int m = 0; m <= max_photons; ++m) qn += p.at(static_cast<int>(n), m) * s.probs[m];
      ll += weights[n] * std::log(std::max(qn, 1e-300));
    }
    return ll;
  }

  double derivative(double mu) const {
    const auto s = poisson_distribution(std::max(mu, 1e-12), max_photons);
    double d = 0.0;
    for (std::size_t n = 0; n < weights.size(); ++n) {
      if (weights[n] <= 0.0) continue;
      double qn = 0.0, dqn = 0.0;
      for (int m = 0; m <= max_photons; ++m) {
        const double pnm = p.at(static_cast<int>(n), m);
        qn += pnm * s.probs[m];
        dqn += pnm * s.probs[m] * (m / std::max(mu, 1e-12) - 1.0);
      }
      d += weights[n] * dqn / std::max(qn, 1e-300);
    }
    return d;
  }
};

}  // namespace detail

/// Maximum-likelihood Poisson mean from measured click statistics: golden
/// section on the (unimodal) multinomial likelihood, refined by bisection on
/// the analytic derivative. Standard error from the observed Fisher
/// information, goodness-of-fit as Pearson chi-squared against the model.
inline MuFit fit_poisson_mu(const ClickStatistics& q, const ProbabilityMatrix& p,
                            int max_photons = 40) {
  if (q.probs.empty()) throw std::invalid_argument("fit_poisson_mu: empty click statistics");
  if (static_cast<int>(q.probs.size()) - 1 > p.pixel_count)
    throw std::invalid_argument("fit_poisson_mu: more click bins than detector outcomes");
  max_photons = std::min(max_photons, p.max_photons);

  std::vector<double> weights(q.probs.size());
  for (std::size_t n = 0; n < weights.size(); ++n)
    weights[n] = n < q.counts.size() && q.trials > 0 ? static_cast<double>(q.counts[n])
                                                     : q.probs[n];

  double mean_clicks = 0.0, total_weight = 0.0;
  for (std::size_t n = 0; n < weights.size(); ++n) {
    mean_clicks += static_cast<double>(n) * weights[n];
    total_weight += weights[n];
  }
  if (total_weight <= 0.0) throw std::invalid_argument("fit_poisson_mu: zero total weight");
  mean_clicks /= total_weight;

  MuFit fit;
  if (mean_clicks == 0.0) {
    // all mass at zero clicks: the MLE sits at the mu = 0 boundary
    fit.mu = 0.0;
    fit.converged = true;
    return fit;
  }

  const double array_eff = std::max(1.0 - p.at(0, 1), 1e-6);
  double lo = 1e-6;
  double hi = std::max(4.0 * mean_clicks / array_eff, 1e-3);

  detail::PoissonClickLikelihood ll{p, weights, max_photons};

  // golden-section maximization
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = ll(x1), f2 = ll(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-10 * std::max(1.0, b); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = ll(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = ll(x1);
    }
  }
  double mu = 0.5 * (a + b);

  // refine on the derivative if a sign change brackets the root
  double da = ll.derivative(std::max(a * 0.5, 1e-9));
  double db = ll.derivative(b * 2.0);
  if (da > 0.0 && db < 0.0) {
    double ra = std::max(a * 0.5, 1e-9), rb = b * 2.0;
    for (int it = 0; it < 200 && (rb - ra) > 1e-13 * std::max(1.0, rb); ++it) {
      const double mid = 0.5 * (ra + rb);
      if (ll.derivative(mid) > 0.0)
        ra = mid;
      else
        rb = mid;
    }
    mu = 0.5 * (ra + rb);
  }

  fit.mu = mu;
  fit.converged = true;
  fit.log_likelihood = ll(mu);

  const double h = 1e-5 * std::max(mu, 1.0);
  const double info = -(ll.derivative(mu + h) - ll.derivative(mu - h)) / (2.0 * h);
  fit.std_error = info > 0.0 ? 1.0 / std::sqrt(info) : 0.0;

  if (q.trials > 0) {
    const auto model = forward_click_stats(p, poisson_distribution(mu, max_photons));
    const double t = static_cast<double>(q.trials);
    for (std::size_t n = 0; n < q.probs.size() && n < model.probs.size(); ++n) {
      const double expected = t * model.probs[n];
      if (expected < 5.0) continue;
      const double observed = t * q.probs[n];
      fit.chi2 += (observed - expected) * (observed - expected) / expected;
      ++fit.chi2_dof;
    }
    fit.chi2_dof = std::max(fit.chi2_dof - 1, 0);  // one fitted parameter
  }
  return fit;
}

struct ReconstructionResult {
  PhotonNumberDistribution distribution;
  double residual = 0.0;  // ||Q - P*S||_2 at the final iterate
  int iterations = 0;
  bool converged = false;
  double condition_number = 0.0;          // 2-norm condition of P (over its row space)
  std::vector<double> objective_trace;    // squared residual per iteration
  double max_simplex_violation = 0.0;     // max |sum(S) - 1| seen across iterations
};

namespace detail {

/// 2-norm condition number of P via Jacobi eigenvalues of P P^T.
inline double pmatrix_condition(const ProbabilityMatrix& p) {
  const int r = p.pixel_count + 1;
  std::vector<double> a(static_cast<std::size_t>(r) * r, 0.0);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      double s = 0.0;
      for (int m = 0; m <= p.max_photons; ++m) s += p.at(i, m) * p.at(j, m);
      a[static_cast<std::size_t>(i) * r + j] = s;
    }
  auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * r + j]; };
  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-24) break;
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j) {
        if (std::abs(at(i, j)) < 1e-300) continue;
        const double theta = 0.5 * std::atan2(2.0 * at(i, j), at(i, i) - at(j, j));
        const double c = std::cos(theta), s = std::sin(theta);
        for (int k = 0; k < r; ++k) {
          const double aik = at(i, k), ajk = at(j, k);
          at(i, k) = c * aik + s * ajk;
          at(j, k) = -s * aik + c * ajk;
        }
        for (int k = 0; k < r; ++k) {
          const double aki = at(k, i), akj = at(k, j);
          at(k, i) = c * aki + s * akj;
          at(k, j) = -s * aki + c * akj;
        }
      }
  }
  double lmax = 0.0, lmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < r; ++i) {
    const double l = at(i, i);
    if (l > lmax) lmax = l;
    if (l > 1e-14 && l < lmin) lmin = l;
  }
  return lmin < std::numeric_limits<double>::infinity() ? std::sqrt(lmax / lmin) : 0.0;
}

}  // namespace detail

/// Nonparametric inversion of Q = P*S on the probability simplex by
/// multiplicative (Richardson-Lucy form) updates from a uniform start.
/// The squared residual is tracked per iteration; the update that would
/// increase it is rejected and iteration stops, so the reported trace is
/// non-increasing. Simplex membership (S >= 0, sum = 1) holds at every
/// iterate because the P columns are stochastic.
inline ReconstructionResult reconstruct_distribution(const ClickStatistics& q,
                                                     const ProbabilityMatrix& p, int max_photons,
                                                     int max_iterations = 100000,
                                                     double tol = 1e-12) {
  if (static_cast<int>(q.probs.size()) - 1 > p.pixel_count)
    throw std::invalid_argument("reconstruct_distribution: more click bins than outcomes");
  if (max_photons > p.max_photons)
    throw std::invalid_argument("reconstruct_distribution: truncation exceeds matrix");

  const int rows = p.pixel_count + 1;
  const int cols = max_photons + 1;
  std::vector<double> qv(rows, 0.0);
  for (std::size_t n = 0; n < q.probs.size(); ++n) qv[n] = q.probs[n];

  ReconstructionResult result;
  result.condition_number = detail::pmatrix_condition(p);

  std::vector<double> s(cols, 1.0 / cols), s_next(cols), ps(rows);
  auto objective = [&](const std::vector<double>& sv) {
    double obj = 0.0;
    for (int n = 0; n < rows; ++n) {
      double r = -qv[n];
      for (int m = 0; m < cols; ++m) r += p.at(n, m) * sv[m];
      obj += r * r;
    }
    return obj;
  };

  double obj = objective(s);
  result.objective_trace.push_back(obj);
  for (int it = 0; it < max_iterations; ++it) {
    for (int n = 0; n < rows; ++n) {
      double v = 0.0;
      for (int m = 0; m < cols; ++m) v += p.at(n, m) * s[m];
      ps[n] = v;
    }
    double sum = 0.0;
    for (int m = 0; m < cols; ++m) {
      double ratio = 0.0;
      for (int n = 0; n < rows; ++n)
        if (qv[n] > 0.0) ratio += p.at(n, m) * qv[n] / std::max(ps[n], 1e-300);
      s_next[m] = s[m] * ratio;
      sum += s_next[m];
    }
    result.max_simplex_violation = std::max(result.max_simplex_violation, std::abs(sum - 1.0));
    if (sum > 0.0)
      for (auto& v : s_next) v /= sum;

    const double obj_next = objective(s_next);
    result.iterations = it + 1;
    if (obj_next > obj) break;  // keep the previous (better) iterate
    s = s_next;
    result.objective_trace.push_back(obj_next);
    const double decrease = obj - obj_next;
    obj = obj_next;
    if (decrease < tol) {
      result.converged = true;
      break;
    }
  }

  result.residual = std::sqrt(obj);
  result.distribution.probs = std::move(s);
  return result;
}

/// n-photon fidelity: probability that an n-photon input yields exactly n
/// clicks, the diagonal element P_nn.
inline double n_photon_fidelity(const ProbabilityMatrix& p, int n) {
  if (n < 0 || n > std::min(p.pixel_count, p.max_photons))
    throw std::invalid_argument("n_photon_fidelity: n out of range");
  return p.at(n, n);
}

}  // namespace snspd
