#pragma once
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "snspd/array_model.hpp"
#include "snspd/rng.hpp"
#include "snspd/source.hpp"

namespace snspd {

struct RatePoint {
  double incident_rate_hz = 0.0;
  double detection_rate_hz = 0.0;
  double sde = 0.0;
  double sde_err = 0.0;
};

/// Average SDE per photon vs detection rate under cw illumination
/// (exponential inter-arrivals). Each
/// grid point runs an independent substream of the master seed, so points
/// may be evaluated in any order or in parallel with identical results.
inline std::vector<RatePoint> sde_vs_rate(const DetectorArrayConfig& cfg,
                                          const std::vector<double>& incident_rates_hz,
                                          double duration_per_point_s, std::uint64_t seed) {
  cfg.validated();
  for (double r : incident_rates_hz)
    if (!(r > 0.0)) throw std::invalid_argument("sde_vs_rate: rates must be positive");

  const auto cum_weights = detail::cumulative_weights(cfg.illumination_weights);
  std::vector<RatePoint> curve(incident_rates_hz.size());

  for (std::size_t pt = 0; pt < incident_rates_hz.size(); ++pt) {
    const double rate_per_ns = incident_rates_hz[pt] * 1e-9;
    const double duration_ns = duration_per_point_s * 1e9;
    RandomStream rs(seed, pt);

    std::vector<double> last_click(cfg.pixel_count, -1e18);
    std::uint64_t incident = 0, detected = 0;
    double t = rs.exponential(rate_per_ns);
    while (t < duration_ns) {
      ++incident;
      const int pixel = detail::sample_pixel(cum_weights, rs);
      const double prob =
          cfg.pixel_efficiencies[pixel] * cfg.recovery.fraction(t - last_click[pixel]);
      if (rs.uniform() < prob) {
        ++detected;
        last_click[pixel] = t;
      }
      t += rs.exponential(rate_per_ns);
    }

    auto& p = curve[pt];
    p.incident_rate_hz = incident_rates_hz[pt];
    p.detection_rate_hz = static_cast<double>(detected) / duration_per_point_s;
    p.sde = incident > 0 ? static_cast<double>(detected) / static_cast<double>(incident) : 0.0;
    p.sde_err = incident > 0
                    ? std::sqrt(p.sde * (1.0 - p.sde) / static_cast<double>(incident))
                    : 0.0;
  }
  return curve;
}

/// Maximum count rate: the detection rate at which the SDE falls to 50% of
/// its maximum, by log-linear interpolation between the bracketing points.
inline double extract_mcr(const std::vector<RatePoint>& curve) {
  if (curve.size() < 2) throw std::invalid_argument("extract_mcr: need at least two points");
  double sde_max = 0.0;
  for (const auto& p : curve) sde_max = std::max(sde_max, p.sde);
  const double target = 0.5 * sde_max;
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const auto& a = curve[i];
    const auto& b = curve[i + 1];
    if (a.sde >= target && b.sde < target) {
      const double f = (a.sde - target) / (a.sde - b.sde);
      return std::exp(std::log(a.detection_rate_hz) +
                      f * (std::log(b.detection_rate_hz) - std::log(a.detection_rate_hz)));
    }
  }
  throw std::invalid_argument("extract_mcr: curve never crosses 50% of the maximum SDE");
}

inline void write_rate_curve_csv(const std::vector<RatePoint>& curve, std::ostream& out) {
  out << "incident_rate_hz,detection_rate_hz,sde,sde_err\n";
  out << std::setprecision(9);
  for (const auto& p : curve)
    out << p.incident_rate_hz << "," << p.detection_rate_hz << "," << p.sde << "," << p.sde_err
        << "\n";
}

}  // namespace snspd
