#pragma once
#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "snspd/rng.hpp"

namespace snspd {

enum class SourceMode { pulsed, cw };
enum class PhotonNumberModel { poisson, fock, thermal };
enum class PulseShape { delta, square, exponential };

/// Photon-number statistics, temporal pulse shape and repetition rate of
/// the input light.
struct LightSourceSpec {
  SourceMode mode = SourceMode::pulsed;
  double rep_rate_hz = 1e6;

  PhotonNumberModel number_model = PhotonNumberModel::poisson;
  double mu = 1.0;        // mean photons per pulse (poisson / thermal)
  long fock_m = 0;        // fixed photon number (fock)

  PulseShape pulse_shape = PulseShape::delta;
  double pulse_width_ns = 0.0;  // square width or exponential decay constant
  double cw_rate_hz = 0.0;      // cw mode photon rate
  double cw_pedestal_hz = 0.0;  // residual cw background in pulsed mode
                                // (finite modulator extinction ratio)

  std::vector<std::string> validation_errors() const {
    std::vector<std::string> errs;
    if (mu < 0.0) errs.push_back("mu must be non-negative");
    if (fock_m < 0) errs.push_back("fock photon number must be non-negative");
    if (rep_rate_hz < 0.0 || cw_rate_hz < 0.0 || cw_pedestal_hz < 0.0)
      errs.push_back("rates must be non-negative");
    if (pulse_width_ns < 0.0) errs.push_back("pulse width must be non-negative");
    if (mode == SourceMode::pulsed && rep_rate_hz <= 0.0)
      errs.push_back("pulsed mode requires a positive repetition rate");
    if (pulse_shape != PulseShape::delta && pulse_width_ns <= 0.0)
      errs.push_back("square/exponential pulse shapes require a positive width");
    return errs;
  }

  double period_ns() const { return 1e9 / rep_rate_hz; }

  static LightSourceSpec pulsed_poisson(double mu, double rep_rate_hz = 1e6,
                                        PulseShape shape = PulseShape::delta,
                                        double width_ns = 0.0) {
    LightSourceSpec s;
    s.mode = SourceMode::pulsed;
    s.number_model = PhotonNumberModel::poisson;
    s.mu = mu;
    s.rep_rate_hz = rep_rate_hz;
    s.pulse_shape = shape;
    s.pulse_width_ns = width_ns;
    return s;
  }

  static LightSourceSpec pulsed_fock(long m, double rep_rate_hz = 1e6,
                                     PulseShape shape = PulseShape::delta,
                                     double width_ns = 0.0) {
    LightSourceSpec s;
    s.mode = SourceMode::pulsed;
    s.number_model = PhotonNumberModel::fock;
    s.fock_m = m;
    s.rep_rate_hz = rep_rate_hz;
    s.pulse_shape = shape;
    s.pulse_width_ns = width_ns;
    return s;
  }

  static LightSourceSpec cw(double rate_hz) {
    LightSourceSpec s;
    s.mode = SourceMode::cw;
    s.cw_rate_hz = rate_hz;
    return s;
  }
};

/// Photon arrival relative to the pulse trigger (or window start for cw).
struct PhotonArrival {
  double time_ns = 0.0;
  int pixel = 0;
};

namespace detail {

inline int sample_pixel(const std::vector<double>& cum_weights, RandomStream& rs) {
  const double u = rs.uniform();
  return static_cast<int>(std::upper_bound(cum_weights.begin(), cum_weights.end(), u) -
                          cum_weights.begin());
}

inline std::vector<double> cumulative_weights(const std::vector<double>& w) {
  std::vector<double> cum(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    cum[i] = acc;
  }
  if (!cum.empty()) cum.back() = 1.0;
  return cum;
}

}  // namespace detail

/// Photon arrivals for one pulse: count drawn from the photon-number model,
/// times from the pulse shape, pixels from the landing weights. Output
/// sorted in time.
inline std::vector<PhotonArrival> generate_pulse_arrivals(const LightSourceSpec& source,
                                                          const std::vector<double>& cum_weights,
                                                          RandomStream& rs) {
  long count = 0;
  switch (source.number_model) {
    case PhotonNumberModel::poisson: count = rs.poisson(source.mu); break;
    case PhotonNumberModel::fock: count = source.fock_m; break;
    case PhotonNumberModel::thermal: count = rs.thermal(source.mu); break;
  }
  std::vector<PhotonArrival> arrivals(count);
  for (auto& a : arrivals) {
    switch (source.pulse_shape) {
      case PulseShape::delta: a.time_ns = 0.0; break;
      case PulseShape::square: a.time_ns = rs.uniform(0.0, source.pulse_width_ns); break;
      case PulseShape::exponential:
        a.time_ns = rs.exponential(1.0 / source.pulse_width_ns);
        break;
    }
    a.pixel = detail::sample_pixel(cum_weights, rs);
  }
  std::sort(arrivals.begin(), arrivals.end(),
            [](const PhotonArrival& a, const PhotonArrival& b) { return a.time_ns < b.time_ns; });
  return arrivals;
}

/// Poisson-process photon arrivals over a cw window of the given length.
inline std::vector<PhotonArrival> generate_cw_arrivals(double rate_hz, double window_ns,
                                                       const std::vector<double>& cum_weights,
                                                       RandomStream& rs) {
  std::vector<PhotonArrival> arrivals;
  if (rate_hz <= 0.0) return arrivals;
  const double rate_per_ns = rate_hz * 1e-9;
  double t = rs.exponential(rate_per_ns);
  while (t < window_ns) {
    arrivals.push_back({t, detail::sample_pixel(cum_weights, rs)});
    t += rs.exponential(rate_per_ns);
  }
  return arrivals;
}

// --- JSON -------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const LightSourceSpec& s) {
  j = {{"mode", s.mode == SourceMode::pulsed ? "pulsed" : "cw"},
       {"rep_rate_hz", s.rep_rate_hz},
       {"number_model", s.number_model == PhotonNumberModel::poisson
                            ? "poisson"
                            : (s.number_model == PhotonNumberModel::fock ? "fock" : "thermal")},
       {"mu", s.mu},
       {"fock_m", s.fock_m},
       {"pulse_shape", s.pulse_shape == PulseShape::delta
                           ? "delta"
                           : (s.pulse_shape == PulseShape::square ? "square" : "exponential")},
       {"pulse_width_ns", s.pulse_width_ns},
       {"cw_rate_hz", s.cw_rate_hz},
       {"cw_pedestal_hz", s.cw_pedestal_hz}};
}

inline void from_json(const nlohmann::json& j, LightSourceSpec& s) {
  const std::string mode = j.value("mode", "pulsed");
  if (mode == "pulsed")
    s.mode = SourceMode::pulsed;
  else if (mode == "cw")
    s.mode = SourceMode::cw;
  else
    throw std::invalid_argument("unknown source mode: " + mode);
  s.rep_rate_hz = j.value("rep_rate_hz", s.rep_rate_hz);
  const std::string nm = j.value("number_model", "poisson");
  if (nm == "poisson")
    s.number_model = PhotonNumberModel::poisson;
  else if (nm == "fock")
    s.number_model = PhotonNumberModel::fock;
  else if (nm == "thermal")
    s.number_model = PhotonNumberModel::thermal;
  else
    throw std::invalid_argument("unknown photon number model: " + nm);
  s.mu = j.value("mu", s.mu);
  s.fock_m = j.value("fock_m", s.fock_m);
  const std::string shape = j.value("pulse_shape", "delta");
  if (shape == "delta")
    s.pulse_shape = PulseShape::delta;
  else if (shape == "square")
    s.pulse_shape = PulseShape::square;
  else if (shape == "exponential")
    s.pulse_shape = PulseShape::exponential;
  else
    throw std::invalid_argument("unknown pulse shape: " + shape);
  s.pulse_width_ns = j.value("pulse_width_ns", s.pulse_width_ns);
  s.cw_rate_hz = j.value("cw_rate_hz", s.cw_rate_hz);
  s.cw_pedestal_hz = j.value("cw_pedestal_hz", s.cw_pedestal_hz);
}

inline LightSourceSpec load_source(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open source file: " + path);
  nlohmann::json j;
  in >> j;
  return j.get<LightSourceSpec>();
}

}  // namespace snspd
