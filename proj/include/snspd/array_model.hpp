#pragma once
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace snspd {

/// Thrown by configuration validation; `messages()` lists every violated
/// invariant, not just the first.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<std::string> messages)
      : std::runtime_error(join(messages)), messages_(std::move(messages)) {}
  const std::vector<std::string>& messages() const { return messages_; }

private:
  static std::string join(const std::vector<std::string>& msgs) {
    std::string out = "invalid configuration:";
    for (const auto& m : msgs) out += "\n  - " + m;
    return out;
  }
  std::vector<std::string> messages_;
};

enum class RecoveryForm { step, exponential };

/// Pixel efficiency recovery after a click, as a fraction of the maximum.
/// r(dt) = 0 for dt < dead_time; step form jumps to 1 at dead_time,
/// exponential form relaxes as 1 - exp(-(dt - dead_time)/tau).
struct RecoveryCurve {
  RecoveryForm form = RecoveryForm::exponential;
  double dead_time_ns = 4.0;
  double tau_ns = 2.0 / std::log(10.0);

  double fraction(double dt_ns) const {
    if (dt_ns < dead_time_ns) return 0.0;
    if (form == RecoveryForm::step) return 1.0;
    return 1.0 - std::exp(-(dt_ns - dead_time_ns) / tau_ns);
  }
};

/// Exponential recovery curve calibrated so that r(rt90) = 0.9 exactly:
/// tau = (rt90 - t_dead) / ln 10.
inline RecoveryCurve calibrate_recovery(double t_dead_ns, double rt90_ns) {
  if (!(rt90_ns > t_dead_ns))
    throw std::invalid_argument("calibrate_recovery: rt90 must exceed the dead time");
  if (t_dead_ns < 0.0)
    throw std::invalid_argument("calibrate_recovery: dead time must be non-negative");
  RecoveryCurve rc;
  rc.form = RecoveryForm::exponential;
  rc.dead_time_ns = t_dead_ns;
  rc.tau_ns = (rt90_ns - t_dead_ns) / std::log(10.0);
  return rc;
}

enum class DelayDistribution { uniform, triangular };

/// Ordered adjacent pixel pair with a thermal-crosstalk probability.
struct CrosstalkPair {
  int from = 0;
  int to = 0;
  double probability = 0.0;
};

/// Thermal crosstalk: after a detection on pixel `from`, a false click is
/// induced on the adjacent pixel `to` with the pair probability, delayed by
/// a draw from [offset, offset + window].
struct CrosstalkModel {
  std::vector<CrosstalkPair> pairs;
  double delay_offset_ns = 1.0;
  double delay_window_ns = 4.0;
  DelayDistribution delay_distribution = DelayDistribution::uniform;

  double pair_probability(int from, int to) const {
    for (const auto& p : pairs)
      if (p.from == from && p.to == to) return p.probability;
    return 0.0;
  }

  /// Symmetric chain adjacency over spatially ordered pixels:
  /// (i, i+1) for i = 0..n-2, both directions, equal probability.
  static CrosstalkModel chain(int pixel_count, double probability) {
    CrosstalkModel m;
    for (int i = 0; i + 1 < pixel_count; ++i) {
      m.pairs.push_back({i, i + 1, probability});
      m.pairs.push_back({i + 1, i, probability});
    }
    return m;
  }
};

/// Full physical model of the detector array. A photon lands on pixel i
/// with probability illumination_weights[i] and is then detected with
/// probability pixel_efficiencies[i] (times the recovery fraction).
struct DetectorArrayConfig {
  int pixel_count = 14;
  std::vector<double> pixel_efficiencies;
  std::vector<double> illumination_weights;
  RecoveryCurve recovery;
  double jitter_fwhm_ps = 21.0;
  double dark_rate_per_pixel_cps = 150.0 / 14.0;
  CrosstalkModel crosstalk;

  /// Uniform array: equal landing weights 1/n, equal efficiency eta.
  static DetectorArrayConfig uniform(int n, double eta) {
    DetectorArrayConfig cfg;
    cfg.pixel_count = n;
    cfg.pixel_efficiencies.assign(n, eta);
    cfg.illumination_weights.assign(n, 1.0 / n);
    cfg.dark_rate_per_pixel_cps = 150.0 / n;
    return cfg;
  }

  /// The 14-pixel array with the reference operating point: 89.5% array
  /// efficiency, RT90 = 6 ns, 21 ps jitter, 150 cps total dark rate and
  /// chain adjacency crosstalk at the low-bias level.
  static DetectorArrayConfig reference_array() {
    auto cfg = uniform(14, 0.895);
    cfg.recovery = calibrate_recovery(4.0, 6.0);
    cfg.jitter_fwhm_ps = 21.0;
    cfg.crosstalk = CrosstalkModel::chain(14, 1e-5);
    return cfg;
  }

  /// Probability that an incident photon is detected (all pixels ready).
  double array_efficiency() const {
    double s = 0.0;
    for (std::size_t i = 0; i < pixel_efficiencies.size(); ++i)
      s += illumination_weights[i] * pixel_efficiencies[i];
    return s;
  }

  /// Every violated invariant, empty if the config is valid.
  std::vector<std::string> validation_errors() const {
    std::vector<std::string> errs;
    const auto n = static_cast<std::size_t>(pixel_count);
    if (pixel_count < 1) errs.push_back("pixel_count must be at least 1");
    if (pixel_efficiencies.size() != n)
      errs.push_back("pixel_efficiencies size does not match pixel_count");
    if (illumination_weights.size() != n)
      errs.push_back("illumination_weights size does not match pixel_count");
    for (std::size_t i = 0; i < pixel_efficiencies.size(); ++i) {
      const double e = pixel_efficiencies[i];
      if (!(e >= 0.0 && e <= 1.0))
        errs.push_back("efficiency out of range at pixel " + std::to_string(i));
    }
    double wsum = 0.0;
    for (std::size_t i = 0; i < illumination_weights.size(); ++i) {
      const double w = illumination_weights[i];
      if (!(w >= 0.0))
        errs.push_back("negative illumination weight at pixel " + std::to_string(i));
      wsum += w;
    }
    if (illumination_weights.size() == n && std::abs(wsum - 1.0) > 1e-12)
      errs.push_back("weights not normalized");
    if (pixel_efficiencies.size() == n && illumination_weights.size() == n &&
        array_efficiency() > 1.0 + 1e-12)
      errs.push_back("array efficiency exceeds 1");
    if (jitter_fwhm_ps < 0.0) errs.push_back("jitter_fwhm_ps must be non-negative");
    if (dark_rate_per_pixel_cps < 0.0)
      errs.push_back("dark_rate_per_pixel_cps must be non-negative");
    if (recovery.dead_time_ns < 0.0) errs.push_back("recovery dead_time must be non-negative");
    if (recovery.form == RecoveryForm::exponential && !(recovery.tau_ns > 0.0))
      errs.push_back("recovery tau must be positive");
    for (const auto& p : crosstalk.pairs) {
      if (p.from < 0 || p.from >= pixel_count || p.to < 0 || p.to >= pixel_count ||
          p.from == p.to)
        errs.push_back("invalid crosstalk pair (" + std::to_string(p.from) + "->" +
                       std::to_string(p.to) + ")");
      if (!(p.probability >= 0.0 && p.probability < 1.0))
        errs.push_back("crosstalk probability out of [0,1) for pair (" +
                       std::to_string(p.from) + "->" + std::to_string(p.to) + ")");
    }
    if (crosstalk.delay_offset_ns < 0.0 || crosstalk.delay_window_ns < 0.0)
      errs.push_back("crosstalk delay parameters must be non-negative");
    return errs;
  }

  /// Returns *this if valid, otherwise throws a ConfigError listing every
  /// violated invariant.
  const DetectorArrayConfig& validated() const {
    auto errs = validation_errors();
    if (!errs.empty()) throw ConfigError(std::move(errs));
    return *this;
  }
};

// --- JSON serialization -----------------------------------------------------

inline void to_json(nlohmann::json& j, const RecoveryCurve& rc) {
  j = {{"form", rc.form == RecoveryForm::step ? "step" : "exponential"},
       {"dead_time_ns", rc.dead_time_ns},
       {"tau_ns", rc.tau_ns}};
}

inline void from_json(const nlohmann::json& j, RecoveryCurve& rc) {
  const std::string form = j.value("form", "exponential");
  if (form == "step")
    rc.form = RecoveryForm::step;
  else if (form == "exponential")
    rc.form = RecoveryForm::exponential;
  else
    throw std::invalid_argument("unknown recovery form: " + form);
  rc.dead_time_ns = j.value("dead_time_ns", rc.dead_time_ns);
  rc.tau_ns = j.value("tau_ns", rc.tau_ns);
}

inline void to_json(nlohmann::json& j, const CrosstalkModel& m) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : m.pairs)
    pairs.push_back({{"from", p.from}, {"to", p.to}, {"probability", p.probability}});
  j = {{"pairs", pairs},
       {"delay_offset_ns", m.delay_offset_ns},
       {"delay_window_ns", m.delay_window_ns},
       {"delay_distribution",
        m.delay_distribution == DelayDistribution::uniform ? "uniform" : "triangular"}};
}

inline void from_json(const nlohmann::json& j, CrosstalkModel& m) {
  m.pairs.clear();
  for (const auto& p : j.value("pairs", nlohmann::json::array()))
    m.pairs.push_back({p.at("from").get<int>(), p.at("to").get<int>(),
                       p.at("probability").get<double>()});
  m.delay_offset_ns = j.value("delay_offset_ns", m.delay_offset_ns);
  m.delay_window_ns = j.value("delay_window_ns", m.delay_window_ns);
  const std::string d = j.value("delay_distribution", "uniform");
  if (d == "uniform")
    m.delay_distribution = DelayDistribution::uniform;
  else if (d == "triangular")
    m.delay_distribution = DelayDistribution::triangular;
  else
    throw std::invalid_argument("unknown delay distribution: " + d);
}

inline void to_json(nlohmann::json& j, const DetectorArrayConfig& c) {
  j = {{"pixel_count", c.pixel_count},
       {"pixel_efficiencies", c.pixel_efficiencies},
       {"illumination_weights", c.illumination_weights},
       {"recovery", c.recovery},
       {"jitter_fwhm_ps", c.jitter_fwhm_ps},
       {"dark_rate_per_pixel_cps", c.dark_rate_per_pixel_cps},
       {"crosstalk", c.crosstalk}};
}

inline void from_json(const nlohmann::json& j, DetectorArrayConfig& c) {
  c.pixel_count = j.at("pixel_count").get<int>();
  c.pixel_efficiencies = j.at("pixel_efficiencies").get<std::vector<double>>();
  c.illumination_weights = j.at("illumination_weights").get<std::vector<double>>();
  if (j.contains("recovery")) c.recovery = j.at("recovery").get<RecoveryCurve>();
  c.jitter_fwhm_ps = j.value("jitter_fwhm_ps", c.jitter_fwhm_ps);
  c.dark_rate_per_pixel_cps = j.value("dark_rate_per_pixel_cps", c.dark_rate_per_pixel_cps);
  if (j.contains("crosstalk")) c.crosstalk = j.at("crosstalk").get<CrosstalkModel>();
}

inline DetectorArrayConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  DetectorArrayConfig cfg = j.get<DetectorArrayConfig>();
  cfg.validated();
  return cfg;
}

inline void save_config(const DetectorArrayConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open config file for writing: " + path);
  out << nlohmann::json(cfg).dump(2) << "\n";
}

}  // namespace snspd
