#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <stdexcept>
#include <vector>

#include "snspd/array_model.hpp"
#include "snspd/rng.hpp"
#include "snspd/source.hpp"
#include "snspd/tagstream.hpp"

namespace snspd {

struct SimulationToggles {
  bool recovery = true;
  bool jitter = true;
  bool darks = true;
  bool crosstalk = true;
  // a crosstalk click spawning further crosstalk is disabled by default;
  // second-generation probability is below 2.5e-5 at the reference operating point
  bool crosstalk_secondary = false;
};

struct SimulationRun {
  DetectorArrayConfig cfg;
  LightSourceSpec source;
  std::uint64_t pulses = 0;    // pulsed mode
  double duration_s = 0.0;     // cw mode
  std::uint64_t seed = 1;
  SimulationToggles toggles;
  bool keep_arrivals = false;

  std::vector<std::string> validation_errors() const {
    auto errs = cfg.validation_errors();
    for (auto& e : source.validation_errors()) errs.push_back("source: " + e);
    if (source.mode == SourceMode::pulsed && pulses < 1)
      errs.push_back("pulsed run requires pulses >= 1");
    if (source.mode == SourceMode::cw && !(duration_s > 0.0))
      errs.push_back("cw run requires a positive duration");
    return errs;
  }
};

struct SimulationResult {
  TimeTagStream tags;
  std::vector<ArrivalRecord> arrivals;  // only when keep_arrivals is set
  std::uint64_t incident_photons = 0;
  std::uint64_t detected_photons = 0;
  std::uint64_t dark_clicks = 0;
  std::uint64_t crosstalk_clicks = 0;
};

namespace detail {

struct CrosstalkEvent {
  double time_ns;
  int pixel;
  double u_gate;  // uniform drawn at scheduling time, for determinism
  bool operator>(const CrosstalkEvent& o) const {
    return time_ns != o.time_ns ? time_ns > o.time_ns : pixel > o.pixel;
  }
};

struct PhotonEvent {
  double time_ns;
  int pixel;
  bool is_dark;
};

}  // namespace detail

/// Event-driven Monte Carlo of the array. Per photon at time t on pixel i
/// the detection probability is eta_i * r(t - last_click_i); a detection
/// emits a jittered tag, re-arms the recovery clock, and may schedule a
/// delayed crosstalk click on each adjacent pixel. Dark counts are a
/// homogeneous Poisson process per pixel, gated by recovery like any other
/// candidate click. Deterministic for a fixed seed: every pulse (or cw time
/// slab) consumes its own random substream.
inline SimulationResult simulate(const SimulationRun& run) {
  {
    auto errs = run.validation_errors();
    if (!errs.empty()) throw ConfigError(std::move(errs));
  }
  const auto& cfg = run.cfg;
  const int N = cfg.pixel_count;
  const bool pulsed = run.source.mode == SourceMode::pulsed;
  const double slab_ns = pulsed ? run.source.period_ns() : 1e6;  // 1 ms cw slabs
  const std::uint64_t n_slabs =
      pulsed ? run.pulses
             : static_cast<std::uint64_t>(std::ceil(run.duration_s * 1e9 / slab_ns));
  const double t0_ns = pulsed ? slab_ns : 10.0;  // margin so jitter cannot go negative

  const double sigma_ps = cfg.jitter_fwhm_ps / 2.354820045030949;
  const double dark_rate_total_hz = cfg.dark_rate_per_pixel_cps * N;
  const auto cum_weights = detail::cumulative_weights(cfg.illumination_weights);

  SimulationResult result;
  result.tags.channel_count = static_cast<std::uint16_t>(N);

  std::vector<double> last_click(N, -1e18);
  std::priority_queue<detail::CrosstalkEvent, std::vector<detail::CrosstalkEvent>,
                      std::greater<detail::CrosstalkEvent>>
      pending_xtalk;

  auto recovery_fraction = [&](int pixel, double t) {
    return run.toggles.recovery ? cfg.recovery.fraction(t - last_click[pixel]) : 1.0;
  };

  auto emit_tag = [&](int pixel, double t_ns, RandomStream& rs) {
    double tag_ps = t_ns * 1e3;
    if (run.toggles.jitter && sigma_ps > 0.0) tag_ps += rs.normal(0.0, sigma_ps);
    result.tags.tags.push_back({static_cast<std::uint16_t>(pixel),
                                static_cast<std::int64_t>(std::llround(tag_ps))});
  };

  auto schedule_crosstalk = [&](int pixel, double t_ns, RandomStream& rs) {
    for (const auto& pair : cfg.crosstalk.pairs) {
      if (pair.from != pixel || pair.probability <= 0.0) continue;
      if (!rs.bernoulli(pair.probability)) continue;
      double delay = cfg.crosstalk.delay_offset_ns;
      if (cfg.crosstalk.delay_distribution == DelayDistribution::uniform) {
        delay += rs.uniform() * cfg.crosstalk.delay_window_ns;
      } else {
        // symmetric triangular over the window
        delay += 0.5 * (rs.uniform() + rs.uniform()) * cfg.crosstalk.delay_window_ns;
      }
      pending_xtalk.push({t_ns + delay, pair.to, rs.uniform()});
    }
  };

  auto process_crosstalk_until = [&](double t_limit_ns, RandomStream& rs) {
    while (!pending_xtalk.empty() && pending_xtalk.top().time_ns <= t_limit_ns) {
      const auto ev = pending_xtalk.top();
      pending_xtalk.pop();
      if (ev.u_gate < recovery_fraction(ev.pixel, ev.time_ns)) {
        emit_tag(ev.pixel, ev.time_ns, rs);
        last_click[ev.pixel] = ev.time_ns;
        ++result.crosstalk_clicks;
        if (run.toggles.crosstalk_secondary) schedule_crosstalk(ev.pixel, ev.time_ns, rs);
      }
    }
  };

  std::vector<detail::PhotonEvent> events;
  for (std::uint64_t k = 0; k < n_slabs; ++k) {
    RandomStream rs(run.seed, k);
    const double slab_start = t0_ns + static_cast<double>(k) * slab_ns;

    events.clear();
    if (pulsed) {
      for (const auto& a : generate_pulse_arrivals(run.source, cum_weights, rs))
        events.push_back({slab_start + a.time_ns, a.pixel, false});
      if (run.source.cw_pedestal_hz > 0.0)
        for (const auto& a :
             generate_cw_arrivals(run.source.cw_pedestal_hz, slab_ns, cum_weights, rs))
          events.push_back({slab_start + a.time_ns, a.pixel, false});
    } else {
      for (const auto& a : generate_cw_arrivals(run.source.cw_rate_hz, slab_ns, cum_weights, rs))
        events.push_back({slab_start + a.time_ns, a.pixel, false});
    }
    if (run.toggles.darks && dark_rate_total_hz > 0.0) {
      const double rate_per_ns = dark_rate_total_hz * 1e-9;
      double t = rs.exponential(rate_per_ns);
      while (t < slab_ns) {
        events.push_back({slab_start + t, static_cast<int>(rs.uniform() * N), true});
        t += rs.exponential(rate_per_ns);
      }
    }
    std::sort(events.begin(), events.end(),
              [](const detail::PhotonEvent& a, const detail::PhotonEvent& b) {
                return a.time_ns != b.time_ns ? a.time_ns < b.time_ns : a.pixel < b.pixel;
              });

    for (const auto& ev : events) {
      process_crosstalk_until(ev.time_ns, rs);
      const double base = ev.is_dark ? 1.0 : cfg.pixel_efficiencies[ev.pixel];
      const bool clicked = rs.uniform() < base * recovery_fraction(ev.pixel, ev.time_ns);
      if (!ev.is_dark) {
        ++result.incident_photons;
        if (clicked) ++result.detected_photons;
        if (run.keep_arrivals) result.arrivals.push_back({ev.time_ns, ev.pixel, clicked});
      } else if (clicked) {
        ++result.dark_clicks;
      }
      if (clicked) {
        emit_tag(ev.pixel, ev.time_ns, rs);
        last_click[ev.pixel] = ev.time_ns;
        if (run.toggles.crosstalk) schedule_crosstalk(ev.pixel, ev.time_ns, rs);
      }
    }
  }
  {
    RandomStream rs(run.seed, n_slabs);  // flush stream for trailing crosstalk
    process_crosstalk_until(1e18, rs);
  }

  std::sort(result.tags.tags.begin(), result.tags.tags.end(),
            [](const TimeTag& a, const TimeTag& b) {
              return a.timestamp_ps != b.timestamp_ps ? a.timestamp_ps < b.timestamp_ps
                                                      : a.channel < b.channel;
            });

  result.tags.metadata = {
      {"channel_count", N},
      {"seed", run.seed},
      {"source", run.source},
      {"first_trigger_ps", static_cast<std::int64_t>(std::llround(t0_ns * 1e3))}};
  if (pulsed) {
    result.tags.metadata["trigger_period_ps"] =
        static_cast<std::int64_t>(std::llround(slab_ns * 1e3));
    result.tags.metadata["pulses"] = run.pulses;
  } else {
    result.tags.metadata["duration_s"] = run.duration_s;
  }
  return result;
}

}  // namespace snspd
