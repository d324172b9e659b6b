#pragma once
#include <cstdint>

#include "snspd/pmatrix.hpp"
#include "snspd/simulator.hpp"
#include "snspd/tagstream.hpp"

namespace snspd {

/// Window used to count clicks per pulse, relative to the trigger.
struct ClickWindow {
  double offset_ns = -0.5;  // may be negative to catch jitter-advanced tags
  double width_ns = 20.0;
  CountingMode mode = CountingMode::all_tags;
};

/// Per-pulse click statistics for a pulsed simulation result, using the
/// trigger period recorded in the stream metadata.
inline ClickStatistics windowed_click_statistics(const TimeTagStream& stream,
                                                 const ClickWindow& window, int min_bins = 0) {
  const std::int64_t period_ps = stream.metadata.at("trigger_period_ps").get<std::int64_t>();
  const std::int64_t first_ps = stream.metadata.at("first_trigger_ps").get<std::int64_t>();
  const std::uint64_t pulses = stream.metadata.at("pulses").get<std::uint64_t>();
  const auto counts = window_clicks(
      stream, period_ps, first_ps + static_cast<std::int64_t>(window.offset_ns * 1e3),
      static_cast<std::int64_t>(window.width_ns * 1e3), pulses, window.mode);
  return click_statistics(counts, min_bins);
}

/// Effective click-probability matrix for a given pulse shape and detector
/// state, estimated by simulating Fock-m pulses under the full temporal
/// model (recovery, jitter, crosstalk, darks as toggled) and windowing the
/// resulting tags exactly as the measurement pipeline does. This is the
/// matrix to invert when the pulse is not short compared to the recovery
/// time: re-armed pixels produce extra same-channel clicks that the
/// simultaneous-photon model cannot represent.
inline ProbabilityMatrix calibrate_effective_pmatrix(const DetectorArrayConfig& cfg,
                                                     LightSourceSpec source,
                                                     const ClickWindow& window, int max_photons,
                                                     std::uint64_t trials_per_column,
                                                     std::uint64_t seed,
                                                     SimulationToggles toggles = {}) {
  cfg.validated();
  source.number_model = PhotonNumberModel::fock;

  // click counts can exceed the pixel count (dynamic PNR), so allow rows up
  // to the photon truncation as well
  const int max_clicks = std::max(cfg.pixel_count, max_photons);
  auto p = ProbabilityMatrix::zeros(max_clicks, max_photons);
  p.std_errors.assign(p.entries.size(), 0.0);

  for (int m = 0; m <= max_photons; ++m) {
    source.fock_m = m;
    SimulationRun run;
    run.cfg = cfg;
    run.source = source;
    run.pulses = trials_per_column;
    run.seed = seed + static_cast<std::uint64_t>(m) * 0x9e3779b9ULL;
    run.toggles = toggles;
    const auto result = simulate(run);
    const auto stats = windowed_click_statistics(result.tags, window, max_clicks + 1);
    for (int n = 0; n <= max_clicks && n < static_cast<int>(stats.probs.size()); ++n) {
      p.at(n, m) = stats.probs[n];
      p.std_errors[static_cast<std::size_t>(n) * (max_photons + 1) + m] = stats.std_errors[n];
    }
  }
  return p;
}

}  // namespace snspd
