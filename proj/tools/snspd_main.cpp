// snspd: command-line front end for the array-detector toolkit.
//
// One binary, subcommand style. Exit codes: 0 success, 2 usage/config
// error, 3 check failure beyond tolerance, 4 I/O error. SNSPD_CONFIG_DIR
// is searched for --config/--source/--matrix paths that do not resolve
// locally.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snspd/calibration.hpp"
#include "snspd/heralding.hpp"
#include "snspd/rate_analysis.hpp"
#include "snspd/reconstruct.hpp"
#include "snspd/simulator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitCheckFailed = 3;
constexpr int kExitIo = 4;

/// Raised by subcommand handlers for --check-* failures.
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Resolve a user-supplied path, falling back to $SNSPD_CONFIG_DIR.
std::string resolve_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) return path;
  if (const char* dir = std::getenv("SNSPD_CONFIG_DIR")) {
    const auto candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;  // let the opener produce the error
}

/// Output sink: --out path or standard output.
class OutputSink {
public:
  explicit OutputSink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw std::ios_base::failure("cannot open output file: " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
  std::ofstream file_;
};

struct MatrixSource {
  int pixels = 14;
  double efficiency = 0.895;
  std::string config_path;
  std::string matrix_path;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--pixels", pixels, "Pixel count for a uniform array");
    cmd->add_option("--efficiency", efficiency, "Per-pixel efficiency for a uniform array");
    cmd->add_option("--config", config_path, "Detector config JSON (weighted matrix)");
    cmd->add_option("--matrix", matrix_path, "Precomputed P matrix CSV");
  }

  snspd::ProbabilityMatrix build(int max_photons) const {
    if (!matrix_path.empty()) {
      std::ifstream in(resolve_path(matrix_path));
      if (!in) throw std::ios_base::failure("cannot open matrix file: " + matrix_path);
      return snspd::read_matrix_csv(in);
    }
    if (!config_path.empty()) {
      const auto cfg = snspd::load_config(resolve_path(config_path));
      return snspd::build_weighted_pmatrix(cfg.illumination_weights, cfg.pixel_efficiencies,
                                           max_photons);
    }
    return snspd::build_uniform_pmatrix(pixels, efficiency, max_photons);
  }
};

struct WindowFlags {
  snspd::ClickWindow window;
  std::string mode = "all";

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--window-offset-ns", window.offset_ns,
                    "Window start relative to the trigger (ns)");
    cmd->add_option("--window-width-ns", window.width_ns, "Window width (ns)");
    cmd->add_option("--count-mode", mode, "Click counting: all | distinct")
        ->check(CLI::IsMember({"all", "distinct"}));
  }

  snspd::ClickWindow resolved() const {
    auto w = window;
    w.mode = mode == "distinct" ? snspd::CountingMode::distinct_channels
                                : snspd::CountingMode::all_tags;
    return w;
  }
};

struct SourceFlags {
  std::string source_path;
  double mu = 1.0;
  double rep_rate_hz = 1e6;
  long fock = -1;
  bool thermal = false;
  std::string shape = "delta";
  double width_ns = 0.0;
  double cw_rate_hz = 0.0;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--source", source_path, "Light source JSON");
    cmd->add_option("--mu", mu, "Mean photons per pulse (Poisson/thermal)");
    cmd->add_option("--rep-rate-hz", rep_rate_hz, "Pulse repetition rate");
    cmd->add_option("--fock", fock, "Fixed photon number per pulse");
    cmd->add_flag("--thermal", thermal, "Thermal photon-number statistics");
    cmd->add_option("--pulse-shape", shape, "Pulse shape: delta | square | exponential")
        ->check(CLI::IsMember({"delta", "square", "exponential"}));
    cmd->add_option("--pulse-width-ns", width_ns, "Square width / exponential decay constant");
    cmd->add_option("--cw-rate-hz", cw_rate_hz, "Continuous-wave photon rate (cw mode)");
  }

  snspd::LightSourceSpec resolved(const CLI::App* cmd) const {
    snspd::LightSourceSpec s;
    if (!source_path.empty()) s = snspd::load_source(resolve_path(source_path));
    // flags win over the JSON document
    if (cmd->count("--mu")) s.mu = mu;
    if (cmd->count("--rep-rate-hz")) s.rep_rate_hz = rep_rate_hz;
    if (cmd->count("--fock")) {
      s.number_model = snspd::PhotonNumberModel::fock;
      s.fock_m = fock;
    }
    if (thermal) s.number_model = snspd::PhotonNumberModel::thermal;
    if (cmd->count("--pulse-shape")) {
      s.pulse_shape = shape == "delta" ? snspd::PulseShape::delta
                      : shape == "square" ? snspd::PulseShape::square
                                          : snspd::PulseShape::exponential;
    }
    if (cmd->count("--pulse-width-ns")) s.pulse_width_ns = width_ns;
    if (cmd->count("--cw-rate-hz")) {
      s.mode = snspd::SourceMode::cw;
      s.cw_rate_hz = cw_rate_hz;
    }
    return s;
  }
};

snspd::DetectorArrayConfig load_or_default_config(const std::string& path) {
  if (path.empty()) return snspd::DetectorArrayConfig::reference_array();
  return snspd::load_config(resolve_path(path));
}

snspd::TimeTagStream load_tags(const std::string& path) {
  std::ifstream in(resolve_path(path), std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open tag file: " + path);
  return snspd::read_tags(in);
}

snspd::ClickStatistics windowed_stats(const std::string& tags_path, const WindowFlags& wf,
                                      int min_bins) {
  const auto stream = load_tags(tags_path);
  return snspd::windowed_click_statistics(stream, wf.resolved(), min_bins);
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2)
    throw std::invalid_argument("grid requires 0 < min < max and at least 2 points");
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i)
    g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
  return g;
}

// --- subcommand handlers ----------------------------------------------------

struct PmatrixArgs {
  MatrixSource matrix;
  int max_photons = 8;
  std::string out, format = "csv", check_table;
  double tolerance = 0.0001;
};

int run_pmatrix(const PmatrixArgs& a) {
  const auto p = a.matrix.build(a.max_photons);
  if (!a.check_table.empty()) {
    std::ifstream in(resolve_path(a.check_table));
    if (!in) throw std::ios_base::failure("cannot open reference table: " + a.check_table);
    const auto ref = snspd::read_matrix_csv(in);
    double max_dev = 0.0;
    for (int n = 0; n <= std::min(p.pixel_count, ref.pixel_count); ++n)
      for (int m = 0; m <= std::min(p.max_photons, ref.max_photons); ++m)
        max_dev = std::max(max_dev, std::abs(p.at(n, m) - ref.at(n, m)));
    std::cout << "max_abs_deviation=" << max_dev << " tolerance=" << a.tolerance << "\n";
    if (max_dev > a.tolerance)
      throw CheckFailure("matrix deviates from the reference table beyond tolerance");
    return kExitOk;
  }
  OutputSink sink(a.out);
  if (a.format == "json")
    sink.stream() << nlohmann::json(p).dump(2) << "\n";
  else
    snspd::write_matrix_csv(p, sink.stream());
  return kExitOk;
}

struct SimulateArgs {
  std::string config_path;
  SourceFlags source;
  std::uint64_t pulses = 0;
  double duration_s = 0.0;
  std::uint64_t seed = 1;
  std::string out, arrivals_out;
  bool no_recovery = false, no_jitter = false, no_darks = false, no_crosstalk = false;
  const CLI::App* cmd = nullptr;
};

int run_simulate(const SimulateArgs& a) {
  snspd::SimulationRun run;
  run.cfg = load_or_default_config(a.config_path);
  run.source = a.source.resolved(a.cmd);
  run.pulses = a.pulses;
  run.duration_s = a.duration_s;
  run.seed = a.seed;
  run.toggles.recovery = !a.no_recovery;
  run.toggles.jitter = !a.no_jitter;
  run.toggles.darks = !a.no_darks;
  run.toggles.crosstalk = !a.no_crosstalk;
  run.keep_arrivals = !a.arrivals_out.empty();

  snspd::SimulationResult result;
  if (run.source.mode == snspd::SourceMode::pulsed && run.pulses == 0) {
    // zero pulses: emit a valid empty stream without running the engine
    run.cfg.validated();
    result.tags.channel_count = static_cast<std::uint16_t>(run.cfg.pixel_count);
    result.tags.metadata = {{"pulses", 0},
                            {"seed", run.seed},
                            {"trigger_period_ps",
                             static_cast<std::int64_t>(std::llround(run.source.period_ns() * 1e3))},
                            {"first_trigger_ps",
                             static_cast<std::int64_t>(std::llround(run.source.period_ns() * 1e3))},
                            {"source", run.source}};
  } else {
    result = snspd::simulate(run);
  }

  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot open output file: " + a.out);
    snspd::write_tags(result.tags, out);
  } else {
    snspd::write_tags_csv(result.tags, std::cout);
  }
  if (!a.arrivals_out.empty()) {
    std::ofstream out(a.arrivals_out);
    if (!out) throw std::ios_base::failure("cannot open arrivals file: " + a.arrivals_out);
    out << "time_ns,pixel,detected\n";
    for (const auto& r : result.arrivals)
      out << std::setprecision(12) << r.time_ns << "," << r.pixel << "," << (r.detected ? 1 : 0)
          << "\n";
  }
  std::cerr << "tags=" << result.tags.tags.size() << " incident=" << result.incident_photons
            << " detected=" << result.detected_photons << " dark=" << result.dark_clicks
            << " crosstalk=" << result.crosstalk_clicks << "\n";
  return kExitOk;
}

std::vector<snspd::ArrivalRecord> read_arrivals_csv(const std::string& path) {
  std::ifstream in(resolve_path(path));
  if (!in) throw std::ios_base::failure("cannot open arrivals file: " + path);
  std::vector<snspd::ArrivalRecord> arrivals;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    snspd::ArrivalRecord r;
    char c1 = 0, c2 = 0;
    int detected = 0;
    std::istringstream row(line);
    if (!(row >> r.time_ns >> c1 >> r.pixel >> c2 >> detected) || c1 != ',' || c2 != ',')
      throw snspd::ParseError("malformed arrivals row: " + line, 0);
    r.detected = detected != 0;
    arrivals.push_back(r);
  }
  return arrivals;
}

int main_impl(int argc, char** argv) {
  CLI::App app{"Multi-pixel superconducting single-photon detector array toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (results are thread-count invariant)");

  // pmatrix
  PmatrixArgs pm;
  auto* pmatrix = app.add_subcommand("pmatrix", "Emit or check the click-probability matrix");
  pm.matrix.add_flags(pmatrix);
  pmatrix->add_option("--max-photons", pm.max_photons, "Photon-number truncation");
  pmatrix->add_option("--out", pm.out, "Output path (default: stdout)");
  pmatrix->add_option("--format", pm.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));
  pmatrix->add_option("--check-table", pm.check_table, "Reference matrix CSV to compare against");
  pmatrix->add_option("--tolerance", pm.tolerance, "Per-entry tolerance for --check-table");

  // simulate
  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run the time-domain array simulation");
  simulate->add_option("--config", sim.config_path, "Detector config JSON");
  sim.source.add_flags(simulate);
  simulate->add_option("--pulses", sim.pulses, "Number of pulses (pulsed mode)");
  simulate->add_option("--duration", sim.duration_s, "Duration in seconds (cw mode)");
  simulate->add_option("--seed", sim.seed, "Master random seed");
  simulate->add_option("--out", sim.out, "Output SNTT tag file (default: CSV to stdout)");
  simulate->add_option("--arrivals", sim.arrivals_out, "Also write ground-truth arrivals CSV");
  simulate->add_flag("--no-recovery", sim.no_recovery, "Disable recovery gating");
  simulate->add_flag("--no-jitter", sim.no_jitter, "Disable timing jitter");
  simulate->add_flag("--no-darks", sim.no_darks, "Disable dark counts");
  simulate->add_flag("--no-crosstalk", sim.no_crosstalk, "Disable crosstalk");
  sim.cmd = simulate;

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Analyze a recorded tag stream");
  analyze->require_subcommand(1);

  struct {
    std::string tags, out;
    WindowFlags wf;
    int min_bins = 0;
  } ac;
  auto* clicks = analyze->add_subcommand("clicks", "Per-pulse click statistics");
  clicks->add_option("--tags", ac.tags, "SNTT tag file")->required();
  ac.wf.add_flags(clicks);
  clicks->add_option("--min-bins", ac.min_bins, "Minimum number of click bins to report");
  clicks->add_option("--out", ac.out, "Output CSV (default: stdout)");

  struct {
    std::string tags, out;
    std::int64_t bin_ps = 1;
    std::int64_t period_ps = 0;
    int channel = -1;
  } ap;
  auto* profile = analyze->add_subcommand("profile", "Time profile modulo the trigger period");
  profile->add_option("--tags", ap.tags, "SNTT tag file")->required();
  profile->add_option("--bin-ps", ap.bin_ps, "Histogram bin width (ps)");
  profile->add_option("--period-ps", ap.period_ps,
                      "Trigger period override (default: stream metadata)");
  profile->add_option("--channel", ap.channel, "Restrict to one channel");
  profile->add_option("--out", ap.out, "Output CSV (default: stdout)");

  struct {
    std::string tags, out;
    int from = 0, to = 1;
    double max_lag_ns = 10.0, bin_ps = 100.0;
    double lag_lo_ns = 1.0, lag_hi_ns = 5.0;
  } ax;
  auto* crosstalk = analyze->add_subcommand("crosstalk", "Pairwise crosstalk lag analysis");
  crosstalk->add_option("--tags", ax.tags, "SNTT tag file")->required();
  crosstalk->add_option("--from", ax.from, "Primary channel");
  crosstalk->add_option("--to", ax.to, "Secondary channel");
  crosstalk->add_option("--max-lag-ns", ax.max_lag_ns, "Histogram span");
  crosstalk->add_option("--bin-ps", ax.bin_ps, "Histogram bin width (ps)");
  crosstalk->add_option("--lag-lo-ns", ax.lag_lo_ns, "Signal lag range start");
  crosstalk->add_option("--lag-hi-ns", ax.lag_hi_ns, "Signal lag range end");
  crosstalk->add_option("--out", ax.out, "Lag histogram CSV (default: stdout)");

  struct {
    std::string arrivals, out;
    int pixels = 14;
    double bin_ns = 0.5, max_dt_ns = 30.0;
    std::uint64_t min_samples = 100;
  } ar;
  auto* recovery = analyze->add_subcommand("recovery", "Efficiency vs time since last click");
  recovery->add_option("--arrivals", ar.arrivals, "Ground-truth arrivals CSV")->required();
  recovery->add_option("--pixels", ar.pixels, "Pixel count");
  recovery->add_option("--bin-ns", ar.bin_ns, "Bin width (ns)");
  recovery->add_option("--max-dt-ns", ar.max_dt_ns, "Curve span (ns)");
  recovery->add_option("--min-samples", ar.min_samples, "Minimum samples per bin");
  recovery->add_option("--out", ar.out, "Output CSV (default: stdout)");

  // fit-mu
  struct {
    std::string tags, out;
    WindowFlags wf;
    MatrixSource matrix;
    int max_photons = 40;
  } fm;
  auto* fitmu = app.add_subcommand("fit-mu", "Maximum-likelihood Poisson mean from click data");
  fitmu->add_option("--tags", fm.tags, "SNTT tag file")->required();
  fm.wf.add_flags(fitmu);
  fm.matrix.add_flags(fitmu);
  fitmu->add_option("--max-photons", fm.max_photons, "Photon-number truncation");
  fitmu->add_option("--out", fm.out, "Output JSON (default: stdout)");

  // reconstruct
  struct {
    std::string tags, out;
    WindowFlags wf;
    MatrixSource matrix;
    int max_photons = 0;  // 0 = default 2N
  } rc;
  auto* reconstruct =
      app.add_subcommand("reconstruct", "Nonparametric photon-number reconstruction");
  reconstruct->add_option("--tags", rc.tags, "SNTT tag file")->required();
  rc.wf.add_flags(reconstruct);
  rc.matrix.add_flags(reconstruct);
  reconstruct->add_option("--max-photons", rc.max_photons,
                          "Photon-number truncation (default: 2x pixel count)");
  reconstruct->add_option("--out", rc.out, "Output JSON (default: stdout)");

  // rate-curve
  struct {
    std::string config, out;
    double rate_min = 1e6, rate_max = 1e10;
    int points = 15;
    double duration_s = 1e-3;
    std::uint64_t seed = 1;
  } rcv;
  auto* rate = app.add_subcommand("rate-curve", "SDE vs detection rate under cw light");
  rate->add_option("--config", rcv.config, "Detector config JSON");
  rate->add_option("--rate-min", rcv.rate_min, "Lowest incident photon rate (Hz)");
  rate->add_option("--rate-max", rcv.rate_max, "Highest incident photon rate (Hz)");
  rate->add_option("--points", rcv.points, "Log-spaced grid points");
  rate->add_option("--duration", rcv.duration_s, "Simulated seconds per grid point");
  rate->add_option("--seed", rcv.seed, "Master random seed");
  rate->add_option("--out", rcv.out, "Output CSV (default: stdout)");

  // herald
  struct {
    std::string out;
    MatrixSource matrix;
    double bucket_eta = 0.895;
    double herald_transmission = 0.95, signal_transmission = 1.0;
    double nbar_min = 0.05, nbar_max = 1.0;
    int points = 20;
    bool poisson = false;
    int max_photons = 60;
  } hd;
  auto* herald = app.add_subcommand("herald", "Heralded g2 with PNR vs bucket detectors");
  hd.matrix.add_flags(herald);
  herald->add_option("--bucket-eta", hd.bucket_eta, "Bucket-detector efficiency");
  herald->add_option("--herald-transmission", hd.herald_transmission, "Herald-arm transmission");
  herald->add_option("--signal-transmission", hd.signal_transmission, "Signal-arm transmission");
  herald->add_option("--nbar-min", hd.nbar_min, "Lowest mean pair number");
  herald->add_option("--nbar-max", hd.nbar_max, "Highest mean pair number");
  herald->add_option("--points", hd.points, "Grid points");
  herald->add_flag("--poisson", hd.poisson, "Poisson pair statistics (default: thermal)");
  herald->add_option("--max-photons", hd.max_photons, "Pair-number truncation");
  herald->add_option("--out", hd.out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0; any malformed invocation maps to 2
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (pmatrix->parsed()) return run_pmatrix(pm);
  if (simulate->parsed()) return run_simulate(sim);

  if (clicks->parsed()) {
    const auto stats = windowed_stats(ac.tags, ac.wf, ac.min_bins);
    OutputSink sink(ac.out);
    snspd::write_click_statistics_csv(stats, sink.stream());
    return kExitOk;
  }
  if (profile->parsed()) {
    const auto stream = load_tags(ap.tags);
    const std::int64_t period =
        ap.period_ps > 0 ? ap.period_ps
                         : stream.metadata.at("trigger_period_ps").get<std::int64_t>();
    const auto h = snspd::time_profile_histogram(stream, period, ap.bin_ps, ap.channel);
    OutputSink sink(ap.out);
    snspd::write_histogram_csv(h, sink.stream());
    return kExitOk;
  }
  if (crosstalk->parsed()) {
    const auto stream = load_tags(ax.tags);
    const auto lag = snspd::crosstalk_histogram(
        stream, ax.from, ax.to, static_cast<std::int64_t>(ax.max_lag_ns * 1e3),
        static_cast<std::int64_t>(ax.bin_ps));
    const auto est =
        snspd::estimate_crosstalk_probability(lag, ax.lag_lo_ns * 1e3, ax.lag_hi_ns * 1e3);
    std::cerr << "primaries=" << lag.primary_count << " probability=" << est.probability
              << " std_error=" << est.std_error << " background_per_bin="
              << est.background_per_bin << "\n";
    OutputSink sink(ax.out);
    snspd::write_histogram_csv(lag.hist, sink.stream());
    return kExitOk;
  }
  if (recovery->parsed()) {
    const auto arrivals = read_arrivals_csv(ar.arrivals);
    const auto curve = snspd::interarrival_efficiency_curve(arrivals, ar.pixels, ar.bin_ns,
                                                            ar.max_dt_ns, ar.min_samples);
    std::cerr << "rt90_ns=" << curve.rt90_ns << " plateau=" << curve.plateau << "\n";
    OutputSink sink(ar.out);
    sink.stream() << "dt_center_ns,efficiency,samples\n" << std::setprecision(9);
    for (std::size_t i = 0; i < curve.dt_centers_ns.size(); ++i)
      sink.stream() << curve.dt_centers_ns[i] << "," << curve.efficiency[i] << ","
                    << curve.samples[i] << "\n";
    return kExitOk;
  }
  if (fitmu->parsed()) {
    const auto p = fm.matrix.build(fm.max_photons);
    const auto stats = windowed_stats(fm.tags, fm.wf, 0);
    const auto fit = snspd::fit_poisson_mu(stats, p, fm.max_photons);
    const nlohmann::json j = {{"mu", fit.mu},
                              {"std_error", fit.std_error},
                              {"chi2", fit.chi2},
                              {"chi2_dof", fit.chi2_dof},
                              {"log_likelihood", fit.log_likelihood},
                              {"converged", fit.converged}};
    OutputSink sink(fm.out);
    sink.stream() << j.dump(2) << "\n";
    std::cerr << "mu=" << fit.mu << " +- " << fit.std_error << "\n";
    return kExitOk;
  }
  if (reconstruct->parsed()) {
    const auto stats = windowed_stats(rc.tags, rc.wf, 0);
    int max_photons = rc.max_photons;
    const auto probe = rc.matrix.build(1);
    if (max_photons <= 0) max_photons = 2 * probe.pixel_count;
    const auto p = rc.matrix.build(max_photons);
    const auto result = snspd::reconstruct_distribution(stats, p, max_photons);
    const nlohmann::json j = {{"distribution", result.distribution.probs},
                              {"mean", result.distribution.mean()},
                              {"residual", result.residual},
                              {"iterations", result.iterations},
                              {"converged", result.converged},
                              {"condition_number", result.condition_number},
                              {"max_simplex_violation", result.max_simplex_violation}};
    OutputSink sink(rc.out);
    sink.stream() << j.dump(2) << "\n";
    return kExitOk;
  }
  if (rate->parsed()) {
    const auto cfg = load_or_default_config(rcv.config);
    const auto grid = log_grid(rcv.rate_min, rcv.rate_max, rcv.points);
    const auto curve = snspd::sde_vs_rate(cfg, grid, rcv.duration_s, rcv.seed);
    double sde_max = 0.0;
    for (const auto& p : curve) sde_max = std::max(sde_max, p.sde);
    std::string mcr = "nan";
    try {
      mcr = std::to_string(snspd::extract_mcr(curve));
    } catch (const std::invalid_argument&) {
    }
    std::cerr << "sde_max=" << sde_max << " mcr_hz=" << mcr << "\n";
    OutputSink sink(rcv.out);
    snspd::write_rate_curve_csv(curve, sink.stream());
    return kExitOk;
  }
  if (herald->parsed()) {
    snspd::PairSourceSpec src;
    src.statistics =
        hd.poisson ? snspd::PairStatistics::poisson : snspd::PairStatistics::thermal;
    src.herald_transmission = hd.herald_transmission;
    src.signal_transmission = hd.signal_transmission;
    const auto p = hd.matrix.build(hd.max_photons);
    const auto grid = log_grid(hd.nbar_min, hd.nbar_max, hd.points);
    const auto scan = snspd::g2_reduction_scan(src, p, hd.bucket_eta, grid, hd.max_photons);
    OutputSink sink(hd.out);
    snspd::write_g2_scan_csv(scan, sink.stream());
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return main_impl(argc, argv);
  } catch (const CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const snspd::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const snspd::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
