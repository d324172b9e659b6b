#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "snspd/array_model.hpp"
#include "snspd/pmatrix.hpp"

namespace snspd {

/// Malformed time-tag file; `offset()` is the byte position of the problem.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

private:
  std::uint64_t offset_;
};

struct TimeTag {
  std::uint16_t channel = 0;
  std::int64_t timestamp_ps = 0;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

/// Ordered (channel, timestamp) records plus free-form JSON metadata.
/// Timestamps are integer picoseconds, non-decreasing.
struct TimeTagStream {
  std::uint16_t channel_count = 0;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<TimeTag> tags;
};

namespace detail {

constexpr char kMagic[4] = {'S', 'N', 'T', 'T'};
constexpr std::uint16_t kFormatVersion = 1;
constexpr std::size_t kRecordSize = 12;

inline void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_uint(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

/// Binary "SNTT" format: magic, version u16, channel count u16, u32
/// length-prefixed JSON metadata, then 12-byte little-endian records
/// (channel u16, reserved u16, timestamp_ps u64).
inline void write_tags(const TimeTagStream& stream, std::ostream& out) {
  std::string buf;
  buf.append(detail::kMagic, 4);
  detail::put_u16(buf, detail::kFormatVersion);
  detail::put_u16(buf, stream.channel_count);
  const std::string meta = stream.metadata.dump();
  detail::put_u32(buf, static_cast<std::uint32_t>(meta.size()));
  buf += meta;
  for (const auto& tag : stream.tags) {
    detail::put_u16(buf, tag.channel);
    detail::put_u16(buf, 0);  // reserved
    detail::put_u64(buf, static_cast<std::uint64_t>(tag.timestamp_ps));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write_tags: write failed");
}

inline void write_tags(const TimeTagStream& stream, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_tags(stream, out);
}

inline TimeTagStream read_tags(std::istream& in) {
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  const std::size_t size = data.size();

  if (size < 8 || std::memcmp(data.data(), detail::kMagic, 4) != 0)
    throw ParseError("bad magic, not an SNTT stream", 0);
  const auto version = static_cast<std::uint16_t>(detail::get_uint(p + 4, 2));
  if (version != detail::kFormatVersion)
    throw ParseError("unsupported format version " + std::to_string(version), 4);

  TimeTagStream stream;
  stream.channel_count = static_cast<std::uint16_t>(detail::get_uint(p + 6, 2));
  if (size < 12) throw ParseError("truncated header", size);
  const auto meta_len = static_cast<std::size_t>(detail::get_uint(p + 8, 4));
  if (size < 12 + meta_len) throw ParseError("truncated metadata", size);
  try {
    stream.metadata = meta_len == 0 ? nlohmann::json::object()
                                    : nlohmann::json::parse(data.substr(12, meta_len));
  } catch (const nlohmann::json::parse_error&) {
    throw ParseError("invalid metadata JSON", 12);
  }

  std::size_t off = 12 + meta_len;
  if ((size - off) % detail::kRecordSize != 0)
    throw ParseError("truncated record", size - (size - off) % detail::kRecordSize);
  const std::size_t n_records = (size - off) / detail::kRecordSize;
  stream.tags.reserve(n_records);
  std::int64_t prev = std::numeric_limits<std::int64_t>::min();
  for (std::size_t i = 0; i < n_records; ++i, off += detail::kRecordSize) {
    TimeTag tag;
    tag.channel = static_cast<std::uint16_t>(detail::get_uint(p + off, 2));
    tag.timestamp_ps = static_cast<std::int64_t>(detail::get_uint(p + off + 4, 8));
    if (stream.channel_count != 0 && tag.channel >= stream.channel_count)
      throw ParseError("channel out of range in record " + std::to_string(i), off);
    if (tag.timestamp_ps < prev)
      throw ParseError("non-monotone timestamp in record " + std::to_string(i), off);
    prev = tag.timestamp_ps;
    stream.tags.push_back(tag);
  }
  return stream;
}

inline TimeTagStream read_tags(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return read_tags(in);
}

inline void write_tags_csv(const TimeTagStream& stream, std::ostream& out) {
  out << "channel,timestamp_ps\n";
  for (const auto& tag : stream.tags) out << tag.channel << "," << tag.timestamp_ps << "\n";
}

// --- windowing --------------------------------------------------------------

enum class CountingMode {
  all_tags,          // every tag in the window counts (dynamic PNR rule)
  distinct_channels  // a channel contributes at most one count per window
};

/// Per-pulse click counts: pulse k collects tags with timestamp in
/// [k*period + offset, k*period + offset + width), half-open.
inline std::vector<std::uint32_t> window_clicks(const TimeTagStream& stream,
                                                std::int64_t period_ps, std::int64_t offset_ps,
                                                std::int64_t width_ps, std::uint64_t pulse_count,
                                                CountingMode mode = CountingMode::all_tags) {
  if (period_ps <= 0) throw std::invalid_argument("window_clicks: period must be positive");
  if (width_ps <= 0) throw std::invalid_argument("window_clicks: width must be positive");
  if (width_ps > period_ps)
    throw std::invalid_argument("window_clicks: overlapping windows (width > period)");

  std::vector<std::uint32_t> counts(pulse_count, 0);
  std::vector<std::int64_t> last_seen;  // per-channel pulse index, distinct mode
  if (mode == CountingMode::distinct_channels)
    last_seen.assign(std::max<int>(stream.channel_count, 1), -1);

  for (const auto& tag : stream.tags) {
    const std::int64_t rel = tag.timestamp_ps - offset_ps;
    std::int64_t k = rel / period_ps;
    if (rel < 0 && rel % period_ps != 0) --k;  // floor division
    if (k < 0 || static_cast<std::uint64_t>(k) >= pulse_count) continue;
    if (tag.timestamp_ps - (k * period_ps + offset_ps) >= width_ps) continue;
    if (mode == CountingMode::distinct_channels) {
      if (tag.channel < last_seen.size() && last_seen[tag.channel] == k) continue;
      if (tag.channel < last_seen.size()) last_seen[tag.channel] = k;
    }
    ++counts[static_cast<std::size_t>(k)];
  }
  return counts;
}

/// Normalized click-count histogram with multinomial standard errors.
inline ClickStatistics click_statistics(const std::vector<std::uint32_t>& per_pulse_counts,
                                        int min_bins = 0) {
  if (per_pulse_counts.empty())
    throw std::invalid_argument("click_statistics: need at least one pulse");
  std::uint32_t max_clicks = 0;
  for (auto c : per_pulse_counts) max_clicks = std::max(max_clicks, c);
  const std::size_t bins = std::max<std::size_t>(max_clicks + 1, static_cast<std::size_t>(min_bins));

  ClickStatistics q;
  q.counts.assign(bins, 0);
  for (auto c : per_pulse_counts) ++q.counts[c];
  q.trials = per_pulse_counts.size();
  q.probs.resize(bins);
  q.std_errors.resize(bins);
  const double t = static_cast<double>(q.trials);
  for (std::size_t n = 0; n < bins; ++n) {
    q.probs[n] = static_cast<double>(q.counts[n]) / t;
    q.std_errors[n] = std::sqrt(q.probs[n] * (1.0 - q.probs[n]) / t);
  }
  return q;
}

// --- histograms -------------------------------------------------------------

struct Histogram {
  double bin_width_ps = 0.0;
  double origin_ps = 0.0;  // left edge of bin 0
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
  double bin_center(std::size_t i) const { return origin_ps + (i + 0.5) * bin_width_ps; }
};

/// Histogram of tag time modulo the trigger period (the per-period pulse
/// profile), optionally restricted to one channel.
inline Histogram time_profile_histogram(const TimeTagStream& stream, std::int64_t period_ps,
                                        std::int64_t bin_width_ps, int channel = -1) {
  if (period_ps <= 0 || bin_width_ps <= 0)
    throw std::invalid_argument("time_profile_histogram: period and bin width must be positive");
  Histogram h;
  h.bin_width_ps = static_cast<double>(bin_width_ps);
  const std::size_t n_bins = static_cast<std::size_t>((period_ps + bin_width_ps - 1) / bin_width_ps);
  h.counts.assign(n_bins, 0);
  for (const auto& tag : stream.tags) {
    if (channel >= 0 && tag.channel != channel) continue;
    std::int64_t phase = tag.timestamp_ps % period_ps;
    if (phase < 0) phase += period_ps;
    ++h.counts[static_cast<std::size_t>(phase / bin_width_ps)];
  }
  return h;
}

/// Lag histogram of (secondary tag time - nearest preceding primary tag
/// time) up to max_lag, for crosstalk estimation. Also reports
/// the number of primary tags seen.
struct LagHistogram {
  Histogram hist;
  std::uint64_t primary_count = 0;
};

inline LagHistogram crosstalk_histogram(const TimeTagStream& stream, int primary_channel,
                                        int secondary_channel, std::int64_t max_lag_ps,
                                        std::int64_t bin_width_ps) {
  if (primary_channel == secondary_channel)
    throw std::invalid_argument("crosstalk_histogram: channels must differ");
  if (max_lag_ps <= 0 || bin_width_ps <= 0)
    throw std::invalid_argument("crosstalk_histogram: lag and bin width must be positive");

  LagHistogram out;
  out.hist.bin_width_ps = static_cast<double>(bin_width_ps);
  const std::size_t n_bins =
      static_cast<std::size_t>((max_lag_ps + bin_width_ps - 1) / bin_width_ps);
  out.hist.counts.assign(n_bins, 0);

  std::int64_t last_primary = std::numeric_limits<std::int64_t>::min();
  bool have_primary = false;
  for (const auto& tag : stream.tags) {
    if (tag.channel == primary_channel) {
      last_primary = tag.timestamp_ps;
      have_primary = true;
      ++out.primary_count;
    } else if (tag.channel == secondary_channel && have_primary) {
      const std::int64_t lag = tag.timestamp_ps - last_primary;
      if (lag >= 0 && lag < max_lag_ps)
        ++out.hist.counts[static_cast<std::size_t>(lag / bin_width_ps)];
    }
  }
  return out;
}

struct CrosstalkEstimate {
  double probability = 0.0;
  double std_error = 0.0;
  double background_per_bin = 0.0;
};

/// Crosstalk probability from a lag histogram: counts inside the lag range,
/// background-subtracted with the mean bin level outside the range, divided
/// by the number of primary tags. Binomial standard error.
inline CrosstalkEstimate estimate_crosstalk_probability(const LagHistogram& lag,
                                                        double lag_lo_ps, double lag_hi_ps) {
  if (lag.primary_count == 0)
    throw std::invalid_argument("estimate_crosstalk_probability: zero primary counts");
  double in_range = 0.0;
  double outside = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < lag.hist.counts.size(); ++i) {
    const double c = lag.hist.bin_center(i);
    if (c >= lag_lo_ps && c < lag_hi_ps) {
      in_range += static_cast<double>(lag.hist.counts[i]);
      ++n_in;
    } else {
      outside += static_cast<double>(lag.hist.counts[i]);
      ++n_out;
    }
  }
  CrosstalkEstimate est;
  est.background_per_bin = n_out > 0 ? outside / static_cast<double>(n_out) : 0.0;
  const double signal = in_range - est.background_per_bin * static_cast<double>(n_in);
  const double primaries = static_cast<double>(lag.primary_count);
  est.probability = std::max(signal, 0.0) / primaries;
  est.std_error = std::sqrt(std::max(est.probability * (1.0 - est.probability), 0.0) / primaries);
  return est;
}

struct ArrayCrosstalk {
  double ordered_sum = 0.0;    // sum over ordered pairs (i -> j)
  double unordered_sum = 0.0;  // sum over unordered pairs {i, j}
};

/// First-order total crosstalk for the array. Estimates must cover every
/// ordered pair configured in the adjacency; the pair-count convention is
/// ambiguous in the literature, so both sums are reported.
inline ArrayCrosstalk total_array_crosstalk(const std::vector<CrosstalkPair>& estimates,
                                            const CrosstalkModel& adjacency) {
  auto find = [&](int from, int to) -> const CrosstalkPair* {
    for (const auto& e : estimates)
      if (e.from == from && e.to == to) return &e;
    return nullptr;
  };
  ArrayCrosstalk total;
  for (const auto& pair : adjacency.pairs) {
    const auto* e = find(pair.from, pair.to);
    if (e == nullptr)
      throw std::invalid_argument("total_array_crosstalk: missing estimate for pair (" +
                                  std::to_string(pair.from) + "->" + std::to_string(pair.to) + ")");
    total.ordered_sum += e->probability;
    if (pair.from < pair.to) {
      const auto* rev = find(pair.to, pair.from);
      total.unordered_sum += 0.5 * (e->probability + (rev ? rev->probability : e->probability));
    }
  }
  return total;
}

// --- recovery curve extraction ----------------------------------------------

/// Ground-truth photon arrival retained by the simulator.
struct ArrivalRecord {
  double time_ns = 0.0;
  int pixel = 0;
  bool detected = false;
};

struct EfficiencyCurve {
  std::vector<double> dt_centers_ns;
  std::vector<double> efficiency;
  std::vector<std::uint64_t> samples;
  double plateau = 0.0;
  double rt90_ns = 0.0;
  std::vector<std::size_t> dropped_bins;  // insufficient statistics
};

/// Detection probability vs time since the previous detection on the same
/// pixel, from simulation ground truth. RT90 is the first bin whose
/// efficiency reaches 90% of the plateau (mean of the last quarter of bins).
inline EfficiencyCurve interarrival_efficiency_curve(const std::vector<ArrivalRecord>& arrivals,
                                                     int pixel_count, double bin_width_ns,
                                                     double max_dt_ns,
                                                     std::uint64_t min_samples = 100) {
  if (bin_width_ns <= 0.0 || max_dt_ns <= bin_width_ns)
    throw std::invalid_argument("interarrival_efficiency_curve: bad binning");
  const std::size_t n_bins = static_cast<std::size_t>(std::ceil(max_dt_ns / bin_width_ns));
  std::vector<std::uint64_t> total(n_bins, 0), detected(n_bins, 0);
  std::vector<double> last_click(pixel_count, -1.0);
  std::vector<bool> has_click(pixel_count, false);

  for (const auto& a : arrivals) {
    if (has_click[a.pixel]) {
      const double dt = a.time_ns - last_click[a.pixel];
      if (dt >= 0.0 && dt < max_dt_ns) {
        const auto bin = static_cast<std::size_t>(dt / bin_width_ns);
        ++total[bin];
        if (a.detected) ++detected[bin];
      }
    }
    if (a.detected) {
      last_click[a.pixel] = a.time_ns;
      has_click[a.pixel] = true;
    }
  }

  EfficiencyCurve curve;
  for (std::size_t i = 0; i < n_bins; ++i) {
    curve.dt_centers_ns.push_back((i + 0.5) * bin_width_ns);
    curve.samples.push_back(total[i]);
    if (total[i] < min_samples) {
      curve.dropped_bins.push_back(i);
      curve.efficiency.push_back(std::nan(""));
    } else {
      curve.efficiency.push_back(static_cast<double>(detected[i]) /
                                 static_cast<double>(total[i]));
    }
  }

  double plateau_sum = 0.0;
  std::size_t plateau_n = 0;
  for (std::size_t i = 3 * n_bins / 4; i < n_bins; ++i)
    if (!std::isnan(curve.efficiency[i])) {
      plateau_sum += curve.efficiency[i];
      ++plateau_n;
    }
  curve.plateau = plateau_n > 0 ? plateau_sum / static_cast<double>(plateau_n) : 0.0;
  curve.rt90_ns = max_dt_ns;
  for (std::size_t i = 0; i < n_bins; ++i)
    if (!std::isnan(curve.efficiency[i]) && curve.efficiency[i] >= 0.9 * curve.plateau) {
      curve.rt90_ns = curve.dt_centers_ns[i];
      break;
    }
  return curve;
}

// --- histogram / statistics output ------------------------------------------

inline void write_histogram_csv(const Histogram& h, std::ostream& out) {
  out << "bin_center_ps,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    out << std::fixed << std::setprecision(1) << h.bin_center(i) << "," << h.counts[i] << "\n";
}

inline void write_click_statistics_csv(const ClickStatistics& q, std::ostream& out) {
  out << "clicks,probability,std_error,count\n";
  for (std::size_t n = 0; n < q.probs.size(); ++n) {
    out << n << "," << std::setprecision(9) << q.probs[n] << ","
        << (n < q.std_errors.size() ? q.std_errors[n] : 0.0) << ","
        << (n < q.counts.size() ? q.counts[n] : 0) << "\n";
  }
}

}  // namespace snspd
