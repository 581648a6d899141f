#include "listmode.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "errors.hpp"

namespace ptc::listmode {

namespace {

constexpr int kFormatVersion = 1;

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Parses the full string as T; returns false on any trailing garbage.
template <typename T>
bool parse_exact(std::string_view text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

void write_listmode(std::span<const ListModeRecord> records, double tick_ps,
                    std::ostream& out) {
  out << "ticks_ps=" << format_double(tick_ps) << ",version=" << kFormatVersion
      << '\n';
  for (const auto& r : records) {
    out << r.interval_ticks << ',' << static_cast<int>(r.tag) << '\n';
  }
}

void write_listmode_file(std::span<const ListModeRecord> records,
                         double tick_ps, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_listmode(records, tick_ps, out);
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

ListModeData read_listmode(std::istream& in) {
  ListModeData data;
  std::string line;
  if (!std::getline(in, line)) throw IoError("list-mode input is empty");

  constexpr std::string_view kPrefix = "ticks_ps=";
  const auto comma = line.find(',');
  if (line.rfind(kPrefix, 0) != 0 || comma == std::string::npos)
    throw IoError("list-mode header malformed at line 1: '" + line + "'");
  double tick = 0.0;
  if (!parse_exact(std::string_view(line).substr(kPrefix.size(),
                                                 comma - kPrefix.size()),
                   tick) ||
      !(tick > 0.0))
    throw IoError("list-mode header has invalid tick at line 1");
  constexpr std::string_view kVersion = "version=";
  std::string_view rest = std::string_view(line).substr(comma + 1);
  int version = -1;
  if (rest.rfind(kVersion, 0) != 0 ||
      !parse_exact(rest.substr(kVersion.size()), version))
    throw IoError("list-mode header malformed at line 1: '" + line + "'");
  if (version != kFormatVersion)
    throw IoError("unsupported list-mode version " + std::to_string(version) +
                  " (expected " + std::to_string(kFormatVersion) + ")");
  data.tick_ps = tick;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      // Tolerate a single trailing blank line only.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw IoError("list-mode parse error at line " +
                    std::to_string(line_no) + ": empty line");
    }
    const auto sep = line.find(',');
    if (sep == std::string::npos)
      throw IoError("list-mode parse error at line " +
                    std::to_string(line_no) + ": missing comma");
    std::int64_t ticks = 0;
    int tag = -1;
    if (!parse_exact(std::string_view(line).substr(0, sep), ticks) ||
        !parse_exact(std::string_view(line).substr(sep + 1), tag))
      throw IoError("list-mode parse error at line " +
                    std::to_string(line_no) + ": '" + line + "'");
    if (tag < 0 || tag > 15)
      throw IoError("list-mode parse error at line " +
                    std::to_string(line_no) + ": tag " + std::to_string(tag) +
                    " outside [0, 15]");
    data.records.push_back({ticks, static_cast<std::uint8_t>(tag)});
  }
  return data;
}

ListModeData read_listmode_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_listmode(in);
}

TagFilter TagFilter::parse(std::string_view text) {
  if (text == "all") return all();
  if (text == "nontagged") return equals(0);
  constexpr std::string_view kTagEq = "tag==";
  if (text.rfind(kTagEq, 0) == 0) {
    int tag = -1;
    if (parse_exact(text.substr(kTagEq.size()), tag) && tag >= 0 && tag <= 15)
      return equals(tag);
  }
  throw ConfigError("invalid tag filter '" + std::string(text) +
                    "' (expected all, nontagged or tag==N)");
}

std::string TagFilter::str() const {
  if (mode == Mode::All) return "all";
  return "tag==" + std::to_string(tag);
}

std::uint64_t Histogram::total_counts() const {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  return total;
}

Histogram build_histogram(std::span<const ListModeRecord> records,
                          const TagFilter& filter,
                          std::int64_t bin_width_ticks, std::int64_t lo_ticks,
                          std::int64_t hi_ticks) {
  if (bin_width_ticks < 1)
    throw ConfigError("histogram bin width must be at least one tick");
  if (hi_ticks <= lo_ticks)
    throw ConfigError("empty histogram range [" + std::to_string(lo_ticks) +
                      ", " + std::to_string(hi_ticks) + ")");
  const std::int64_t span = hi_ticks - lo_ticks;
  const std::int64_t nbins = (span + bin_width_ticks - 1) / bin_width_ticks;
  if (nbins > (std::int64_t{1} << 28))
    throw ConfigError("histogram would have " + std::to_string(nbins) +
                      " bins; refusing");

  Histogram hist;
  hist.bin_width_ticks = bin_width_ticks;
  hist.origin_ticks = lo_ticks;
  hist.counts.assign(static_cast<std::size_t>(nbins), 0);
  const std::int64_t covered_hi = lo_ticks + nbins * bin_width_ticks;
  for (const auto& r : records) {
    if (!filter.accepts(r.tag)) continue;
    if (r.interval_ticks < lo_ticks) {
      ++hist.underflow;
    } else if (r.interval_ticks >= covered_hi) {
      ++hist.overflow;
    } else {
      const std::int64_t idx =
          floor_div(r.interval_ticks - lo_ticks, bin_width_ticks);
      ++hist.counts[static_cast<std::size_t>(idx)];
    }
  }
  return hist;
}

void write_histogram_csv(const Histogram& hist, double tick_ps,
                         std::ostream& out) {
  out << "bin_center_ps,counts\n";
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    out << format_double(hist.bin_center_ticks(b) * tick_ps) << ','
        << hist.counts[b] << '\n';
  }
}

std::string histogram_csv(const Histogram& hist, double tick_ps) {
  std::ostringstream out;
  write_histogram_csv(hist, tick_ps, out);
  return out.str();
}

TagStatistics tag_statistics(std::span<const ListModeRecord> records) {
  if (records.empty())
    throw ConfigError("tag statistics requested for an empty record set");
  std::uint64_t start_clear = 0;
  std::uint64_t stop_clear = 0;
  for (const auto& r : records) {
    if ((r.tag & 0x1) == 0) ++start_clear;
    if ((r.tag & 0x2) == 0) ++stop_clear;
  }
  const double n = static_cast<double>(records.size());
  TagStatistics stats;
  stats.nontagged_percent_start = 100.0 * static_cast<double>(start_clear) / n;
  stats.nontagged_percent_stop = 100.0 * static_cast<double>(stop_clear) / n;
  stats.combined_x = std::hypot(stats.nontagged_percent_start,
                                stats.nontagged_percent_stop);
  return stats;
}

}  // namespace ptc::listmode
