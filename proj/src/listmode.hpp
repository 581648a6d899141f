#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ptc::listmode {

// One coincidence event: signed start/stop interval in PTA ticks plus the
// 4-bit hardware tag (bit 0 = start over-range, bit 1 = stop over-range).
struct ListModeRecord {
  std::int64_t interval_ticks = 0;
  std::uint8_t tag = 0;

  friend bool operator==(const ListModeRecord&,
                         const ListModeRecord&) = default;
};

struct ListModeData {
  double tick_ps = 0.305;
  std::vector<ListModeRecord> records;
};

// Text list file: header "ticks_ps=<tick>,version=1", then one
// "<interval_ticks>,<tag>" line per record. LF line endings, dot decimals.
void write_listmode(std::span<const ListModeRecord> records, double tick_ps,
                    std::ostream& out);
void write_listmode_file(std::span<const ListModeRecord> records,
                         double tick_ps, const std::string& path);

ListModeData read_listmode(std::istream& in);
ListModeData read_listmode_file(const std::string& path);

// Tag selection for histogramming: everything, or one exact tag value.
// "nontagged" is shorthand for tag==0.
struct TagFilter {
  enum class Mode { All, Equals };
  Mode mode = Mode::All;
  int tag = 0;

  bool accepts(std::uint8_t t) const {
    return mode == Mode::All || static_cast<int>(t) == tag;
  }

  static TagFilter all() { return TagFilter{}; }
  static TagFilter equals(int tag) {
    return TagFilter{Mode::Equals, tag};
  }
  // Accepts "all", "nontagged", "tag==N".
  static TagFilter parse(std::string_view text);
  std::string str() const;
};

struct Histogram {
  std::int64_t bin_width_ticks = 1;
  std::int64_t origin_ticks = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t underflow = 0;  // filtered records below the range
  std::uint64_t overflow = 0;   // filtered records above the range

  std::int64_t bin_lo_ticks(std::size_t b) const {
    return origin_ticks + static_cast<std::int64_t>(b) * bin_width_ticks;
  }
  double bin_center_ticks(std::size_t b) const {
    return static_cast<double>(bin_lo_ticks(b)) +
           0.5 * static_cast<double>(bin_width_ticks);
  }
  std::uint64_t total_counts() const;
};

// Bins the filtered records over [lo_ticks, hi_ticks); bin b covers
// [origin + b*w, origin + (b+1)*w). Records outside the binned range are
// tallied in underflow/overflow, never dropped silently.
Histogram build_histogram(std::span<const ListModeRecord> records,
                          const TagFilter& filter,
                          std::int64_t bin_width_ticks, std::int64_t lo_ticks,
                          std::int64_t hi_ticks);

// CSV export: header "bin_center_ps,counts", centers in ps.
void write_histogram_csv(const Histogram& hist, double tick_ps,
                         std::ostream& out);
std::string histogram_csv(const Histogram& hist, double tick_ps);

// Per-channel percentage of records whose over-range bit is clear, plus the
// quadrature combination used as the extrapolation abscissa.
struct TagStatistics {
  double nontagged_percent_start = 0.0;
  double nontagged_percent_stop = 0.0;
  double combined_x = 0.0;  // sqrt(start^2 + stop^2); may exceed 100
};

TagStatistics tag_statistics(std::span<const ListModeRecord> records);

}  // namespace ptc::listmode
