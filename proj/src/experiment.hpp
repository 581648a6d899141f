#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "config.hpp"
#include "fit.hpp"
#include "listmode.hpp"
#include "simulate.hpp"

namespace ptc::experiment {

inline constexpr const char* kToolVersion = "0.1.0";

struct PipelineOptions {
  unsigned workers = 0;          // 0 = hardware concurrency
  double bins_ps = 6.1;          // rounded to whole ticks, at least one
  double range_lo_ns = 0.0;      // fit range; used when range_set
  double range_hi_ns = 0.0;
  bool range_set = false;        // otherwise external delay +- 2.5 ns
  listmode::TagFilter filter = listmode::TagFilter::equals(0);
  fit::Weighting weighting = fit::Weighting::Unweighted;
};

struct SweepPointResult {
  double overrange_mv = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t n_records = 0;
  listmode::TagStatistics tags;
  fit::FitReport fit;
  double fwhm_sigma_ps = 0.0;
};

struct ExperimentResult {
  std::vector<SweepPointResult> points;
  fit::ExtrapolationReport report;
};

// Seed for sweep point i, derived from the master seed so points are
// independent but reproducible.
std::uint64_t point_seed(std::uint64_t master_seed, std::size_t index);

// Converts the requested range/binning into ticks for a given scenario.
struct HistogramPlan {
  std::int64_t bin_width_ticks = 1;
  std::int64_t lo_ticks = 0;
  std::int64_t hi_ticks = 0;
};
HistogramPlan plan_histogram(const sim::ScenarioConfig& scenario,
                             const PipelineOptions& options);

// One sweep point: reseeded simulation at the given over-range bound on both
// channels, tag statistics over all records, filtered histogram, peak fit.
SweepPointResult run_sweep_point(const sim::ScenarioConfig& base,
                                 double overrange_mv, std::uint64_t seed,
                                 const PipelineOptions& options,
                                 std::vector<listmode::ListModeRecord>*
                                     records_out = nullptr);

// Full closed loop: >= 3 over-range settings, one simulated run each, then
// the width extrapolation against the combined non-tagged percentile. When
// out_dir is non-empty, writes point_<i>.lst, points.csv,
// extrapolation.json and manifest.json there.
ExperimentResult run_experiment(const config::LoadedConfig& cfg,
                                const std::vector<double>& sweep_mv,
                                const PipelineOptions& options,
                                const std::string& out_dir,
                                const std::string& command_line);

// Simulation command: writes run.lst, summary.json and manifest.json.
sim::SimSummary run_simulate(const config::LoadedConfig& cfg, unsigned workers,
                             const std::string& out_dir,
                             const std::string& command_line);

// Rate table over a source-position grid, as "s_cm,R_AA,R_DA,R_total" CSV.
std::string rates_csv(const sim::ScenarioConfig& scenario, double s_lo_cm,
                      double s_hi_cm, int steps);

std::string summary_json(const sim::SimSummary& summary);
std::string points_csv(const std::vector<SweepPointResult>& points);

}  // namespace ptc::experiment
