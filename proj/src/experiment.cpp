#include "experiment.hpp"

#include <charconv>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "physics.hpp"
#include "rng.hpp"

namespace ptc::experiment {

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

std::string utc_now_iso8601() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::string& out_dir,
                    const config::LoadedConfig& cfg,
                    const std::string& command_line,
                    const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["config_digest"] = config::digest(cfg.source_text);
  j["master_seed"] = cfg.scenario.master_seed;
  j["tool_version"] = kToolVersion;
  j["command_line"] = command_line;
  j["outputs"] = outputs;
  j["created_utc"] = utc_now_iso8601();
  write_text_file(out_dir + "/manifest.json", j.dump(2) + "\n");
}

void ensure_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " +
                        ec.message());
}

}  // namespace

std::uint64_t point_seed(std::uint64_t master_seed, std::size_t index) {
  return mix_seed(master_seed, 0x70743A737765ull + index);
}

HistogramPlan plan_histogram(const sim::ScenarioConfig& scenario,
                             const PipelineOptions& options) {
  HistogramPlan plan;
  const double tick = scenario.pta_tick_ps;
  plan.bin_width_ticks =
      std::max<std::int64_t>(1, std::llround(options.bins_ps / tick));
  double lo_ps, hi_ps;
  if (options.range_set) {
    lo_ps = options.range_lo_ns * 1e3;
    hi_ps = options.range_hi_ns * 1e3;
  } else {
    lo_ps = scenario.external_delay_ps - 2500.0;
    hi_ps = scenario.external_delay_ps + 2500.0;
  }
  plan.lo_ticks = static_cast<std::int64_t>(std::llround(lo_ps / tick));
  plan.hi_ticks = static_cast<std::int64_t>(std::llround(hi_ps / tick));
  if (plan.hi_ticks <= plan.lo_ticks)
    throw ConfigError("empty fit range requested");
  return plan;
}

SweepPointResult run_sweep_point(const sim::ScenarioConfig& base,
                                 double overrange_mv, std::uint64_t seed,
                                 const PipelineOptions& options,
                                 std::vector<listmode::ListModeRecord>*
                                     records_out) {
  sim::ScenarioConfig scenario = base;
  scenario.start_elec.overrange_upper_mv = overrange_mv;
  scenario.stop_elec.overrange_upper_mv = overrange_mv;
  scenario.master_seed = seed;

  SweepPointResult point;
  point.overrange_mv = overrange_mv;
  point.seed = seed;

  sim::SimResult sim_result = sim::run_simulation(scenario, options.workers);
  point.n_records = sim_result.records.size();
  if (sim_result.records.empty())
    throw NumericError("sweep point at " + format_double(overrange_mv) +
                       " mV produced no coincidences");
  point.tags = listmode::tag_statistics(sim_result.records);

  const HistogramPlan plan = plan_histogram(scenario, options);
  const listmode::Histogram hist =
      listmode::build_histogram(sim_result.records, options.filter,
                                plan.bin_width_ticks, plan.lo_ticks,
                                plan.hi_ticks);
  point.fit = fit::fit_lorentzian(hist, scenario.pta_tick_ps,
                                  options.weighting);
  point.fwhm_sigma_ps = fit::param_sigma(point.fit, 2);
  if (records_out) *records_out = std::move(sim_result.records);
  return point;
}

ExperimentResult run_experiment(const config::LoadedConfig& cfg,
                                const std::vector<double>& sweep_mv,
                                const PipelineOptions& options,
                                const std::string& out_dir,
                                const std::string& command_line) {
  if (sweep_mv.size() < 3)
    throw ConfigError("experiment sweep needs at least 3 over-range settings, "
                      "got " + std::to_string(sweep_mv.size()));
  sim::throw_if_invalid(cfg.scenario);
  for (double v : sweep_mv) {
    if (!(v > cfg.scenario.start_elec.threshold_lower_mv) ||
        !(v > cfg.scenario.stop_elec.threshold_lower_mv))
      throw ConfigError("sweep over-range bound " + format_double(v) +
                        " mV must exceed both lower thresholds");
  }

  const bool writing = !out_dir.empty();
  if (writing) ensure_dir(out_dir);
  std::vector<std::string> outputs;

  ExperimentResult result;
  std::vector<fit::ExtrapolationPoint> fit_points;
  for (std::size_t i = 0; i < sweep_mv.size(); ++i) {
    std::vector<listmode::ListModeRecord> records;
    SweepPointResult point;
    try {
      point = run_sweep_point(cfg.scenario, sweep_mv[i],
                              point_seed(cfg.scenario.master_seed, i), options,
                              writing ? &records : nullptr);
    } catch (const std::exception& e) {
      throw NumericError("experiment sweep point " + std::to_string(i) +
                         " (overrange " + format_double(sweep_mv[i]) +
                         " mV) failed: " + e.what());
    }
    if (writing) {
      const std::string name = "point_" + std::to_string(i) + ".lst";
      listmode::write_listmode_file(records, cfg.scenario.pta_tick_ps,
                                    out_dir + "/" + name);
      outputs.push_back(name);
    }
    fit_points.push_back({point.tags.combined_x, point.fit.params.fwhm_ps,
                          point.fwhm_sigma_ps});
    result.points.push_back(std::move(point));
  }

  try {
    result.report = fit::fit_extrapolation(fit_points, cfg.terms.jitter_term_ps,
                                           cfg.terms.source_term_ps);
  } catch (const std::exception& e) {
    throw NumericError(std::string("experiment extrapolation fit failed: ") +
                       e.what());
  }

  if (writing) {
    write_text_file(out_dir + "/points.csv", points_csv(result.points));
    outputs.push_back("points.csv");
    write_text_file(out_dir + "/extrapolation.json",
                    fit::extrapolation_report_json(result.report));
    outputs.push_back("extrapolation.json");
    write_manifest(out_dir, cfg, command_line, outputs);
  }
  return result;
}

sim::SimSummary run_simulate(const config::LoadedConfig& cfg, unsigned workers,
                             const std::string& out_dir,
                             const std::string& command_line) {
  sim::throw_if_invalid(cfg.scenario);
  ensure_dir(out_dir);
  const sim::SimResult result = sim::run_simulation(cfg.scenario, workers);
  listmode::write_listmode_file(result.records, cfg.scenario.pta_tick_ps,
                                out_dir + "/run.lst");
  write_text_file(out_dir + "/summary.json", summary_json(result.summary));
  write_manifest(out_dir, cfg, command_line, {"run.lst", "summary.json"});
  return result.summary;
}

std::string rates_csv(const sim::ScenarioConfig& scenario, double s_lo_cm,
                      double s_hi_cm, int steps) {
  const double length = scenario.geometry.separation_cm;
  if (!(s_lo_cm > 0.0) || !(s_hi_cm < length) || !(s_lo_cm <= s_hi_cm))
    throw ConfigError("rates grid must satisfy 0 < lo <= hi < L");
  if (steps < 1) throw ConfigError("rates grid needs at least one step");

  const auto fractions =
      physics::two_photon_fraction(scenario.source.pickoff_fraction);
  std::ostringstream out;
  out << "s_cm,R_AA,R_DA,R_total\n";
  for (int i = 0; i < steps; ++i) {
    const double s =
        steps == 1 ? s_lo_cm
                   : s_lo_cm + (s_hi_cm - s_lo_cm) * i / (steps - 1);
    const auto rates = physics::coincidence_rates(
        scenario.start_mcp.efficiency, scenario.stop_mcp.efficiency,
        scenario.geometry, s, fractions, scenario.source.activity_per_s);
    out << format_double(s) << ',' << format_double(rates.aa) << ','
        << format_double(rates.da) << ',' << format_double(rates.total)
        << '\n';
  }
  return out.str();
}

std::string summary_json(const sim::SimSummary& s) {
  nlohmann::json j;
  j["singles_rate_start_per_s"] = s.singles_rate_start;
  j["singles_rate_stop_per_s"] = s.singles_rate_stop;
  j["coincidence_rate_per_s"] = s.coincidence_rate;
  j["fraction_overrange_start"] = s.fraction_overrange_start;
  j["fraction_overrange_stop"] = s.fraction_overrange_stop;
  j["nontagged_percent_start"] = s.nontagged_percent_start;
  j["nontagged_percent_stop"] = s.nontagged_percent_stop;
  j["decays_simulated"] = s.decays_simulated;
  j["model_time_s"] = s.model_time_s;
  j["truth_aa_records"] = s.truth_aa_records;
  j["truth_da_records"] = s.truth_da_records;
  return j.dump(2) + "\n";
}

std::string points_csv(const std::vector<SweepPointResult>& points) {
  std::ostringstream out;
  out << "overrange_mv,x_percent,fwhm_ps,fwhm_sigma_ps,"
         "nontagged_percent_start,nontagged_percent_stop,records,"
         "reduced_chi_square,converged\n";
  for (const auto& p : points) {
    out << format_double(p.overrange_mv) << ','
        << format_double(p.tags.combined_x) << ','
        << format_double(p.fit.params.fwhm_ps) << ','
        << format_double(p.fwhm_sigma_ps) << ','
        << format_double(p.tags.nontagged_percent_start) << ','
        << format_double(p.tags.nontagged_percent_stop) << ','
        << p.n_records << ',' << format_double(p.fit.reduced_chi_square)
        << ',' << (p.fit.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace ptc::experiment
