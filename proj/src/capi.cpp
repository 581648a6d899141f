#include "ptcoinc/ptcoinc.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "config.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "fit.hpp"
#include "listmode.hpp"
#include "physics.hpp"
#include "simulate.hpp"

struct ptc_config {
  ptc::config::LoadedConfig cfg;
};

struct ptc_records {
  ptc::listmode::ListModeData data;
};

struct ptc_histogram {
  ptc::listmode::Histogram hist;
  double tick_ps = 0.305;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

// Runs the body, translating the C++ error taxonomy into status codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return PTC_OK;
  } catch (const ptc::ConfigError& e) {
    return fail(PTC_ERR_CONFIG, e.what());
  } catch (const ptc::IoError& e) {
    return fail(PTC_ERR_IO, e.what());
  } catch (const ptc::NumericError& e) {
    return fail(PTC_ERR_NUMERIC, e.what());
  } catch (const std::domain_error& e) {
    return fail(PTC_ERR_CONFIG, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(PTC_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(PTC_ERR_NUMERIC, "out of memory");
  } catch (const std::exception& e) {
    return fail(PTC_ERR_NUMERIC, e.what());
  }
}

int require_args(bool ok) {
  return ok ? PTC_OK : fail(PTC_ERR_ARG, "null argument");
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ptc::physics::McpSpec to_spec(const ptc_mcp_params& p) {
  ptc::physics::McpSpec spec;
  spec.pore_diameter_um = p.pore_diameter_um;
  spec.bias_angle_deg = p.bias_angle_deg;
  spec.stack_thickness_um = p.stack_thickness_um;
  spec.collision_step_um = p.collision_step_um;
  spec.secondary_yield = p.secondary_yield;
  spec.anode_capacitance_pf = p.anode_capacitance_pf;
  spec.efficiency = p.efficiency;
  return spec;
}

}  // namespace

extern "C" {

const char* ptc_version(void) { return ptc::experiment::kToolVersion; }

const char* ptc_last_error(void) { return g_last_error.c_str(); }

void ptc_string_free(char* s) { delete[] s; }

/* ---- configuration ----------------------------------------------------- */

int ptc_config_default(ptc_config** out) {
  if (int rc = require_args(out)) return rc;
  return guarded([&] { *out = new ptc_config{}; });
}

int ptc_config_parse(const char* text, ptc_config** out) {
  if (int rc = require_args(text && out)) return rc;
  return guarded([&] {
    *out = new ptc_config{ptc::config::parse_config(text)};
  });
}

int ptc_config_load(const char* path, ptc_config** out) {
  if (int rc = require_args(path && out)) return rc;
  return guarded([&] {
    *out = new ptc_config{ptc::config::load_config_file(path)};
  });
}

int ptc_config_set(ptc_config* cfg, const char* key, const char* value) {
  if (int rc = require_args(cfg && key && value)) return rc;
  return guarded([&] { ptc::config::set_key(cfg->cfg, key, value); });
}

int ptc_config_get(const ptc_config* cfg, const char* key, double* value_out) {
  if (int rc = require_args(cfg && key && value_out)) return rc;
  return guarded([&] { *value_out = ptc::config::get_key(cfg->cfg, key); });
}

int ptc_config_validate(const ptc_config* cfg) {
  if (int rc = require_args(cfg)) return rc;
  return guarded([&] { ptc::sim::throw_if_invalid(cfg->cfg.scenario); });
}

int ptc_config_digest(const ptc_config* cfg, char** digest_out) {
  if (int rc = require_args(cfg && digest_out)) return rc;
  return guarded([&] {
    *digest_out = dup_string(ptc::config::digest(cfg->cfg.source_text));
  });
}

void ptc_config_free(ptc_config* cfg) { delete cfg; }

/* ---- closed-form models -------------------------------------------------- */

int ptc_solid_angles(double separation_cm, double radius_cm, double s_cm,
                     double* omega_start_sr, double* omega_stop_sr) {
  if (int rc = require_args(omega_start_sr && omega_stop_sr)) return rc;
  return guarded([&] {
    const auto om = ptc::physics::solid_angles(
        {separation_cm, radius_cm}, s_cm);
    *omega_start_sr = om.start_sr;
    *omega_stop_sr = om.stop_sr;
  });
}

int ptc_two_photon_fraction(double pickoff_n, double* f1, double* f3) {
  if (int rc = require_args(f1 && f3)) return rc;
  return guarded([&] {
    const auto fr = ptc::physics::two_photon_fraction(pickoff_n);
    *f1 = fr.f1;
    *f3 = fr.f3;
  });
}

int ptc_singles_rate(double efficiency, double omega_sr, double f1, double f3,
                     double activity_per_s, double* rate_out) {
  if (int rc = require_args(rate_out)) return rc;
  return guarded([&] {
    *rate_out = ptc::physics::singles_rate(efficiency, omega_sr, {f1, f3},
                                           activity_per_s);
  });
}

int ptc_efficiency_from_singles(double rate_per_s, double omega_sr, double f1,
                                double f3, double activity_per_s,
                                double* efficiency_out) {
  if (int rc = require_args(efficiency_out)) return rc;
  return guarded([&] {
    *efficiency_out = ptc::physics::efficiency_from_singles(
        rate_per_s, omega_sr, {f1, f3}, activity_per_s);
  });
}

int ptc_coincidence_rates(double eps_start, double eps_stop,
                          double separation_cm, double radius_cm, double s_cm,
                          double f1, double f3, double activity_per_s,
                          double* r_aa, double* r_da, double* r_total) {
  if (int rc = require_args(r_aa && r_da && r_total)) return rc;
  return guarded([&] {
    const auto rates = ptc::physics::coincidence_rates(
        eps_start, eps_stop, {separation_cm, radius_cm}, s_cm, {f1, f3},
        activity_per_s);
    *r_aa = rates.aa;
    *r_da = rates.da;
    *r_total = rates.total;
  });
}

int ptc_max_penetration_depth(const ptc_mcp_params* mcp, double* depth_um) {
  if (int rc = require_args(mcp && depth_um)) return rc;
  return guarded([&] {
    *depth_um = ptc::physics::max_penetration_depth_um(to_spec(*mcp));
  });
}

int ptc_pulse_amplitude(const ptc_mcp_params* mcp, double x_um,
                        double* amplitude_mv) {
  if (int rc = require_args(mcp && amplitude_mv)) return rc;
  return guarded([&] {
    *amplitude_mv = ptc::physics::pulse_amplitude_mv(x_um, to_spec(*mcp));
  });
}

int ptc_avalanche_position(const ptc_mcp_params* mcp, double v_mv,
                           double* x_um) {
  if (int rc = require_args(mcp && x_um)) return rc;
  return guarded([&] {
    *x_um = ptc::physics::avalanche_position_um(v_mv, to_spec(*mcp));
  });
}

int ptc_phd_density(const ptc_mcp_params* mcp, double v_mv, double a0_per_um,
                    double* density_out) {
  if (int rc = require_args(mcp && density_out)) return rc;
  return guarded([&] {
    *density_out = ptc::physics::phd_density(v_mv, to_spec(*mcp), a0_per_um);
  });
}

int ptc_threshold_count_curve(double v_th, double c0, double d0,
                              double* count_out) {
  if (int rc = require_args(count_out)) return rc;
  return guarded([&] {
    *count_out = ptc::physics::threshold_count_curve(v_th, c0, d0);
  });
}

int ptc_selection_window_width(const ptc_mcp_params* mcp, double v_mv,
                               double dv_mv, double* width_um) {
  if (int rc = require_args(mcp && width_um)) return rc;
  return guarded([&] {
    *width_um = ptc::physics::selection_window_width_um(v_mv, dv_mv,
                                                        to_spec(*mcp));
  });
}

int ptc_expected_centroid(double separation_cm, double s_cm,
                          double tau_delay_ps, double tau_start_ps,
                          double tau_stop_ps, double* centroid_ps) {
  if (int rc = require_args(centroid_ps)) return rc;
  return guarded([&] {
    *centroid_ps = ptc::physics::expected_centroid_ps(
        {separation_cm, 1.0}, s_cm, tau_delay_ps, tau_start_ps, tau_stop_ps);
  });
}

int ptc_quadrature_budget(double jitter_ps, double walk_ps, double tts_ps,
                          double source_ps, double qm_ps, double* fwhm_ps) {
  if (int rc = require_args(fwhm_ps)) return rc;
  return guarded([&] {
    *fwhm_ps = ptc::physics::quadrature_budget_ps(
        {jitter_ps, walk_ps, tts_ps, source_ps}, qm_ps);
  });
}

/* ---- simulation ---------------------------------------------------------- */

int ptc_simulate(const ptc_config* cfg, unsigned workers,
                 ptc_records** records_out, char** summary_json_out) {
  if (int rc = require_args(cfg && records_out)) return rc;
  return guarded([&] {
    auto result = ptc::sim::run_simulation(cfg->cfg.scenario, workers);
    if (summary_json_out)
      *summary_json_out =
          dup_string(ptc::experiment::summary_json(result.summary));
    auto* handle = new ptc_records;
    handle->data.tick_ps = cfg->cfg.scenario.pta_tick_ps;
    handle->data.records = std::move(result.records);
    *records_out = handle;
  });
}

int ptc_simulate_to_dir(const ptc_config* cfg, unsigned workers,
                        const char* out_dir, const char* command_line) {
  if (int rc = require_args(cfg && out_dir)) return rc;
  return guarded([&] {
    ptc::experiment::run_simulate(cfg->cfg, workers, out_dir,
                                  command_line ? command_line : "");
  });
}

/* ---- list-mode data ------------------------------------------------------- */

int ptc_records_read(const char* path, ptc_records** out) {
  if (int rc = require_args(path && out)) return rc;
  return guarded([&] {
    *out = new ptc_records{ptc::listmode::read_listmode_file(path)};
  });
}

int ptc_records_write(const ptc_records* records, const char* path) {
  if (int rc = require_args(records && path)) return rc;
  return guarded([&] {
    ptc::listmode::write_listmode_file(records->data.records,
                                       records->data.tick_ps, path);
  });
}

int ptc_records_count(const ptc_records* records, uint64_t* count) {
  if (int rc = require_args(records && count)) return rc;
  *count = records->data.records.size();
  return PTC_OK;
}

int ptc_records_get(const ptc_records* records, uint64_t index,
                    int64_t* interval_ticks, int* tag) {
  if (int rc = require_args(records && interval_ticks && tag)) return rc;
  if (index >= records->data.records.size())
    return fail(PTC_ERR_ARG, "record index out of range");
  const auto& r = records->data.records[static_cast<std::size_t>(index)];
  *interval_ticks = r.interval_ticks;
  *tag = r.tag;
  return PTC_OK;
}

int ptc_records_tick_ps(const ptc_records* records, double* tick_ps) {
  if (int rc = require_args(records && tick_ps)) return rc;
  *tick_ps = records->data.tick_ps;
  return PTC_OK;
}

int ptc_tag_statistics(const ptc_records* records, double* start_pct,
                       double* stop_pct, double* combined_x) {
  if (int rc = require_args(records && start_pct && stop_pct && combined_x))
    return rc;
  return guarded([&] {
    const auto stats = ptc::listmode::tag_statistics(records->data.records);
    *start_pct = stats.nontagged_percent_start;
    *stop_pct = stats.nontagged_percent_stop;
    *combined_x = stats.combined_x;
  });
}

void ptc_records_free(ptc_records* records) { delete records; }

int ptc_histogram_build(const ptc_records* records, const char* filter,
                        int64_t bin_width_ticks, int64_t lo_ticks,
                        int64_t hi_ticks, ptc_histogram** out) {
  if (int rc = require_args(records && filter && out)) return rc;
  return guarded([&] {
    auto* handle = new ptc_histogram;
    try {
      handle->tick_ps = records->data.tick_ps;
      handle->hist = ptc::listmode::build_histogram(
          records->data.records, ptc::listmode::TagFilter::parse(filter),
          bin_width_ticks, lo_ticks, hi_ticks);
    } catch (...) {
      delete handle;
      throw;
    }
    *out = handle;
  });
}

int ptc_histogram_num_bins(const ptc_histogram* hist, size_t* n) {
  if (int rc = require_args(hist && n)) return rc;
  *n = hist->hist.counts.size();
  return PTC_OK;
}

int ptc_histogram_bin(const ptc_histogram* hist, size_t index,
                      double* center_ps, uint64_t* count) {
  if (int rc = require_args(hist && center_ps && count)) return rc;
  if (index >= hist->hist.counts.size())
    return fail(PTC_ERR_ARG, "bin index out of range");
  *center_ps = hist->hist.bin_center_ticks(index) * hist->tick_ps;
  *count = hist->hist.counts[index];
  return PTC_OK;
}

int ptc_histogram_csv(const ptc_histogram* hist, char** csv_out) {
  if (int rc = require_args(hist && csv_out)) return rc;
  return guarded([&] {
    *csv_out = dup_string(
        ptc::listmode::histogram_csv(hist->hist, hist->tick_ps));
  });
}

int ptc_histogram_write_csv(const ptc_histogram* hist, const char* path) {
  if (int rc = require_args(hist && path)) return rc;
  return guarded([&] {
    std::string csv = ptc::listmode::histogram_csv(hist->hist, hist->tick_ps);
    std::FILE* f = std::fopen(path, "wb");
    if (!f) throw ptc::IoError(std::string("cannot open ") + path);
    const std::size_t n = std::fwrite(csv.data(), 1, csv.size(), f);
    std::fclose(f);
    if (n != csv.size())
      throw ptc::IoError(std::string("write failed for ") + path);
  });
}

void ptc_histogram_free(ptc_histogram* hist) { delete hist; }

/* ---- fitting --------------------------------------------------------------- */

int ptc_fit_lorentzian(const ptc_histogram* hist, const char* weighting,
                       char** report_json_out) {
  if (int rc = require_args(hist && weighting && report_json_out)) return rc;
  return guarded([&] {
    const auto report = ptc::fit::fit_lorentzian(
        hist->hist, hist->tick_ps, ptc::fit::parse_weighting(weighting));
    *report_json_out = dup_string(ptc::fit::fit_report_json(report));
  });
}

int ptc_fit_extrapolation(const double* x_percent, const double* fwhm_ps,
                          const double* fwhm_sigma_ps, size_t n,
                          double jitter_ps, double source_ps,
                          char** report_json_out) {
  if (int rc = require_args(x_percent && fwhm_ps && fwhm_sigma_ps &&
                            report_json_out))
    return rc;
  return guarded([&] {
    std::vector<ptc::fit::ExtrapolationPoint> pts(n);
    for (size_t i = 0; i < n; ++i)
      pts[i] = {x_percent[i], fwhm_ps[i], fwhm_sigma_ps[i]};
    const auto report =
        ptc::fit::fit_extrapolation(pts, jitter_ps, source_ps);
    *report_json_out = dup_string(ptc::fit::extrapolation_report_json(report));
  });
}

/* ---- pipelines --------------------------------------------------------------- */

int ptc_rates_csv(const ptc_config* cfg, double s_lo_cm, double s_hi_cm,
                  int steps, char** csv_out) {
  if (int rc = require_args(cfg && csv_out)) return rc;
  return guarded([&] {
    *csv_out = dup_string(ptc::experiment::rates_csv(cfg->cfg.scenario,
                                                     s_lo_cm, s_hi_cm, steps));
  });
}

void ptc_experiment_options_init(ptc_experiment_options* options) {
  if (!options) return;
  options->workers = 0;
  options->bins_ps = 6.1;
  options->range_lo_ns = std::nan("");
  options->range_hi_ns = std::nan("");
  options->filter = nullptr;
  options->weighting = nullptr;
}

int ptc_experiment(const ptc_config* cfg, const double* sweep_mv,
                   size_t n_sweep, const ptc_experiment_options* options,
                   const char* out_dir, const char* command_line,
                   char** points_csv_out, char** report_json_out) {
  if (int rc = require_args(cfg && sweep_mv)) return rc;
  return guarded([&] {
    ptc::experiment::PipelineOptions pipeline;
    if (options) {
      pipeline.workers = options->workers;
      pipeline.bins_ps = options->bins_ps;
      if (!std::isnan(options->range_lo_ns) &&
          !std::isnan(options->range_hi_ns)) {
        pipeline.range_lo_ns = options->range_lo_ns;
        pipeline.range_hi_ns = options->range_hi_ns;
        pipeline.range_set = true;
      }
      if (options->filter)
        pipeline.filter = ptc::listmode::TagFilter::parse(options->filter);
      if (options->weighting)
        pipeline.weighting = ptc::fit::parse_weighting(options->weighting);
    }
    const std::vector<double> sweep(sweep_mv, sweep_mv + n_sweep);
    const auto result = ptc::experiment::run_experiment(
        cfg->cfg, sweep, pipeline, out_dir ? out_dir : "",
        command_line ? command_line : "");
    if (points_csv_out)
      *points_csv_out =
          dup_string(ptc::experiment::points_csv(result.points));
    if (report_json_out)
      *report_json_out =
          dup_string(ptc::fit::extrapolation_report_json(result.report));
  });
}

} /* extern "C" */
