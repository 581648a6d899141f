/*
 * ptcoinc — coincidence-timing simulator and analysis toolkit for
 * microchannel-plate gamma detectors.
 *
 * C API of the shared library. All entry points return PTC_OK (0) on
 * success or a nonzero error code; ptc_last_error() describes the most
 * recent failure on the calling thread. Objects are opaque handles released
 * with their matching *_free function; strings returned through char** are
 * heap-allocated and released with ptc_string_free.
 */

#ifndef PTCOINC_H
#define PTCOINC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PTC_API __declspec(dllexport)
#else
#define PTC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes; they double as CLI exit codes. */
enum {
  PTC_OK = 0,
  PTC_ERR_ARG = 1,     /* null pointer / invalid handle / bad call */
  PTC_ERR_CONFIG = 2,  /* config parse, validation or domain error */
  PTC_ERR_IO = 3,      /* file I/O or file format error */
  PTC_ERR_NUMERIC = 4  /* fit or pipeline numerical failure */
};

typedef struct ptc_config ptc_config;       /* scenario configuration */
typedef struct ptc_records ptc_records;     /* list-mode record buffer */
typedef struct ptc_histogram ptc_histogram; /* binned intervals */

PTC_API const char* ptc_version(void);

/* Message for the last failure on this thread; empty string if none. The
 * pointer stays valid until the next failing call on the same thread. */
PTC_API const char* ptc_last_error(void);

PTC_API void ptc_string_free(char* s);

/* ---- configuration ----------------------------------------------------- */

/* Built-in defaults. */
PTC_API int ptc_config_default(ptc_config** out);
/* Parse "section.key = value" text / file on top of the defaults. */
PTC_API int ptc_config_parse(const char* text, ptc_config** out);
PTC_API int ptc_config_load(const char* path, ptc_config** out);
/* Override one key; the override also enters the config digest. */
PTC_API int ptc_config_set(ptc_config* cfg, const char* key,
                           const char* value);
PTC_API int ptc_config_get(const ptc_config* cfg, const char* key,
                           double* value_out);
/* PTC_OK when every invariant holds; otherwise PTC_ERR_CONFIG and
 * ptc_last_error() lists each violated invariant. */
PTC_API int ptc_config_validate(const ptc_config* cfg);
PTC_API int ptc_config_digest(const ptc_config* cfg, char** digest_out);
PTC_API void ptc_config_free(ptc_config* cfg);

/* ---- closed-form rate and detector models ------------------------------ */

PTC_API int ptc_solid_angles(double separation_cm, double radius_cm,
                             double s_cm, double* omega_start_sr,
                             double* omega_stop_sr);
PTC_API int ptc_two_photon_fraction(double pickoff_n, double* f1, double* f3);
PTC_API int ptc_singles_rate(double efficiency, double omega_sr, double f1,
                             double f3, double activity_per_s,
                             double* rate_out);
PTC_API int ptc_efficiency_from_singles(double rate_per_s, double omega_sr,
                                        double f1, double f3,
                                        double activity_per_s,
                                        double* efficiency_out);
PTC_API int ptc_coincidence_rates(double eps_start, double eps_stop,
                                  double separation_cm, double radius_cm,
                                  double s_cm, double f1, double f3,
                                  double activity_per_s, double* r_aa,
                                  double* r_da, double* r_total);

typedef struct ptc_mcp_params {
  double pore_diameter_um;
  double bias_angle_deg;
  double stack_thickness_um;
  double collision_step_um;
  double secondary_yield;
  double anode_capacitance_pf;
  double efficiency;
} ptc_mcp_params;

PTC_API int ptc_max_penetration_depth(const ptc_mcp_params* mcp,
                                      double* depth_um);
PTC_API int ptc_pulse_amplitude(const ptc_mcp_params* mcp, double x_um,
                                double* amplitude_mv);
PTC_API int ptc_avalanche_position(const ptc_mcp_params* mcp, double v_mv,
                                   double* x_um);
PTC_API int ptc_phd_density(const ptc_mcp_params* mcp, double v_mv,
                            double a0_per_um, double* density_out);
PTC_API int ptc_threshold_count_curve(double v_th, double c0, double d0,
                                      double* count_out);
PTC_API int ptc_selection_window_width(const ptc_mcp_params* mcp, double v_mv,
                                       double dv_mv, double* width_um);
PTC_API int ptc_expected_centroid(double separation_cm, double s_cm,
                                  double tau_delay_ps, double tau_start_ps,
                                  double tau_stop_ps, double* centroid_ps);
PTC_API int ptc_quadrature_budget(double jitter_ps, double walk_ps,
                                  double tts_ps, double source_ps,
                                  double qm_ps, double* fwhm_ps);

/* ---- simulation --------------------------------------------------------- */

/* Runs the scenario; workers == 0 uses the hardware concurrency. Output is
 * identical for every worker count. summary_json_out may be NULL. */
PTC_API int ptc_simulate(const ptc_config* cfg, unsigned workers,
                         ptc_records** records_out, char** summary_json_out);

/* Simulation command: writes run.lst, summary.json and manifest.json into
 * out_dir. command_line is recorded in the manifest. */
PTC_API int ptc_simulate_to_dir(const ptc_config* cfg, unsigned workers,
                                const char* out_dir, const char* command_line);

/* ---- list-mode data ------------------------------------------------------ */

PTC_API int ptc_records_read(const char* path, ptc_records** out);
PTC_API int ptc_records_write(const ptc_records* records, const char* path);
PTC_API int ptc_records_count(const ptc_records* records, uint64_t* count);
PTC_API int ptc_records_get(const ptc_records* records, uint64_t index,
                            int64_t* interval_ticks, int* tag);
PTC_API int ptc_records_tick_ps(const ptc_records* records, double* tick_ps);
/* Non-tagged percentages per channel and their quadrature combination. */
PTC_API int ptc_tag_statistics(const ptc_records* records, double* start_pct,
                               double* stop_pct, double* combined_x);
PTC_API void ptc_records_free(ptc_records* records);

/* filter: "all", "nontagged" or "tag==N". Range is [lo_ticks, hi_ticks). */
PTC_API int ptc_histogram_build(const ptc_records* records, const char* filter,
                                int64_t bin_width_ticks, int64_t lo_ticks,
                                int64_t hi_ticks, ptc_histogram** out);
PTC_API int ptc_histogram_num_bins(const ptc_histogram* hist, size_t* n);
PTC_API int ptc_histogram_bin(const ptc_histogram* hist, size_t index,
                              double* center_ps, uint64_t* count);
PTC_API int ptc_histogram_csv(const ptc_histogram* hist, char** csv_out);
PTC_API int ptc_histogram_write_csv(const ptc_histogram* hist,
                                    const char* path);
PTC_API void ptc_histogram_free(ptc_histogram* hist);

/* ---- fitting ------------------------------------------------------------- */

/* weighting: "paper", "unweighted" or "poisson". Report is returned as
 * JSON (fields centroid_ps, fwhm_ps, reduced_chi_square, ...). */
PTC_API int ptc_fit_lorentzian(const ptc_histogram* hist,
                               const char* weighting, char** report_json_out);

/* Width-versus-percentile extrapolation; arrays of length n. */
PTC_API int ptc_fit_extrapolation(const double* x_percent,
                                  const double* fwhm_ps,
                                  const double* fwhm_sigma_ps, size_t n,
                                  double jitter_ps, double source_ps,
                                  char** report_json_out);

/* ---- pipelines ----------------------------------------------------------- */

/* Rate table CSV ("s_cm,R_AA,R_DA,R_total") over an inclusive grid. */
PTC_API int ptc_rates_csv(const ptc_config* cfg, double s_lo_cm,
                          double s_hi_cm, int steps, char** csv_out);

typedef struct ptc_experiment_options {
  unsigned workers;      /* 0 = hardware concurrency */
  double bins_ps;        /* histogram bin width, rounded to whole ticks */
  double range_lo_ns;    /* fit range; NaN pair = external delay +- 2.5 ns */
  double range_hi_ns;
  const char* filter;    /* NULL = "tag==0" */
  const char* weighting; /* NULL = "unweighted" */
} ptc_experiment_options;

PTC_API void ptc_experiment_options_init(ptc_experiment_options* options);

/* Over-range sweep -> per-point unweighted peak widths -> extrapolation.
 * sweep_mv lists >= 3 over-range bounds applied to both channels. When
 * out_dir is non-NULL, writes point_<i>.lst, points.csv, extrapolation.json
 * and manifest.json. points_csv_out and report_json_out may be NULL. */
PTC_API int ptc_experiment(const ptc_config* cfg, const double* sweep_mv,
                           size_t n_sweep,
                           const ptc_experiment_options* options,
                           const char* out_dir, const char* command_line,
                           char** points_csv_out, char** report_json_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PTCOINC_H */
