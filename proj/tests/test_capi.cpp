#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "ptcoinc/ptcoinc.h"

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const char* name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str(const char* leaf = nullptr) const {
    return leaf ? (path / leaf).string() : path.string();
  }
};

const ptc_mcp_params kMcp{10.0, 8.0, 800.0, 800.0 / 44.0, 1.4, 5.0, 0.5};

}  // namespace

TEST_CASE("c api: version and error reporting basics") {
  CHECK(std::strcmp(ptc_version(), "0.1.0") == 0);

  double out = 0.0;
  CHECK(ptc_pulse_amplitude(nullptr, 0.0, &out) == PTC_ERR_ARG);
  CHECK(ptc_pulse_amplitude(&kMcp, -5.0, &out) == PTC_ERR_CONFIG);
  CHECK(std::strlen(ptc_last_error()) > 0);
  CHECK(ptc_pulse_amplitude(&kMcp, 0.0, &out) == PTC_OK);
  CHECK(out == doctest::Approx(86.17354499181232));
}

TEST_CASE("c api: scalar physics surface") {
  double om_start = 0, om_stop = 0;
  REQUIRE(ptc_solid_angles(10.0, 1.25, 5.0, &om_start, &om_stop) == PTC_OK);
  CHECK(om_start == doctest::Approx(0.1876002043959674));
  CHECK(om_stop == doctest::Approx(om_start));
  CHECK(ptc_solid_angles(10.0, 1.25, 11.0, &om_start, &om_stop) ==
        PTC_ERR_CONFIG);

  double f1 = 0, f3 = 0;
  REQUIRE(ptc_two_photon_fraction(0.041, &f1, &f3) == PTC_OK);
  CHECK(f1 == doctest::Approx(0.28075));

  double eps = 0;
  REQUIRE(ptc_efficiency_from_singles(99.0, om_start, 0.25, 0.75, 274064.0,
                                      &eps) == PTC_OK);
  CHECK(eps == doctest::Approx(0.0070).epsilon(0.005));
  double rate = 0;
  REQUIRE(ptc_singles_rate(eps, om_start, 0.25, 0.75, 274064.0, &rate) ==
          PTC_OK);
  CHECK(rate == doctest::Approx(99.0).epsilon(1e-9));

  double aa = 0, da = 0, total = 0;
  REQUIRE(ptc_coincidence_rates(0.005, 0.005, 10.0, 1.25, 5.0, 0.5, 0.5,
                                310000.0, &aa, &da, &total) == PTC_OK);
  CHECK(total == doctest::Approx(0.11190053740010666));

  double depth = 0;
  REQUIRE(ptc_max_penetration_depth(&kMcp, &depth) == PTC_OK);
  CHECK(depth == doctest::Approx(71.15369722384209));

  double x = 0;
  REQUIRE(ptc_avalanche_position(&kMcp, 43.0, &x) == PTC_OK);
  double v = 0;
  REQUIRE(ptc_pulse_amplitude(&kMcp, x, &v) == PTC_OK);
  CHECK(v == doctest::Approx(43.0).epsilon(1e-12));

  double g = 0;
  REQUIRE(ptc_phd_density(&kMcp, 10.0, 1.0 / 800.0, &g) == PTC_OK);
  CHECK(g > 0.0);
  double c = 0;
  REQUIRE(ptc_threshold_count_curve(30.0, 656.0, 6.87, &c) == PTC_OK);
  CHECK(c == doctest::Approx(2275.534517629626));
  double w = 0;
  REQUIRE(ptc_selection_window_width(&kMcp, 7.0, 7.0, &w) == PTC_OK);
  CHECK(w == doctest::Approx(37.45532212920264));
  double centroid = 0;
  REQUIRE(ptc_expected_centroid(10.0, 2.6, 0, 0, 0, &centroid) == PTC_OK);
  CHECK(centroid == doctest::Approx(160.11076569511297));
  double budget = 0;
  REQUIRE(ptc_quadrature_budget(38, 45, 52, 47, 0, &budget) == PTC_OK);
  CHECK(budget == doctest::Approx(120.64410470470574));
}

TEST_CASE("c api: config lifecycle and validation messages") {
  ptc_config* cfg = nullptr;
  REQUIRE(ptc_config_parse("geometry.separation_cm = 10\n", &cfg) == PTC_OK);
  CHECK(ptc_config_validate(cfg) == PTC_OK);

  REQUIRE(ptc_config_set(cfg, "run.n_decays", "0") == PTC_OK);
  CHECK(ptc_config_validate(cfg) == PTC_ERR_CONFIG);
  CHECK(std::string(ptc_last_error()).find("run.n_decays") !=
        std::string::npos);

  double seed = 0;
  REQUIRE(ptc_config_set(cfg, "run.master_seed", "123") == PTC_OK);
  REQUIRE(ptc_config_get(cfg, "run.master_seed", &seed) == PTC_OK);
  CHECK(seed == 123.0);

  char* digest = nullptr;
  REQUIRE(ptc_config_digest(cfg, &digest) == PTC_OK);
  CHECK(std::string(digest).rfind("fnv1a64:", 0) == 0);
  ptc_string_free(digest);

  CHECK(ptc_config_parse("nope = 1\n", &cfg) == PTC_ERR_CONFIG);
  CHECK(ptc_config_load("/nonexistent/path.cfg", &cfg) == PTC_ERR_IO);
  ptc_config_free(cfg);
}

TEST_CASE("c api: simulate, records, histogram, fits end to end") {
  TempDir dir("ptc_capi_test");

  ptc_config* cfg = nullptr;
  REQUIRE(ptc_config_parse(
              "source.pickoff_fraction = 1.0\n"
              "source.position_spread_cm = 0\n"
              "start_mcp.efficiency = 0.9\n"
              "stop_mcp.efficiency = 0.9\n"
              "start_elec.jitter_sigma_ps = 0\n"
              "stop_elec.jitter_sigma_ps = 0\n"
              "start_elec.transit_sigma_ps = 0\n"
              "stop_elec.transit_sigma_ps = 0\n"
              "start_elec.transit_full_scale_ps = 0\n"
              "stop_elec.transit_full_scale_ps = 0\n"
              "start_elec.threshold_lower_mv = 1e-5\n"
              "stop_elec.threshold_lower_mv = 1e-5\n"
              "emission.qm_fwhm_ps = 123\n"
              "run.external_delay_ps = 50000\n"
              "run.n_decays = 400000\n"
              "run.master_seed = 5\n",
              &cfg) == PTC_OK);

  ptc_records* records = nullptr;
  char* summary = nullptr;
  REQUIRE(ptc_simulate(cfg, 2, &records, &summary) == PTC_OK);
  CHECK(std::string(summary).find("coincidence_rate_per_s") !=
        std::string::npos);
  ptc_string_free(summary);

  uint64_t count = 0;
  REQUIRE(ptc_records_count(records, &count) == PTC_OK);
  CHECK(count > 5000);
  int64_t ticks = 0;
  int tag = -1;
  REQUIRE(ptc_records_get(records, 0, &ticks, &tag) == PTC_OK);
  CHECK(tag >= 0);
  CHECK(ptc_records_get(records, count, &ticks, &tag) == PTC_ERR_ARG);

  // Round trip through the file format.
  const std::string lst = dir.str("run.lst");
  REQUIRE(ptc_records_write(records, lst.c_str()) == PTC_OK);
  ptc_records* back = nullptr;
  REQUIRE(ptc_records_read(lst.c_str(), &back) == PTC_OK);
  uint64_t back_count = 0;
  REQUIRE(ptc_records_count(back, &back_count) == PTC_OK);
  CHECK(back_count == count);
  double tick = 0;
  REQUIRE(ptc_records_tick_ps(back, &tick) == PTC_OK);
  CHECK(tick == 0.305);

  double start_pct = 0, stop_pct = 0, x = 0;
  REQUIRE(ptc_tag_statistics(back, &start_pct, &stop_pct, &x) == PTC_OK);
  CHECK(x == doctest::Approx(std::hypot(start_pct, stop_pct)));

  const int64_t lo = static_cast<int64_t>((50000.0 - 1500.0) / 0.305);
  const int64_t hi = static_cast<int64_t>((50000.0 + 1500.0) / 0.305);
  ptc_histogram* hist = nullptr;
  REQUIRE(ptc_histogram_build(back, "all", 20, lo, hi, &hist) == PTC_OK);
  size_t nbins = 0;
  REQUIRE(ptc_histogram_num_bins(hist, &nbins) == PTC_OK);
  CHECK(nbins > 200);
  double center = 0;
  uint64_t bin_count = 0;
  REQUIRE(ptc_histogram_bin(hist, 0, &center, &bin_count) == PTC_OK);
  CHECK(ptc_histogram_build(back, "bogus", 20, lo, hi, &hist) ==
        PTC_ERR_CONFIG);

  char* report = nullptr;
  REQUIRE(ptc_fit_lorentzian(hist, "poisson", &report) == PTC_OK);
  const std::string report_str(report);
  ptc_string_free(report);
  CHECK(report_str.find("\"fwhm_ps\"") != std::string::npos);
  // The injected 123 ps width comes back from the fit.
  const auto pos = report_str.find("\"fwhm_ps\": ");
  const double fwhm = std::stod(report_str.substr(pos + 11));
  CHECK(fwhm == doctest::Approx(123.0).epsilon(0.05));

  const std::string csv_path = dir.str("hist.csv");
  REQUIRE(ptc_histogram_write_csv(hist, csv_path.c_str()) == PTC_OK);
  char* csv = nullptr;
  REQUIRE(ptc_histogram_csv(hist, &csv) == PTC_OK);
  CHECK(std::string(csv).rfind("bin_center_ps,counts\n", 0) == 0);
  ptc_string_free(csv);

  ptc_histogram_free(hist);
  ptc_records_free(back);
  ptc_records_free(records);
  ptc_config_free(cfg);
}

TEST_CASE("c api: extrapolation fit") {
  const double x[4] = {30.0, 60.0, 90.0, 110.0};
  double fwhm[4];
  const double sigma[4] = {1.0, 1.0, 1.0, 1.0};
  for (int i = 0; i < 4; ++i)
    fwhm[i] = std::sqrt(123.0 * 123.0 + 0.25 * x[i] * x[i] +
                        2.0 * 38.0 * 38.0 + 47.0 * 47.0);
  char* report = nullptr;
  REQUIRE(ptc_fit_extrapolation(x, fwhm, sigma, 4, 38.0, 47.0, &report) ==
          PTC_OK);
  const std::string text(report);
  ptc_string_free(report);
  const auto pos = text.find("\"a_ps\": ");
  CHECK(std::stod(text.substr(pos + 8)) == doctest::Approx(123.0));

  CHECK(ptc_fit_extrapolation(x, fwhm, sigma, 2, 38.0, 47.0, &report) ==
        PTC_ERR_CONFIG);
}
