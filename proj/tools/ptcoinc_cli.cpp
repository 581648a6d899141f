// Command-line front end. Everything of substance happens behind the C API
// in libptcoinc; this file only parses arguments, moves strings between the
// library and the filesystem, and maps status codes to exit codes.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptcoinc/ptcoinc.h"

namespace {

struct ConfigHandle {
  ptc_config* ptr = nullptr;
  ~ConfigHandle() { ptc_config_free(ptr); }
};

struct RecordsHandle {
  ptc_records* ptr = nullptr;
  ~RecordsHandle() { ptc_records_free(ptr); }
};

struct HistogramHandle {
  ptc_histogram* ptr = nullptr;
  ~HistogramHandle() { ptc_histogram_free(ptr); }
};

struct ApiString {
  char* ptr = nullptr;
  ~ApiString() { ptc_string_free(ptr); }
};

int report_failure(int rc, const char* context) {
  std::fprintf(stderr, "ptcoinc: %s: %s\n", context, ptc_last_error());
  return rc == PTC_ERR_ARG ? PTC_ERR_CONFIG : rc;
}

int write_file(const std::string& path, const char* text,
               const char* context) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) {
    std::fprintf(stderr, "ptcoinc: %s: cannot open %s\n", context,
                 path.c_str());
    return PTC_ERR_IO;
  }
  const size_t len = std::strlen(text);
  const size_t n = std::fwrite(text, 1, len, f);
  std::fclose(f);
  if (n != len) {
    std::fprintf(stderr, "ptcoinc: %s: short write to %s\n", context,
                 path.c_str());
    return PTC_ERR_IO;
  }
  return 0;
}

std::string join_args(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    out += argv[i];
  }
  return out;
}

bool parse_range(const std::string& text, double& lo_ns, double& hi_ns) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return false;
  try {
    size_t used = 0;
    lo_ns = std::stod(text.substr(0, colon), &used);
    if (used != colon) return false;
    const std::string hi = text.substr(colon + 1);
    hi_ns = std::stod(hi, &used);
    return used == hi.size();
  } catch (...) {
    return false;
  }
}

int load_config(const std::string& path, const std::string& seed,
                ConfigHandle& cfg) {
  if (int rc = ptc_config_load(path.c_str(), &cfg.ptr))
    return report_failure(rc, "loading config");
  if (!seed.empty()) {
    if (int rc = ptc_config_set(cfg.ptr, "run.master_seed", seed.c_str()))
      return report_failure(rc, "applying --seed");
  }
  if (int rc = ptc_config_validate(cfg.ptr))
    return report_failure(rc, "validating config");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coincidence-timing simulator and analysis pipeline for "
               "MCP gamma detectors"};
  app.set_version_flag("--version", ptc_version());
  app.require_subcommand(1);
  const std::string command_line = join_args(argc, argv);

  // Shared option storage.
  std::string config_path, seed, out_dir, in_path, out_path;
  std::string filter = "all", weighting = "paper", range, sweep;
  std::string out_hist, out_fit;
  double bins_ps = 6.1;
  unsigned workers = 0;
  double s_min = -1.0, s_max = -1.0;
  int steps = 199;

  auto* rates = app.add_subcommand("rates", "closed-form coincidence-rate "
                                            "table over source positions");
  rates->add_option("--config", config_path, "scenario file")->required();
  rates->add_option("--out", out_path, "output CSV path")->required();
  rates->add_option("--s-min", s_min, "grid start, cm (default L/200)");
  rates->add_option("--s-max", s_max, "grid end, cm (default L - L/200)");
  rates->add_option("--steps", steps, "grid points");

  auto* simulate = app.add_subcommand("simulate", "run the scenario and "
                                                  "write run.lst + summary");
  simulate->add_option("--config", config_path, "scenario file")->required();
  simulate->add_option("--out-dir", out_dir, "output directory")->required();
  simulate->add_option("--seed", seed, "override run.master_seed");
  simulate->add_option("--workers", workers, "worker threads (0 = auto)");

  auto* histogram = app.add_subcommand("histogram", "bin a list-mode file");
  histogram->add_option("--in", in_path, "list-mode file")->required();
  histogram->add_option("--out", out_path, "output CSV path")->required();
  histogram->add_option("--filter", filter, "all | nontagged | tag==N");
  histogram->add_option("--bins-ps", bins_ps, "bin width in ps");
  histogram->add_option("--range-ns", range, "lo:hi fit range in ns")
      ->required();

  auto* fit = app.add_subcommand("fit", "bin a list-mode file and fit the "
                                        "timing peak");
  fit->add_option("--in", in_path, "list-mode file")->required();
  fit->add_option("--out-fit", out_fit, "fit report JSON path")->required();
  fit->add_option("--out-hist", out_hist, "optional histogram CSV path");
  fit->add_option("--filter", filter, "all | nontagged | tag==N");
  fit->add_option("--bins-ps", bins_ps, "bin width in ps");
  fit->add_option("--range-ns", range, "lo:hi fit range in ns")->required();
  fit->add_option("--weighting", weighting, "paper | unweighted | poisson");

  auto* experiment = app.add_subcommand(
      "experiment", "over-range sweep and width extrapolation");
  experiment->add_option("--config", config_path, "scenario file")->required();
  experiment->add_option("--out-dir", out_dir, "output directory")->required();
  experiment->add_option("--sweep", sweep,
                         "comma-separated over-range bounds, mV")
      ->required();
  experiment->add_option("--seed", seed, "override run.master_seed");
  experiment->add_option("--workers", workers, "worker threads (0 = auto)");
  experiment->add_option("--bins-ps", bins_ps, "bin width in ps");
  experiment->add_option("--range-ns", range, "lo:hi fit range in ns");
  std::string exp_filter = "nontagged", exp_weighting = "unweighted";
  experiment->add_option("--filter", exp_filter, "record filter for fits");
  experiment->add_option("--weighting", exp_weighting, "fit weighting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : PTC_ERR_CONFIG;
  }

  if (rates->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, seed, cfg)) return rc;
    double length = 0.0;
    if (int rc = ptc_config_get(cfg.ptr, "geometry.separation_cm", &length))
      return report_failure(rc, "reading geometry");
    if (s_min < 0.0) s_min = length / 200.0;
    if (s_max < 0.0) s_max = length - length / 200.0;
    ApiString csv;
    if (int rc = ptc_rates_csv(cfg.ptr, s_min, s_max, steps, &csv.ptr))
      return report_failure(rc, "computing rates");
    return write_file(out_path, csv.ptr, "writing rates CSV");
  }

  if (simulate->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, seed, cfg)) return rc;
    if (int rc = ptc_simulate_to_dir(cfg.ptr, workers, out_dir.c_str(),
                                     command_line.c_str()))
      return report_failure(rc, "running simulation");
    return 0;
  }

  if (histogram->parsed() || fit->parsed()) {
    RecordsHandle records;
    if (int rc = ptc_records_read(in_path.c_str(), &records.ptr))
      return report_failure(rc, "reading list-mode file");
    double lo_ns = 0.0, hi_ns = 0.0;
    if (!parse_range(range, lo_ns, hi_ns)) {
      std::fprintf(stderr, "ptcoinc: --range-ns expects lo:hi in ns\n");
      return PTC_ERR_CONFIG;
    }
    double tick = 0.305;
    ptc_records_tick_ps(records.ptr, &tick);
    const auto to_ticks = [tick](double ns) {
      return static_cast<int64_t>(std::llround(ns * 1e3 / tick));
    };
    const int64_t width =
        bins_ps <= 0.0 ? 0 : std::max<int64_t>(1, std::llround(bins_ps / tick));
    HistogramHandle hist;
    if (int rc = ptc_histogram_build(records.ptr, filter.c_str(), width,
                                     to_ticks(lo_ns), to_ticks(hi_ns),
                                     &hist.ptr))
      return report_failure(rc, "building histogram");

    if (histogram->parsed()) {
      if (int rc = ptc_histogram_write_csv(hist.ptr, out_path.c_str()))
        return report_failure(rc, "writing histogram CSV");
      return 0;
    }
    if (!out_hist.empty()) {
      if (int rc = ptc_histogram_write_csv(hist.ptr, out_hist.c_str()))
        return report_failure(rc, "writing histogram CSV");
    }
    ApiString report;
    if (int rc = ptc_fit_lorentzian(hist.ptr, weighting.c_str(), &report.ptr))
      return report_failure(rc, "fitting peak");
    return write_file(out_fit, report.ptr, "writing fit report");
  }

  if (experiment->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, seed, cfg)) return rc;
    std::vector<double> sweep_values;
    {
      std::string item;
      std::stringstream ss(sweep);
      while (std::getline(ss, item, ',')) {
        try {
          size_t used = 0;
          sweep_values.push_back(std::stod(item, &used));
          if (used != item.size()) throw std::invalid_argument(item);
        } catch (...) {
          std::fprintf(stderr, "ptcoinc: bad --sweep entry '%s'\n",
                       item.c_str());
          return PTC_ERR_CONFIG;
        }
      }
    }
    ptc_experiment_options options;
    ptc_experiment_options_init(&options);
    options.workers = workers;
    options.bins_ps = bins_ps;
    options.filter = exp_filter.c_str();
    options.weighting = exp_weighting.c_str();
    if (!range.empty()) {
      double lo_ns = 0.0, hi_ns = 0.0;
      if (!parse_range(range, lo_ns, hi_ns)) {
        std::fprintf(stderr, "ptcoinc: --range-ns expects lo:hi in ns\n");
        return PTC_ERR_CONFIG;
      }
      options.range_lo_ns = lo_ns;
      options.range_hi_ns = hi_ns;
    }
    ApiString report;
    if (int rc = ptc_experiment(cfg.ptr, sweep_values.data(),
                                sweep_values.size(), &options, out_dir.c_str(),
                                command_line.c_str(), nullptr, &report.ptr))
      return report_failure(rc, "running experiment");
    std::fputs(report.ptr, stdout);
    return 0;
  }

  return PTC_ERR_CONFIG;
}
