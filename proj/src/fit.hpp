#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "listmode.hpp"

namespace ptc::fit {

// Per-bin standard deviations used in the weighted least squares:
//   Paper      sigma_n = max(|y_n - 1|^(1/2), 1)
//   Unweighted sigma_n = 1 (parameter errors then scale with the reduced
//              chi-square, which plays the role of the variance estimate)
//   Poisson    sigma_n = max(sqrt(y_n), 1)
enum class Weighting { Paper, Unweighted, Poisson };

Weighting parse_weighting(std::string_view text);
std::string_view weighting_name(Weighting w);

struct LorentzianParams {
  double amplitude = 0.0;    // peak height above baseline
  double centroid_ps = 0.0;
  double fwhm_ps = 0.0;
  double baseline = 0.0;
};

// B + A * (G/2)^2 / ((t - Tc)^2 + (G/2)^2)
double lorentzian_eval(const LorentzianParams& p, double t_ps);
// d(model)/d(A, Tc, G, B)
void lorentzian_jacobian(const LorentzianParams& p, double t_ps,
                         double out[4]);

// Gaussian with the same parameter convention (amplitude, centroid, FWHM,
// baseline); kept as a comparison model only.
double gaussian_eval(const LorentzianParams& p, double t_ps);
void gaussian_jacobian(const LorentzianParams& p, double t_ps, double out[4]);

struct FitReport {
  LorentzianParams params;
  // Row-major 4x4 over (amplitude, centroid, fwhm, baseline); rows/columns
  // of parameters held fixed are zero. Unscaled (J^T W J)^-1.
  std::array<double, 16> covariance{};
  double reduced_chi_square = 0.0;
  int n_points = 0;
  int n_free = 0;
  bool converged = false;
  Weighting weighting = Weighting::Paper;
  std::string model = "lorentzian";
};

// One-sigma error on parameter index (0=A, 1=Tc, 2=G, 3=B); applies the
// reduced-chi-square scale for unweighted fits, where sigma_n = 1 carries no
// scale of its own.
double param_sigma(const FitReport& report, int index);

struct FitOptions {
  bool fit_baseline = true;
  std::optional<LorentzianParams> init;  // default: derived from the data
};

// Levenberg-Marquardt fit of the peak model to a histogram (bin centers in
// ps = ticks * tick_ps). Needs at least 8 non-empty bins. Non-convergence
// returns converged=false; a flat histogram is an error.
FitReport fit_lorentzian(const listmode::Histogram& hist, double tick_ps,
                         Weighting weighting, const FitOptions& options = {});
FitReport fit_gaussian(const listmode::Histogram& hist, double tick_ps,
                       Weighting weighting, const FitOptions& options = {});

double reduced_chi_square(std::span<const double> residuals,
                          std::span<const double> sigmas, int n_free);

struct ExtrapolationPoint {
  double x_percent = 0.0;   // combined non-tagged percentile
  double fwhm_ps = 0.0;
  double fwhm_sigma_ps = 0.0;
};

// Width model fitted to the sweep points:
//   fwhm(x) = sqrt(a^2 + (b x)^2 + 2 jitter^2 + source^2)
// a^2 and b^2 are the free parameters, keeping a real; jitter and source are
// fixed, externally determined terms.
struct ExtrapolationReport {
  double a_ps = 0.0;
  double b_ps_per_percent = 0.0;
  double ci95_a_ps = 0.0;     // half-width of [a_ci_low, a_ci_high]
  double a_ci_low_ps = 0.0;
  double a_ci_high_ps = 0.0;
  // Row-major 2x2 covariance of (a^2, b^2), scaled by the reduced
  // chi-square; the 95% interval maps the a^2 interval (Student-t, n-2 dof)
  // through the square root.
  std::array<double, 4> covariance{};
  double reduced_chi_square = 0.0;
  int n_points = 0;
  bool converged = false;
  double jitter_term_ps = 0.0;
  double source_term_ps = 0.0;
};

struct ExtrapolationOptions {
  bool fix_b_zero = false;
};

ExtrapolationReport fit_extrapolation(std::span<const ExtrapolationPoint> pts,
                                      double jitter_ps, double source_ps,
                                      const ExtrapolationOptions& options = {});

// Model value and derivatives w.r.t. (a^2, b^2) at abscissa x; exposed for
// derivative checks.
double extrapolation_eval(double a_sq, double b_sq, double fixed_sq, double x);
void extrapolation_jacobian(double a_sq, double b_sq, double fixed_sq,
                            double x, double out[2]);

// JSON serializations with fixed field names.
std::string fit_report_json(const FitReport& report);
std::string extrapolation_report_json(const ExtrapolationReport& report);

}  // namespace ptc::fit
