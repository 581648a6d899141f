#include "fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "errors.hpp"

namespace ptc::fit {

namespace {

constexpr int kMaxIterations = 200;
constexpr double kRelativeCostTol = 1e-10;
constexpr double kLambdaInit = 1e-3;
constexpr double kLambdaMax = 1e15;
constexpr double kFourLn2 = 2.772588722239781;

// Solves A x = b for n <= 4 by Gaussian elimination with partial pivoting.
bool solve_dense(int n, double a[4][4], double b[4], double x[4]) {
  int perm[4] = {0, 1, 2, 3};
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[perm[r]][col]) > std::fabs(a[perm[pivot]][col]))
        pivot = r;
    std::swap(perm[col], perm[pivot]);
    const double diag = a[perm[col]][col];
    if (std::fabs(diag) < 1e-300) return false;
    for (int r = col + 1; r < n; ++r) {
      const double f = a[perm[r]][col] / diag;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) a[perm[r]][c] -= f * a[perm[col]][c];
      b[perm[r]] -= f * b[perm[col]];
    }
  }
  for (int row = n - 1; row >= 0; --row) {
    double s = b[perm[row]];
    for (int c = row + 1; c < n; ++c) s -= a[perm[row]][c] * x[c];
    x[row] = s / a[perm[row]][row];
  }
  return true;
}

// Inverts a symmetric positive (semi)definite n x n matrix in place via
// Gauss-Jordan; returns false when singular.
bool invert_dense(int n, double a[4][4]) {
  double aug[4][8];
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) aug[r][c] = a[r][c];
    for (int c = 0; c < n; ++c) aug[r][n + c] = (r == c) ? 1.0 : 0.0;
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(aug[r][col]) > std::fabs(aug[pivot][col])) pivot = r;
    if (std::fabs(aug[pivot][col]) < 1e-300) return false;
    if (pivot != col)
      for (int c = 0; c < 2 * n; ++c) std::swap(aug[pivot][c], aug[col][c]);
    const double inv = 1.0 / aug[col][col];
    for (int c = 0; c < 2 * n; ++c) aug[col][c] *= inv;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = aug[r][col];
      if (f == 0.0) continue;
      for (int c = 0; c < 2 * n; ++c) aug[r][c] -= f * aug[col][c];
    }
  }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a[r][c] = aug[r][n + c];
  return true;
}

struct LmResult {
  double cost = 0.0;
  bool converged = false;
};

// Damped Gauss-Newton over the free parameters. model(params, x, &m, jac)
// must fill the model value and, when jac != nullptr, all n_params partial
// derivatives. lambda starts at 1e-3, x10 on a rejected step, /10 on an
// accepted one; convergence is a relative cost decrease below 1e-10.
template <typename ModelFn>
LmResult levenberg_marquardt(ModelFn&& model, int n_params,
                             const bool* free_mask,
                             std::span<const double> x,
                             std::span<const double> y,
                             std::span<const double> sigma, double* params) {
  const int n = static_cast<int>(x.size());
  int free_idx[4];
  int n_free_params = 0;
  for (int p = 0; p < n_params; ++p)
    if (free_mask[p]) free_idx[n_free_params++] = p;

  auto cost_of = [&](const double* p) {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      double m;
      model(p, x[i], m, static_cast<double*>(nullptr));
      const double r = (y[i] - m) / sigma[i];
      cost += r * r;
    }
    return cost;
  };

  double cost = cost_of(params);
  double lambda = kLambdaInit;
  LmResult result;

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    // Accumulate the normal equations over the free parameters.
    double jtj[4][4] = {};
    double jtr[4] = {};
    double jac[4];
    for (int i = 0; i < n; ++i) {
      double m;
      model(params, x[i], m, jac);
      const double inv_s = 1.0 / sigma[i];
      const double r = (y[i] - m) * inv_s;
      for (int a = 0; a < n_free_params; ++a) {
        const double ja = jac[free_idx[a]] * inv_s;
        jtr[a] += ja * r;
        for (int b = a; b < n_free_params; ++b)
          jtj[a][b] += ja * jac[free_idx[b]] * inv_s;
      }
    }
    for (int a = 0; a < n_free_params; ++a)
      for (int b = 0; b < a; ++b) jtj[a][b] = jtj[b][a];

    bool stepped = false;
    while (lambda <= kLambdaMax) {
      double damped[4][4];
      double rhs[4];
      for (int a = 0; a < n_free_params; ++a) {
        for (int b = 0; b < n_free_params; ++b) damped[a][b] = jtj[a][b];
        const double d = jtj[a][a];
        damped[a][a] = d + lambda * (d > 1e-300 ? d : 1.0);
        rhs[a] = jtr[a];
      }
      double delta[4];
      if (!solve_dense(n_free_params, damped, rhs, delta)) {
        lambda *= 10.0;
        continue;
      }
      double trial[4];
      for (int p = 0; p < n_params; ++p) trial[p] = params[p];
      for (int a = 0; a < n_free_params; ++a) trial[free_idx[a]] += delta[a];
      const double trial_cost = cost_of(trial);
      if (trial_cost < cost) {
        const double decrease =
            cost > 0.0 ? (cost - trial_cost) / cost : 0.0;
        for (int p = 0; p < n_params; ++p) params[p] = trial[p];
        cost = trial_cost;
        lambda = std::max(lambda * 0.1, 1e-18);
        stepped = true;
        if (decrease < kRelativeCostTol || cost == 0.0) {
          result.converged = true;
        }
        break;
      }
      if (trial_cost - cost <= kRelativeCostTol * std::max(cost, 1e-300)) {
        // The step neither improves nor measurably degrades the cost: the
        // iteration sits at the minimum within tolerance.
        result.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (result.converged || !stepped) break;
  }
  result.cost = cost;
  return result;
}

// Unscaled covariance (J^T W J)^-1 over the free parameters, written back
// into the full n_params x n_params layout.
template <typename ModelFn>
bool covariance_at(ModelFn&& model, int n_params, const bool* free_mask,
                   std::span<const double> x, std::span<const double> sigma,
                   const double* params, double* cov_out /* n_params^2 */) {
  int free_idx[4];
  int n_free_params = 0;
  for (int p = 0; p < n_params; ++p)
    if (free_mask[p]) free_idx[n_free_params++] = p;

  double jtj[4][4] = {};
  double jac[4];
  for (std::size_t i = 0; i < x.size(); ++i) {
    double m;
    model(params, x[i], m, jac);
    const double inv_s2 = 1.0 / (sigma[i] * sigma[i]);
    for (int a = 0; a < n_free_params; ++a)
      for (int b = a; b < n_free_params; ++b)
        jtj[a][b] += jac[free_idx[a]] * jac[free_idx[b]] * inv_s2;
  }
  for (int a = 0; a < n_free_params; ++a)
    for (int b = 0; b < a; ++b) jtj[a][b] = jtj[b][a];
  if (!invert_dense(n_free_params, jtj)) return false;

  std::fill(cov_out, cov_out + n_params * n_params, 0.0);
  for (int a = 0; a < n_free_params; ++a)
    for (int b = 0; b < n_free_params; ++b)
      cov_out[free_idx[a] * n_params + free_idx[b]] = jtj[a][b];
  return true;
}

void peak_model(bool lorentzian, const double* p, double t, double& m,
                double* jac) {
  const LorentzianParams lp{p[0], p[1], p[2], p[3]};
  if (lorentzian) {
    m = lorentzian_eval(lp, t);
    if (jac) lorentzian_jacobian(lp, t, jac);
  } else {
    m = gaussian_eval(lp, t);
    if (jac) gaussian_jacobian(lp, t, jac);
  }
}

std::vector<double> sigmas_for(Weighting w, std::span<const double> y) {
  std::vector<double> s(y.size());
  switch (w) {
    case Weighting::Paper:
      for (std::size_t i = 0; i < y.size(); ++i)
        s[i] = std::max(std::sqrt(std::fabs(y[i] - 1.0)), 1.0);
      break;
    case Weighting::Unweighted:
      std::fill(s.begin(), s.end(), 1.0);
      break;
    case Weighting::Poisson:
      for (std::size_t i = 0; i < y.size(); ++i)
        s[i] = std::max(std::sqrt(y[i]), 1.0);
      break;
  }
  return s;
}

LorentzianParams initial_guess(std::span<const double> x,
                               std::span<const double> y) {
  std::size_t peak = 0;
  double ymin = y[0], ymax = y[0];
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > ymax) {
      ymax = y[i];
      peak = i;
    }
    ymin = std::min(ymin, y[i]);
  }
  LorentzianParams p;
  p.baseline = ymin;
  p.amplitude = ymax - ymin;
  p.centroid_ps = x[peak];

  // Width at half of (peak - min): linear scan outwards from the peak.
  const double half = ymin + 0.5 * (ymax - ymin);
  double t_hi = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = peak + 1; i < y.size(); ++i) {
    if (y[i] <= half) {
      const double f = (y[i - 1] - half) / (y[i - 1] - y[i]);
      t_hi = x[i - 1] + f * (x[i] - x[i - 1]);
      break;
    }
  }
  double t_lo = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = peak; i-- > 0;) {
    if (y[i] <= half) {
      const double f = (y[i + 1] - half) / (y[i + 1] - y[i]);
      t_lo = x[i + 1] - f * (x[i + 1] - x[i]);
      break;
    }
  }
  if (!std::isnan(t_lo) && !std::isnan(t_hi)) {
    p.fwhm_ps = t_hi - t_lo;
  } else if (!std::isnan(t_hi)) {
    p.fwhm_ps = 2.0 * (t_hi - p.centroid_ps);
  } else if (!std::isnan(t_lo)) {
    p.fwhm_ps = 2.0 * (p.centroid_ps - t_lo);
  } else {
    p.fwhm_ps = 0.25 * (x.back() - x.front());
  }
  if (!(p.fwhm_ps > 0.0)) p.fwhm_ps = x.size() > 1 ? (x[1] - x[0]) : 1.0;
  return p;
}

FitReport fit_peak(bool lorentzian, const listmode::Histogram& hist,
                   double tick_ps, Weighting weighting,
                   const FitOptions& options) {
  const std::size_t n = hist.counts.size();
  std::vector<double> x(n), y(n);
  std::size_t non_empty = 0;
  for (std::size_t b = 0; b < n; ++b) {
    x[b] = hist.bin_center_ticks(b) * tick_ps;
    y[b] = static_cast<double>(hist.counts[b]);
    if (hist.counts[b] > 0) ++non_empty;
  }
  if (non_empty < 8)
    throw NumericError("peak fit needs at least 8 non-empty bins, got " +
                       std::to_string(non_empty));
  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  if (*ymin_it == *ymax_it)
    throw NumericError("degenerate histogram: all bins equal");

  const LorentzianParams init = options.init ? *options.init
                                             : initial_guess(x, y);
  double params[4] = {init.amplitude, init.centroid_ps, init.fwhm_ps,
                      init.baseline};
  const bool mask[4] = {true, true, true, options.fit_baseline};
  if (!options.fit_baseline) params[3] = options.init ? init.baseline : 0.0;

  const std::vector<double> sigma = sigmas_for(weighting, y);
  auto model = [lorentzian](const double* p, double t, double& m,
                            double* jac) {
    peak_model(lorentzian, p, t, m, jac);
  };
  const LmResult lm = levenberg_marquardt(model, 4, mask, x, y, sigma, params);

  FitReport report;
  params[2] = std::fabs(params[2]);  // the model is even in the width
  report.params = {params[0], params[1], params[2], params[3]};
  report.n_points = static_cast<int>(n);
  report.n_free = static_cast<int>(n) - (options.fit_baseline ? 4 : 3);
  report.converged = lm.converged && report.n_free >= 1;
  report.reduced_chi_square =
      report.n_free >= 1 ? lm.cost / report.n_free : 0.0;
  report.weighting = weighting;
  report.model = lorentzian ? "lorentzian" : "gaussian";
  covariance_at(model, 4, mask, x, sigma, params, report.covariance.data());
  return report;
}

}  // namespace

Weighting parse_weighting(std::string_view text) {
  if (text == "paper") return Weighting::Paper;
  if (text == "unweighted") return Weighting::Unweighted;
  if (text == "poisson") return Weighting::Poisson;
  throw ConfigError("invalid weighting '" + std::string(text) +
                    "' (expected paper, unweighted or poisson)");
}

std::string_view weighting_name(Weighting w) {
  switch (w) {
    case Weighting::Paper: return "paper";
    case Weighting::Unweighted: return "unweighted";
    case Weighting::Poisson: return "poisson";
  }
  return "?";
}

double lorentzian_eval(const LorentzianParams& p, double t_ps) {
  const double hg = 0.5 * p.fwhm_ps;
  const double d = t_ps - p.centroid_ps;
  return p.baseline + p.amplitude * hg * hg / (d * d + hg * hg);
}

void lorentzian_jacobian(const LorentzianParams& p, double t_ps,
                         double out[4]) {
  const double hg = 0.5 * p.fwhm_ps;
  const double d = t_ps - p.centroid_ps;
  const double denom = d * d + hg * hg;
  const double u = hg * hg / denom;
  out[0] = u;
  out[1] = p.amplitude * hg * hg * 2.0 * d / (denom * denom);
  out[2] = p.amplitude * hg * d * d / (denom * denom);
  out[3] = 1.0;
}

double gaussian_eval(const LorentzianParams& p, double t_ps) {
  const double d = t_ps - p.centroid_ps;
  const double g2 = p.fwhm_ps * p.fwhm_ps;
  return p.baseline + p.amplitude * std::exp(-kFourLn2 * d * d / g2);
}

void gaussian_jacobian(const LorentzianParams& p, double t_ps, double out[4]) {
  const double d = t_ps - p.centroid_ps;
  const double g2 = p.fwhm_ps * p.fwhm_ps;
  const double e = std::exp(-kFourLn2 * d * d / g2);
  out[0] = e;
  out[1] = p.amplitude * e * 2.0 * kFourLn2 * d / g2;
  out[2] = p.amplitude * e * 2.0 * kFourLn2 * d * d / (g2 * p.fwhm_ps);
  out[3] = 1.0;
}

double param_sigma(const FitReport& report, int index) {
  double var = report.covariance[index * 4 + index];
  if (report.weighting == Weighting::Unweighted)
    var *= report.reduced_chi_square;
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

FitReport fit_lorentzian(const listmode::Histogram& hist, double tick_ps,
                         Weighting weighting, const FitOptions& options) {
  return fit_peak(true, hist, tick_ps, weighting, options);
}

FitReport fit_gaussian(const listmode::Histogram& hist, double tick_ps,
                       Weighting weighting, const FitOptions& options) {
  return fit_peak(false, hist, tick_ps, weighting, options);
}

double reduced_chi_square(std::span<const double> residuals,
                          std::span<const double> sigmas, int n_free) {
  if (n_free < 1)
    throw std::invalid_argument("reduced chi-square needs n_free >= 1");
  if (residuals.size() != sigmas.size())
    throw std::invalid_argument("residual/sigma length mismatch");
  double cost = 0.0;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double r = residuals[i] / sigmas[i];
    cost += r * r;
  }
  return cost / n_free;
}

double extrapolation_eval(double a_sq, double b_sq, double fixed_sq,
                          double x) {
  return std::sqrt(std::max(a_sq + b_sq * x * x + fixed_sq, 1e-300));
}

void extrapolation_jacobian(double a_sq, double b_sq, double fixed_sq,
                            double x, double out[2]) {
  const double m = extrapolation_eval(a_sq, b_sq, fixed_sq, x);
  out[0] = 0.5 / m;
  out[1] = 0.5 * x * x / m;
}

ExtrapolationReport fit_extrapolation(std::span<const ExtrapolationPoint> pts,
                                      double jitter_ps, double source_ps,
                                      const ExtrapolationOptions& options) {
  if (pts.size() < 3)
    throw ConfigError("extrapolation fit needs at least 3 points, got " +
                      std::to_string(pts.size()));
  if (jitter_ps < 0.0 || source_ps < 0.0)
    throw ConfigError("fixed extrapolation terms must be non-negative");
  for (const auto& p : pts) {
    if (!(p.fwhm_ps > 0.0) || !(p.fwhm_sigma_ps > 0.0))
      throw ConfigError("extrapolation points need positive fwhm and sigma");
  }
  double xmin = pts[0].x_percent, xmax = pts[0].x_percent;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p.x_percent);
    xmax = std::max(xmax, p.x_percent);
  }
  if (xmax - xmin <= 0.0 && !options.fix_b_zero)
    throw NumericError("extrapolation fit is singular: all points share one "
                       "abscissa");

  const double fixed_sq = 2.0 * jitter_ps * jitter_ps + source_ps * source_ps;
  const std::size_t n = pts.size();
  std::vector<double> x(n), y(n), sigma(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = pts[i].x_percent;
    y[i] = pts[i].fwhm_ps;
    sigma[i] = pts[i].fwhm_sigma_ps;
  }

  // Linear least squares on fwhm^2 = a^2 + fixed + b^2 x^2 for the start
  // point of the damped iteration.
  double params[2] = {0.0, 0.0};
  {
    double su = 0, sz = 0, suu = 0, suz = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = x[i] * x[i];
      const double z = y[i] * y[i] - fixed_sq;
      su += u;
      sz += z;
      suu += u * u;
      suz += u * z;
    }
    const double dn = static_cast<double>(n);
    const double var_u = suu - su * su / dn;
    if (options.fix_b_zero || var_u <= 0.0) {
      params[0] = sz / dn;
      params[1] = 0.0;
    } else {
      params[1] = (suz - su * sz / dn) / var_u;
      params[0] = (sz - params[1] * su) / dn;
    }
  }

  const bool mask[2] = {true, !options.fix_b_zero};
  auto model = [fixed_sq](const double* p, double xv, double& m, double* jac) {
    m = extrapolation_eval(p[0], p[1], fixed_sq, xv);
    if (jac) extrapolation_jacobian(p[0], p[1], fixed_sq, xv, jac);
  };
  const LmResult lm = levenberg_marquardt(model, 2, mask, x, y, sigma, params);

  const int n_free =
      static_cast<int>(n) - (options.fix_b_zero ? 1 : 2);
  ExtrapolationReport report;
  report.n_points = static_cast<int>(n);
  report.converged = lm.converged && n_free >= 1;
  report.reduced_chi_square = n_free >= 1 ? lm.cost / n_free : 0.0;
  report.jitter_term_ps = jitter_ps;
  report.source_term_ps = source_ps;

  double cov[4] = {};
  covariance_at(model, 2, mask, x, sigma, params, cov);
  // Linearized covariance scaled by the reduced chi-square.
  for (int i = 0; i < 4; ++i)
    report.covariance[i] = cov[i] * report.reduced_chi_square;

  const double a_sq = params[0];
  const double b_sq = params[1];
  report.a_ps = std::sqrt(std::max(a_sq, 0.0));
  report.b_ps_per_percent = std::sqrt(std::max(b_sq, 0.0));

  const double var_a_sq = std::max(report.covariance[0], 0.0);
  const double sigma_a_sq = std::sqrt(var_a_sq);
  const int dof = n_free;
  double t_mult = 0.0;
  if (dof >= 1 && sigma_a_sq > 0.0) {
    boost::math::students_t_distribution<double> dist(dof);
    t_mult = boost::math::quantile(dist, 0.975);
  }
  const double lo_sq = a_sq - t_mult * sigma_a_sq;
  const double hi_sq = a_sq + t_mult * sigma_a_sq;
  report.a_ci_low_ps = std::sqrt(std::max(lo_sq, 0.0));
  report.a_ci_high_ps = std::sqrt(std::max(hi_sq, 0.0));
  report.ci95_a_ps = 0.5 * (report.a_ci_high_ps - report.a_ci_low_ps);
  return report;
}

std::string fit_report_json(const FitReport& report) {
  nlohmann::json j;
  j["model"] = report.model;
  j["amplitude"] = report.params.amplitude;
  j["centroid_ps"] = report.params.centroid_ps;
  j["fwhm_ps"] = report.params.fwhm_ps;
  j["baseline"] = report.params.baseline;
  j["fwhm_sigma_ps"] = param_sigma(report, 2);
  j["centroid_sigma_ps"] = param_sigma(report, 1);
  j["reduced_chi_square"] = report.reduced_chi_square;
  j["n_points"] = report.n_points;
  j["n_free"] = report.n_free;
  j["converged"] = report.converged;
  j["weighting"] = std::string(weighting_name(report.weighting));
  auto cov = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) {
    auto row = nlohmann::json::array();
    for (int c = 0; c < 4; ++c) row.push_back(report.covariance[r * 4 + c]);
    cov.push_back(row);
  }
  j["covariance"] = cov;
  return j.dump(2) + "\n";
}

std::string extrapolation_report_json(const ExtrapolationReport& report) {
  nlohmann::json j;
  j["a_ps"] = report.a_ps;
  j["b_ps_per_percent"] = report.b_ps_per_percent;
  j["ci95_a_ps"] = report.ci95_a_ps;
  j["a_ci_low_ps"] = report.a_ci_low_ps;
  j["a_ci_high_ps"] = report.a_ci_high_ps;
  j["reduced_chi_square"] = report.reduced_chi_square;
  j["n_points"] = report.n_points;
  j["converged"] = report.converged;
  j["jitter_term_ps"] = report.jitter_term_ps;
  j["source_term_ps"] = report.source_term_ps;
  j["covariance_parameters"] = {"a_sq", "b_sq"};
  j["covariance"] = {{report.covariance[0], report.covariance[1]},
                     {report.covariance[2], report.covariance[3]}};
  return j.dump(2) + "\n";
}

}  // namespace ptc::fit
