#include "physics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ptc::physics {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::domain_error(msg);
}

double disk_solid_angle_sr(double distance_cm, double radius_cm) {
  // 2*pi*(1 - cos(theta)) for a disk seen from an on-axis point.
  return 2.0 * kPi *
         (1.0 - distance_cm / std::hypot(distance_cm, radius_cm));
}

double bracket_factor(const ChannelFractions& fr) {
  return 1.0 + kAlphaSinglet * fr.f1 + kBetaTriplet * fr.f3;
}

}  // namespace

SolidAngles solid_angles(const GeometrySpec& geom, double s_cm) {
  require(geom.separation_cm > 0.0, "geometry separation must be positive");
  require(geom.active_radius_cm > 0.0, "detector radius must be positive");
  require(s_cm > 0.0 && s_cm < geom.separation_cm,
          "source position s=" + std::to_string(s_cm) +
              " outside (0, L=" + std::to_string(geom.separation_cm) + ")");
  SolidAngles out;
  out.start_sr = disk_solid_angle_sr(s_cm, geom.active_radius_cm);
  out.stop_sr =
      disk_solid_angle_sr(geom.separation_cm - s_cm, geom.active_radius_cm);
  return out;
}

ChannelFractions two_photon_fraction(double pickoff_n) {
  require(pickoff_n >= 0.0 && pickoff_n <= 1.0,
          "pick-off fraction must lie in [0, 1]");
  ChannelFractions fr;
  fr.f1 = pickoff_n + (1.0 - pickoff_n) * 0.25;
  fr.f3 = 1.0 - fr.f1;  // keeps f1 + f3 == 1 exactly
  return fr;
}

double singles_rate(double efficiency, double omega_sr,
                    const ChannelFractions& fr, double activity_per_s) {
  require(efficiency > 0.0 && efficiency < 1.0,
          "efficiency must lie in (0, 1)");
  return efficiency * omega_sr / (4.0 * kPi) * bracket_factor(fr) *
         activity_per_s;
}

double efficiency_from_singles(double rate_per_s, double omega_sr,
                               const ChannelFractions& fr,
                               double activity_per_s) {
  require(rate_per_s > 0.0, "measured rate must be positive");
  require(omega_sr > 0.0, "solid angle must be positive");
  require(activity_per_s > 0.0, "source activity must be positive");
  return rate_per_s /
         (omega_sr / (4.0 * kPi) * bracket_factor(fr) * activity_per_s);
}

CoincidenceRates coincidence_rates(double eps_start, double eps_stop,
                                   const GeometrySpec& geom, double s_cm,
                                   const ChannelFractions& fr,
                                   double activity_per_s) {
  const SolidAngles om = solid_angles(geom, s_cm);
  CoincidenceRates out;
  out.roles_swapped = s_cm > 0.5 * geom.separation_cm;
  // The paired-photon factor uses the smaller of the two solid angles (the
  // rate algebra requires the "start" role at the nearer detector); both
  // efficiencies enter as a product, so swapping roles changes nothing else.
  const double om_near =
      out.roles_swapped ? om.stop_sr / (4.0 * kPi) : om.start_sr / (4.0 * kPi);
  const double om_far =
      out.roles_swapped ? om.start_sr / (4.0 * kPi) : om.stop_sr / (4.0 * kPi);
  out.aa = eps_start * eps_stop * om_far * kAlphaSinglet * fr.f1 *
           activity_per_s;
  out.da = 2.0 * eps_start * eps_stop * om_near * om_far * activity_per_s *
           (kAlphaSinglet * fr.f1 + kBetaTriplet * fr.f3);
  out.total = out.aa + out.da;
  return out;
}

double max_penetration_depth_um(const McpSpec& mcp) {
  require(mcp.bias_angle_deg > 0.0 && mcp.bias_angle_deg < 90.0,
          "bias angle must lie in (0, 90) degrees");
  const double theta = mcp.bias_angle_deg * kPi / 180.0;
  return mcp.pore_diameter_um / std::tan(theta);
}

double min_amplitude_mv(const McpSpec& mcp) {
  return kElectronChargeC / (mcp.anode_capacitance_pf * 1e-12) * 1e3;
}

double max_amplitude_mv(const McpSpec& mcp) {
  return min_amplitude_mv(mcp) *
         std::pow(mcp.secondary_yield,
                  mcp.stack_thickness_um / mcp.collision_step_um);
}

double pulse_amplitude_mv(double x_um, const McpSpec& mcp) {
  require(x_um >= 0.0 && x_um <= mcp.stack_thickness_um,
          "avalanche depth outside [0, stack thickness]");
  const double gain = std::pow(
      mcp.secondary_yield,
      (mcp.stack_thickness_um - x_um) / mcp.collision_step_um);
  return min_amplitude_mv(mcp) * gain;
}

double avalanche_position_um(double v_mv, const McpSpec& mcp) {
  const double vmin = min_amplitude_mv(mcp);
  const double vmax = max_amplitude_mv(mcp);
  const double slack = 1e-9;
  require(v_mv >= vmin * (1.0 - slack) && v_mv <= vmax * (1.0 + slack),
          "amplitude outside the physical pulse range");
  const double x = mcp.stack_thickness_um -
                   mcp.collision_step_um / std::log(mcp.secondary_yield) *
                       std::log(v_mv / vmin);
  return std::fmin(std::fmax(x, 0.0), mcp.stack_thickness_um);
}

double phd_density(double v_mv, const McpSpec& mcp, double a0_per_um) {
  require(v_mv > 0.0, "amplitude must be positive");
  return a0_per_um * mcp.collision_step_um /
         std::log(mcp.secondary_yield) / v_mv;
}

double phd_normalization_per_um(const McpSpec& mcp) {
  return 1.0 / mcp.stack_thickness_um;
}

double threshold_count_curve(double v_th, double c0, double d0) {
  require(v_th > 0.0, "threshold must be positive");
  const double value = c0 * (d0 - std::log(v_th));
  return value > 0.0 ? value : 0.0;
}

double selection_window_width_um(double v_mv, double dv_mv,
                                 const McpSpec& mcp) {
  require(v_mv > 0.0, "window base amplitude must be positive");
  require(dv_mv >= 0.0, "window width must be non-negative");
  return mcp.collision_step_um / std::log(mcp.secondary_yield) *
         std::log((v_mv + dv_mv) / v_mv);
}

double expected_centroid_ps(const GeometrySpec& geom, double s_cm,
                            double tau_delay_ps, double tau_start_ps,
                            double tau_stop_ps) {
  require(s_cm > 0.0 && s_cm < geom.separation_cm,
          "source position outside (0, L)");
  return (geom.separation_cm - 2.0 * s_cm) / kSpeedOfLightCmPerPs +
         (tau_stop_ps - tau_start_ps) + tau_delay_ps;
}

double quadrature_budget_ps(const ErrorBudget& budget, double qm_ps) {
  require(budget.jitter_ps >= 0.0 && budget.walk_ps >= 0.0 &&
              budget.tts_ps >= 0.0 && budget.source_ps >= 0.0 &&
              qm_ps >= 0.0,
          "budget components must be non-negative");
  return std::sqrt(qm_ps * qm_ps + 2.0 * budget.walk_ps * budget.walk_ps +
                   2.0 * budget.tts_ps * budget.tts_ps +
                   2.0 * budget.jitter_ps * budget.jitter_ps +
                   budget.source_ps * budget.source_ps);
}

}  // namespace ptc::physics
