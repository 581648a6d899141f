#pragma once

#include <cstdint>

namespace ptc::physics {

// Physical constants. Lengths are cm for bench geometry and um inside the
// detector stack; times are ps; voltages are mV at every public boundary.
inline constexpr double kElectronChargeC = 1.602176634e-19;
inline constexpr double kSpeedOfLightCmPerS = 2.99792458e10;
inline constexpr double kSpeedOfLightCmPerPs = kSpeedOfLightCmPerS * 1e-12;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Photon-per-decay multiplicities folded with the 90% positron branch:
// 2 x 0.9 for the two-photon channel, 3 x 0.9 for the three-photon channel.
inline constexpr double kAlphaSinglet = 1.8;
inline constexpr double kBetaTriplet = 2.7;
inline constexpr double kPositronBranch = 0.9;

struct GeometrySpec {
  double separation_cm = 10.0;   // detector face to detector face
  double active_radius_cm = 1.25;
};

struct SourceSpec {
  double activity_per_s = 274064.0;
  double position_cm = 5.0;        // distance from the start detector
  double position_spread_cm = 0.0; // full width of the annihilation range
  double pickoff_fraction = 0.0;   // direct + pick-off annihilation fraction
};

// Event fractions of the two annihilation channels; f1 + f3 == 1 exactly.
struct ChannelFractions {
  double f1 = 0.25;
  double f3 = 0.75;
};

struct McpSpec {
  double pore_diameter_um = 10.0;
  double bias_angle_deg = 8.0;
  double stack_thickness_um = 800.0;     // full chevron stack
  double collision_step_um = 800.0 / 44.0;
  double secondary_yield = 1.4;          // electrons ejected per collision
  double anode_capacitance_pf = 5.0;
  double efficiency = 0.005;
};

struct ErrorBudget {
  double jitter_ps = 38.0;   // per amplifier circuit
  double walk_ps = 45.0;     // per detector circuit
  double tts_ps = 52.0;      // per detector
  double source_ps = 47.0;   // annihilation-location term (single ended)
};

struct SolidAngles {
  double start_sr = 0.0;
  double stop_sr = 0.0;
};

struct CoincidenceRates {
  double aa = 0.0;     // annihilation/annihilation
  double da = 0.0;     // decay/annihilation, both channels summed
  double total = 0.0;
  bool roles_swapped = false;  // source was nearer the stop detector
};

// Exact solid angles subtended by both detector disks from an on-axis point
// at distance s from the start detector. Throws std::domain_error unless
// 0 < s < L.
SolidAngles solid_angles(const GeometrySpec& geom, double s_cm);

// Channel fractions when a fraction n of annihilations proceeds through
// direct/pick-off two-photon emission on top of the 1:3 positronium ratio.
ChannelFractions two_photon_fraction(double pickoff_n);

// Total singles rate on one detector for a given efficiency and solid angle.
double singles_rate(double efficiency, double omega_sr,
                    const ChannelFractions& fr, double activity_per_s);

// Inverse of singles_rate for the efficiency.
double efficiency_from_singles(double rate_per_s, double omega_sr,
                               const ChannelFractions& fr,
                               double activity_per_s);

// AA / DA / total coincidence rates. The "start" role in the rate algebra is
// taken by whichever detector is nearer the source; roles_swapped reports
// when that is the physical stop detector.
CoincidenceRates coincidence_rates(double eps_start, double eps_stop,
                                   const GeometrySpec& geom, double s_cm,
                                   const ChannelFractions& fr,
                                   double activity_per_s);

// Maximum depth normal-incidence electrons can reach inside a pore.
double max_penetration_depth_um(const McpSpec& mcp);

// Anode pulse amplitude for an avalanche starting at depth x from the front
// face. Strictly decreasing in x; x must lie in [0, stack thickness].
double pulse_amplitude_mv(double x_um, const McpSpec& mcp);

// Exact inverse of pulse_amplitude_mv.
double avalanche_position_um(double v_mv, const McpSpec& mcp);

// Amplitude of a single-electron pulse (avalanche starting at the back).
double min_amplitude_mv(const McpSpec& mcp);
// Amplitude of a front-face avalanche.
double max_amplitude_mv(const McpSpec& mcp);

// Pulse height density  G(V) = A0 * s0 / ln(ne) / V  (per mV, A0 in 1/um).
double phd_density(double v_mv, const McpSpec& mcp, double a0_per_um);

// Normalization making the density integrate to one over the full amplitude
// range; equals 1 / stack thickness.
double phd_normalization_per_um(const McpSpec& mcp);

// Integral count-rate curve versus discriminator threshold,
// C(Vth) = C0 * (D0 - ln Vth), clamped at zero.
double threshold_count_curve(double v_th, double c0, double d0);

// Depth-window width selected by accepting amplitudes in [V, V + dV].
double selection_window_width_um(double v_mv, double dv_mv,
                                 const McpSpec& mcp);

// Timing-peak centroid for a source at s with the given electronic delays.
double expected_centroid_ps(const GeometrySpec& geom, double s_cm,
                            double tau_delay_ps, double tau_start_ps,
                            double tau_stop_ps);

// Total expected FWHM: quadrature sum of the per-channel terms (doubled),
// the single-ended source term and a quantum term.
double quadrature_budget_ps(const ErrorBudget& budget, double qm_ps);

}  // namespace ptc::physics
