#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "listmode.hpp"
#include "physics.hpp"
#include "rng.hpp"

namespace ptc::sim {

// Ground-truth emission model. The quantum term is a single Cauchy offset
// (FWHM qm_fwhm_ps) added to the emission time of the stop-going photon of a
// two-photon pair, so the interval histogram carries exactly that FWHM.
struct EmissionModel {
  double qm_fwhm_ps = 0.0;
  double positron_delay_mean_ps = 0.0;  // 0 disables the exponential delay
};

struct ElectronicsSpec {
  double jitter_sigma_ps = 16.137;      // Gaussian per trigger
  double walk_coefficient_ps = 45.0;    // saturating shift above over-range
  double threshold_lower_mv = 0.5;
  double overrange_upper_mv = 30.0;
  double transit_full_scale_ps = 380.0; // front-face avalanche transit time
  double transit_sigma_ps = 8.0;        // residual spread at fixed depth
  double tau_fixed_ps = 0.0;            // lumped circuit delay
};

struct ScenarioConfig {
  physics::GeometrySpec geometry;
  physics::SourceSpec source;
  physics::McpSpec start_mcp;
  physics::McpSpec stop_mcp;
  ElectronicsSpec start_elec;
  ElectronicsSpec stop_elec;
  EmissionModel emission;
  double pta_tick_ps = 0.305;
  double external_delay_ps = 0.0;  // delay-box value on the stop branch
  std::uint64_t n_decays = 1000000;
  std::uint64_t master_seed = 1;
};

struct SimSummary {
  double singles_rate_start = 0.0;   // triggers per model second
  double singles_rate_stop = 0.0;
  double coincidence_rate = 0.0;     // recorded pairs per model second
  double fraction_overrange_start = 0.0;
  double fraction_overrange_stop = 0.0;
  double nontagged_percent_start = 0.0;
  double nontagged_percent_stop = 0.0;
  std::uint64_t decays_simulated = 0;
  double model_time_s = 0.0;
  // Ground-truth composition of the recorded pairs.
  std::uint64_t truth_aa_records = 0;  // both photons from an annihilation
  std::uint64_t truth_da_records = 0;  // decay photon paired with one
};

struct SimResult {
  std::vector<listmode::ListModeRecord> records;
  SimSummary summary;
};

// Returns human-readable descriptions of every violated invariant, keyed by
// the config field names; empty means valid.
std::vector<std::string> validate(const ScenarioConfig& config);
void throw_if_invalid(const ScenarioConfig& config);

struct Photon {
  double cos_z = 0.0;        // direction cosine along the start->stop axis
  double origin_z_cm = 0.0;  // emission point on the axis
  double emit_time_ps = 0.0; // relative to the decay instant
  bool annihilation = false;
};

struct EmittedPhotons {
  std::array<Photon, 4> photons;
  int count = 0;
  bool has_positron = false;
  bool singlet = false;
  double annihilation_z_cm = 0.0;
};

// Samples one decay: the prompt photon, and with 90% probability an
// annihilation at a position uniform over the configured spread, through the
// two-photon channel (probability f1, back-to-back pair on an isotropic
// axis) or the three-photon channel (independent isotropic photons).
EmittedPhotons sample_event(const physics::SourceSpec& source,
                            const physics::ChannelFractions& fractions,
                            const EmissionModel& emission, RngStream& rng);

struct AvalancheHit {
  double depth_um = 0.0;      // from the front face
  double amplitude_mv = 0.0;
};

enum class ParticleKind { Gamma, Electron };

// Bernoulli detection with the configured efficiency; on success the
// avalanche depth is uniform over the stack (gammas) or over the electron
// penetration range (test mode), and the amplitude follows the gain law.
std::optional<AvalancheHit> detect_photon(const physics::McpSpec& mcp,
                                          RngStream& rng,
                                          ParticleKind kind =
                                              ParticleKind::Gamma);

struct Trigger {
  double time_ps = 0.0;  // electronics contribution only (no photon flight)
  bool overrange = false;
};

// Discriminator + CFD model: pulses below threshold never trigger; transit
// time is linear in avalanche depth plus a residual Gaussian; jitter is
// Gaussian; over-ranged pulses acquire a saturating positive walk.
std::optional<Trigger> apply_electronics(const AvalancheHit& hit,
                                         const ElectronicsSpec& elec,
                                         const physics::McpSpec& mcp,
                                         RngStream& rng);

// Tag word: bit 0 = start over-range, bit 1 = stop over-range; bits 2-3
// reserved zero.
inline std::uint8_t encode_tag(bool start_overrange, bool stop_overrange) {
  return static_cast<std::uint8_t>((start_overrange ? 1 : 0) |
                                   (stop_overrange ? 2 : 0));
}

// Coincidence acceptance window (80 ns, symmetric about zero delay).
inline constexpr double kCoincidenceWindowPs = 80000.0;

// Runs the full chain. Deterministic for a fixed (config, master_seed):
// every decay owns an RNG stream derived from (master_seed, decay index) and
// per-block partial results are merged in block order, so the output is
// byte-identical for any worker count. workers == 0 picks the hardware
// concurrency.
SimResult run_simulation(const ScenarioConfig& config, unsigned workers = 0);

}  // namespace ptc::sim
