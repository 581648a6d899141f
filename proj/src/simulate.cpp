#include "simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "errors.hpp"

namespace ptc::sim {

namespace {

void check(std::vector<std::string>& out, bool ok, const std::string& msg) {
  if (!ok) out.push_back(msg);
}

void validate_mcp(std::vector<std::string>& out, const physics::McpSpec& m,
                  const std::string& prefix) {
  check(out, m.pore_diameter_um > 0.0, prefix + ".pore_diameter_um > 0");
  check(out, m.bias_angle_deg > 0.0 && m.bias_angle_deg < 90.0,
        prefix + ".bias_angle_deg in (0, 90)");
  check(out, m.stack_thickness_um > 0.0, prefix + ".stack_thickness_um > 0");
  check(out, m.collision_step_um > 0.0, prefix + ".collision_step_um > 0");
  check(out, m.secondary_yield > 1.0, prefix + ".secondary_yield > 1");
  check(out, m.anode_capacitance_pf > 0.0,
        prefix + ".anode_capacitance_pf > 0");
  check(out, m.efficiency > 0.0 && m.efficiency < 1.0,
        prefix + ".efficiency in (0, 1)");
}

void validate_elec(std::vector<std::string>& out, const ElectronicsSpec& e,
                   const std::string& prefix) {
  check(out, e.jitter_sigma_ps >= 0.0, prefix + ".jitter_sigma_ps >= 0");
  check(out, e.walk_coefficient_ps >= 0.0,
        prefix + ".walk_coefficient_ps >= 0");
  check(out, e.threshold_lower_mv > 0.0, prefix + ".threshold_lower_mv > 0");
  check(out, e.overrange_upper_mv > e.threshold_lower_mv,
        prefix + ".overrange_upper_mv > " + prefix + ".threshold_lower_mv");
  check(out, e.transit_full_scale_ps >= 0.0,
        prefix + ".transit_full_scale_ps >= 0");
  check(out, e.transit_sigma_ps >= 0.0, prefix + ".transit_sigma_ps >= 0");
  check(out, e.tau_fixed_ps >= 0.0, prefix + ".tau_fixed_ps >= 0");
}

struct BlockAccum {
  std::vector<listmode::ListModeRecord> records;
  std::uint64_t triggers_start = 0;
  std::uint64_t triggers_stop = 0;
  std::uint64_t overrange_start = 0;
  std::uint64_t overrange_stop = 0;
  std::uint64_t records_aa = 0;
  std::uint64_t records_da = 0;
  double model_time_ps = 0.0;
};

struct SimContext {
  const ScenarioConfig& cfg;
  physics::ChannelFractions fractions;
  double mean_gap_ps = 0.0;
};

// One channel's best (earliest) trigger within the current decay.
struct ChannelBest {
  double time_ps = 0.0;
  bool overrange = false;
  bool annihilation = false;
  bool hit = false;
};

void process_decay(const SimContext& ctx, RngStream& rng, BlockAccum& acc) {
  const ScenarioConfig& cfg = ctx.cfg;
  acc.model_time_ps += rng.exponential(ctx.mean_gap_ps);

  const EmittedPhotons ev =
      sample_event(cfg.source, ctx.fractions, cfg.emission, rng);

  const double length = cfg.geometry.separation_cm;
  const double radius = cfg.geometry.active_radius_cm;
  ChannelBest best_start, best_stop;

  for (int i = 0; i < ev.count; ++i) {
    const Photon& p = ev.photons[i];
    if (p.cos_z == 0.0) continue;
    const bool to_stop = p.cos_z > 0.0;
    const double axial_cm = to_stop ? length - p.origin_z_cm : p.origin_z_cm;
    // On-axis acceptance cone of the facing disk.
    const double cos_accept = axial_cm / std::hypot(axial_cm, radius);
    if (std::fabs(p.cos_z) < cos_accept) continue;

    const physics::McpSpec& mcp = to_stop ? cfg.stop_mcp : cfg.start_mcp;
    const ElectronicsSpec& elec = to_stop ? cfg.stop_elec : cfg.start_elec;
    const auto hit = detect_photon(mcp, rng);
    if (!hit) continue;
    const auto trig = apply_electronics(*hit, elec, mcp, rng);
    if (!trig) continue;

    if (to_stop) {
      ++acc.triggers_stop;
      if (trig->overrange) ++acc.overrange_stop;
    } else {
      ++acc.triggers_start;
      if (trig->overrange) ++acc.overrange_start;
    }

    // Photon flight enters as the axial distance over c, matching the
    // centroid algebra the analysis is checked against.
    double t = p.emit_time_ps + axial_cm / physics::kSpeedOfLightCmPerPs +
               trig->time_ps;
    if (to_stop) t += cfg.external_delay_ps;

    ChannelBest& best = to_stop ? best_stop : best_start;
    if (!best.hit || t < best.time_ps) {
      best = ChannelBest{t, trig->overrange, p.annihilation, true};
    }
  }

  if (best_start.hit && best_stop.hit) {
    const double dt = best_stop.time_ps - best_start.time_ps;
    if (std::fabs(dt) <= kCoincidenceWindowPs) {
      acc.records.push_back(
          {static_cast<std::int64_t>(std::llround(dt / cfg.pta_tick_ps)),
           encode_tag(best_start.overrange, best_stop.overrange)});
      if (best_start.annihilation && best_stop.annihilation)
        ++acc.records_aa;
      else
        ++acc.records_da;
    }
  }
}

}  // namespace

std::vector<std::string> validate(const ScenarioConfig& cfg) {
  std::vector<std::string> out;
  check(out, cfg.geometry.separation_cm > 0.0, "geometry.separation_cm > 0");
  check(out, cfg.geometry.active_radius_cm > 0.0,
        "geometry.active_radius_cm > 0");
  check(out, cfg.source.activity_per_s > 0.0, "source.activity_per_s > 0");
  check(out,
        cfg.source.position_cm > 0.0 &&
            cfg.source.position_cm < cfg.geometry.separation_cm,
        "source.position_cm in (0, geometry.separation_cm)");
  check(out, cfg.source.position_spread_cm >= 0.0,
        "source.position_spread_cm >= 0");
  if (cfg.source.position_cm > 0.0 &&
      cfg.source.position_cm < cfg.geometry.separation_cm) {
    const double margin = std::min(
        cfg.source.position_cm,
        cfg.geometry.separation_cm - cfg.source.position_cm);
    check(out, 0.5 * cfg.source.position_spread_cm <= margin,
          "source.position_spread_cm/2 <= min(s, L - s)");
  }
  check(out,
        cfg.source.pickoff_fraction >= 0.0 &&
            cfg.source.pickoff_fraction <= 1.0,
        "source.pickoff_fraction in [0, 1]");
  validate_mcp(out, cfg.start_mcp, "start_mcp");
  validate_mcp(out, cfg.stop_mcp, "stop_mcp");
  validate_elec(out, cfg.start_elec, "start_elec");
  validate_elec(out, cfg.stop_elec, "stop_elec");
  check(out, cfg.emission.qm_fwhm_ps >= 0.0, "emission.qm_fwhm_ps >= 0");
  check(out, cfg.emission.positron_delay_mean_ps >= 0.0,
        "emission.positron_delay_mean_ps >= 0");
  check(out, cfg.pta_tick_ps > 0.0, "run.pta_tick_ps > 0");
  check(out, cfg.external_delay_ps >= 0.0, "run.external_delay_ps >= 0");
  check(out, cfg.n_decays > 0, "run.n_decays > 0");
  return out;
}

void throw_if_invalid(const ScenarioConfig& cfg) {
  const auto violations = validate(cfg);
  if (violations.empty()) return;
  std::string msg = "invalid scenario configuration; violated invariants:";
  for (const auto& v : violations) msg += "\n  " + v;
  throw ConfigError(msg);
}

EmittedPhotons sample_event(const physics::SourceSpec& source,
                            const physics::ChannelFractions& fractions,
                            const EmissionModel& emission, RngStream& rng) {
  EmittedPhotons ev;

  // Prompt decay photon from the source point itself.
  ev.photons[ev.count++] =
      Photon{rng.uniform_sym(), source.position_cm, 0.0, false};

  if (!rng.bernoulli(physics::kPositronBranch)) return ev;
  ev.has_positron = true;

  double t_ann = 0.0;
  if (emission.positron_delay_mean_ps > 0.0)
    t_ann = rng.exponential(emission.positron_delay_mean_ps);
  ev.annihilation_z_cm =
      source.position_cm +
      source.position_spread_cm * (rng.uniform() - 0.5);

  if (rng.uniform() < fractions.f1) {
    ev.singlet = true;
    const double axis = rng.uniform_sym();
    double qm = 0.0;
    if (emission.qm_fwhm_ps > 0.0) qm = rng.cauchy_fwhm(emission.qm_fwhm_ps);
    // The stop-going member of the pair carries the full quantum offset.
    const double t_pos = t_ann + (axis > 0.0 ? qm : 0.0);
    const double t_neg = t_ann + (axis > 0.0 ? 0.0 : qm);
    ev.photons[ev.count++] = Photon{axis, ev.annihilation_z_cm, t_pos, true};
    ev.photons[ev.count++] = Photon{-axis, ev.annihilation_z_cm, t_neg, true};
  } else {
    for (int i = 0; i < 3; ++i) {
      ev.photons[ev.count++] =
          Photon{rng.uniform_sym(), ev.annihilation_z_cm, t_ann, true};
    }
  }
  return ev;
}

std::optional<AvalancheHit> detect_photon(const physics::McpSpec& mcp,
                                          RngStream& rng, ParticleKind kind) {
  if (!rng.bernoulli(mcp.efficiency)) return std::nullopt;
  double depth_range = mcp.stack_thickness_um;
  if (kind == ParticleKind::Electron) {
    depth_range = std::min(physics::max_penetration_depth_um(mcp),
                           mcp.stack_thickness_um);
  }
  AvalancheHit hit;
  hit.depth_um = depth_range * rng.uniform();
  hit.amplitude_mv = physics::pulse_amplitude_mv(hit.depth_um, mcp);
  return hit;
}

std::optional<Trigger> apply_electronics(const AvalancheHit& hit,
                                         const ElectronicsSpec& elec,
                                         const physics::McpSpec& mcp,
                                         RngStream& rng) {
  if (hit.amplitude_mv < elec.threshold_lower_mv) return std::nullopt;

  Trigger trig;
  trig.overrange = hit.amplitude_mv > elec.overrange_upper_mv;

  double t = elec.transit_full_scale_ps *
             (mcp.stack_thickness_um - hit.depth_um) / mcp.stack_thickness_um;
  t += rng.gaussian(elec.transit_sigma_ps);
  t += rng.gaussian(elec.jitter_sigma_ps);
  if (trig.overrange) {
    // Saturated pulses defeat the constant-fraction trigger and fire late.
    const double excess =
        (hit.amplitude_mv - elec.overrange_upper_mv) / elec.overrange_upper_mv;
    t += elec.walk_coefficient_ps * std::min(1.0, excess);
  }
  t += elec.tau_fixed_ps;
  trig.time_ps = t;
  return trig;
}

SimResult run_simulation(const ScenarioConfig& cfg, unsigned workers) {
  throw_if_invalid(cfg);

  SimContext ctx{cfg, physics::two_photon_fraction(cfg.source.pickoff_fraction),
                 1e12 / cfg.source.activity_per_s};

  constexpr std::uint64_t kBlockSize = 1 << 16;
  const std::uint64_t n_blocks = (cfg.n_decays + kBlockSize - 1) / kBlockSize;
  std::vector<BlockAccum> blocks(static_cast<std::size_t>(n_blocks));

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(
      std::min<std::uint64_t>(workers, n_blocks));

  std::atomic<std::uint64_t> next_block{0};
  auto work = [&] {
    for (;;) {
      const std::uint64_t b = next_block.fetch_add(1);
      if (b >= n_blocks) break;
      BlockAccum& acc = blocks[static_cast<std::size_t>(b)];
      const std::uint64_t first = b * kBlockSize;
      const std::uint64_t last = std::min(first + kBlockSize, cfg.n_decays);
      for (std::uint64_t i = first; i < last; ++i) {
        RngStream rng(cfg.master_seed, i);
        process_decay(ctx, rng, acc);
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  // Merge in block order so the result is independent of scheduling.
  SimResult result;
  std::size_t n_records = 0;
  for (const auto& b : blocks) n_records += b.records.size();
  result.records.reserve(n_records);
  std::uint64_t triggers_start = 0, triggers_stop = 0;
  std::uint64_t overrange_start = 0, overrange_stop = 0;
  std::uint64_t records_aa = 0, records_da = 0;
  double model_time_ps = 0.0;
  for (const auto& b : blocks) {
    result.records.insert(result.records.end(), b.records.begin(),
                          b.records.end());
    triggers_start += b.triggers_start;
    triggers_stop += b.triggers_stop;
    overrange_start += b.overrange_start;
    overrange_stop += b.overrange_stop;
    records_aa += b.records_aa;
    records_da += b.records_da;
    model_time_ps += b.model_time_ps;
  }

  SimSummary& s = result.summary;
  s.decays_simulated = cfg.n_decays;
  s.truth_aa_records = records_aa;
  s.truth_da_records = records_da;
  s.model_time_s = model_time_ps * 1e-12;
  if (s.model_time_s > 0.0) {
    s.singles_rate_start = static_cast<double>(triggers_start) / s.model_time_s;
    s.singles_rate_stop = static_cast<double>(triggers_stop) / s.model_time_s;
    s.coincidence_rate =
        static_cast<double>(result.records.size()) / s.model_time_s;
  }
  if (triggers_start > 0)
    s.fraction_overrange_start =
        static_cast<double>(overrange_start) / static_cast<double>(triggers_start);
  if (triggers_stop > 0)
    s.fraction_overrange_stop =
        static_cast<double>(overrange_stop) / static_cast<double>(triggers_stop);
  if (!result.records.empty()) {
    const auto stats = listmode::tag_statistics(result.records);
    s.nontagged_percent_start = stats.nontagged_percent_start;
    s.nontagged_percent_stop = stats.nontagged_percent_stop;
  }
  return result;
}

}  // namespace ptc::sim
