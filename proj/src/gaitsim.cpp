#include "limbguard/gaitsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "limbguard/errors.hpp"
#include "limbguard/rng.hpp"

namespace limbguard {

namespace {

// Fore-aft pronking: the front pair swings together, the back pair in
// antiphase.
constexpr std::array<double, 4> kLimbPhase = {0.0, 0.0, std::numbers::pi,
                                              std::numbers::pi};

constexpr double kNominalSpeed = 0.3;  // m/s where stride_amplitude applies

// Pronking duration per condition (None, LF, RF, LB, RB) relative to
// base.duration; with the defaults (80 s, 5 s + 5 s rest) trials land on
// 90/60/120/90/90 s.
constexpr std::array<double, 5> kDurationFactor = {1.0, 0.625, 1.375, 1.0, 1.0};

constexpr std::uint64_t kJitterSalt = 0x6a09e667f3bcc909ULL;

const char* condition_slug(DamageCondition c) {
  switch (c) {
    case DamageCondition::None: return "none";
    case DamageCondition::LF: return "lf";
    case DamageCondition::RF: return "rf";
    case DamageCondition::LB: return "lb";
    case DamageCondition::RB: return "rb";
  }
  return "?";
}

}  // namespace

Trial simulate_trial(const GaitParams& gait, const DamageModel& damage,
                     std::string trial_id) {
  if (!(gait.duration > 0.0)) throw std::invalid_argument("duration must be > 0");
  if (!(gait.sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be > 0");
  for (double s : gait.noise_std) {
    if (s < 0.0) throw std::invalid_argument("noise_std entries must be >= 0");
  }
  if (gait.rest_head < 0.0 || gait.rest_tail < 0.0) {
    throw std::invalid_argument("rest segments must be >= 0");
  }

  const bool damaged_trial = damage.condition != DamageCondition::None;
  const int bad_limb = damaged_limb(damage.condition);
  const double freq =
      gait.hop_frequency * (damaged_trial ? damage.frequency_drag : 1.0);
  const double omega = 2.0 * std::numbers::pi * freq;
  const double amplitude =
      gait.stride_amplitude * (gait.forward_speed / kNominalSpeed);

  const double total_s = gait.rest_head + gait.duration + gait.rest_tail;
  const long long ticks = std::llround(total_s * gait.sample_rate);

  Trial trial;
  trial.condition = damage.condition;
  trial.sample_rate = gait.sample_rate;
  trial.distance_m = gait.distance_m;
  trial.trial_id = std::move(trial_id);
  for (auto& limb : trial.limbs) limb.reserve(static_cast<std::size_t>(ticks));

  Rng rng(gait.seed);
  for (long long i = 0; i < ticks; ++i) {
    const double t = static_cast<double>(i) / gait.sample_rate;
    const double tau = t - gait.rest_head;  // gait clock, 0 at first thrust
    const bool pronking = tau >= 0.0 && tau < gait.duration;
    const long long time_ms = std::llround(static_cast<double>(i) * 1000.0 /
                                           gait.sample_rate);

    for (int limb = 0; limb < 4; ++limb) {
      const bool dead = limb == bad_limb;
      const double amp = amplitude * (dead ? damage.limp_scale : 1.0);
      const double current =
          gait.current_amplitude *
          (dead ? damage.dead_current : (damaged_trial ? damage.load_shift : 1.0));
      const double current_noise = dead ? damage.noise_boost : 1.0;

      LimbSample s;
      s.limb_id = limb;
      s.time_ms = time_ms;
      if (pronking) {
        const double theta = omega * tau + kLimbPhase[limb];
        s.position = amp * std::sin(theta);
        s.velocity = amp * omega * std::cos(theta);
        s.current_alpha = current * std::abs(std::sin(theta));
        s.current_beta = current * std::abs(std::cos(theta));
      }
      // Draw order is fixed (4 per limb per tick) so rest and gait segments
      // consume the stream identically.
      s.position += rng.normal(0.0, gait.noise_std[0]);
      s.velocity += rng.normal(0.0, gait.noise_std[1]);
      s.current_alpha += rng.normal(0.0, gait.noise_std[2] * current_noise);
      s.current_beta += rng.normal(0.0, gait.noise_std[3] * current_noise);
      trial.limbs[limb].push_back(s);
    }
  }
  return trial;
}

std::filesystem::path generate_corpus(const CorpusSpec& spec, const GaitParams& base,
                                      const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir.string() + ": " + ec.message());

  constexpr std::array<DamageCondition, 5> kConditions = {
      DamageCondition::None, DamageCondition::LF, DamageCondition::RF,
      DamageCondition::LB, DamageCondition::RB};

  std::vector<ManifestEntry> manifest;
  manifest.reserve(spec.total());
  std::size_t global_index = 0;
  for (std::size_t ci = 0; ci < kConditions.size(); ++ci) {
    const DamageCondition condition = kConditions[ci];
    for (std::size_t k = 0; k < spec.counts[ci]; ++k, ++global_index) {
      const std::uint64_t trial_seed =
          base.seed ^ static_cast<std::uint64_t>(global_index);
      Rng jitter(trial_seed ^ kJitterSalt);

      GaitParams params = base;
      params.seed = trial_seed;
      params.forward_speed = base.forward_speed * jitter.uniform(0.85, 1.15);
      params.duration = base.duration * kDurationFactor[ci] * jitter.uniform(0.9, 1.1);
      // A few shorter runs, as happens when procedures are still settling.
      params.distance_m = global_index % 5 == 0 ? 1.0 : 2.0;

      std::string id = condition_slug(condition);
      id += '_';
      const std::string num = std::to_string(k);
      id.append(3 - std::min<std::size_t>(3, num.size()), '0');
      id += num;

      DamageModel damage;
      damage.condition = condition;
      const Trial trial = simulate_trial(params, damage, id);

      const std::string file_name = id + ".csv";
      write_trial_log(trial, out_dir / file_name);

      ManifestEntry entry;
      entry.path = file_name;
      entry.condition = condition;
      entry.trial_id = id;
      entry.distance_m = params.distance_m;
      manifest.push_back(std::move(entry));
    }
  }

  const std::filesystem::path manifest_path = out_dir / "manifest.csv";
  write_manifest(manifest, manifest_path);
  return manifest_path;
}

}  // namespace limbguard
