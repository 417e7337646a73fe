#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "limbguard/telemetry.hpp"

namespace limbguard {

// Synthetic pronking-gait generator. The signal model is deliberately simple:
// fore-aft limb oscillation with rectified-sinusoid motor currents, plus
// Gaussian sensor noise, book-ended by standing rest. All magnitudes are free
// parameters of this harness, not measurements of any robot.
struct GaitParams {
  double hop_frequency = 2.0;      // Hz
  double stride_amplitude = 0.08;  // m at nominal speed
  double forward_speed = 0.3;      // m/s; scales stride vigor linearly
  double duration = 80.0;          // s of pronking
  double sample_rate = 60.0;       // Hz
  // Per-channel noise std: position, velocity, current_alpha, current_beta.
  std::array<double, 4> noise_std = {0.002, 0.01, 0.05, 0.05};
  double rest_head = 5.0;  // s of standing before the gait
  double rest_tail = 5.0;  // s of standing after it
  double current_amplitude = 3.0;  // A at nominal load
  double distance_m = 2.0;         // recorded in the trial metadata
  std::uint64_t seed = 0;
};

// How a lost limb shows up in the telemetry: the damaged limb barely swings
// and draws almost no current (with noisier readings), while the remaining
// limbs take extra load and the whole gait slows down.
struct DamageModel {
  DamageCondition condition = DamageCondition::None;
  double limp_scale = 0.15;      // damaged limb position/velocity amplitude
  double dead_current = 0.05;    // damaged limb current amplitude
  double noise_boost = 2.0;      // damaged limb current noise multiplier
  double load_shift = 1.3;       // intact limb current amplitude under damage
  double frequency_drag = 0.85;  // hop frequency multiplier under damage
};

// One trial at 1/sample_rate ticks: rest, pronking, rest. Velocity is the
// exact analytic derivative of the nominal position signal, so the two
// channels agree to machine precision at noise_std = 0. Identical params
// give identical trials.
Trial simulate_trial(const GaitParams& gait, const DamageModel& damage,
                     std::string trial_id);

// Per-condition trial counts, ordered None, LF, RF, LB, RB.
struct CorpusSpec {
  std::array<std::size_t, 5> counts = {70, 30, 15, 24, 31};

  std::size_t total() const {
    std::size_t n = 0;
    for (std::size_t c : counts) n += c;
    return n;
  }
};

// Writes one log file per trial plus manifest.csv into out_dir (created if
// needed) and returns the manifest path. Per-trial seeds derive from
// base.seed XOR the global trial index, so regeneration is byte-identical
// and trials are independent. Speeds and pronking durations are jittered
// deterministically per trial; each condition's duration scales from
// base.duration so that the defaults average 90/60/120/90/90 s per
// condition including rest. Throws IoFailure.
std::filesystem::path generate_corpus(const CorpusSpec& spec, const GaitParams& base,
                                      const std::filesystem::path& out_dir);

}  // namespace limbguard
