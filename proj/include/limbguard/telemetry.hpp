#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "limbguard/matrix.hpp"

namespace limbguard {

// Limb indices map to damage conditions as 0=LF, 1=RF, 2=LB, 3=RB.
enum class DamageCondition { None, LF, RF, LB, RB };

const char* to_string(DamageCondition c);
std::optional<DamageCondition> condition_from_string(std::string_view s);

// -1 for None, otherwise the limb index of the damaged limb.
int damaged_limb(DamageCondition c);
DamageCondition condition_for_limb(int limb_id);

// One 60 Hz reading of one limb. Position/velocity are in body coordinates.
struct LimbSample {
  int limb_id = 0;
  long long time_ms = 0;
  double position = 0.0;       // m
  double velocity = 0.0;       // m/s
  double current_alpha = 0.0;  // A
  double current_beta = 0.0;   // A

  bool operator==(const LimbSample&) const = default;
};

// A labeled recording of one gait run across all four limbs. Per limb, time
// values are strictly increasing.
struct Trial {
  DamageCondition condition = DamageCondition::None;
  std::array<std::vector<LimbSample>, 4> limbs;
  double sample_rate = 60.0;  // Hz, nominal
  double distance_m = 2.0;    // 1 or 2
  std::string trial_id;

  std::size_t sample_count() const;
  bool operator==(const Trial&) const = default;
};

// Rows of [position, velocity, current_alpha, current_beta] for one limb.
struct FeatureMatrix {
  Matrix values;  // rows x 4
  int limb_id = -1;
  std::string source_trial;

  std::size_t rows() const { return values.rows; }
};

inline constexpr std::size_t kFeatureCount = 4;

// Trial log format: one sample per line,
//   limb_id,time_ms,position_m,velocity_mps,current_alpha_A,current_beta_A
// limb_id and time_ms are base-10 integers, the rest decimal floats. Lines
// starting with '#' are comments; LF and CRLF both accepted.
//
// Throws MalformedLine, NonMonotonicTime, EmptyLog.
Trial parse_trial_log(std::string_view text, DamageCondition condition,
                      std::string trial_id);
Trial parse_trial_log_file(const std::filesystem::path& path,
                           DamageCondition condition, std::string trial_id);

// Canonical serialization: samples merged across limbs by (time_ms, limb_id),
// numbers in shortest round-trip form. parse/serialize round-trip is
// byte-stable.
std::string serialize_trial_log(const Trial& trial);
void write_trial_log(const Trial& trial, const std::filesystem::path& path);

// Keeps a sample iff the RMS of velocity over a centered window of `window`
// samples on ANY limb exceeds v_min. Limbs are aligned by sample index; the
// keep-mask is shared across limbs. May return a trial with zero samples.
Trial filter_motion(const Trial& trial, int window, double v_min);

inline constexpr int kDefaultFilterWindow = 30;     // 0.5 s at 60 Hz
inline constexpr double kDefaultFilterVmin = 0.05;  // m/s

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Whole-trial partition: deterministic shuffle under `seed`, sizes are
// floor(ratio * n) with the remainder going to train. Throws BadRatios,
// InsufficientTrials (n < 3).
SplitIndices split_indices(std::size_t n, const std::array<double, 3>& ratios,
                           std::uint64_t seed);

struct SplitResult {
  std::vector<Trial> train, val, test;
};

SplitResult split_dataset(std::vector<Trial> trials,
                          const std::array<double, 3>& ratios, std::uint64_t seed);

// Throws IntactOnlyViolation if the pool is empty or holds a damaged trial.
// Training is restricted to intact gait data; damaged trials belong in the
// validation/test pools.
void verify_training_pool(const std::vector<Trial>& train);

// One row per sample of that limb, in recorded order. Throws NoSamplesForLimb;
// limb_id outside 0..3 is a precondition violation (std::invalid_argument).
FeatureMatrix feature_matrix(const Trial& trial, int limb_id);

// Manifest file: CSV with header `path,condition,trial_id,distance_m`; paths
// are interpreted relative to the manifest's directory.
struct ManifestEntry {
  std::string path;
  DamageCondition condition = DamageCondition::None;
  std::string trial_id;
  double distance_m = 2.0;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& path);

}  // namespace limbguard
