#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "limbguard/autoencoder.hpp"
#include "limbguard/telemetry.hpp"

namespace limbguard {

// threshold = mu + x * sigma over the TRAINING reconstruction losses.
struct ThresholdParams {
  double mu = 0.0;
  double sigma = 0.0;  // population (divide by N)
  double x = 0.0;
  double threshold = 0.0;

  bool operator==(const ThresholdParams&) const = default;
};

// Shared by calibration and sidecar loading so the stored and recomputed
// threshold are the identical double.
double threshold_value(double mu, double sigma, double x);

// mu = mean, sigma = population standard deviation. Throws TooFewLosses
// (< 2 entries); non-finite/negative losses and x < 0 are precondition
// violations (std::invalid_argument). All-equal losses give sigma = 0 and
// threshold = mu exactly.
ThresholdParams calibrate_threshold(const std::vector<double>& training_losses, double x);

struct CandidateScore {
  double x = 0.0;
  double threshold = 0.0;
  double recall = 0.0;       // anomalous losses > threshold
  double specificity = 0.0;  // normal losses <= threshold
  double score = 0.0;        // 0.7 * recall + 0.3 * specificity
};

struct MultiplierSearch {
  double selected = 0.0;
  std::vector<CandidateScore> candidates;  // ascending in x
};

// Scores every candidate multiplier against held-out validation losses, with
// the Eq. 1 threshold basis taken from the training losses. The weighting
// favors recall; ties go to the larger recall, then the smaller x. Throws
// EmptyInput if any loss set or the candidate list is empty.
MultiplierSearch select_multiplier(const std::vector<double>& train_losses,
                                   const std::vector<double>& normal_val_losses,
                                   const std::vector<double>& anomalous_val_losses,
                                   const std::vector<double>& candidates);

// Per-row reconstruction loss of RAW (unscaled) rows: scale with the model's
// stored scaler, forward, MSE against the scaled input.
std::vector<double> score_samples(const AutoencoderModel& model, const FeatureMatrix& raw);

// out[i] = losses[i] > t.threshold — strictly greater, so a loss exactly at
// the threshold is not flagged.
std::vector<char> flag_anomalies(const std::vector<double>& losses,
                                 const ThresholdParams& t);

struct LimbDetector {
  AutoencoderModel model;
  ThresholdParams threshold;
};

struct FaultReport {
  std::array<double, 4> per_limb_fraction{};
  // (anomalous, total) per limb; fraction = anomalous/total (0 when total 0).
  std::array<std::pair<std::size_t, std::size_t>, 4> flagged_counts{};
  DamageCondition predicted = DamageCondition::None;
  bool tie_break = false;  // max fraction shared by several limbs; lowest id won
};

inline constexpr double kDefaultDecisionLevel = 0.5;

// Scores each limb's samples with that limb's detector. Predicted is the
// condition of the argmax-fraction limb when that fraction reaches
// decision_level, otherwise None. The trial should already be
// motion-filtered. Throws MissingModel (limb with samples but no detector),
// NoSamples (nothing on any limb).
FaultReport localize_fault(const std::array<std::optional<LimbDetector>, 4>& bank,
                           const Trial& trial,
                           double decision_level = kDefaultDecisionLevel);

struct DetectionRates {
  double specificity = 0.0;  // not-flagged / total on normal
  double recall = 0.0;       // flagged / total on anomalous
};

// Throws EmptyInput if either flag set is empty.
DetectionRates detection_rates(const std::vector<char>& normal_flags,
                               const std::vector<char>& anomalous_flags);

// Sidecar format, one value per line:
//   LIMBGUARD-TH v1
//   mu <float>
//   sigma <float>
//   x <float>
// The threshold is recomputed on load and the invariants re-verified.
// Throws BadMagic, VersionMismatch, ShapeMismatch, IoFailure.
void save_threshold(const ThresholdParams& t, const std::filesystem::path& path);
ThresholdParams load_threshold(const std::filesystem::path& path);

}  // namespace limbguard
