#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "limbguard/anomaly.hpp"
#include "limbguard/autoencoder.hpp"
#include "limbguard/gaitsim.hpp"
#include "limbguard/telemetry.hpp"

namespace limbguard {

// Everything the subcommands share. Defaults follow the training and
// detection conventions of the library modules.
struct PipelineOptions {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  int filter_window = kDefaultFilterWindow;
  double filter_vmin = kDefaultFilterVmin;
  std::vector<double> x_candidates = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  double decision_level = kDefaultDecisionLevel;
  int threads = 0;  // 0 = one worker per core
};

// Thread budget: `requested` wins unless 0; the LIMBGUARD_THREADS variable
// (when set and > 0) caps the result.
int thread_budget(int requested);

// Motion-filtered trials partitioned for the pipeline. Intact trials split
// 60:20:20 under the seed; damaged trials never enter train — per condition
// they are shuffled deterministically and alternated between val and test.
struct DataSplit {
  std::vector<Trial> train;  // intact only
  std::vector<Trial> val;
  std::vector<Trial> test;
  std::size_t dropped = 0;  // trials empty after motion filtering
};

DataSplit load_and_split(const PipelineOptions& opt);

// All limb-L rows of the given trials stacked into one matrix. Throws
// NoSamplesForLimb when nothing survives.
Matrix stack_features(const std::vector<Trial>& trials, int limb_id);

// Artifact locations inside the output directory.
std::filesystem::path model_path(const std::filesystem::path& dir, int limb_id);
std::filesystem::path threshold_path(const std::filesystem::path& dir, int limb_id);
std::filesystem::path history_path(const std::filesystem::path& dir, int limb_id);

// Loads the four models (and, when with_thresholds, their sidecars) from
// `dir`. A missing file throws MissingModel for that limb.
std::array<std::optional<LimbDetector>, 4> load_detector_bank(
    const std::filesystem::path& dir, bool with_thresholds);

// Trains the four per-limb autoencoders on the intact training pool
// (validation losses come from the intact validation trials), then writes
// limb<L>.ae.txt and history_limb<L>.csv (`epoch,train_loss,val_loss`).
std::array<TrainHistory, 4> run_train(const PipelineOptions& opt);

// Scores the multiplier candidates per limb — threshold basis from the
// training pool, recall/specificity from the validation pools — then writes
// limb<L>.th.txt sidecars and calibration.csv
// (`limb,x,threshold,recall,specificity,score,selected`).
std::array<MultiplierSearch, 4> run_calibrate(const PipelineOptions& opt);

struct DetectResult {
  std::string trial_id;
  FaultReport report;
  bool empty_after_filter = false;  // nothing to score; predicted stays None
};

// Localizes faults on every manifest trial. Results are ordered as in the
// manifest regardless of scoring parallelism.
std::vector<DetectResult> run_detect(const PipelineOptions& opt);

// One line per trial: `trial_id,predicted,frac0,frac1,frac2,frac3`.
std::string format_detect_line(const DetectResult& r);

struct EvaluateSummary {
  std::array<DetectionRates, 4> rates{};  // per limb model, on test samples
  // confusion[true][predicted], conditions ordered None, LF, RF, LB, RB.
  std::array<std::array<std::size_t, 5>, 5> confusion{};
};

// Test-pool evaluation: per-limb reconstruction CSVs (recon_limb<L>.csv),
// loss histograms (hist_limb<L>.csv with a `threshold,<v>` footer),
// confusion.csv over conditions, and rates.csv with per-model
// specificity/recall.
EvaluateSummary run_evaluate(const PipelineOptions& opt);

}  // namespace limbguard
