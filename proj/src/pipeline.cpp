#include "limbguard/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>

#include "limbguard/errors.hpp"
#include "limbguard/numio.hpp"
#include "limbguard/preprocess.hpp"
#include "limbguard/rng.hpp"

namespace limbguard {

namespace {

constexpr std::uint64_t kDamagedShuffleSalt = 0x517cc1b727220a95ULL;
constexpr std::array<double, 3> kSplitRatios = {0.6, 0.2, 0.2};
constexpr int kHistBins = 40;
constexpr std::array<const char*, 4> kFeatureNames = {"position", "velocity",
                                                      "current_alpha", "current_beta"};

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoFailure("short write to " + path.string());
}

// Runs fn(0..n-1) across at most `budget` threads; the first exception wins
// and is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, int budget, Fn&& fn) {
  const int workers = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(std::max(budget, 1)), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Limb rows of every selected trial, stacked in pool order.
Matrix stack_selected(const std::vector<const Trial*>& pool, int limb_id) {
  std::size_t rows = 0;
  for (const Trial* t : pool) rows += t->limbs[limb_id].size();
  if (rows == 0) throw NoSamplesForLimb(limb_id);
  Matrix m(rows, kFeatureCount);
  std::size_t r = 0;
  for (const Trial* t : pool) {
    for (const LimbSample& s : t->limbs[limb_id]) {
      double* row = m.row(r++);
      row[0] = s.position;
      row[1] = s.velocity;
      row[2] = s.current_alpha;
      row[3] = s.current_beta;
    }
  }
  return m;
}

std::vector<const Trial*> select(const std::vector<Trial>& pool,
                                 DamageCondition condition) {
  std::vector<const Trial*> out;
  for (const Trial& t : pool) {
    if (t.condition == condition) out.push_back(&t);
  }
  return out;
}

std::vector<double> losses_of(const AutoencoderModel& model, const Matrix& raw) {
  FeatureMatrix fm;
  fm.limb_id = model.limb_id;
  fm.values = raw;
  return score_samples(model, fm);
}

// With all-ReLU layers and zero initial biases, some Glorot draws start with
// an entire layer inactive for every training row.  The loss gradient is then
// identically zero and no optimizer step will ever move a parameter.
bool frozen_at_init(const AutoencoderModel& model, const Matrix& train_rows) {
  const Gradients g = gradients(model, train_rows);
  for (const Matrix& w : g.weights) {
    for (double v : w.data) {
      if (v != 0.0) return false;
    }
  }
  for (const auto& b : g.biases) {
    for (double v : b) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

// Candidate init seeds are spaced by a large odd constant so limb bases
// (opt.seed + limb) never collide with another limb's sequence.
constexpr std::uint64_t kStartSeedStride = 0x9e3779b97f4a7c15ULL;
// Starts tried per limb; the search widens to the second wave only when the
// first wave yields nothing usable.
constexpr int kFirstWaveStarts = 8;
constexpr int kMaxStarts = 16;
// A start whose final validation loss clears this bar reconstructs scaled
// features to within a few percent RMS — good enough to stop searching.
constexpr double kGoodStartValLoss = 5e-3;
// A run that has not cut its first-epoch validation loss to a fifth by the
// last epoch is stalled in a shallow basin; more starts beat more patience.
constexpr double kStalledValRatio = 0.2;
// Detection quality of a start, scored on validation trials exactly the way
// calibration scores thresholds.  A usable start separates damaged from
// intact samples almost perfectly; much below this bar the network also
// reconstructs off-nominal gait well, which blunts every threshold.
constexpr double kSelectionScoreBar = 0.97;
// Fraction of samples flagged in trials whose damage is at a DIFFERENT limb.
// When this saturates, per-limb flag fractions all pin at 1 and localization
// cannot single out the damaged limb, so the search keeps going.
constexpr double kCrossTalkCeiling = 0.98;

// Validation pools a candidate start is scored against.  The rows are
// unscaled; each candidate model carries the shared scaler and applies it
// when scoring, exactly as calibration will.
struct StartPools {
  const Matrix& scaled_train;
  const Matrix& scaled_val;
  const Matrix& raw_train;
  const Matrix& raw_val;               // intact validation samples, unscaled
  Matrix raw_own_damage;               // validation samples damaged at this limb
  std::vector<Matrix> raw_other_damage;  // one matrix per other damaged class
  std::vector<double> x_candidates;
};

struct ScoredStart {
  AutoencoderModel model;
  TrainHistory history;
  double final_val = 0.0;
  double score = 0.0;       // calibration score at the selected multiplier
  double cross_talk = 0.0;  // mean flagged fraction on other-limb damage
  int start = 0;
  bool stalled = true;
  bool separating = false;
};

double flagged_fraction(const std::vector<double>& losses, double threshold) {
  if (losses.empty()) return 0.0;
  std::size_t flagged = 0;
  for (double l : losses) flagged += l > threshold ? 1 : 0;
  return static_cast<double>(flagged) / static_cast<double>(losses.size());
}

// Deep-and-narrow ReLU autoencoders are sensitive to the initial draw: besides
// the fully frozen case, many draws stall in shallow basins, and — less
// obviously — some of the deepest basins reconstruct any input well, damaged
// gait included, which makes them poor anomaly detectors.  Final validation
// loss alone cannot tell the last two apart, so when damaged validation
// trials exist each converged start is scored the way calibration will score
// it, and the search prefers separating starts with the least cross-talk.
// Everything here reads only training and validation data; test trials are
// never touched.
std::pair<AutoencoderModel, TrainHistory> train_selected_start(
    const TrainConfig& base_config, std::uint64_t seed_base, int limb_id,
    const ScalerParams& scaler, const StartPools& pools) {
  const bool score_separation =
      pools.raw_own_damage.rows > 0 && !pools.x_candidates.empty();

  // Selection order: separating starts by least cross-talk, then score, then
  // scan order.  Without damaged validation data all converged starts count
  // as separating and rank by final validation loss alone.
  auto better_separating = [&](const ScoredStart& a, const ScoredStart& b) {
    if (!score_separation) return a.final_val < b.final_val;
    if (a.cross_talk != b.cross_talk) return a.cross_talk < b.cross_talk;
    if (a.score != b.score) return a.score > b.score;
    return a.start < b.start;
  };
  auto better_converged = [](const ScoredStart& a, const ScoredStart& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.final_val != b.final_val) return a.final_val < b.final_val;
    return a.start < b.start;
  };

  std::optional<ScoredStart> pick_separating;  // converged and separating
  std::optional<ScoredStart> pick_converged;   // converged only
  std::optional<ScoredStart> pick_any;         // anything that trained
  std::optional<DivergedLoss> diverged;

  for (int start = 0; start < kMaxStarts; ++start) {
    if (start >= kFirstWaveStarts && pick_separating) break;

    TrainConfig config = base_config;
    config.seed = seed_base + static_cast<std::uint64_t>(start) * kStartSeedStride;
    if (frozen_at_init(init_network(NetworkSpec{}, config.seed),
                       pools.scaled_train)) {
      continue;
    }

    ScoredStart cand;
    cand.start = start;
    try {
      auto [model, history] =
          train(NetworkSpec{}, config, pools.scaled_train, pools.scaled_val);
      cand.model = std::move(model);
      cand.history = std::move(history);
    } catch (const DivergedLoss& e) {
      if (!diverged) diverged = e;
      continue;
    }
    cand.final_val = cand.history.val_loss.back();
    cand.stalled =
        cand.final_val > kStalledValRatio * cand.history.val_loss.front();
    cand.model.limb_id = limb_id;
    cand.model.scaler = scaler;

    if (!cand.stalled) {
      if (score_separation) {
        const std::vector<double> train_losses =
            losses_of(cand.model, pools.raw_train);
        const MultiplierSearch search = select_multiplier(
            train_losses, losses_of(cand.model, pools.raw_val),
            losses_of(cand.model, pools.raw_own_damage), pools.x_candidates);
        for (const CandidateScore& c : search.candidates) {
          if (c.x == search.selected) cand.score = c.score;
        }
        cand.separating = cand.score >= kSelectionScoreBar;
        if (cand.separating) {
          const ThresholdParams t =
              calibrate_threshold(train_losses, search.selected);
          double sum = 0.0;
          int classes = 0;
          for (const Matrix& other : pools.raw_other_damage) {
            sum += flagged_fraction(losses_of(cand.model, other), t.threshold);
            ++classes;
          }
          cand.cross_talk = classes > 0 ? sum / classes : 0.0;
        }
      } else {
        cand.separating = true;  // ranked by validation loss instead
      }
    }

    if (!pick_any || cand.final_val < pick_any->final_val) pick_any = cand;
    if (!cand.stalled &&
        (!pick_converged || better_converged(cand, *pick_converged))) {
      pick_converged = cand;
    }
    if (cand.separating) {
      const bool good_enough = score_separation
                                   ? cand.cross_talk <= kCrossTalkCeiling
                                   : cand.final_val <= kGoodStartValLoss;
      if (!pick_separating || better_separating(cand, *pick_separating)) {
        pick_separating = std::move(cand);
      }
      if (good_enough) break;
    }
  }

  if (pick_separating) {
    return {std::move(pick_separating->model), std::move(pick_separating->history)};
  }
  if (pick_converged) {
    return {std::move(pick_converged->model), std::move(pick_converged->history)};
  }
  if (pick_any) {
    return {std::move(pick_any->model), std::move(pick_any->history)};
  }
  if (diverged) throw *diverged;
  // Every draw was frozen (vanishingly unlikely): train the base seed anyway
  // so the caller still gets a model and an honest (flat) history.
  TrainConfig config = base_config;
  config.seed = seed_base;
  return train(NetworkSpec{}, config, pools.scaled_train, pools.scaled_val);
}

std::size_t condition_index(DamageCondition c) {
  return static_cast<std::size_t>(c);
}

}  // namespace

int thread_budget(int requested) {
  int n = requested > 0 ? requested
                        : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("LIMBGUARD_THREADS")) {
    const auto cap = numio::parse_int(env);
    if (cap && *cap > 0 && *cap < n) n = static_cast<int>(*cap);
  }
  return n;
}

DataSplit load_and_split(const PipelineOptions& opt) {
  const std::vector<ManifestEntry> entries = read_manifest(opt.manifest);
  const std::filesystem::path base = opt.manifest.parent_path();

  std::vector<std::optional<Trial>> loaded(entries.size());
  parallel_for(entries.size(), thread_budget(opt.threads), [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    Trial trial = parse_trial_log_file(base / e.path, e.condition, e.trial_id);
    trial.distance_m = e.distance_m;
    trial = filter_motion(trial, opt.filter_window, opt.filter_vmin);
    if (trial.sample_count() > 0) loaded[i] = std::move(trial);
  });

  std::vector<Trial> intact;
  std::vector<Trial> damaged;
  DataSplit split;
  for (auto& slot : loaded) {
    if (!slot) {
      ++split.dropped;
      continue;
    }
    (slot->condition == DamageCondition::None ? intact : damaged)
        .push_back(std::move(*slot));
  }

  const SplitIndices idx = split_indices(intact.size(), kSplitRatios, opt.seed);
  for (std::size_t i : idx.train) split.train.push_back(std::move(intact[i]));
  for (std::size_t i : idx.val) split.val.push_back(std::move(intact[i]));
  for (std::size_t i : idx.test) split.test.push_back(std::move(intact[i]));

  // Damaged trials alternate val/test within each condition so every
  // condition reaches both pools whenever it has at least two trials.
  Rng rng(opt.seed ^ kDamagedShuffleSalt);
  for (const DamageCondition c : {DamageCondition::LF, DamageCondition::RF,
                                  DamageCondition::LB, DamageCondition::RB}) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < damaged.size(); ++i) {
      if (damaged[i].condition == c) order.push_back(i);
    }
    rng.shuffle(order);
    for (std::size_t k = 0; k < order.size(); ++k) {
      (k % 2 == 0 ? split.val : split.test).push_back(std::move(damaged[order[k]]));
    }
  }
  return split;
}

Matrix stack_features(const std::vector<Trial>& trials, int limb_id) {
  std::vector<const Trial*> pool;
  pool.reserve(trials.size());
  for (const Trial& t : trials) pool.push_back(&t);
  return stack_selected(pool, limb_id);
}

std::filesystem::path model_path(const std::filesystem::path& dir, int limb_id) {
  return dir / ("limb" + std::to_string(limb_id) + ".ae.txt");
}

std::filesystem::path threshold_path(const std::filesystem::path& dir, int limb_id) {
  return dir / ("limb" + std::to_string(limb_id) + ".th.txt");
}

std::filesystem::path history_path(const std::filesystem::path& dir, int limb_id) {
  return dir / ("history_limb" + std::to_string(limb_id) + ".csv");
}

std::array<std::optional<LimbDetector>, 4> load_detector_bank(
    const std::filesystem::path& dir, bool with_thresholds) {
  std::array<std::optional<LimbDetector>, 4> bank;
  for (int limb = 0; limb < 4; ++limb) {
    const std::filesystem::path mp = model_path(dir, limb);
    const std::filesystem::path tp = threshold_path(dir, limb);
    if (!std::filesystem::exists(mp)) throw MissingModel(limb);
    if (with_thresholds && !std::filesystem::exists(tp)) throw MissingModel(limb);
    LimbDetector d;
    d.model = load_model(mp);
    if (d.model.limb_id != limb) {
      throw ShapeMismatch(mp.string() + " holds limb " +
                          std::to_string(d.model.limb_id) + ", expected " +
                          std::to_string(limb));
    }
    if (with_thresholds) d.threshold = load_threshold(tp);
    bank[limb] = std::move(d);
  }
  return bank;
}

std::array<TrainHistory, 4> run_train(const PipelineOptions& opt) {
  const DataSplit split = load_and_split(opt);
  verify_training_pool(split.train);

  const std::vector<const Trial*> val_intact = select(split.val, DamageCondition::None);

  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) throw IoFailure("cannot create " + opt.out_dir.string() + ": " + ec.message());

  std::array<TrainHistory, 4> histories;
  parallel_for(4, thread_budget(opt.threads), [&](std::size_t limb) {
    const Matrix raw_train = stack_features(split.train, static_cast<int>(limb));
    const Matrix raw_val = stack_selected(val_intact, static_cast<int>(limb));

    FeatureMatrix fm;
    fm.limb_id = static_cast<int>(limb);
    fm.values = raw_train;
    const ScalerParams scaler = fit_scaler(fm);
    const FeatureMatrix scaled_train = transform(scaler, fm);
    fm.values = raw_val;
    const FeatureMatrix scaled_val = transform(scaler, fm);

    TrainConfig config;
    config.epochs = opt.epochs;
    config.batch_size = opt.batch_size;
    config.learning_rate = opt.learning_rate;

    const int limb_id = static_cast<int>(limb);
    // Damaged validation pools sharpen start selection but are optional: a
    // corpus without a damage class still trains, it just ranks starts by
    // validation loss alone.
    const auto damage_rows = [&](DamageCondition c) -> Matrix {
      const std::vector<const Trial*> pool = select(split.val, c);
      if (pool.empty()) return Matrix(0, kFeatureCount);
      return stack_selected(pool, limb_id);
    };
    StartPools pools{scaled_train.values, scaled_val.values, raw_train, raw_val,
                     damage_rows(condition_for_limb(limb_id)),
                     {},
                     opt.x_candidates};
    for (int other = 0; other < 4; ++other) {
      if (other == limb_id) continue;
      Matrix rows = damage_rows(condition_for_limb(other));
      if (rows.rows > 0) pools.raw_other_damage.push_back(std::move(rows));
    }

    auto [model, history] = train_selected_start(config, opt.seed + limb,
                                                 limb_id, scaler, pools);
    model.limb_id = limb_id;
    model.scaler = scaler;
    save_model(model, model_path(opt.out_dir, static_cast<int>(limb)));

    std::string csv = "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
      csv += std::to_string(e + 1);
      csv += ',';
      numio::append(csv, history.train_loss[e]);
      csv += ',';
      numio::append(csv, history.val_loss[e]);
      csv += '\n';
    }
    write_text_file(history_path(opt.out_dir, static_cast<int>(limb)), csv);
    histories[limb] = std::move(history);
  });
  return histories;
}

std::array<MultiplierSearch, 4> run_calibrate(const PipelineOptions& opt) {
  const DataSplit split = load_and_split(opt);
  const std::vector<const Trial*> val_intact = select(split.val, DamageCondition::None);

  std::array<MultiplierSearch, 4> searches;
  parallel_for(4, thread_budget(opt.threads), [&](std::size_t limb) {
    const int limb_id = static_cast<int>(limb);
    const std::filesystem::path mp = model_path(opt.out_dir, limb_id);
    if (!std::filesystem::exists(mp)) throw MissingModel(limb_id);
    const AutoencoderModel model = load_model(mp);

    const std::vector<double> train_losses =
        losses_of(model, stack_features(split.train, limb_id));
    const std::vector<double> normal_losses =
        losses_of(model, stack_selected(val_intact, limb_id));
    const std::vector<const Trial*> own_damage =
        select(split.val, condition_for_limb(limb_id));
    if (own_damage.empty()) {
      throw EmptyInput("validation trials damaged at limb " + std::to_string(limb_id));
    }
    const std::vector<double> anomalous_losses =
        losses_of(model, stack_selected(own_damage, limb_id));

    searches[limb] = select_multiplier(train_losses, normal_losses,
                                       anomalous_losses, opt.x_candidates);
    const ThresholdParams t =
        calibrate_threshold(train_losses, searches[limb].selected);
    save_threshold(t, threshold_path(opt.out_dir, limb_id));
  });

  std::string csv = "limb,x,threshold,recall,specificity,score,selected\n";
  for (int limb = 0; limb < 4; ++limb) {
    for (const CandidateScore& c : searches[limb].candidates) {
      csv += std::to_string(limb);
      csv += ',';
      numio::append(csv, c.x);
      csv += ',';
      numio::append(csv, c.threshold);
      csv += ',';
      numio::append(csv, c.recall);
      csv += ',';
      numio::append(csv, c.specificity);
      csv += ',';
      numio::append(csv, c.score);
      csv += ',';
      csv += c.x == searches[limb].selected ? '1' : '0';
      csv += '\n';
    }
  }
  write_text_file(opt.out_dir / "calibration.csv", csv);
  return searches;
}

std::vector<DetectResult> run_detect(const PipelineOptions& opt) {
  const std::vector<ManifestEntry> entries = read_manifest(opt.manifest);
  const std::filesystem::path base = opt.manifest.parent_path();
  const auto bank = load_detector_bank(opt.out_dir, true);

  std::vector<DetectResult> results(entries.size());
  parallel_for(entries.size(), thread_budget(opt.threads), [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    Trial trial = parse_trial_log_file(base / e.path, e.condition, e.trial_id);
    trial = filter_motion(trial, opt.filter_window, opt.filter_vmin);
    DetectResult r;
    r.trial_id = e.trial_id;
    if (trial.sample_count() == 0) {
      r.empty_after_filter = true;  // nothing moved; report all-quiet
    } else {
      r.report = localize_fault(bank, trial, opt.decision_level);
    }
    results[i] = std::move(r);
  });
  return results;
}

std::string format_detect_line(const DetectResult& r) {
  std::string line = r.trial_id;
  line += ',';
  line += to_string(r.report.predicted);
  for (double f : r.report.per_limb_fraction) {
    line += ',';
    numio::append(line, f);
  }
  return line;
}

namespace {

void write_reconstruction_csv(const AutoencoderModel& model, const Trial& trial,
                              const std::filesystem::path& path) {
  const FeatureMatrix raw = feature_matrix(trial, model.limb_id);
  const FeatureMatrix scaled = transform(model.scaler, raw);
  const ForwardTrace trace = forward(model, scaled.values);
  FeatureMatrix recon_scaled;
  recon_scaled.limb_id = model.limb_id;
  recon_scaled.values = trace.reconstruction();
  const FeatureMatrix recon = inverse_transform(model.scaler, recon_scaled);

  std::string csv = "row,feature,actual,reconstructed\n";
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      csv += std::to_string(r);
      csv += ',';
      csv += kFeatureNames[j];
      csv += ',';
      numio::append(csv, raw.values.at(r, j));
      csv += ',';
      numio::append(csv, recon.values.at(r, j));
      csv += '\n';
    }
  }
  write_text_file(path, csv);
}

void write_histogram_csv(const std::vector<double>& normal,
                         const std::vector<double>& anomalous, double threshold,
                         const std::filesystem::path& path) {
  double hi = threshold;
  for (double v : normal) hi = std::max(hi, v);
  for (double v : anomalous) hi = std::max(hi, v);
  if (!(hi > 0.0)) hi = 1e-12;
  const double width = hi / kHistBins;

  std::array<std::size_t, kHistBins> count_normal{};
  std::array<std::size_t, kHistBins> count_anomalous{};
  auto bin_of = [&](double v) {
    const auto b = static_cast<long long>(v / width);
    return static_cast<std::size_t>(std::clamp<long long>(b, 0, kHistBins - 1));
  };
  for (double v : normal) ++count_normal[bin_of(v)];
  for (double v : anomalous) ++count_anomalous[bin_of(v)];

  std::string csv = "bin_left,bin_right,count_normal,count_anomalous\n";
  for (int b = 0; b < kHistBins; ++b) {
    numio::append(csv, b * width);
    csv += ',';
    numio::append(csv, (b + 1) * width);
    csv += ',';
    csv += std::to_string(count_normal[static_cast<std::size_t>(b)]);
    csv += ',';
    csv += std::to_string(count_anomalous[static_cast<std::size_t>(b)]);
    csv += '\n';
  }
  csv += "threshold,";
  numio::append(csv, threshold);
  csv += '\n';
  write_text_file(path, csv);
}

}  // namespace

EvaluateSummary run_evaluate(const PipelineOptions& opt) {
  const DataSplit split = load_and_split(opt);
  const auto bank = load_detector_bank(opt.out_dir, true);
  const std::vector<const Trial*> test_intact =
      select(split.test, DamageCondition::None);

  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) throw IoFailure("cannot create " + opt.out_dir.string() + ": " + ec.message());

  EvaluateSummary summary;
  parallel_for(4, thread_budget(opt.threads), [&](std::size_t limb) {
    const int limb_id = static_cast<int>(limb);
    const LimbDetector& d = *bank[limb];

    if (test_intact.empty()) throw EmptyInput("intact test trials");
    const std::vector<double> normal_losses =
        losses_of(d.model, stack_selected(test_intact, limb_id));
    const std::vector<const Trial*> own_damage =
        select(split.test, condition_for_limb(limb_id));
    if (own_damage.empty()) {
      throw EmptyInput("test trials damaged at limb " + std::to_string(limb_id));
    }
    const std::vector<double> anomalous_losses =
        losses_of(d.model, stack_selected(own_damage, limb_id));

    summary.rates[limb] = detection_rates(flag_anomalies(normal_losses, d.threshold),
                                          flag_anomalies(anomalous_losses, d.threshold));

    write_reconstruction_csv(d.model, *test_intact.front(),
                             opt.out_dir / ("recon_limb" + std::to_string(limb_id) + ".csv"));
    write_histogram_csv(normal_losses, anomalous_losses, d.threshold.threshold,
                        opt.out_dir / ("hist_limb" + std::to_string(limb_id) + ".csv"));
  });

  for (const Trial& trial : split.test) {
    const FaultReport report = localize_fault(bank, trial, opt.decision_level);
    ++summary.confusion[condition_index(trial.condition)]
                       [condition_index(report.predicted)];
  }

  constexpr std::array<DamageCondition, 5> kConditions = {
      DamageCondition::None, DamageCondition::LF, DamageCondition::RF,
      DamageCondition::LB, DamageCondition::RB};
  std::string csv = "true,None,LF,RF,LB,RB\n";
  for (DamageCondition truth : kConditions) {
    csv += to_string(truth);
    for (DamageCondition pred : kConditions) {
      csv += ',';
      csv += std::to_string(summary.confusion[condition_index(truth)]
                                             [condition_index(pred)]);
    }
    csv += '\n';
  }
  write_text_file(opt.out_dir / "confusion.csv", csv);

  csv = "limb,specificity,recall\n";
  for (int limb = 0; limb < 4; ++limb) {
    csv += std::to_string(limb);
    csv += ',';
    numio::append(csv, summary.rates[static_cast<std::size_t>(limb)].specificity);
    csv += ',';
    numio::append(csv, summary.rates[static_cast<std::size_t>(limb)].recall);
    csv += '\n';
  }
  write_text_file(opt.out_dir / "rates.csv", csv);
  return summary;
}

}  // namespace limbguard
