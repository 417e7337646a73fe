#include "limbguard/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "limbguard/errors.hpp"
#include "limbguard/numio.hpp"
#include "limbguard/preprocess.hpp"

namespace limbguard {

double threshold_value(double mu, double sigma, double x) {
  return mu + x * sigma;
}

ThresholdParams calibrate_threshold(const std::vector<double>& training_losses,
                                    double x) {
  if (training_losses.size() < 2) throw TooFewLosses(training_losses.size());
  if (!(x >= 0.0)) throw std::invalid_argument("multiplier x must be >= 0");
  double lo = training_losses[0];
  double hi = training_losses[0];
  for (double l : training_losses) {
    if (!std::isfinite(l) || l < 0.0) {
      throw std::invalid_argument("losses must be finite and >= 0");
    }
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }

  ThresholdParams t;
  t.x = x;
  if (lo == hi) {
    // All equal: summation rounding must not leak into sigma, the threshold
    // is the common value exactly.
    t.mu = lo;
    t.sigma = 0.0;
    t.threshold = lo;
    return t;
  }
  const double n = static_cast<double>(training_losses.size());
  double sum = 0.0;
  for (double l : training_losses) sum += l;
  t.mu = sum / n;
  double sq = 0.0;
  for (double l : training_losses) {
    const double d = l - t.mu;
    sq += d * d;
  }
  t.sigma = std::sqrt(sq / n);
  t.threshold = threshold_value(t.mu, t.sigma, t.x);
  return t;
}

MultiplierSearch select_multiplier(const std::vector<double>& train_losses,
                                   const std::vector<double>& normal_val_losses,
                                   const std::vector<double>& anomalous_val_losses,
                                   const std::vector<double>& candidates) {
  if (normal_val_losses.empty()) throw EmptyInput("normal validation losses");
  if (anomalous_val_losses.empty()) throw EmptyInput("anomalous validation losses");
  if (candidates.empty()) throw EmptyInput("multiplier candidates");

  std::vector<double> xs = candidates;
  std::sort(xs.begin(), xs.end());

  MultiplierSearch out;
  out.candidates.reserve(xs.size());
  std::size_t best = 0;
  for (double x : xs) {
    const ThresholdParams t = calibrate_threshold(train_losses, x);
    CandidateScore c;
    c.x = x;
    c.threshold = t.threshold;
    std::size_t flagged = 0;
    for (double l : anomalous_val_losses) flagged += l > t.threshold ? 1 : 0;
    c.recall = static_cast<double>(flagged) /
               static_cast<double>(anomalous_val_losses.size());
    std::size_t quiet = 0;
    for (double l : normal_val_losses) quiet += l <= t.threshold ? 1 : 0;
    c.specificity = static_cast<double>(quiet) /
                    static_cast<double>(normal_val_losses.size());
    c.score = 0.7 * c.recall + 0.3 * c.specificity;
    out.candidates.push_back(c);

    const CandidateScore& b = out.candidates[best];
    const bool wins = c.score > b.score ||
                      (c.score == b.score && c.recall > b.recall);
    if (wins) best = out.candidates.size() - 1;  // equal keeps the smaller x
  }
  out.selected = out.candidates[best].x;
  return out;
}

std::vector<double> score_samples(const AutoencoderModel& model,
                                  const FeatureMatrix& raw) {
  const FeatureMatrix scaled = transform(model.scaler, raw);
  return batch_losses(model, scaled.values);
}

std::vector<char> flag_anomalies(const std::vector<double>& losses,
                                 const ThresholdParams& t) {
  std::vector<char> flags(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    flags[i] = losses[i] > t.threshold ? 1 : 0;
  }
  return flags;
}

FaultReport localize_fault(const std::array<std::optional<LimbDetector>, 4>& bank,
                           const Trial& trial, double decision_level) {
  if (trial.sample_count() == 0) throw NoSamples();

  FaultReport report;
  for (int limb = 0; limb < 4; ++limb) {
    const std::size_t total = trial.limbs[limb].size();
    report.flagged_counts[limb] = {0, total};
    if (total == 0) continue;
    if (!bank[limb]) throw MissingModel(limb);
    const std::vector<double> losses =
        score_samples(bank[limb]->model, feature_matrix(trial, limb));
    const std::vector<char> flags = flag_anomalies(losses, bank[limb]->threshold);
    std::size_t anomalous = 0;
    for (char f : flags) anomalous += f;
    report.flagged_counts[limb] = {anomalous, total};
    report.per_limb_fraction[limb] =
        static_cast<double>(anomalous) / static_cast<double>(total);
  }

  int arg = 0;
  for (int limb = 1; limb < 4; ++limb) {
    if (report.per_limb_fraction[limb] > report.per_limb_fraction[arg]) arg = limb;
  }
  for (int limb = 0; limb < 4; ++limb) {
    if (limb != arg && report.per_limb_fraction[limb] == report.per_limb_fraction[arg]) {
      report.tie_break = true;
    }
  }
  if (report.per_limb_fraction[arg] >= decision_level) {
    report.predicted = condition_for_limb(arg);
  }
  return report;
}

DetectionRates detection_rates(const std::vector<char>& normal_flags,
                               const std::vector<char>& anomalous_flags) {
  if (normal_flags.empty()) throw EmptyInput("normal flags");
  if (anomalous_flags.empty()) throw EmptyInput("anomalous flags");
  std::size_t quiet = 0;
  for (char f : normal_flags) quiet += f ? 0 : 1;
  std::size_t flagged = 0;
  for (char f : anomalous_flags) flagged += f ? 1 : 0;
  DetectionRates r;
  r.specificity = static_cast<double>(quiet) / static_cast<double>(normal_flags.size());
  r.recall = static_cast<double>(flagged) / static_cast<double>(anomalous_flags.size());
  return r;
}

// Sidecar IO ----------------------------------------------------------------

namespace {
constexpr std::string_view kSidecarMagic = "LIMBGUARD-TH";
constexpr std::string_view kSidecarVersion = "v1";
}

void save_threshold(const ThresholdParams& t, const std::filesystem::path& path) {
  std::string text;
  text += kSidecarMagic;
  text += ' ';
  text += kSidecarVersion;
  text += "\nmu ";
  numio::append(text, t.mu);
  text += "\nsigma ";
  numio::append(text, t.sigma);
  text += "\nx ";
  numio::append(text, t.x);
  text += '\n';
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoFailure("short write to " + path.string());
}

ThresholdParams load_threshold(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());

  auto next_line = [&in](const char* what) {
    std::string line;
    if (!std::getline(in, line)) {
      throw ShapeMismatch(std::string("unexpected end of file, expected ") + what);
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  const std::string magic_line = next_line("magic line");
  std::istringstream magic(magic_line);
  std::string word, version;
  magic >> word >> version;
  if (word != kSidecarMagic) throw BadMagic("not a limbguard threshold file");
  if (version != kSidecarVersion) {
    throw VersionMismatch(version.empty() ? "<missing>" : version);
  }

  auto read_field = [&next_line](const char* name) {
    const std::string line = next_line(name);
    const std::string prefix = std::string(name) + ' ';
    if (line.rfind(prefix, 0) != 0) {
      throw ShapeMismatch("expected '" + std::string(name) + " <value>'");
    }
    const auto v = numio::parse_double(std::string_view(line).substr(prefix.size()));
    if (!v) throw ShapeMismatch(std::string(name) + " is not a finite number");
    return *v;
  };

  ThresholdParams t;
  t.mu = read_field("mu");
  t.sigma = read_field("sigma");
  t.x = read_field("x");
  if (t.sigma < 0.0) throw ShapeMismatch("sigma must be >= 0");
  if (t.x < 0.0) throw ShapeMismatch("x must be >= 0");

  // Nothing but blank lines may follow.
  std::string rest;
  while (std::getline(in, rest)) {
    if (!rest.empty() && rest.back() == '\r') rest.pop_back();
    if (!rest.empty()) throw ShapeMismatch("trailing content after x line");
  }
  t.threshold = threshold_value(t.mu, t.sigma, t.x);
  return t;
}

}  // namespace limbguard
