#include "limbguard/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "limbguard/errors.hpp"
#include "limbguard/numio.hpp"
#include "limbguard/rng.hpp"

namespace limbguard {

const char* to_string(DamageCondition c) {
  switch (c) {
    case DamageCondition::None: return "None";
    case DamageCondition::LF: return "LF";
    case DamageCondition::RF: return "RF";
    case DamageCondition::LB: return "LB";
    case DamageCondition::RB: return "RB";
  }
  return "?";
}

std::optional<DamageCondition> condition_from_string(std::string_view s) {
  if (s == "None" || s == "N") return DamageCondition::None;
  if (s == "LF") return DamageCondition::LF;
  if (s == "RF") return DamageCondition::RF;
  if (s == "LB") return DamageCondition::LB;
  if (s == "RB") return DamageCondition::RB;
  return std::nullopt;
}

int damaged_limb(DamageCondition c) {
  switch (c) {
    case DamageCondition::None: return -1;
    case DamageCondition::LF: return 0;
    case DamageCondition::RF: return 1;
    case DamageCondition::LB: return 2;
    case DamageCondition::RB: return 3;
  }
  return -1;
}

DamageCondition condition_for_limb(int limb_id) {
  switch (limb_id) {
    case 0: return DamageCondition::LF;
    case 1: return DamageCondition::RF;
    case 2: return DamageCondition::LB;
    case 3: return DamageCondition::RB;
  }
  throw std::invalid_argument("limb_id must be in 0..3");
}

std::size_t Trial::sample_count() const {
  std::size_t n = 0;
  for (const auto& limb : limbs) n += limb.size();
  return n;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

Trial parse_trial_log(std::string_view text, DamageCondition condition,
                      std::string trial_id) {
  Trial trial;
  trial.condition = condition;
  trial.trial_id = std::move(trial_id);

  std::array<long long, 4> last_time = {-1, -1, -1, -1};
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    const bool last_fragment = (eol == std::string_view::npos);
    std::string_view line = text.substr(pos, last_fragment ? text.size() - pos : eol - pos);
    pos = last_fragment ? text.size() + 1 : eol + 1;
    if (last_fragment && line.empty()) break;  // trailing newline artifact
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty() && line.front() == '#') continue;

    const auto fields = split_fields(line, ',');
    if (fields.size() != 6) {
      throw MalformedLine(line_no, "expected 6 fields, got " + std::to_string(fields.size()));
    }
    const auto limb = numio::parse_int(fields[0]);
    if (!limb || *limb < 0 || *limb > 3) {
      throw MalformedLine(line_no, "limb_id must be an integer in 0..3");
    }
    const auto time = numio::parse_int(fields[1]);
    if (!time || *time < 0) {
      throw MalformedLine(line_no, "time_ms must be a non-negative integer");
    }
    LimbSample s;
    s.limb_id = static_cast<int>(*limb);
    s.time_ms = *time;
    const char* names[4] = {"position", "velocity", "current_alpha", "current_beta"};
    double* slots[4] = {&s.position, &s.velocity, &s.current_alpha, &s.current_beta};
    for (int i = 0; i < 4; ++i) {
      const auto v = numio::parse_double(fields[2 + i]);
      if (!v) throw MalformedLine(line_no, std::string(names[i]) + " is not a finite number");
      *slots[i] = *v;
    }
    if (s.time_ms <= last_time[s.limb_id]) {
      throw NonMonotonicTime(s.limb_id, line_no);
    }
    last_time[s.limb_id] = s.time_ms;
    trial.limbs[s.limb_id].push_back(s);
  }
  if (trial.sample_count() == 0) throw EmptyLog();
  return trial;
}

Trial parse_trial_log_file(const std::filesystem::path& path,
                           DamageCondition condition, std::string trial_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trial_log(buf.str(), condition, std::move(trial_id));
}

std::string serialize_trial_log(const Trial& trial) {
  std::string out;
  out.reserve(trial.sample_count() * 40);
  std::array<std::size_t, 4> cursor = {0, 0, 0, 0};
  while (true) {
    int best = -1;
    for (int limb = 0; limb < 4; ++limb) {
      if (cursor[limb] >= trial.limbs[limb].size()) continue;
      if (best < 0 ||
          trial.limbs[limb][cursor[limb]].time_ms < trial.limbs[best][cursor[best]].time_ms) {
        best = limb;
      }
    }
    if (best < 0) break;
    const LimbSample& s = trial.limbs[best][cursor[best]++];
    out += std::to_string(s.limb_id);
    out += ',';
    out += std::to_string(s.time_ms);
    out += ',';
    numio::append(out, s.position);
    out += ',';
    numio::append(out, s.velocity);
    out += ',';
    numio::append(out, s.current_alpha);
    out += ',';
    numio::append(out, s.current_beta);
    out += '\n';
  }
  return out;
}

void write_trial_log(const Trial& trial, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  const std::string text = serialize_trial_log(trial);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoFailure("short write to " + path.string());
}

Trial filter_motion(const Trial& trial, int window, double v_min) {
  if (window < 1) throw std::invalid_argument("filter window must be >= 1");
  if (v_min < 0.0) throw std::invalid_argument("v_min must be >= 0");

  std::size_t max_n = 0;
  for (const auto& limb : trial.limbs) max_n = std::max(max_n, limb.size());

  std::vector<char> keep(max_n, 0);
  const std::size_t half = static_cast<std::size_t>(window) / 2;
  for (const auto& limb : trial.limbs) {
    const std::size_t n = limb.size();
    if (n == 0) continue;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      prefix[i + 1] = prefix[i] + limb[i].velocity * limb[i].velocity;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i >= half ? i - half : 0;
      const std::size_t hi = std::min(lo + static_cast<std::size_t>(window), n);
      const std::size_t count = hi - lo;
      const double mean_sq = (prefix[hi] - prefix[lo]) / static_cast<double>(count);
      if (std::sqrt(mean_sq) > v_min) keep[i] = 1;
    }
  }

  Trial out;
  out.condition = trial.condition;
  out.sample_rate = trial.sample_rate;
  out.distance_m = trial.distance_m;
  out.trial_id = trial.trial_id;
  for (int limb = 0; limb < 4; ++limb) {
    for (std::size_t i = 0; i < trial.limbs[limb].size(); ++i) {
      if (keep[i]) out.limbs[limb].push_back(trial.limbs[limb][i]);
    }
  }
  return out;
}

SplitIndices split_indices(std::size_t n, const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0 || !std::isfinite(r)) throw BadRatios();
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw BadRatios();
  if (n < 3) throw InsufficientTrials(n);

  // floor with an epsilon so e.g. 0.6 * 5 lands on 3, not 2
  auto portion = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  };
  std::size_t n_train = portion(ratios[0]);
  const std::size_t n_val = portion(ratios[1]);
  const std::size_t n_test = portion(ratios[2]);
  n_train += n - (n_train + n_val + n_test);  // remainder goes to train

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return out;
}

SplitResult split_dataset(std::vector<Trial> trials,
                          const std::array<double, 3>& ratios, std::uint64_t seed) {
  const SplitIndices idx = split_indices(trials.size(), ratios, seed);
  SplitResult out;
  out.train.reserve(idx.train.size());
  out.val.reserve(idx.val.size());
  out.test.reserve(idx.test.size());
  for (std::size_t i : idx.train) out.train.push_back(std::move(trials[i]));
  for (std::size_t i : idx.val) out.val.push_back(std::move(trials[i]));
  for (std::size_t i : idx.test) out.test.push_back(std::move(trials[i]));
  return out;
}

void verify_training_pool(const std::vector<Trial>& train) {
  if (train.empty()) throw IntactOnlyViolation("pool is empty");
  for (const Trial& t : train) {
    if (t.condition != DamageCondition::None) {
      throw IntactOnlyViolation("trial '" + t.trial_id + "' has condition " +
                                to_string(t.condition));
    }
  }
}

FeatureMatrix feature_matrix(const Trial& trial, int limb_id) {
  if (limb_id < 0 || limb_id > 3) throw std::invalid_argument("limb_id must be in 0..3");
  const auto& samples = trial.limbs[limb_id];
  if (samples.empty()) throw NoSamplesForLimb(limb_id);

  FeatureMatrix out;
  out.limb_id = limb_id;
  out.source_trial = trial.trial_id;
  out.values = Matrix(samples.size(), kFeatureCount);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double* row = out.values.row(i);
    row[0] = samples[i].position;
    row[1] = samples[i].velocity;
    row[2] = samples[i].current_alpha;
    row[3] = samples[i].current_beta;
  }
  return out;
}

namespace {
constexpr std::string_view kManifestHeader = "path,condition,trial_id,distance_m";
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());

  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!saw_header) {
      if (line != kManifestHeader) {
        throw MalformedLine(line_no, "manifest header must be '" + std::string(kManifestHeader) + "'");
      }
      saw_header = true;
      continue;
    }
    const auto fields = split_fields(line, ',');
    if (fields.size() != 4) {
      throw MalformedLine(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.path = std::string(fields[0]);
    const auto cond = condition_from_string(fields[1]);
    if (!cond) throw MalformedLine(line_no, "unknown condition '" + std::string(fields[1]) + "'");
    e.condition = *cond;
    e.trial_id = std::string(fields[2]);
    const auto dist = numio::parse_double(fields[3]);
    if (!dist) throw MalformedLine(line_no, "distance_m is not a finite number");
    e.distance_m = *dist;
    entries.push_back(std::move(e));
  }
  if (!saw_header) throw MalformedLine(1, "manifest is empty");
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  std::string text(kManifestHeader);
  text += '\n';
  for (const ManifestEntry& e : entries) {
    text += e.path;
    text += ',';
    text += to_string(e.condition);
    text += ',';
    text += e.trial_id;
    text += ',';
    numio::append(text, e.distance_m);
    text += '\n';
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoFailure("short write to " + path.string());
}

}  // namespace limbguard
