#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "limbguard/anomaly.hpp"
#include "limbguard/errors.hpp"
#include "limbguard/rng.hpp"
#include "test_util.hpp"

using namespace limbguard;

namespace {

// Independent two-pass mean / population-sigma, kept free of the library's
// accumulation choices.
std::pair<double, double> oracle_stats(const std::vector<double>& v) {
  double mu = 0.0;
  for (double x : v) mu += x;
  mu /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return {mu, std::sqrt(acc / static_cast<double>(v.size()))};
}

AutoencoderModel zero_model(int limb) {
  AutoencoderModel m = init_network(NetworkSpec{}, 0);
  for (Matrix& w : m.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  m.scaler.mins = {0.0, 0.0, 0.0, 0.0};
  m.scaler.maxs = {1.0, 1.0, 1.0, 1.0};
  m.limb_id = limb;
  return m;
}

// With zero weights and an identity scaler the loss of a row whose features
// all equal v is exactly v^2, which makes flagged fractions easy to stage.
LimbDetector zero_detector(int limb, double threshold) {
  LimbDetector d;
  d.model = zero_model(limb);
  d.threshold.mu = threshold;
  d.threshold.x = 0.0;
  d.threshold.threshold = threshold;
  return d;
}

void add_samples(Trial& t, int limb, std::size_t n, double value) {
  for (std::size_t i = 0; i < n; ++i) {
    LimbSample s;
    s.limb_id = limb;
    s.time_ms = static_cast<long long>(t.limbs[limb].size()) * 16;
    s.position = value;
    s.velocity = value;
    s.current_alpha = value;
    s.current_beta = value;
    t.limbs[limb].push_back(s);
  }
}

FeatureMatrix uniform_rows(std::size_t n, double value) {
  FeatureMatrix m;
  m.values = Matrix(n, kFeatureCount);
  std::fill(m.values.data.begin(), m.values.data.end(), value);
  return m;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_SUITE("anomaly") {

TEST_CASE("calibrate matches an independent mean/sigma computation") {
  const std::vector<double> losses = {0.1, 0.2, 0.3};
  const ThresholdParams t = calibrate_threshold(losses, 1.0);
  const auto [mu, sigma] = oracle_stats(losses);
  CHECK(std::abs(t.mu - mu) <= 1e-12);
  CHECK(std::abs(t.sigma - sigma) <= 1e-12);
  CHECK(std::abs(t.threshold - (mu + sigma)) <= 1e-12);
  CHECK(t.sigma == doctest::Approx(std::sqrt(0.02 / 3.0)).epsilon(1e-12));
  CHECK(t.x == 1.0);

  const ThresholdParams t2 = calibrate_threshold({0.005, 0.015}, 2.0);
  CHECK(t2.mu == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(t2.sigma == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(t2.threshold == doctest::Approx(0.02).epsilon(1e-12));

  // Larger random sets against the same oracle.
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(128);
    for (double& x : v) x = rng.uniform(0.0, 0.2);
    const double x_mult = rng.uniform(0.0, 4.0);
    const ThresholdParams got = calibrate_threshold(v, x_mult);
    const auto [m, s] = oracle_stats(v);
    CHECK(std::abs(got.mu - m) <= 1e-12);
    CHECK(std::abs(got.sigma - s) <= 1e-12);
    CHECK(std::abs(got.threshold - (m + x_mult * s)) <= 1e-12);
  }
}

TEST_CASE("all-equal losses give sigma 0 and an exact threshold") {
  const ThresholdParams t = calibrate_threshold({0.42, 0.42, 0.42}, 7.5);
  CHECK(t.sigma == 0.0);
  CHECK(t.mu == 0.42);
  CHECK(t.threshold == 0.42);  // bitwise: no x * 0 round-off creeps in
}

TEST_CASE("calibrate input validation") {
  CHECK_THROWS_AS(calibrate_threshold({}, 1.0), TooFewLosses);
  CHECK_THROWS_AS(calibrate_threshold({0.1}, 1.0), TooFewLosses);
  CHECK_THROWS_AS(calibrate_threshold({0.1, 0.2}, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_threshold({0.1, -0.2}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_threshold({0.1, std::nan("")}, 1.0), std::invalid_argument);
}

TEST_CASE("threshold grows monotonically in the multiplier") {
  Rng rng(3);
  std::vector<double> v(64);
  for (double& x : v) x = rng.uniform(0.0, 1.0);
  double prev = -1.0;
  for (double x = 0.0; x <= 5.0; x += 0.25) {
    const double t = calibrate_threshold(v, x).threshold;
    CHECK(t >= prev);
    prev = t;
  }
}

TEST_CASE("threshold_value is the shared formula") {
  CHECK(threshold_value(0.2, 0.1, 3.0) == 0.2 + 3.0 * 0.1);
  CHECK(threshold_value(0.42, 0.0, 7.5) == 0.42);
}

TEST_CASE("select_multiplier keeps the smaller x on a full tie") {
  // Both candidates separate perfectly, so the tie goes to the smaller x.
  const MultiplierSearch s = select_multiplier({0.1, 0.3}, {0.25, 0.28},
                                               {0.5, 0.6}, {2.0, 1.0});
  REQUIRE(s.candidates.size() == 2);
  CHECK(s.candidates[0].x == 1.0);  // returned ascending even if given unsorted
  CHECK(s.candidates[1].x == 2.0);
  CHECK(s.candidates[0].score == doctest::Approx(1.0));
  CHECK(s.candidates[1].score == doctest::Approx(1.0));
  CHECK(s.selected == 1.0);
}

TEST_CASE("select_multiplier trades specificity for recall at 0.7/0.3") {
  // x=2 misses the 0.35 anomaly; recall-weighting keeps x=1.
  const MultiplierSearch low = select_multiplier({0.1, 0.3}, {0.25, 0.28},
                                                 {0.35, 0.6}, {1.0, 2.0});
  CHECK(low.selected == 1.0);
  CHECK(low.candidates[1].recall == doctest::Approx(0.5));
  CHECK(low.candidates[1].score == doctest::Approx(0.7 * 0.5 + 0.3 * 1.0));

  // Here x=1 flags a normal sample while x=2 is clean on both sides.
  const MultiplierSearch high = select_multiplier({0.1, 0.3}, {0.35, 0.28},
                                                  {0.5, 0.6}, {1.0, 2.0});
  CHECK(high.selected == 2.0);
  CHECK(high.candidates[0].specificity == doctest::Approx(0.5));
  CHECK(high.candidates[1].score == doctest::Approx(1.0));
}

TEST_CASE("indistinguishable validation losses select the smallest x") {
  const std::vector<double> same = {0.15, 0.45};
  const MultiplierSearch s =
      select_multiplier({0.1, 0.3}, same, same, {0.5, 1.0, 2.0});
  CHECK(s.selected == 0.5);
}

TEST_CASE("select_multiplier rejects empty inputs") {
  const std::vector<double> some = {0.1, 0.2};
  CHECK_THROWS_AS(select_multiplier({}, some, some, {1.0}), TooFewLosses);
  CHECK_THROWS_AS(select_multiplier(some, {}, some, {1.0}), EmptyInput);
  CHECK_THROWS_AS(select_multiplier(some, some, {}, {1.0}), EmptyInput);
  CHECK_THROWS_AS(select_multiplier(some, some, some, {}), EmptyInput);
}

TEST_CASE("flagging is strictly greater-than") {
  ThresholdParams t;
  t.threshold = 0.2;
  const std::vector<char> flags = flag_anomalies({0.1, 0.2, 0.3}, t);
  CHECK(flags == std::vector<char>{0, 0, 1});  // exactly-at-threshold passes
  CHECK(flag_anomalies({}, t).empty());
}

TEST_CASE("score_samples applies the stored scaler before the forward pass") {
  const AutoencoderModel m = zero_model(0);
  const std::vector<double> losses = score_samples(m, uniform_rows(3, 0.5));
  REQUIRE(losses.size() == 3);
  for (double l : losses) CHECK(l == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(score_samples(m, uniform_rows(1, 0.0))[0] == 0.0);

  // A non-identity scaler changes the loss: range 2 halves the scaled value.
  AutoencoderModel wide = zero_model(0);
  wide.scaler.maxs = {2.0, 2.0, 2.0, 2.0};
  CHECK(score_samples(wide, uniform_rows(1, 0.5))[0] ==
        doctest::Approx(0.0625).epsilon(1e-15));
}

TEST_CASE("localize_fault picks the limb with the top flagged fraction") {
  std::array<std::optional<LimbDetector>, 4> bank;
  for (int limb = 0; limb < 4; ++limb) bank[limb] = zero_detector(limb, 0.1);

  Trial t;
  add_samples(t, 0, 6, 1.0);  // loss 1.0 > 0.1 -> flagged
  add_samples(t, 0, 4, 0.0);  // loss 0 -> clean
  add_samples(t, 1, 10, 0.0);
  add_samples(t, 2, 10, 0.0);
  add_samples(t, 3, 10, 0.0);

  const FaultReport r = localize_fault(bank, t, 0.5);
  CHECK(r.per_limb_fraction[0] == doctest::Approx(0.6));
  CHECK(r.per_limb_fraction[1] == 0.0);
  CHECK(r.flagged_counts[0] == std::pair<std::size_t, std::size_t>{6, 10});
  CHECK(r.flagged_counts[3] == std::pair<std::size_t, std::size_t>{0, 10});
  CHECK(r.predicted == DamageCondition::LF);
  CHECK_FALSE(r.tie_break);
}

TEST_CASE("localize_fault stays at None below the decision level") {
  std::array<std::optional<LimbDetector>, 4> bank;
  for (int limb = 0; limb < 4; ++limb) bank[limb] = zero_detector(limb, 0.1);

  Trial t;
  add_samples(t, 0, 8, 0.0);
  add_samples(t, 1, 6, 0.0);
  add_samples(t, 1, 2, 1.0);  // fraction 0.25 < 0.5
  add_samples(t, 2, 8, 0.0);
  add_samples(t, 3, 8, 0.0);
  const FaultReport r = localize_fault(bank, t, 0.5);
  CHECK(r.per_limb_fraction[1] == doctest::Approx(0.25));
  CHECK(r.predicted == DamageCondition::None);

  // The boundary is inclusive: a fraction exactly at the level predicts.
  Trial edge;
  add_samples(edge, 2, 4, 1.0);
  add_samples(edge, 2, 4, 0.0);
  const FaultReport re = localize_fault(bank, edge, 0.5);
  CHECK(re.per_limb_fraction[2] == 0.5);
  CHECK(re.predicted == DamageCondition::LB);
}

TEST_CASE("localize_fault breaks exact ties toward the lowest limb") {
  std::array<std::optional<LimbDetector>, 4> bank;
  for (int limb = 0; limb < 4; ++limb) bank[limb] = zero_detector(limb, 0.1);

  Trial t;
  add_samples(t, 1, 5, 1.0);
  add_samples(t, 3, 5, 1.0);
  add_samples(t, 0, 5, 0.0);
  add_samples(t, 2, 5, 0.0);
  const FaultReport r = localize_fault(bank, t);
  CHECK(r.tie_break);
  CHECK(r.predicted == DamageCondition::RF);  // limb 1 beats limb 3
}

TEST_CASE("localize_fault error cases") {
  std::array<std::optional<LimbDetector>, 4> bank;
  bank[0] = zero_detector(0, 0.1);

  Trial empty;
  CHECK_THROWS_AS(localize_fault(bank, empty), NoSamples);

  Trial t;
  add_samples(t, 1, 3, 0.0);  // limb 1 has samples but no detector
  try {
    localize_fault(bank, t);
    FAIL("expected MissingModel");
  } catch (const MissingModel& e) {
    CHECK(e.limb_id == 1);
  }

  // A limb with no samples needs no detector and scores (0, 0).
  Trial only0;
  add_samples(only0, 0, 3, 0.0);
  const FaultReport r = localize_fault(bank, only0);
  CHECK(r.flagged_counts[1] == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK(r.per_limb_fraction[1] == 0.0);
}

TEST_CASE("detection_rates counts flags") {
  std::vector<char> normal(100, 0);
  for (int i = 0; i < 16; ++i) normal[i * 6] = 1;
  std::vector<char> anomalous(50, 1);
  for (int i = 0; i < 5; ++i) anomalous[i * 9] = 0;
  const DetectionRates r = detection_rates(normal, anomalous);
  CHECK(r.specificity == doctest::Approx(0.84));
  CHECK(r.recall == doctest::Approx(0.9));

  const DetectionRates unit = detection_rates({0}, {1});
  CHECK(unit.specificity == 1.0);
  CHECK(unit.recall == 1.0);

  CHECK_THROWS_AS(detection_rates({}, {1}), EmptyInput);
  CHECK_THROWS_AS(detection_rates({0}, {}), EmptyInput);
}

TEST_CASE("threshold sidecars round-trip and recompute the threshold") {
  TempDir dir;
  const ThresholdParams t = calibrate_threshold({0.01, 0.013, 0.02, 0.017}, 2.5);
  save_threshold(t, dir / "t.txt");
  const ThresholdParams back = load_threshold(dir / "t.txt");
  CHECK(back == t);
  CHECK(back.threshold == threshold_value(back.mu, back.sigma, back.x));
}

TEST_CASE("threshold sidecar loader rejects corrupted files") {
  TempDir dir;
  const ThresholdParams t = calibrate_threshold({0.01, 0.02}, 2.0);
  save_threshold(t, dir / "t.txt");
  const std::string good = slurp(dir / "t.txt");

  spit(dir / "bad.txt", "NOPE v1\nmu 0\nsigma 0\nx 0\n");
  CHECK_THROWS_AS(load_threshold(dir / "bad.txt"), BadMagic);

  spit(dir / "bad.txt", "LIMBGUARD-TH v9\nmu 0\nsigma 0\nx 0\n");
  CHECK_THROWS_AS(load_threshold(dir / "bad.txt"), VersionMismatch);

  spit(dir / "bad.txt", "LIMBGUARD-TH v1\nmu 0.1\nsigma -0.5\nx 1\n");
  CHECK_THROWS_AS(load_threshold(dir / "bad.txt"), ShapeMismatch);

  spit(dir / "bad.txt", "LIMBGUARD-TH v1\nmu 0.1\nsigma 0.5\n");
  CHECK_THROWS_AS(load_threshold(dir / "bad.txt"), ShapeMismatch);

  spit(dir / "bad.txt", good + "extra\n");
  CHECK_THROWS_AS(load_threshold(dir / "bad.txt"), ShapeMismatch);

  CHECK_THROWS_AS(load_threshold(dir / "missing.txt"), IoFailure);
}

}  // TEST_SUITE
