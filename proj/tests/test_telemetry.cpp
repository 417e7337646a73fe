#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include "limbguard/errors.hpp"
#include "limbguard/telemetry.hpp"
#include "test_util.hpp"

using namespace limbguard;

namespace {

// All four limbs share the given velocity sequence; other channels are
// arbitrary but distinct so serialization order is visible.
Trial make_trial(const std::vector<double>& velocities) {
  Trial t;
  t.trial_id = "t";
  for (int limb = 0; limb < 4; ++limb) {
    for (std::size_t i = 0; i < velocities.size(); ++i) {
      LimbSample s;
      s.limb_id = limb;
      s.time_ms = static_cast<long long>(i) * 17;
      s.position = 0.01 * static_cast<double>(i);
      s.velocity = velocities[i];
      s.current_alpha = 1.0 + limb;
      s.current_beta = 2.0 + limb;
      t.limbs[limb].push_back(s);
    }
  }
  return t;
}

// Brute-force windowed RMS, written without the prefix-sum shortcut.
std::vector<char> oracle_keep(const Trial& t, int window, double v_min) {
  std::size_t n = 0;
  for (const auto& limb : t.limbs) n = std::max(n, limb.size());
  std::vector<char> keep(n, 0);
  for (const auto& limb : t.limbs) {
    for (std::size_t i = 0; i < limb.size(); ++i) {
      const std::size_t half = static_cast<std::size_t>(window) / 2;
      const std::size_t lo = i >= half ? i - half : 0;
      const std::size_t hi =
          std::min(limb.size(), lo + static_cast<std::size_t>(window));
      double sum = 0.0;
      for (std::size_t j = lo; j < hi; ++j) sum += limb[j].velocity * limb[j].velocity;
      if (std::sqrt(sum / static_cast<double>(hi - lo)) > v_min) keep[i] = 1;
    }
  }
  return keep;
}

std::vector<char> kept_mask(const Trial& before, const Trial& after) {
  std::vector<char> mask(before.limbs[0].size(), 0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < before.limbs[0].size(); ++i) {
    if (j < after.limbs[0].size() &&
        after.limbs[0][j].time_ms == before.limbs[0][i].time_ms) {
      mask[i] = 1;
      ++j;
    }
  }
  return mask;
}

}  // namespace

TEST_SUITE("telemetry") {

TEST_CASE("parse maps fields onto limb samples") {
  const Trial t = parse_trial_log("0,0,0.00,0.00,0.0,0.0\n0,16,0.01,0.60,1.2,1.1\n",
                                  DamageCondition::None, "a");
  CHECK(t.sample_count() == 2);
  REQUIRE(t.limbs[0].size() == 2);
  CHECK(t.limbs[0][1].time_ms == 16);
  CHECK(t.limbs[0][1].position == doctest::Approx(0.01));
  CHECK(t.limbs[0][1].velocity == doctest::Approx(0.6));
  CHECK(t.limbs[0][1].current_alpha == doctest::Approx(1.2));
  CHECK(t.limbs[0][1].current_beta == doctest::Approx(1.1));
  CHECK(t.limbs[1].empty());
  CHECK(t.condition == DamageCondition::None);
  CHECK(t.trial_id == "a");
}

TEST_CASE("parse accepts comments, CRLF and a final line without newline") {
  const Trial t = parse_trial_log("# header\r\n1,0,1,1,1,1\r\n1,16,1,1,1,1",
                                  DamageCondition::LF, "b");
  CHECK(t.limbs[1].size() == 2);
}

TEST_CASE("empty and effectively empty logs are rejected") {
  CHECK_THROWS_AS(parse_trial_log("", DamageCondition::None, "x"), EmptyLog);
  CHECK_THROWS_AS(parse_trial_log("# only a comment\n", DamageCondition::None, "x"),
                  EmptyLog);
}

TEST_CASE("malformed lines report their 1-based line number") {
  try {
    parse_trial_log("0,0,1,1,1,1\n0,16,1,1\n", DamageCondition::None, "x");
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(e.line_no == 2);
  }
  // Comments count toward line numbers.
  try {
    parse_trial_log("# c\n0,0,1,1,1,nope\n", DamageCondition::None, "x");
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(e.line_no == 2);
  }
  CHECK_THROWS_AS(parse_trial_log("9,0,1,1,1,1\n", DamageCondition::None, "x"),
                  MalformedLine);
  CHECK_THROWS_AS(parse_trial_log("0,-5,1,1,1,1\n", DamageCondition::None, "x"),
                  MalformedLine);
  CHECK_THROWS_AS(parse_trial_log("0,0,1,1,1,1,1\n", DamageCondition::None, "x"),
                  MalformedLine);
}

TEST_CASE("repeated timestamps on one limb are rejected") {
  try {
    parse_trial_log("0,16,1,1,1,1\n0,16,1,1,1,1\n", DamageCondition::None, "x");
    FAIL("expected NonMonotonicTime");
  } catch (const NonMonotonicTime& e) {
    CHECK(e.limb_id == 0);
    CHECK(e.line_no == 2);
  }
  // Interleaving limbs is fine; only per-limb order matters.
  CHECK_NOTHROW(parse_trial_log("0,16,1,1,1,1\n1,16,1,1,1,1\n0,32,1,1,1,1\n",
                                DamageCondition::None, "x"));
}

TEST_CASE("serialize merges limbs by time then limb id") {
  Trial t;
  t.trial_id = "m";
  LimbSample s;
  s.limb_id = 1;
  s.time_ms = 0;
  t.limbs[1].push_back(s);
  s.limb_id = 0;
  s.time_ms = 16;
  t.limbs[0].push_back(s);
  s.limb_id = 1;
  s.time_ms = 16;
  t.limbs[1].push_back(s);
  const std::string text = serialize_trial_log(t);
  CHECK(text == "1,0,0,0,0,0\n0,16,0,0,0,0\n1,16,0,0,0,0\n");
}

TEST_CASE("parse-serialize-parse round-trip is identity") {
  const Trial t = make_trial({0.0, 0.25, -0.5, 1.0, 0.125});
  const std::string text = serialize_trial_log(t);
  const Trial back = parse_trial_log(text, t.condition, t.trial_id);
  CHECK(back == t);
  CHECK(serialize_trial_log(back) == text);
}

TEST_CASE("file round-trip through write_trial_log") {
  TempDir dir;
  const Trial t = make_trial({0.5, 0.5, 0.5});
  write_trial_log(t, dir / "t.csv");
  const Trial back = parse_trial_log_file(dir / "t.csv", t.condition, t.trial_id);
  CHECK(back == t);
}

TEST_CASE("filter keeps nothing for a resting robot") {
  const Trial t = make_trial(std::vector<double>(100, 0.0));
  CHECK(filter_motion(t, 30, 0.05).sample_count() == 0);
}

TEST_CASE("filter keeps everything for constant motion") {
  const Trial t = make_trial(std::vector<double>(100, 1.0));
  CHECK(filter_motion(t, 30, 0.05) == t);
}

TEST_CASE("filter matches the brute-force oracle on a rest-then-move step") {
  std::vector<double> v(600, 0.0);
  for (std::size_t i = 300; i < 600; ++i) v[i] = 0.5;
  const Trial t = make_trial(v);
  const Trial filtered = filter_motion(t, 30, 0.05);

  const std::vector<char> expect = oracle_keep(t, 30, 0.05);
  const std::vector<char> got = kept_mask(t, filtered);
  CHECK(got == expect);

  // Convention-independent bounds: the moving segment survives, rest does
  // not, and the boundary sits within half a window of the step.
  for (std::size_t i = 315; i < 600; ++i) CHECK(got[i] == 1);
  for (std::size_t i = 0; i < 285; ++i) CHECK(got[i] == 0);
}

TEST_CASE("filter looks across limbs: one moving limb keeps the sample") {
  Trial t = make_trial(std::vector<double>(100, 0.0));
  for (auto& s : t.limbs[2]) s.velocity = 1.0;
  const Trial filtered = filter_motion(t, 30, 0.05);
  CHECK(filtered.limbs[0].size() == 100);  // limb 2's motion carries limb 0
  CHECK(filtered.limbs[2].size() == 100);
}

TEST_CASE("filter is idempotent on gait-shaped data") {
  std::vector<double> v(600, 0.0);
  for (std::size_t i = 300; i < 600; ++i) v[i] = 0.5;
  const Trial once = filter_motion(make_trial(v), 30, 0.05);
  const Trial twice = filter_motion(once, 30, 0.05);
  CHECK(twice == once);
}

TEST_CASE("split sizes follow floor-then-remainder-to-train") {
  auto sizes = [](std::size_t n) {
    const SplitIndices idx = split_indices(n, {0.6, 0.2, 0.2}, 7);
    return std::array<std::size_t, 3>{idx.train.size(), idx.val.size(), idx.test.size()};
  };
  CHECK(sizes(10) == std::array<std::size_t, 3>{6, 2, 2});
  CHECK(sizes(170) == std::array<std::size_t, 3>{102, 34, 34});
  CHECK(sizes(5) == std::array<std::size_t, 3>{3, 1, 1});
}

TEST_CASE("split partitions are disjoint, exhaustive and seed-stable") {
  const SplitIndices a = split_indices(23, {0.6, 0.2, 0.2}, 99);
  const SplitIndices b = split_indices(23, {0.6, 0.2, 0.2}, 99);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);

  std::set<std::size_t> seen;
  for (const auto* part : {&a.train, &a.val, &a.test}) {
    for (std::size_t i : *part) {
      CHECK(seen.insert(i).second);  // no duplicates across partitions
      CHECK(i < 23);
    }
  }
  CHECK(seen.size() == 23);

  const SplitIndices c = split_indices(23, {0.6, 0.2, 0.2}, 100);
  CHECK(a.train != c.train);  // a different seed reshuffles
}

TEST_CASE("split rejects bad ratios and too-few trials") {
  CHECK_THROWS_AS(split_indices(10, {0.5, 0.2, 0.2}, 0), BadRatios);
  CHECK_THROWS_AS(split_indices(10, {-0.2, 0.6, 0.6}, 0), BadRatios);
  CHECK_THROWS_AS(split_indices(2, {0.6, 0.2, 0.2}, 0), InsufficientTrials);
}

TEST_CASE("split_dataset moves whole trials") {
  std::vector<Trial> trials;
  for (int i = 0; i < 10; ++i) {
    Trial t = make_trial({1.0});
    t.trial_id = "trial" + std::to_string(i);
    trials.push_back(std::move(t));
  }
  const SplitResult split = split_dataset(std::move(trials), {0.6, 0.2, 0.2}, 7);
  CHECK(split.train.size() == 6);
  CHECK(split.val.size() == 2);
  CHECK(split.test.size() == 2);
  std::set<std::string> ids;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (const Trial& t : *part) ids.insert(t.trial_id);
  }
  CHECK(ids.size() == 10);
}

TEST_CASE("training pool must be intact-only") {
  std::vector<Trial> pool;
  pool.push_back(make_trial({1.0}));
  CHECK_NOTHROW(verify_training_pool(pool));
  pool.push_back(make_trial({1.0}));
  pool.back().condition = DamageCondition::RB;
  CHECK_THROWS_AS(verify_training_pool(pool), IntactOnlyViolation);
  CHECK_THROWS_AS(verify_training_pool({}), IntactOnlyViolation);
}

TEST_CASE("feature_matrix lays out the four channels in order") {
  const Trial t = make_trial({0.5, -0.25});
  const FeatureMatrix m = feature_matrix(t, 2);
  REQUIRE(m.rows() == 2);
  CHECK(m.limb_id == 2);
  CHECK(m.values.at(0, 0) == 0.0);    // position
  CHECK(m.values.at(1, 0) == 0.01);
  CHECK(m.values.at(0, 1) == 0.5);    // velocity
  CHECK(m.values.at(1, 1) == -0.25);
  CHECK(m.values.at(0, 2) == 3.0);    // current_alpha = 1 + limb
  CHECK(m.values.at(0, 3) == 4.0);    // current_beta = 2 + limb

  Trial empty;
  empty.limbs[0].push_back(t.limbs[0][0]);
  CHECK_THROWS_AS(feature_matrix(empty, 1), NoSamplesForLimb);
}

TEST_CASE("damage condition names round-trip and map to limbs") {
  for (auto c : {DamageCondition::None, DamageCondition::LF, DamageCondition::RF,
                 DamageCondition::LB, DamageCondition::RB}) {
    CHECK(condition_from_string(to_string(c)) == c);
  }
  CHECK_FALSE(condition_from_string("XX").has_value());
  CHECK(damaged_limb(DamageCondition::None) == -1);
  for (int limb = 0; limb < 4; ++limb) {
    CHECK(damaged_limb(condition_for_limb(limb)) == limb);
  }
}

TEST_CASE("manifest round-trips entries with relative paths") {
  TempDir dir;
  std::vector<ManifestEntry> entries;
  ManifestEntry e;
  e.path = "a.csv";
  e.condition = DamageCondition::LB;
  e.trial_id = "lb_000";
  e.distance_m = 1.0;
  entries.push_back(e);
  e.path = "b.csv";
  e.condition = DamageCondition::None;
  e.trial_id = "none_000";
  e.distance_m = 2.0;
  entries.push_back(e);

  write_manifest(entries, dir / "manifest.csv");
  const auto back = read_manifest(dir / "manifest.csv");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].path == entries[i].path);
    CHECK(back[i].condition == entries[i].condition);
    CHECK(back[i].trial_id == entries[i].trial_id);
    CHECK(back[i].distance_m == entries[i].distance_m);
  }
}

TEST_CASE("manifest rejects a wrong header or malformed rows") {
  TempDir dir;
  {
    std::ofstream out(dir / "bad.csv");
    out << "path,condition\nx.csv,None\n";
  }
  CHECK_THROWS_AS(read_manifest(dir / "bad.csv"), MalformedLine);
  {
    std::ofstream out(dir / "bad2.csv");
    out << "path,condition,trial_id,distance_m\nx.csv,Sideways,t,2\n";
  }
  CHECK_THROWS_AS(read_manifest(dir / "bad2.csv"), MalformedLine);
  CHECK_THROWS_AS(read_manifest(dir / "absent.csv"), IoFailure);
}

}  // TEST_SUITE
