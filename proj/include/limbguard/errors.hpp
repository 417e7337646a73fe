#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace limbguard {

// Trial log parsing ---------------------------------------------------------

struct MalformedLine : std::runtime_error {
  std::size_t line_no;
  MalformedLine(std::size_t line, const std::string& detail)
      : std::runtime_error("malformed line " + std::to_string(line) + ": " + detail),
        line_no(line) {}
};

struct NonMonotonicTime : std::runtime_error {
  int limb_id;
  std::size_t line_no;
  NonMonotonicTime(int limb, std::size_t line)
      : std::runtime_error("limb " + std::to_string(limb) +
                           ": time not strictly increasing at line " + std::to_string(line)),
        limb_id(limb), line_no(line) {}
};

struct EmptyLog : std::runtime_error {
  EmptyLog() : std::runtime_error("trial log contains no samples") {}
};

// Dataset handling ----------------------------------------------------------

struct BadRatios : std::runtime_error {
  BadRatios() : std::runtime_error("split ratios must be non-negative and sum to 1") {}
};

struct InsufficientTrials : std::runtime_error {
  explicit InsufficientTrials(std::size_t n)
      : std::runtime_error("need at least 3 trials to split, got " + std::to_string(n)) {}
};

struct NoSamplesForLimb : std::runtime_error {
  int limb_id;
  explicit NoSamplesForLimb(int limb)
      : std::runtime_error("limb " + std::to_string(limb) + " has no samples"),
        limb_id(limb) {}
};

struct IntactOnlyViolation : std::runtime_error {
  explicit IntactOnlyViolation(const std::string& detail)
      : std::runtime_error("training pool must hold only intact trials: " + detail) {}
};

// Preprocessing -------------------------------------------------------------

struct EmptyMatrix : std::runtime_error {
  EmptyMatrix() : std::runtime_error("feature matrix has no rows") {}
};

// Training ------------------------------------------------------------------

struct DivergedLoss : std::runtime_error {
  int epoch;
  explicit DivergedLoss(int at_epoch)
      : std::runtime_error("loss diverged (NaN/Inf) at epoch " + std::to_string(at_epoch)),
        epoch(at_epoch) {}
};

// Model / threshold files ---------------------------------------------------

struct BadMagic : std::runtime_error {
  explicit BadMagic(const std::string& detail)
      : std::runtime_error("bad file magic: " + detail) {}
};

struct VersionMismatch : std::runtime_error {
  explicit VersionMismatch(const std::string& detail)
      : std::runtime_error("unsupported file version: " + detail) {}
};

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& detail)
      : std::runtime_error("malformed model data: " + detail) {}
};

// Anomaly scoring -----------------------------------------------------------

struct TooFewLosses : std::runtime_error {
  explicit TooFewLosses(std::size_t n)
      : std::runtime_error("need at least 2 losses to calibrate, got " + std::to_string(n)) {}
};

struct EmptyInput : std::runtime_error {
  explicit EmptyInput(const std::string& which)
      : std::runtime_error("empty input: " + which) {}
};

struct MissingModel : std::runtime_error {
  int limb_id;
  explicit MissingModel(int limb)
      : std::runtime_error("no model for limb " + std::to_string(limb)),
        limb_id(limb) {}
};

struct NoSamples : std::runtime_error {
  NoSamples() : std::runtime_error("trial has no samples on any limb") {}
};

// Filesystem ----------------------------------------------------------------

struct IoFailure : std::runtime_error {
  explicit IoFailure(const std::string& detail)
      : std::runtime_error("I/O failure: " + detail) {}
};

}  // namespace limbguard
