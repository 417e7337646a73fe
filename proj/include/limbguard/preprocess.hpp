#pragma once

#include <array>

#include "limbguard/telemetry.hpp"

namespace limbguard {

// Per-feature min-max scaling to [0,1]. Fit on the training partition only —
// never refit on validation or test data.
struct ScalerParams {
  std::array<double, kFeatureCount> mins{};
  std::array<double, kFeatureCount> maxs{};

  bool operator==(const ScalerParams&) const = default;
};

// Exact column-wise extrema of the training matrix. Throws EmptyMatrix.
ScalerParams fit_scaler(const FeatureMatrix& train);

// out[i][j] = (m[i][j] - mins[j]) / (maxs[j] - mins[j]); a constant column
// maps to 0. Outputs are NOT clamped: out-of-distribution magnitudes carry
// the anomaly signal and must survive scaling.
FeatureMatrix transform(const ScalerParams& params, const FeatureMatrix& m);

// Algebraic inverse where maxs[j] > mins[j]; constant columns map back to
// mins[j]. Used to plot reconstructions in original units.
FeatureMatrix inverse_transform(const ScalerParams& params, const FeatureMatrix& m);

}  // namespace limbguard
