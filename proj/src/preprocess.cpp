#include "limbguard/preprocess.hpp"

#include <algorithm>

#include "limbguard/errors.hpp"
#include "limbguard/kernels.hpp"

namespace limbguard {

ScalerParams fit_scaler(const FeatureMatrix& train) {
  if (train.rows() == 0) throw EmptyMatrix();
  const Matrix& m = train.values;
  ScalerParams p;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    p.mins[j] = m.at(0, j);
    p.maxs[j] = m.at(0, j);
  }
  for (std::size_t i = 1; i < m.rows; ++i) {
    const double* row = m.row(i);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      p.mins[j] = std::min(p.mins[j], row[j]);
      p.maxs[j] = std::max(p.maxs[j], row[j]);
    }
  }
  return p;
}

FeatureMatrix transform(const ScalerParams& params, const FeatureMatrix& m) {
  FeatureMatrix out;
  out.limb_id = m.limb_id;
  out.source_trial = m.source_trial;
  out.values = Matrix(m.values.rows, m.values.cols);
  std::array<double, kFeatureCount> range;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    range[j] = params.maxs[j] - params.mins[j];
  }
  active_kernels().minmax_scale(m.values.data.data(), m.values.rows, m.values.cols,
                                params.mins.data(), range.data(),
                                out.values.data.data());
  return out;
}

FeatureMatrix inverse_transform(const ScalerParams& params, const FeatureMatrix& m) {
  FeatureMatrix out;
  out.limb_id = m.limb_id;
  out.source_trial = m.source_trial;
  out.values = Matrix(m.values.rows, m.values.cols);
  for (std::size_t i = 0; i < m.values.rows; ++i) {
    const double* src = m.values.row(i);
    double* dst = out.values.row(i);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      const double range = params.maxs[j] - params.mins[j];
      dst[j] = range > 0.0 ? src[j] * range + params.mins[j] : params.mins[j];
    }
  }
  return out;
}

}  // namespace limbguard
