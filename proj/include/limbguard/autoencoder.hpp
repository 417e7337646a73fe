#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "limbguard/matrix.hpp"
#include "limbguard/preprocess.hpp"

namespace limbguard {

// Layer widths of the dense autoencoder: 4 inputs, encoder 8-4-2, decoder
// 4-8-4, ReLU after every layer including the last. Inputs are scaled to
// [0,1] so non-negative outputs are compatible with the final ReLU.
struct NetworkSpec {
  std::array<std::size_t, 7> layer_dims = {4, 8, 4, 2, 4, 8, 4};

  std::size_t layer_count() const { return layer_dims.size() - 1; }
  void validate() const;  // throws std::invalid_argument

  bool operator==(const NetworkSpec&) const = default;
};

struct AutoencoderModel {
  NetworkSpec spec;
  std::vector<Matrix> weights;             // W_l is dims[l+1] x dims[l]
  std::vector<std::vector<double>> biases; // b_l has dims[l+1] entries
  ScalerParams scaler;
  int limb_id = 0;

  bool operator==(const AutoencoderModel&) const = default;
};

enum class Optimizer { SGD, Adam };

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool shuffle_each_epoch = true;

  void validate() const;  // throws std::invalid_argument
};

struct TrainHistory {
  std::vector<double> train_loss;  // one entry per epoch
  std::vector<double> val_loss;
};

// Glorot-uniform weights, r = sqrt(6/(fan_in+fan_out)), biases zero. The
// scaler is left at its default; callers fill it in before saving.
AutoencoderModel init_network(const NetworkSpec& spec, std::uint64_t seed);

// Batched forward pass. activations[0] is the input copy; activations[l+1] =
// ReLU(W_l a_l + b_l). The reconstruction is activations.back().
struct ForwardTrace {
  std::vector<Matrix> activations;  // layer_count()+1 entries

  const Matrix& reconstruction() const { return activations.back(); }
};

ForwardTrace forward(const AutoencoderModel& model, const Matrix& x);

// (1/4) sum_j (x_j - xhat_j)^2 over one 4-vector pair.
double reconstruction_loss(const double* x, const double* xhat, std::size_t k);

// Per-row reconstruction MSE of already-scaled rows.
std::vector<double> batch_losses(const AutoencoderModel& model, const Matrix& scaled);

// Exact gradients of the mean batch loss, laid out like `weights`/`biases`.
// ReLU subgradient at 0 is 0.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

Gradients gradients(const AutoencoderModel& model, const Matrix& batch);

// Mini-batch training; deterministic under config.seed (per-epoch shuffling
// uses the seeded generator). Throws DivergedLoss if an epoch's mean loss
// turns NaN/Inf. train/val must be non-empty and already scaled.
std::pair<AutoencoderModel, TrainHistory> train(const NetworkSpec& spec,
                                                const TrainConfig& config,
                                                const Matrix& train_rows,
                                                const Matrix& val_rows);

// Line-oriented text format, bit-exact round-trip:
//   LIMBGUARD-AE v1
//   limb <id>
//   dims 4 8 4 2 4 8 4
//   scaler <min0..3> <max0..3>
//   layer <l>, rows of W_l, `bias <...>` — repeated per layer.
// Throws BadMagic, VersionMismatch, ShapeMismatch, IoFailure.
void save_model(const AutoencoderModel& model, const std::filesystem::path& path);
AutoencoderModel load_model(const std::filesystem::path& path);

}  // namespace limbguard
