#include "limbguard/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "limbguard/errors.hpp"
#include "limbguard/kernels.hpp"
#include "limbguard/numio.hpp"
#include "limbguard/rng.hpp"

namespace limbguard {

void NetworkSpec::validate() const {
  if (layer_dims.front() != kFeatureCount || layer_dims.back() != kFeatureCount) {
    throw std::invalid_argument("network must map 4 features to 4 features");
  }
  if (layer_dims[3] != 2) {
    throw std::invalid_argument("bottleneck width must be 2");
  }
  for (std::size_t d : layer_dims) {
    if (d == 0) throw std::invalid_argument("layer width must be >= 1");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || learning_rate > 1.0) {
    throw std::invalid_argument("learning_rate must be in (0, 1]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("Adam epsilon must be > 0");
}

AutoencoderModel init_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  AutoencoderModel model;
  model.spec = spec;
  Rng rng(seed);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t fan_in = spec.layer_dims[l];
    const std::size_t fan_out = spec.layer_dims[l + 1];
    const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (double& entry : w.data) entry = rng.uniform(-r, r);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  return model;
}

ForwardTrace forward(const AutoencoderModel& model, const Matrix& x) {
  const Kernels& k = active_kernels();
  const std::size_t rows = x.rows;
  ForwardTrace trace;
  trace.activations.reserve(model.spec.layer_count() + 1);
  trace.activations.push_back(x);
  for (std::size_t l = 0; l < model.spec.layer_count(); ++l) {
    const std::size_t in_dim = model.spec.layer_dims[l];
    const std::size_t out_dim = model.spec.layer_dims[l + 1];
    Matrix a(rows, out_dim);
    k.dense_forward_relu(trace.activations.back().data.data(), rows, in_dim,
                         model.weights[l].data.data(), model.biases[l].data(),
                         out_dim, a.data.data());
    trace.activations.push_back(std::move(a));
  }
  return trace;
}

double reconstruction_loss(const double* x, const double* xhat, std::size_t k) {
  double sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double d = x[j] - xhat[j];
    sum += d * d;
  }
  return sum / static_cast<double>(k);
}

std::vector<double> batch_losses(const AutoencoderModel& model, const Matrix& scaled) {
  const ForwardTrace trace = forward(model, scaled);
  std::vector<double> losses(scaled.rows);
  active_kernels().row_mse(scaled.data.data(), trace.reconstruction().data.data(),
                           scaled.rows, scaled.cols, losses.data());
  return losses;
}

namespace {

// Backward pass from a finished forward trace; writes exact gradients of the
// mean batch loss into `out` (buffers are zeroed here).
void backward_from_trace(const AutoencoderModel& model, const ForwardTrace& trace,
                         Gradients& out) {
  const Kernels& k = active_kernels();
  const std::size_t layers = model.spec.layer_count();
  const std::size_t rows = trace.activations.front().rows;
  const Matrix& x = trace.activations.front();
  const Matrix& xhat = trace.activations.back();

  // d(mean loss)/d(xhat) for loss = mean_r (1/4) sum_j (xhat - x)^2
  const double scale = 2.0 / (static_cast<double>(model.spec.layer_dims.back()) *
                              static_cast<double>(rows));
  Matrix g(rows, model.spec.layer_dims.back());
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    g.data[i] = scale * (xhat.data[i] - x.data[i]);
  }

  Matrix dz, g_prev;
  for (std::size_t li = layers; li-- > 0;) {
    const std::size_t in_dim = model.spec.layer_dims[li];
    const std::size_t out_dim = model.spec.layer_dims[li + 1];
    dz = Matrix(rows, out_dim);
    k.relu_backward(g.data.data(), trace.activations[li + 1].data.data(),
                    rows * out_dim, dz.data.data());
    std::fill(out.weights[li].data.begin(), out.weights[li].data.end(), 0.0);
    std::fill(out.biases[li].begin(), out.biases[li].end(), 0.0);
    k.accumulate_grads(dz.data.data(), trace.activations[li].data.data(), rows,
                       out_dim, in_dim, out.weights[li].data.data(),
                       out.biases[li].data());
    if (li > 0) {
      g_prev = Matrix(rows, in_dim);
      k.backprop_data(dz.data.data(), model.weights[li].data.data(), rows, out_dim,
                      in_dim, g_prev.data.data());
      g = std::move(g_prev);
    }
  }
}

Gradients make_gradient_buffers(const NetworkSpec& spec) {
  Gradients g;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    g.weights.emplace_back(spec.layer_dims[l + 1], spec.layer_dims[l]);
    g.biases.emplace_back(spec.layer_dims[l + 1], 0.0);
  }
  return g;
}

// First-/second-moment state for Adam, one slot per parameter tensor.
struct AdamState {
  std::vector<std::vector<double>> mw, vw, mb, vb;
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  explicit AdamState(const NetworkSpec& spec) {
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
      const std::size_t nw = spec.layer_dims[l + 1] * spec.layer_dims[l];
      mw.emplace_back(nw, 0.0);
      vw.emplace_back(nw, 0.0);
      mb.emplace_back(spec.layer_dims[l + 1], 0.0);
      vb.emplace_back(spec.layer_dims[l + 1], 0.0);
    }
  }
};

void adam_update(double* p, const double* g, std::size_t n, double* m, double* v,
                 const TrainConfig& cfg, double corr1, double corr2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = m[i] / corr1;
    const double vhat = v[i] / corr2;
    p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

void sgd_update(double* p, const double* g, std::size_t n, double lr) {
  for (std::size_t i = 0; i < n; ++i) p[i] -= lr * g[i];
}

}  // namespace

Gradients gradients(const AutoencoderModel& model, const Matrix& batch) {
  if (batch.rows == 0) throw EmptyMatrix();
  Gradients out = make_gradient_buffers(model.spec);
  const ForwardTrace trace = forward(model, batch);
  backward_from_trace(model, trace, out);
  return out;
}

std::pair<AutoencoderModel, TrainHistory> train(const NetworkSpec& spec,
                                                const TrainConfig& config,
                                                const Matrix& train_rows,
                                                const Matrix& val_rows) {
  spec.validate();
  config.validate();
  if (train_rows.rows == 0 || val_rows.rows == 0) throw EmptyMatrix();

  AutoencoderModel model = init_network(spec, config.seed);
  Gradients grads = make_gradient_buffers(spec);
  AdamState adam(spec);
  // Distinct stream from the init draws so adding layers never perturbs the
  // batch order.
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(train_rows.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t n = train_rows.rows;
  const std::size_t cols = train_rows.cols;
  Matrix batch(std::min<std::size_t>(config.batch_size, n), cols);

  TrainHistory history;
  history.train_loss.reserve(static_cast<std::size_t>(config.epochs));
  history.val_loss.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle_each_epoch) shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t rows = std::min(config.batch_size, n - start);
      batch.rows = rows;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = train_rows.row(order[start + r]);
        std::copy(src, src + cols, batch.row(r));
      }

      const ForwardTrace trace = forward(model, batch);
      const Matrix& xhat = trace.reconstruction();
      for (std::size_t r = 0; r < rows; ++r) {
        loss_sum += reconstruction_loss(batch.row(r), xhat.row(r), cols);
      }
      backward_from_trace(model, trace, grads);

      if (config.optimizer == Optimizer::Adam) {
        adam.beta1_t *= config.beta1;
        adam.beta2_t *= config.beta2;
        const double corr1 = 1.0 - adam.beta1_t;
        const double corr2 = 1.0 - adam.beta2_t;
        for (std::size_t l = 0; l < spec.layer_count(); ++l) {
          adam_update(model.weights[l].data.data(), grads.weights[l].data.data(),
                      grads.weights[l].data.size(), adam.mw[l].data(),
                      adam.vw[l].data(), config, corr1, corr2);
          adam_update(model.biases[l].data(), grads.biases[l].data(),
                      grads.biases[l].size(), adam.mb[l].data(), adam.vb[l].data(),
                      config, corr1, corr2);
        }
      } else {
        for (std::size_t l = 0; l < spec.layer_count(); ++l) {
          sgd_update(model.weights[l].data.data(), grads.weights[l].data.data(),
                     grads.weights[l].data.size(), config.learning_rate);
          sgd_update(model.biases[l].data(), grads.biases[l].data(),
                     grads.biases[l].size(), config.learning_rate);
        }
      }
    }

    const double train_loss = loss_sum / static_cast<double>(n);
    const std::vector<double> vl = batch_losses(model, val_rows);
    double val_sum = 0.0;
    for (double v : vl) val_sum += v;
    const double val_loss = val_sum / static_cast<double>(vl.size());

    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw DivergedLoss(epoch);
    }
    history.train_loss.push_back(train_loss);
    history.val_loss.push_back(val_loss);
  }
  return {std::move(model), std::move(history)};
}

// Model file IO -------------------------------------------------------------

namespace {

constexpr std::string_view kModelMagic = "LIMBGUARD-AE";
constexpr std::string_view kModelVersion = "v1";

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    if (i >= line.size()) break;
    std::size_t j = line.find(' ', i);
    if (j == std::string_view::npos) j = line.size();
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

struct LineReader {
  std::istringstream in;

  explicit LineReader(std::string text) : in(std::move(text)) {}

  // Next line, or nullopt at EOF. CRLF tolerated.
  std::optional<std::string> next() {
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  std::string require(const char* what) {
    auto line = next();
    if (!line) throw ShapeMismatch(std::string("unexpected end of file, expected ") + what);
    return *line;
  }
};

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoFailure("short write to " + path.string());
}

}  // namespace

void save_model(const AutoencoderModel& model, const std::filesystem::path& path) {
  std::string text;
  text.reserve(8192);
  text += kModelMagic;
  text += ' ';
  text += kModelVersion;
  text += "\nlimb ";
  text += std::to_string(model.limb_id);
  text += "\ndims";
  for (std::size_t d : model.spec.layer_dims) {
    text += ' ';
    text += std::to_string(d);
  }
  text += "\nscaler";
  for (double v : model.scaler.mins) {
    text += ' ';
    numio::append(text, v);
  }
  for (double v : model.scaler.maxs) {
    text += ' ';
    numio::append(text, v);
  }
  text += '\n';
  for (std::size_t l = 0; l < model.spec.layer_count(); ++l) {
    text += "layer ";
    text += std::to_string(l);
    text += '\n';
    const Matrix& w = model.weights[l];
    for (std::size_t r = 0; r < w.rows; ++r) {
      for (std::size_t c = 0; c < w.cols; ++c) {
        if (c > 0) text += ' ';
        numio::append(text, w.at(r, c));
      }
      text += '\n';
    }
    text += "bias";
    for (double b : model.biases[l]) {
      text += ' ';
      numio::append(text, b);
    }
    text += '\n';
  }
  write_text_file(path, text);
}

AutoencoderModel load_model(const std::filesystem::path& path) {
  LineReader reader(read_text_file(path));

  // Each line is bound to a local before splitting: split_ws returns views
  // into the string it is given, so the string must outlive them.
  const std::string magic_line = reader.require("magic line");
  const auto magic = split_ws(magic_line);
  if (magic.empty() || magic[0] != kModelMagic) {
    throw BadMagic("not a limbguard model file");
  }
  if (magic.size() != 2 || magic[1] != kModelVersion) {
    throw VersionMismatch(magic.size() > 1 ? std::string(magic[1]) : "<missing>");
  }

  AutoencoderModel model;

  const std::string limb_line = reader.require("limb line");
  const auto limb = split_ws(limb_line);
  std::optional<long long> limb_id;
  if (limb.size() == 2 && limb[0] == "limb") limb_id = numio::parse_int(limb[1]);
  if (!limb_id || *limb_id < 0 || *limb_id > 3) {
    throw ShapeMismatch("limb line must be 'limb <0..3>'");
  }
  model.limb_id = static_cast<int>(*limb_id);

  const std::string dims_line = reader.require("dims line");
  const auto dims = split_ws(dims_line);
  if (dims.empty() || dims[0] != "dims" ||
      dims.size() != model.spec.layer_dims.size() + 1) {
    throw ShapeMismatch("dims line must list " +
                        std::to_string(model.spec.layer_dims.size()) + " widths");
  }
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const auto d = numio::parse_int(dims[i + 1]);
    if (!d || *d < 1) throw ShapeMismatch("bad layer width '" + std::string(dims[i + 1]) + "'");
    model.spec.layer_dims[i] = static_cast<std::size_t>(*d);
  }
  try {
    model.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ShapeMismatch(e.what());
  }

  const std::string scaler_line = reader.require("scaler line");
  const auto scaler = split_ws(scaler_line);
  if (scaler.size() != 1 + 2 * kFeatureCount || scaler[0] != "scaler") {
    throw ShapeMismatch("scaler line must hold 4 minima and 4 maxima");
  }
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    const auto lo = numio::parse_double(scaler[1 + j]);
    const auto hi = numio::parse_double(scaler[1 + kFeatureCount + j]);
    if (!lo || !hi || *lo > *hi) throw ShapeMismatch("scaler bounds out of order");
    model.scaler.mins[j] = *lo;
    model.scaler.maxs[j] = *hi;
  }

  for (std::size_t l = 0; l < model.spec.layer_count(); ++l) {
    const std::size_t in_dim = model.spec.layer_dims[l];
    const std::size_t out_dim = model.spec.layer_dims[l + 1];
    const std::string header_line = reader.require("layer header");
    const auto header = split_ws(header_line);
    if (header.size() != 2 || header[0] != "layer" ||
        header[1] != std::to_string(l)) {
      throw ShapeMismatch("expected 'layer " + std::to_string(l) + "'");
    }
    Matrix w(out_dim, in_dim);
    for (std::size_t r = 0; r < out_dim; ++r) {
      const std::string row_line = reader.require("weight row");
      const auto row = split_ws(row_line);
      if (row.size() != in_dim) {
        throw ShapeMismatch("layer " + std::to_string(l) + " row " + std::to_string(r) +
                            " must hold " + std::to_string(in_dim) + " weights");
      }
      for (std::size_t c = 0; c < in_dim; ++c) {
        const auto v = numio::parse_double(row[c]);
        if (!v) throw ShapeMismatch("non-finite weight in layer " + std::to_string(l));
        w.at(r, c) = *v;
      }
    }
    const std::string bias_line = reader.require("bias line");
    const auto bias = split_ws(bias_line);
    if (bias.size() != out_dim + 1 || bias[0] != "bias") {
      throw ShapeMismatch("layer " + std::to_string(l) + " bias line must hold " +
                          std::to_string(out_dim) + " entries");
    }
    std::vector<double> b(out_dim);
    for (std::size_t i = 0; i < out_dim; ++i) {
      const auto v = numio::parse_double(bias[i + 1]);
      if (!v) throw ShapeMismatch("non-finite bias in layer " + std::to_string(l));
      b[i] = *v;
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }

  // Nothing but blank lines may follow the last layer.
  while (auto line = reader.next()) {
    if (!line->empty()) throw ShapeMismatch("trailing content after last layer");
  }
  return model;
}

}  // namespace limbguard
