#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "minto/rng.hpp"

namespace minto::nn {

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
};

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Fully connected network with a linear output layer.
///
/// Parameters live in one flat vector. Layer l occupies a weight block of
/// shape [fan_in][fan_out] (input-major, so a forward pass streams over
/// contiguous output columns) followed by fan_out biases.
class Mlp {
 public:
  Mlp() = default;
  /// All-zero parameters.
  Mlp(std::vector<int> layer_sizes, Activation activation);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static Mlp initialized(std::vector<int> layer_sizes, Activation activation, RngStream& init);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t n_layers() const { return sizes_.size() - 1; }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Offsets of layer l's weight block and bias block inside params().
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer]) * static_cast<std::size_t>(sizes_[layer + 1]);
  }

  bool operator==(const Mlp&) const = default;

 private:
  std::vector<int> sizes_;
  Activation activation_ = Activation::relu;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Per-layer pre-activations and activations kept for backpropagation.
struct ForwardCache {
  std::vector<Matrix> activations;  // activations[0] is the input batch
  std::vector<Matrix> pre;          // pre[l] feeds activations[l + 1]
};

/// Batched forward pass. Throws on NaN inputs.
void forward(const Mlp& net, const Matrix& x, Matrix& out, ForwardCache* cache = nullptr);
Matrix forward(const Mlp& net, const Matrix& x, ForwardCache* cache = nullptr);
std::vector<double> forward(const Mlp& net, std::span<const double> x);

/// Gradient of sum_{r,k} dout(r, k) * output(r, k) with respect to the
/// parameters, using the cache of the forward pass that produced output.
std::vector<double> backprop(const Mlp& net, const ForwardCache& cache, const Matrix& dout);

/// Gradient of (1/2) mean_b (y_b - Q(x_b, a_b))^2 with y held constant, given
/// residual_b = y_b - Q(x_b, a_b). Only the taken action's output contributes.
std::vector<double> backward(const Mlp& net, const Matrix& x, std::span<const int> actions,
                             std::span<const double> residuals);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double lr = 6.25e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n_params, double learning_rate, double epsilon = 1e-8)
      : m(n_params, 0.0), v(n_params, 0.0), lr(learning_rate), eps(epsilon) {}
};

/// Bias-corrected Adam update of net's parameters in place.
void adam_step(Mlp& net, std::span<const double> grad, AdamState& state);

/// Frozen copy of the online parameters. Only sync_target writes to it.
struct TargetParams {
  Mlp params;
  long last_sync_step = 0;
};

TargetParams make_target(const Mlp& online);
void sync_target(const Mlp& online, TargetParams& target, long step);

/// Checkpoint as a JSON document {"layers", "activation", "params"}.
void to_json(nlohmann::json& j, const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);
void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

double l2_norm(std::span<const double> v);

}  // namespace minto::nn
