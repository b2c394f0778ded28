#include "minto/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "minto/error.hpp"

namespace minto::nn {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ContractError("unknown activation '" + name + "' (expected relu|tanh)");
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation)
    : sizes_(std::move(layer_sizes)), activation_(activation) {
  require(sizes_.size() >= 2, "Mlp: need at least an input and an output layer");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    require(sizes_[l] > 0 && sizes_[l + 1] > 0, "Mlp: layer sizes must be positive");
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]) +
              static_cast<std::size_t>(sizes_[l + 1]);
  }
  params_.assign(offset, 0.0);
}

Mlp Mlp::initialized(std::vector<int> layer_sizes, Activation activation, RngStream& init) {
  Mlp net(std::move(layer_sizes), activation);
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
    const std::size_t begin = net.weight_offset(l);
    const std::size_t end = net.bias_offset(l) + static_cast<std::size_t>(net.sizes_[l + 1]);
    for (std::size_t i = begin; i < end; ++i) net.params_[i] = init.uniform(-bound, bound);
  }
  return net;
}

void forward(const Mlp& net, const Matrix& x, Matrix& out, ForwardCache* cache) {
  require(x.cols == static_cast<std::size_t>(net.input_size()), "forward: input width does not match the network");
  for (double v : x.data) {
    if (std::isnan(v)) throw NumericError("forward: NaN input");
  }
  const auto p = net.params();
  const std::size_t batch = x.rows;
  if (cache) {
    cache->activations.resize(net.n_layers() + 1);
    cache->pre.resize(net.n_layers());
    cache->activations[0] = x;
  }
  Matrix current = x;
  Matrix next;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const auto fan_in = static_cast<std::size_t>(net.layer_sizes()[l]);
    const auto fan_out = static_cast<std::size_t>(net.layer_sizes()[l + 1]);
    const double* w = p.data() + net.weight_offset(l);
    const double* b = p.data() + net.bias_offset(l);
    next.resize(batch, fan_out);
    for (std::size_t r = 0; r < batch; ++r) {
      double* o = next.data.data() + r * fan_out;
      std::copy(b, b + fan_out, o);
      const double* in = current.data.data() + r * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i) {
        const double xi = in[i];
        const double* wi = w + i * fan_out;
        for (std::size_t k = 0; k < fan_out; ++k) o[k] += xi * wi[k];
      }
    }
    const bool last = l + 1 == net.n_layers();
    if (cache) cache->pre[l] = next;
    if (!last) {
      if (net.activation() == Activation::relu) {
        for (double& v : next.data) v = v > 0.0 ? v : 0.0;
      } else {
        for (double& v : next.data) v = std::tanh(v);
      }
    }
    if (cache) cache->activations[l + 1] = next;
    std::swap(current, next);
  }
  out = std::move(current);
}

Matrix forward(const Mlp& net, const Matrix& x, ForwardCache* cache) {
  Matrix out;
  forward(net, x, out, cache);
  return out;
}

std::vector<double> forward(const Mlp& net, std::span<const double> x) {
  Matrix in(1, x.size());
  std::copy(x.begin(), x.end(), in.data.begin());
  return forward(net, in).data;
}

std::vector<double> backprop(const Mlp& net, const ForwardCache& cache, const Matrix& dout) {
  require(cache.activations.size() == net.n_layers() + 1, "backprop: cache does not match the network");
  const std::size_t batch = dout.rows;
  require(dout.cols == static_cast<std::size_t>(net.output_size()) && cache.activations[0].rows == batch,
          "backprop: output gradient shape mismatch");
  const auto p = net.params();
  std::vector<double> grad(net.param_count(), 0.0);
  Matrix delta = dout;  // gradient w.r.t. pre-activation of the current layer
  for (std::size_t l = net.n_layers(); l-- > 0;) {
    const auto fan_in = static_cast<std::size_t>(net.layer_sizes()[l]);
    const auto fan_out = static_cast<std::size_t>(net.layer_sizes()[l + 1]);
    const Matrix& a_prev = cache.activations[l];
    double* gw = grad.data() + net.weight_offset(l);
    double* gb = grad.data() + net.bias_offset(l);
    for (std::size_t r = 0; r < batch; ++r) {
      const double* d = delta.data.data() + r * fan_out;
      const double* a = a_prev.data.data() + r * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i) {
        const double ai = a[i];
        double* gwi = gw + i * fan_out;
        for (std::size_t k = 0; k < fan_out; ++k) gwi[k] += ai * d[k];
      }
      for (std::size_t k = 0; k < fan_out; ++k) gb[k] += d[k];
    }
    if (l == 0) break;
    const double* w = p.data() + net.weight_offset(l);
    Matrix prev(batch, fan_in);
    const Matrix& pre_prev = cache.pre[l - 1];
    const Matrix& act_prev = cache.activations[l];
    for (std::size_t r = 0; r < batch; ++r) {
      const double* d = delta.data.data() + r * fan_out;
      for (std::size_t i = 0; i < fan_in; ++i) {
        const double* wi = w + i * fan_out;
        double s = 0.0;
        for (std::size_t k = 0; k < fan_out; ++k) s += wi[k] * d[k];
        double deriv;
        if (net.activation() == Activation::relu) {
          deriv = pre_prev(r, i) > 0.0 ? 1.0 : 0.0;
        } else {
          const double t = act_prev(r, i);
          deriv = 1.0 - t * t;
        }
        prev(r, i) = s * deriv;
      }
    }
    delta = std::move(prev);
  }
  return grad;
}

std::vector<double> backward(const Mlp& net, const Matrix& x, std::span<const int> actions,
                             std::span<const double> residuals) {
  require(x.rows > 0, "backward: empty batch");
  require(actions.size() == x.rows && residuals.size() == x.rows, "backward: batch size mismatch");
  ForwardCache cache;
  forward(net, x, &cache);
  Matrix dout(x.rows, static_cast<std::size_t>(net.output_size()));
  const double scale = 1.0 / static_cast<double>(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    require(actions[r] >= 0 && actions[r] < net.output_size(), "backward: action out of range");
    dout(r, static_cast<std::size_t>(actions[r])) = -residuals[r] * scale;
  }
  return backprop(net, cache, dout);
}

void adam_step(Mlp& net, std::span<const double> grad, AdamState& state) {
  const std::size_t n = net.param_count();
  require(grad.size() == n && state.m.size() == n && state.v.size() == n, "adam_step: shape mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto p = net.params();
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

TargetParams make_target(const Mlp& online) { return {online, 0}; }

void sync_target(const Mlp& online, TargetParams& target, long step) {
  target.params = online;
  target.last_sync_step = step;
}

void to_json(nlohmann::json& j, const Mlp& net) {
  const auto p = net.params();
  j = nlohmann::json{{"layers", net.layer_sizes()},
                     {"activation", to_string(net.activation())},
                     {"params", std::vector<double>(p.begin(), p.end())}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net(j.at("layers").get<std::vector<int>>(), activation_from_string(j.at("activation").get<std::string>()));
  const auto params = j.at("params").get<std::vector<double>>();
  require(params.size() == net.param_count(), "checkpoint: parameter count does not match the architecture header");
  std::copy(params.begin(), params.end(), net.params().begin());
  return net;
}

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  os << nlohmann::json(net).dump() << '\n';
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  return mlp_from_json(nlohmann::json::parse(is));
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace minto::nn
