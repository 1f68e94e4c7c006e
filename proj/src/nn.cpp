// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#include "bcmq/nn.hpp"

#include "bcmq/container.hpp"
#include "bcmq/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace bcmq::nn {

DenseNet::DenseNet(std::vector<int> layer_dims, Head head, std::uint64_t seed)
    : dims_(std::move(layer_dims)), head_(head) {
  if (dims_.size() < 2) throw Error(ErrorKind::InvalidConfig, "a dense net needs at least input and output dims");
  for (const int d : dims_) {
    if (d < 1) throw Error(ErrorKind::InvalidConfig, "layer dims must be positive, got " + std::to_string(d));
  }
  std::mt19937_64 rng(seed);
  layers_.reserve(dims_.size() - 1);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const int fan_in = dims_[l];
    const int fan_out = dims_[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    // Row-major fill keeps the draw order independent of Eigen's storage.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
    }
    layers_.push_back(std::move(layer));
  }
}

DenseNet::DenseNet(std::vector<int> layer_dims, Head head, std::vector<DenseLayer> layers)
    : dims_(std::move(layer_dims)), head_(head), layers_(std::move(layers)) {
  if (dims_.size() < 2 || layers_.size() + 1 != dims_.size()) {
    throw Error(ErrorKind::InvalidConfig, "layer count does not match layer dims");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weight.rows() != dims_[l + 1] || layers_[l].weight.cols() != dims_[l] ||
        layers_[l].bias.size() != dims_[l + 1]) {
      throw Error(ErrorKind::InvalidConfig, "layer " + std::to_string(l) + " has the wrong shape");
    }
  }
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

namespace {

void check_input(const DenseNet& net, const Eigen::MatrixXd& input) {
  if (net.layers().empty()) throw Error(ErrorKind::InvalidState, "network is not initialized");
  if (input.rows() != net.input_dim()) {
    throw Error(ErrorKind::InvalidInput, "input has " + std::to_string(input.rows()) + " rows, network expects " +
                                             std::to_string(net.input_dim()));
  }
}

}  // namespace

ForwardCache forward(const DenseNet& net, const Eigen::MatrixXd& input) {
  check_input(net, input);
  ForwardCache cache;
  cache.net = &net;
  cache.version = net.version();
  const auto& layers = net.layers();
  cache.inputs.reserve(layers.size());
  cache.inputs.push_back(input);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weight * cache.inputs.back();
    z.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) {
      cache.inputs.push_back(z.cwiseMax(0.0));
    } else {
      cache.logits = std::move(z);
    }
  }
  cache.output = net.head() == Head::LogSoftmax ? log_softmax(cache.logits) : cache.logits;
  return cache;
}

Eigen::MatrixXd predict(const DenseNet& net, const Eigen::MatrixXd& input) {
  check_input(net, input);
  const auto& layers = net.layers();
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weight * a;
    z.colwise() += layers[l].bias;
    a = (l + 1 < layers.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
  }
  return net.head() == Head::LogSoftmax ? log_softmax(a) : a;
}

Eigen::VectorXd predict_one(const DenseNet& net, std::span<const float> input) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(input.size()), 1);
  for (std::size_t i = 0; i < input.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = input[i];
  return predict(net, x).col(0);
}

Gradients Gradients::zeros_like(const DenseNet& net) {
  Gradients g;
  for (const auto& l : net.layers()) {
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

Gradients backward(const DenseNet& net, const ForwardCache& cache, const Eigen::MatrixXd& grad_logits) {
  if (cache.net != &net || cache.version != net.version() || cache.inputs.size() != net.layers().size()) {
    throw Error(ErrorKind::InvalidState, "forward cache is stale or belongs to another network");
  }
  if (grad_logits.rows() != cache.logits.rows() || grad_logits.cols() != cache.logits.cols()) {
    throw Error(ErrorKind::InvalidInput, "output gradient shape does not match the forward pass");
  }
  const auto& layers = net.layers();
  Gradients g;
  g.weight.resize(layers.size());
  g.bias.resize(layers.size());
  Eigen::MatrixXd delta = grad_logits;
  for (std::size_t l = layers.size(); l-- > 0;) {
    g.weight[l] = delta * cache.inputs[l].transpose();
    g.bias[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd upstream = layers[l].weight.transpose() * delta;
    // Rectifier derivative: zero wherever the unit was inactive.
    delta = upstream.cwiseProduct((cache.inputs[l].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

MseResult mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw Error(ErrorKind::InvalidInput, "prediction and target lengths differ");
  if (pred.empty()) throw Error(ErrorKind::InvalidInput, "mse over an empty batch");
  const double n = static_cast<double>(pred.size());
  MseResult r;
  r.grad.resize(static_cast<Eigen::Index>(pred.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += d * d;
    r.grad[static_cast<Eigen::Index>(i)] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

NllResult nll_loss(const Eigen::MatrixXd& log_probs, std::span<const int> actions) {
  if (log_probs.cols() != static_cast<Eigen::Index>(actions.size())) {
    throw Error(ErrorKind::InvalidInput, "one action per sample is required");
  }
  if (actions.empty()) throw Error(ErrorKind::InvalidInput, "nll over an empty batch");
  const double n = static_cast<double>(actions.size());
  NllResult r;
  r.grad_logits = log_probs.array().exp().matrix() / n;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int a = actions[i];
    if (a < 0 || a >= log_probs.rows()) {
      throw Error(ErrorKind::InvalidInput, "action index " + std::to_string(a) + " out of range");
    }
    const auto c = static_cast<Eigen::Index>(i);
    r.loss -= log_probs(a, c);
    r.grad_logits(a, c) -= 1.0 / n;
  }
  r.loss /= n;
  return r;
}

AdamState make_adam(const DenseNet& net, double learning_rate) {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning rate must be positive");
  AdamState s;
  s.first = Gradients::zeros_like(net);
  s.second = Gradients::zeros_like(net);
  s.learning_rate = learning_rate;
  return s;
}

namespace {

bool same_shape(const DenseNet& net, const Gradients& g) {
  const auto& layers = net.layers();
  if (g.weight.size() != layers.size() || g.bias.size() != layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (g.weight[l].rows() != layers[l].weight.rows() || g.weight[l].cols() != layers[l].weight.cols() ||
        g.bias[l].size() != layers[l].bias.size()) {
      return false;
    }
  }
  return true;
}

template <typename Param, typename Grad>
void adam_update(Param& p, const Grad& g, Grad& m, Grad& v, const AdamState& s, double c1, double c2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  p.array() -= s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
}

}  // namespace

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state) {
  if (!same_shape(net, grads) || !same_shape(net, state.first) || !same_shape(net, state.second)) {
    throw Error(ErrorKind::InvalidInput, "gradient or optimizer state shape does not match the network");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam_update(layers[l].weight, grads.weight[l], state.first.weight[l], state.second.weight[l], state, c1, c2);
    adam_update(layers[l].bias, grads.bias[l], state.first.bias[l], state.second.bias[l], state, c1, c2);
  }
}

void soft_update(DenseNet& target, const DenseNet& online, double tau_s) {
  if (!target.same_shape(online)) throw Error(ErrorKind::InvalidInput, "soft update between differently shaped nets");
  if (!(tau_s >= 0.0 && tau_s <= 1.0)) throw Error(ErrorKind::InvalidInput, "tau_s must lie in [0, 1]");
  if (tau_s == 1.0) return;
  auto& dst = target.mutable_layers();
  const auto& src = online.layers();
  for (std::size_t l = 0; l < dst.size(); ++l) {
    dst[l].weight = tau_s * dst[l].weight + (1.0 - tau_s) * src[l].weight;
    dst[l].bias = tau_s * dst[l].bias + (1.0 - tau_s) * src[l].bias;
  }
}

double max_abs_difference(const DenseNet& a, const DenseNet& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::InvalidInput, "comparing differently shaped nets");
  double m = 0.0;
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    m = std::max(m, (a.layers()[l].weight - b.layers()[l].weight).cwiseAbs().maxCoeff());
    m = std::max(m, (a.layers()[l].bias - b.layers()[l].bias).cwiseAbs().maxCoeff());
  }
  return m;
}

namespace {

std::string head_name(Head h) { return h == Head::LogSoftmax ? "log_softmax" : "linear"; }

Head head_from_name(const std::string& s) {
  if (s == "linear") return Head::Linear;
  if (s == "log_softmax") return Head::LogSoftmax;
  throw Error(ErrorKind::Format, "unknown network head '" + s + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const DenseNet*>>& nets) {
  container::Writer w;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [name, net] : nets) {
    entries.push_back({{"name", name}, {"layer_dims", net->layer_dims()}, {"head", head_name(net->head())}});
    for (const auto& layer : net->layers()) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.f64(layer.weight(r, c));
      }
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) w.f64(layer.bias[r]);
    }
  }
  nlohmann::json header{{"kind", "checkpoint"}, {"meta", meta}, {"nets", entries}};
  container::write(path, std::move(header), w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto blob = container::read(path, "checkpoint");
  Checkpoint cp;
  container::Reader r(blob.payload);
  try {
    cp.meta = blob.header.at("meta");
    for (const auto& entry : blob.header.at("nets")) {
      const auto dims = entry.at("layer_dims").get<std::vector<int>>();
      if (dims.size() < 2) throw Error(ErrorKind::Format, path.string() + ": degenerate layer dims");
      std::vector<DenseLayer> layers;
      for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (dims[l] < 1 || dims[l + 1] < 1) throw Error(ErrorKind::Format, path.string() + ": non-positive layer dim");
        DenseLayer layer{Eigen::MatrixXd(dims[l + 1], dims[l]), Eigen::VectorXd(dims[l + 1])};
        for (int row = 0; row < dims[l + 1]; ++row) {
          for (int col = 0; col < dims[l]; ++col) layer.weight(row, col) = r.f64();
        }
        for (int row = 0; row < dims[l + 1]; ++row) layer.bias[row] = r.f64();
        layers.push_back(std::move(layer));
      }
      cp.nets.emplace(entry.at("name").get<std::string>(),
                      DenseNet(dims, head_from_name(entry.at("head").get<std::string>()), std::move(layers)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": checkpoint header: " + e.what());
  }
  if (r.remaining() != 0) throw Error(ErrorKind::Format, path.string() + ": unused checkpoint payload bytes");
  return cp;
}

}  // namespace bcmq::nn
