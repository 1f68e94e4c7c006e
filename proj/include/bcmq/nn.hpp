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


#pragma once

#include <Eigen/Core>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

// Dense rectifier networks with hand-written reverse mode, Adam and soft
// target updates. Samples are stored column-wise: an input batch is a
// (input_dim x batch) matrix.
namespace bcmq::nn {

enum class Head {
  Linear,      // raw outputs (action values)
  LogSoftmax,  // log-probabilities over outputs (batch policy estimator)
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

class DenseNet {
public:
  DenseNet() = default;
  // Glorot-uniform weights, zero biases; deterministic in `seed`.
  DenseNet(std::vector<int> layer_dims, Head head, std::uint64_t seed);
  // Adopts existing parameters; shapes must agree with `layer_dims`.
  DenseNet(std::vector<int> layer_dims, Head head, std::vector<DenseLayer> layers);

  const std::vector<int>& layer_dims() const { return dims_; }
  Head head() const { return head_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  // Mutable access invalidates outstanding forward caches.
  std::vector<DenseLayer>& mutable_layers() {
    ++version_;
    return layers_;
  }
  std::uint64_t version() const { return version_; }

  bool same_shape(const DenseNet& other) const { return dims_ == other.dims_; }

private:
  std::vector<int> dims_;
  Head head_ = Head::Linear;
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

struct ForwardCache {
  // inputs[l] is the input to layer l (the network input for l = 0).
  std::vector<Eigen::MatrixXd> inputs;
  Eigen::MatrixXd logits;  // output of the final affine layer
  Eigen::MatrixXd output;  // logits, or their log-softmax
  const DenseNet* net = nullptr;
  std::uint64_t version = 0;
};

ForwardCache forward(const DenseNet& net, const Eigen::MatrixXd& input);
// Forward pass without keeping activations.
Eigen::MatrixXd predict(const DenseNet& net, const Eigen::MatrixXd& input);
Eigen::VectorXd predict_one(const DenseNet& net, std::span<const float> input);

// Column-wise log-softmax.
Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits);

struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static Gradients zeros_like(const DenseNet& net);
};

// Gradients of a scalar loss given dLoss/dLogits (same shape as cache.logits).
Gradients backward(const DenseNet& net, const ForwardCache& cache, const Eigen::MatrixXd& grad_logits);

struct MseResult {
  double loss = 0.0;
  Eigen::VectorXd grad;  // dLoss/dPred
};
MseResult mse_loss(std::span<const double> pred, std::span<const double> target);

struct NllResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_logits;  // (softmax - one_hot) / batch
};
NllResult nll_loss(const Eigen::MatrixXd& log_probs, std::span<const int> actions);

struct AdamState {
  Gradients first;
  Gradients second;
  std::int64_t step = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam(const DenseNet& net, double learning_rate);
void adam_step(DenseNet& net, const Gradients& grads, AdamState& state);

// target <- tau_s * target + (1 - tau_s) * online
void soft_update(DenseNet& target, const DenseNet& online, double tau_s);

// Largest absolute parameter difference; shapes must match.
double max_abs_difference(const DenseNet& a, const DenseNet& b);

struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, DenseNet> nets;
};

// Binary container of kind "checkpoint": per-net dims and head in the header,
// f64 parameters (row-major weights, then biases) in the payload.
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const DenseNet*>>& nets);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bcmq::nn
