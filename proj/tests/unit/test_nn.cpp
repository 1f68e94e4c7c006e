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

#include "helpers.hpp"

#include <cmath>
#include <random>

using namespace bcmq;
using nn::DenseNet;
using nn::Head;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = u(rng);
  return m;
}

// Loss = sum(coeff .* logits); its gradient w.r.t. the logits is `coeff`.
double probe_loss(const DenseNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& coeff) {
  return (nn::forward(net, x).logits.array() * coeff.array()).sum();
}

double& parameter(DenseNet& net, std::size_t layer, bool bias, Eigen::Index r, Eigen::Index c) {
  auto& l = net.mutable_layers()[layer];
  return bias ? l.bias[r] : l.weight(r, c);
}

// Largest relative error between backward() and central differences over every parameter.
double max_gradient_error(DenseNet net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& coeff) {
  const auto cache = nn::forward(net, x);
  const auto grads = nn::backward(net, cache, coeff);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto rows = net.layers()[l].weight.rows();
    const auto cols = net.layers()[l].weight.cols();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c <= cols; ++c) {
        const bool bias = c == cols;
        double& p = parameter(net, l, bias, r, c);
        const double saved = p;
        p = saved + h;
        const double up = probe_loss(net, x, coeff);
        p = saved - h;
        const double down = probe_loss(net, x, coeff);
        p = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = bias ? grads.bias[l][r] : grads.weight[l](r, c);
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic) / scale);
      }
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("initialization") {
  const DenseNet a({8, 64, 64, 16}, Head::Linear, 5);
  const DenseNet b({8, 64, 64, 16}, Head::Linear, 5);
  const DenseNet c({8, 64, 64, 16}, Head::Linear, 6);
  CHECK(nn::max_abs_difference(a, b) == 0.0);
  CHECK(nn::max_abs_difference(a, c) > 0.0);
  CHECK(a.parameter_count() == 8 * 64 + 64 + 64 * 64 + 64 + 64 * 16 + 16);
  for (const auto& layer : a.layers()) {
    CHECK(layer.bias.isZero(0.0));
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    CHECK(layer.weight.cwiseAbs().maxCoeff() <= bound);
  }
  const DenseNet target = a;
  CHECK(nn::max_abs_difference(target, a) == 0.0);
  CHECK_ERROR_KIND(DenseNet({8}, Head::Linear, 1), ErrorKind::InvalidConfig);
  CHECK_ERROR_KIND(DenseNet({8, 0, 4}, Head::Linear, 1), ErrorKind::InvalidConfig);
}

TEST_CASE("forward pass") {
  DenseNet q({3, 5, 4}, Head::Linear, 1);
  for (auto& l : q.mutable_layers()) l.weight.setZero();
  CHECK(nn::predict(q, Eigen::MatrixXd::Zero(3, 2)).isZero(0.0));

  DenseNet g({3, 5, 16}, Head::LogSoftmax, 1);
  for (auto& l : g.mutable_layers()) l.weight.setZero();
  const auto flat = nn::predict(g, Eigen::MatrixXd::Ones(3, 1));
  for (int a = 0; a < 16; ++a) CHECK(flat(a, 0) == doctest::Approx(-std::log(16.0)).epsilon(1e-14));

  const DenseNet g2({3, 8, 6}, Head::LogSoftmax, 9);
  std::mt19937_64 rng(2);
  const auto lp = nn::predict(g2, random_matrix(3, 10, rng) * 5.0);
  for (int c = 0; c < 10; ++c) CHECK(std::abs(lp.col(c).array().exp().sum() - 1.0) < 1e-9);
  CHECK_ERROR_KIND(nn::predict(g2, Eigen::MatrixXd::Zero(4, 1)), ErrorKind::InvalidInput);
}

TEST_CASE("mse loss") {
  const std::vector<double> p{1.0, 2.0}, t{0.0, 3.0};
  const auto r = nn::mse_loss(p, t);
  CHECK(r.loss == 1.0);
  CHECK(r.grad[0] == 1.0);
  CHECK(r.grad[1] == -1.0);
  CHECK(nn::mse_loss(p, p).loss == 0.0);
  CHECK_ERROR_KIND(nn::mse_loss(std::vector<double>{}, std::vector<double>{}), ErrorKind::InvalidInput);

  std::vector<double> pred{0.3, -1.2, 2.5}, target{1.0, 0.4, -0.7};
  const auto g = nn::mse_loss(pred, target);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto up = pred, down = pred;
    up[i] += 1e-5;
    down[i] -= 1e-5;
    const double numeric = (nn::mse_loss(up, target).loss - nn::mse_loss(down, target).loss) / 2e-5;
    CHECK(std::abs(numeric - g.grad[static_cast<Eigen::Index>(i)]) / std::abs(numeric) < 1e-6);
  }
}

TEST_CASE("nll loss") {
  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(16, 3, -std::log(16.0));
  const std::vector<int> acts{0, 5, 15};
  CHECK(nn::nll_loss(uniform, acts).loss == doctest::Approx(std::log(16.0)).epsilon(1e-14));
  CHECK(std::log(16.0) == doctest::Approx(2.7726).epsilon(1e-4));

  Eigen::MatrixXd sure = Eigen::MatrixXd::Constant(4, 1, -1e9);
  sure(2, 0) = 0.0;
  CHECK(nn::nll_loss(sure, std::vector<int>{2}).loss == 0.0);
  CHECK_ERROR_KIND(nn::nll_loss(sure, std::vector<int>{4}), ErrorKind::InvalidInput);

  std::mt19937_64 rng(3);
  Eigen::MatrixXd logits = random_matrix(5, 4, rng) * 3.0;
  const std::vector<int> a{1, 0, 4, 2};
  const auto r = nn::nll_loss(nn::log_softmax(logits), a);
  for (int i = 0; i < 5; ++i) {
    for (int c = 0; c < 4; ++c) {
      Eigen::MatrixXd up = logits, down = logits;
      up(i, c) += 1e-5;
      down(i, c) -= 1e-5;
      const double numeric =
          (nn::nll_loss(nn::log_softmax(up), a).loss - nn::nll_loss(nn::log_softmax(down), a).loss) / 2e-5;
      CHECK(std::abs(numeric - r.grad_logits(i, c)) / std::abs(numeric) < 1e-6);
    }
  }
}

TEST_CASE("backward matches central differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    const DenseNet net({6, 10, 8, 5}, Head::Linear, 100 + static_cast<std::uint64_t>(trial));
    const auto x = random_matrix(6, 4, rng);
    const auto coeff = random_matrix(5, 4, rng);
    CHECK(max_gradient_error(net, x, coeff) < 1e-4);
  }
}

TEST_CASE("backward edge cases") {
  std::mt19937_64 rng(4);
  DenseNet net({3, 4, 2}, Head::Linear, 2);
  const auto x = random_matrix(3, 2, rng);
  const auto cache = nn::forward(net, x);
  const auto zero = nn::backward(net, cache, Eigen::MatrixXd::Zero(2, 2));
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(zero.weight[l].isZero(0.0));
    CHECK(zero.bias[l].isZero(0.0));
  }

  // hidden unit 0 is forced negative for every input: its incoming weights get no gradient
  DenseNet dead = net;
  dead.mutable_layers()[0].weight.row(0).setZero();
  dead.mutable_layers()[0].bias[0] = -1.0;
  const auto dc = nn::forward(dead, x);
  const auto dg = nn::backward(dead, dc, Eigen::MatrixXd::Ones(2, 2));
  CHECK(dg.weight[0].row(0).isZero(0.0));
  CHECK(dg.bias[0][0] == 0.0);
  CHECK(dg.weight[1].col(0).isZero(0.0));

  // a cache outlives a parameter change
  const auto stale = nn::forward(net, x);
  net.mutable_layers()[1].bias[0] += 1.0;
  CHECK_ERROR_KIND(nn::backward(net, stale, Eigen::MatrixXd::Ones(2, 2)), ErrorKind::InvalidState);
}

TEST_CASE("adam") {
  for (double scale : {1e-3, 1.0, 1e3}) {
    DenseNet net({2, 3}, Head::Linear, 1);
    const DenseNet before = net;
    auto state = nn::make_adam(net, 1e-2);
    auto g = nn::Gradients::zeros_like(net);
    g.weight[0].setConstant(scale);
    g.weight[0](0, 0) = -scale;
    nn::adam_step(net, g, state);
    CHECK(state.step == 1);
    const Eigen::MatrixXd delta = net.layers()[0].weight - before.layers()[0].weight;
    CHECK(delta(0, 0) == doctest::Approx(1e-2).epsilon(1e-5));
    CHECK(delta(2, 1) == doctest::Approx(-1e-2).epsilon(1e-5));
    CHECK(net.layers()[0].bias.isZero(0.0));
  }
  DenseNet a({2, 3}, Head::Linear, 4), b({2, 3}, Head::Linear, 4);
  auto sa = nn::make_adam(a, 1e-3), sb = nn::make_adam(b, 1e-3);
  DenseNet still({2, 3}, Head::Linear, 4);
  auto ss = nn::make_adam(still, 1e-3);
  nn::adam_step(still, nn::Gradients::zeros_like(still), ss);
  CHECK(nn::max_abs_difference(still, b) == 0.0);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5; ++i) {
    auto g = nn::Gradients::zeros_like(a);
    g.weight[0] = random_matrix(3, 2, rng);
    nn::adam_step(a, g, sa);
    nn::adam_step(b, g, sb);
  }
  CHECK(nn::max_abs_difference(a, b) == 0.0);
  DenseNet other({3, 3}, Head::Linear, 1);
  CHECK_ERROR_KIND(nn::adam_step(other, nn::Gradients::zeros_like(a), sa), ErrorKind::InvalidInput);
}

TEST_CASE("soft update") {
  DenseNet target({2, 2}, Head::Linear, 1);
  DenseNet online({2, 2}, Head::Linear, 2);
  const DenseNet orig = target;
  nn::soft_update(target, online, 1.0);
  CHECK(nn::max_abs_difference(target, orig) == 0.0);
  nn::soft_update(target, online, 0.0);
  CHECK(nn::max_abs_difference(target, online) == 0.0);

  for (auto& l : target.mutable_layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
  for (auto& l : online.mutable_layers()) {
    l.weight.setConstant(2.0);
    l.bias.setConstant(2.0);
  }
  nn::soft_update(target, online, 0.5);
  CHECK(target.layers()[0].weight.isConstant(1.0, 0.0));
  CHECK(target.layers()[0].bias.isConstant(1.0, 0.0));
  DenseNet wrong({3, 2}, Head::Linear, 1);
  CHECK_ERROR_KIND(nn::soft_update(wrong, online, 0.5), ErrorKind::InvalidInput);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = testutil::scratch_dir("nn_ckpt");
  const DenseNet q({8, 16, 16}, Head::Linear, 3);
  const DenseNet g({8, 16, 16}, Head::LogSoftmax, 4);
  nn::save_checkpoint(dir / "c.bin", {{"algo", "bcq"}}, {{"q", &q}, {"g", &g}});
  const auto cp = nn::load_checkpoint(dir / "c.bin");
  CHECK(cp.meta.at("algo") == "bcq");
  REQUIRE(cp.nets.size() == 2);
  CHECK(nn::max_abs_difference(cp.nets.at("q"), q) == 0.0);
  CHECK(nn::max_abs_difference(cp.nets.at("g"), g) == 0.0);
  CHECK(cp.nets.at("g").head() == Head::LogSoftmax);
  std::filesystem::resize_file(dir / "c.bin", std::filesystem::file_size(dir / "c.bin") - 3);
  CHECK_ERROR_KIND(nn::load_checkpoint(dir / "c.bin"), ErrorKind::TruncatedFile);
  std::filesystem::remove_all(dir);
}

}
