/*
 * Copyright 2026 The mtransfer Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mtransfer/net.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"

namespace mtransfer {
namespace {

NetConfig SmallConfig(bool multimodal = true) {
  NetConfig c;
  c.widths = {5, 4, 3, 4, 3, 5};
  c.multimodal = multimodal;
  c.epochs_pretrain = 3;
  c.epochs_finetune = 5;
  c.batch_size = 8;
  return c;
}

const InputDims kDims{6, 5, 7};

FeatureBatch RandomBatch(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureBatch b;
  b.pc = Eigen::MatrixXd::NullaryExpr(6, n, [&] { return u(rng) < 0.3 ? 1.0 : 0.0; });
  b.lang = Eigen::MatrixXd::NullaryExpr(5, n, [&] { return std::floor(3 * u(rng)); });
  b.traj = Eigen::MatrixXd::NullaryExpr(7, n, [&] { return u(rng) - 0.5; });
  return b;
}

Eigen::VectorXd Labels(Eigen::Index n, std::mt19937_64& rng) {
  std::bernoulli_distribution d(0.4);
  return Eigen::VectorXd::NullaryExpr(n, [&] { return d(rng) ? 1.0 : 0.0; });
}

MultimodalNet RandomNet(bool multimodal, std::uint64_t seed) {
  MultimodalNet net(kDims, SmallConfig(multimodal));
  std::mt19937_64 rng(seed);
  net.initialize(rng);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& b : net.blocks()) b.bias = b.bias.unaryExpr([&](double) { return n(rng); });
  return net;
}

double RelError(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b)); }

// Loss evaluated through the same masked pass, independent of backprop.
double MaskedLoss(const MultimodalNet& net, const FeatureBatch& x, const Eigen::VectorXd& y,
                  const std::vector<Eigen::MatrixXd>* masks) {
  double loss = 0.0;
  nll_gradient(net, x, y, &loss, masks);
  return loss;
}

void CheckNllGradient(bool multimodal, bool with_masks) {
  std::mt19937_64 rng(11);
  auto net = RandomNet(multimodal, 3);
  const auto x = RandomBatch(9, rng);
  const auto y = Labels(9, rng);
  std::vector<Eigen::MatrixXd> masks;
  if (with_masks) {
    masks.resize(static_cast<std::size_t>(net.node_count()));
    for (std::size_t k = 0; k + 1 < net.blocks().size(); ++k) {
      masks[static_cast<std::size_t>(MultimodalNet::node_of(k))] =
          detail::bernoulli_mask(net.blocks()[k].out_size(), 9, 0.6, rng);
    }
  }
  const auto* m = with_masks ? &masks : nullptr;
  const auto grads = nll_gradient(net, x, y, nullptr, m);
  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t k = 0; k < net.blocks().size(); ++k) {
    auto& b = net.blocks()[k];
    for (Eigen::Index i = 0; i < b.weight.size(); ++i) {
      const double w0 = b.weight.data()[i];
      b.weight.data()[i] = w0 + eps;
      const double up = MaskedLoss(net, x, y, m);
      b.weight.data()[i] = w0 - eps;
      const double down = MaskedLoss(net, x, y, m);
      b.weight.data()[i] = w0;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grads[k].weight.data()[i];
      if (std::abs(numeric) + std::abs(analytic) > 1e-7) worst = std::max(worst, RelError(numeric, analytic));
    }
    for (Eigen::Index i = 0; i < b.bias.size(); ++i) {
      const double b0 = b.bias(i);
      b.bias(i) = b0 + eps;
      const double up = MaskedLoss(net, x, y, m);
      b.bias(i) = b0 - eps;
      const double down = MaskedLoss(net, x, y, m);
      b.bias(i) = b0;
      const double numeric = (up - down) / (2 * eps);
      if (std::abs(numeric) + std::abs(grads[k].bias(i)) > 1e-7) {
        worst = std::max(worst, RelError(numeric, grads[k].bias(i)));
      }
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(NllGradient, MatchesFiniteDifferencesMultimodal) { CheckNllGradient(true, false); }
TEST(NllGradient, MatchesFiniteDifferencesUnimodal) { CheckNllGradient(false, false); }
TEST(NllGradient, MatchesFiniteDifferencesWithDropoutMasks) { CheckNllGradient(true, true); }

TEST(NllGradient, LossMatchesDirectComputation) {
  std::mt19937_64 rng(4);
  const auto net = RandomNet(true, 8);
  const auto x = RandomBatch(12, rng);
  const auto y = Labels(12, rng);
  double loss = 0.0;
  nll_gradient(net, x, y, &loss);
  const auto t = net.trace(x, PassMode::raw);
  double expected = 0.0;
  for (Eigen::Index i = 0; i < 12; ++i) {
    const double p = t.nodes.back()(0, i);
    expected -= y(i) * std::log(p) + (1 - y(i)) * std::log(1 - p);
  }
  EXPECT_NEAR(loss, expected / 12, 1e-10);
}

TEST(AutoencoderGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 0.5);
  Eigen::MatrixXd w = Eigen::MatrixXd::NullaryExpr(4, 6, [&] { return n(rng); });
  Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(4, [&] { return n(rng); });
  Eigen::VectorXd c = Eigen::VectorXd::NullaryExpr(6, [&] { return 0.2 + std::abs(n(rng)); });
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(6, 10, [&] { return std::abs(n(rng)); });
  const Eigen::MatrixXd noisy = x.cwiseProduct(detail::bernoulli_mask(6, 10, 0.7, rng));
  const double lambda = 0.01;
  const auto g = autoencoder_gradient(w, b, c, noisy, x, lambda);
  const auto loss = [&] { return autoencoder_gradient(w, b, c, noisy, x, lambda, false).loss; };
  const double eps = 1e-6;
  double worst = 0.0;
  const auto probe = [&](double& p, double analytic) {
    const double p0 = p;
    p = p0 + eps;
    const double up = loss();
    p = p0 - eps;
    const double down = loss();
    p = p0;
    const double numeric = (up - down) / (2 * eps);
    if (std::abs(numeric) + std::abs(analytic) > 1e-7) worst = std::max(worst, RelError(numeric, analytic));
  };
  for (Eigen::Index i = 0; i < w.size(); ++i) probe(w.data()[i], g.weight.data()[i]);
  for (Eigen::Index i = 0; i < b.size(); ++i) probe(b(i), g.bias(i));
  for (Eigen::Index i = 0; i < c.size(); ++i) probe(c(i), g.decoder_bias(i));
  EXPECT_LE(worst, 1e-4);
}

TEST(AutoencoderGradient, LossIncludesSparsityTerm) {
  const Eigen::MatrixXd w = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd x(2, 1);
  x << 1.0, 2.0;
  const auto g = autoencoder_gradient(w, zero, zero, x, x, 0.5, false);
  EXPECT_DOUBLE_EQ(g.reconstruction, 0.0);
  EXPECT_DOUBLE_EQ(g.loss, 1.5);
}

TEST(MaxNorm, ProjectsRowsAboveLimit) {
  auto net = RandomNet(true, 1);
  net.blocks()[0].weight.row(0).setConstant(10.0);
  net.blocks()[0].weight.row(1).setConstant(0.01);
  const Eigen::RowVectorXd small = net.blocks()[0].weight.row(1);
  net.project_max_norm();
  EXPECT_NEAR(net.blocks()[0].weight.row(0).norm(), 3.0, 1e-12);
  EXPECT_EQ(net.blocks()[0].weight.row(1), small);
  EXPECT_LE(net.max_row_norm(), 3.0 + 1e-12);
}

TEST(Forward, EvalModeScalesHiddenOutputs) {
  std::mt19937_64 rng(2);
  const auto net = RandomNet(true, 5);
  const auto x = RandomBatch(4, rng);
  const auto raw = net.trace(x, PassMode::raw);
  const auto eval = net.trace(x, PassMode::eval);
  // First-layer outputs only see inputs, so scaling is exact there.
  EXPECT_TRUE(eval.nodes[3].isApprox(0.5 * raw.nodes[3], 1e-12));
  const Eigen::VectorXd p = net.forward_batch(x);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    EXPECT_GT(p(i), 0.0);
    EXPECT_LT(p(i), 1.0);
  }
}

TEST(Forward, RejectsWrongDims) {
  const auto net = RandomNet(true, 5);
  FeatureBatch x;
  x.pc = Eigen::MatrixXd::Zero(6, 2);
  x.lang = Eigen::MatrixXd::Zero(4, 2);
  x.traj = Eigen::MatrixXd::Zero(7, 2);
  try {
    net.forward_batch(x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape_mismatch);
  }
}

TEST(Wiring, MultimodalBlocksHaveExpectedShapes) {
  const auto net = RandomNet(true, 1);
  ASSERT_EQ(net.blocks().size(), 7u);
  const auto& b = net.blocks();
  EXPECT_EQ(b[0].in_size(), 6);
  EXPECT_EQ(b[3].in_size(), 5 + 3);  // pc + traj
  EXPECT_EQ(b[4].in_size(), 4 + 3);  // lang + traj
  EXPECT_EQ(b[5].in_size(), 4 + 3);
  EXPECT_EQ(b[6].out_size(), 1);
  const auto uni = RandomNet(false, 1);
  ASSERT_EQ(uni.blocks().size(), 4u);
  EXPECT_EQ(uni.blocks()[0].in_size(), 18);
}

TEST(Config, ValidationAndDecay) {
  NetConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.learning_rate_at(0), c.learning_rate);
  EXPECT_DOUBLE_EQ(c.learning_rate_at(20), c.learning_rate / 2.0);
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = NetConfig{};
  c.widths.h3 = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Training, PretrainCurvesDecreaseAndHookSeesMaxNorm) {
  std::mt19937_64 rng(7);
  const auto x = RandomBatch(64, rng);
  auto config = SmallConfig();
  config.epochs_pretrain = 5;
  TrainingReport report;
  std::size_t calls = 0;
  double worst = 0.0;
  pretrain(x, kDims, config, &report, [&](const MultimodalNet& n) {
    ++calls;
    worst = std::max(worst, n.max_row_norm());
  });
  EXPECT_EQ(calls, report.updates);
  EXPECT_LE(worst, config.maxnorm_c + 1e-9);
  ASSERT_EQ(report.curves.size(), 6u);
  for (const auto& c : report.curves) {
    ASSERT_EQ(c.values.size(), 6u);
    EXPECT_LT(c.values.back(), c.values.front()) << c.block;
  }
}

TEST(Training, FinetuneLowersLossAndIsDeterministic) {
  std::mt19937_64 rng(8);
  auto x = RandomBatch(80, rng);
  Eigen::VectorXd y(80);
  for (Eigen::Index i = 0; i < 80; ++i) y(i) = x.traj(0, i) > 0 ? 1.0 : 0.0;
  auto config = SmallConfig();
  config.epochs_finetune = 40;
  config.dropout_rate = 0.1;
  config.learning_rate = 0.1;
  const auto run = [&] {
    TrainingReport r;
    auto net = finetune(pretrain(x, kDims, config, &r), x, y, config, &r);
    return std::make_pair(net, r);
  };
  const auto [a, ra] = run();
  const auto [b, rb] = run();
  const auto& nll_curve = ra.curves.back().values;
  EXPECT_LT(nll_curve.back(), nll_curve.front());
  EXPECT_FALSE(ra.degenerate_labels);
  for (std::size_t k = 0; k < a.blocks().size(); ++k) {
    EXPECT_EQ(a.blocks()[k].weight, b.blocks()[k].weight);
    EXPECT_EQ(a.blocks()[k].bias, b.blocks()[k].bias);
  }
}

TEST(Training, DegenerateLabelsAreFlagged) {
  std::mt19937_64 rng(8);
  const auto x = RandomBatch(16, rng);
  TrainingReport r;
  auto config = SmallConfig();
  finetune(pretrain(x, kDims, config), x, Eigen::VectorXd::Ones(16), config, &r);
  EXPECT_TRUE(r.degenerate_labels);
}

TEST(Training, HugeLearningRateDiverges) {
  std::mt19937_64 rng(9);
  const auto x = RandomBatch(32, rng);
  auto y = Labels(32, rng);
  auto config = SmallConfig();
  config.maxnorm_c = 1e300;
  config.learning_rate = 1e200;
  try {
    finetune(pretrain(x, kDims, SmallConfig()), x, y, config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::divergence);
  }
}

TEST(Training, EmptyDataRejected) {
  EXPECT_THROW(pretrain(FeatureBatch{}, kDims, SmallConfig()), Error);
}

}  // namespace
}  // namespace mtransfer
