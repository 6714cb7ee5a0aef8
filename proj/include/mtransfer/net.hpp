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

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mtransfer/error.hpp"
#include "mtransfer/features.hpp"

namespace mtransfer {

struct LayerWidths {
  std::size_t h1_pc = 250;
  std::size_t h1_lang = 150;
  std::size_t h1_traj = 100;
  std::size_t h2_pt = 200;
  std::size_t h2_lt = 200;
  std::size_t h3 = 150;

  friend bool operator==(const LayerWidths&, const LayerWidths&) = default;
};

struct NetConfig {
  LayerWidths widths;
  // false: a single dense trunk over the concatenated modalities.
  bool multimodal = true;
  double corruption_p = 0.3;  // probability of zeroing an input entry
  double sparsity_lambda = 1e-4;
  double maxnorm_c = 3.0;
  double dropout_rate = 0.5;
  double learning_rate = 0.01;
  // Pretraining step, divided per block by the mean squared norm of the
  // block's input so every layer sees a comparable effective rate.
  double pretrain_learning_rate = 0.05;
  double lr_decay = 0.05;  // lr / (1 + lr_decay * epoch)
  std::size_t batch_size = 32;
  std::size_t epochs_pretrain = 10;
  std::size_t epochs_finetune = 60;
  std::uint64_t rng_seed = 1;

  void validate() const {
    const auto& w = widths;
    const bool ok = w.h1_pc > 0 && w.h1_lang > 0 && w.h1_traj > 0 && w.h2_pt > 0 &&
                    w.h2_lt > 0 && w.h3 > 0 && corruption_p >= 0.0 && corruption_p < 1.0 &&
                    sparsity_lambda >= 0.0 && maxnorm_c > 0.0 && dropout_rate >= 0.0 &&
                    dropout_rate < 1.0 && learning_rate > 0.0 && pretrain_learning_rate > 0.0 && lr_decay >= 0.0 &&
                    batch_size > 0 && epochs_pretrain > 0 && epochs_finetune > 0;
    if (!ok) throw Error(ErrorCode::invalid_argument, "invalid network configuration");
  }

  double learning_rate_at(std::size_t epoch) const {
    return learning_rate / (1.0 + lr_decay * static_cast<double>(epoch));
  }
  double pretrain_learning_rate_at(std::size_t epoch) const {
    return pretrain_learning_rate / (1.0 + lr_decay * static_cast<double>(epoch));
  }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct InputDims {
  std::size_t pc = kPointCloudFeatureSize;
  std::size_t lang = 0;
  std::size_t traj = 0;

  friend bool operator==(const InputDims&, const InputDims&) = default;
};

enum class Activation { relu, logistic };

/// One weight block. Its input is the vertical concatenation of the
/// `sources` node outputs; nodes 0..2 are the pc, lang and traj inputs and
/// node 3 + k is the output of block k.
struct Block {
  std::string name;
  int layer = 1;  // 1..3 hidden, 4 output
  std::vector<int> sources;
  Activation activation = Activation::relu;
  Eigen::MatrixXd weight;  // out x in, one row per unit
  Eigen::VectorXd bias;

  Eigen::Index in_size() const { return weight.cols(); }
  Eigen::Index out_size() const { return weight.rows(); }
};

inline constexpr int kInputNodes = 3;
inline constexpr int kOutputLayer = 4;

/// Columns are examples.
struct FeatureBatch {
  Eigen::MatrixXd pc;
  Eigen::MatrixXd lang;
  Eigen::MatrixXd traj;

  Eigen::Index size() const { return pc.cols(); }

  static FeatureBatch from(const std::vector<FeatureVector>& v) {
    FeatureBatch b;
    if (v.empty()) return b;
    const auto n = static_cast<Eigen::Index>(v.size());
    b.pc.resize(v[0].pc.size(), n);
    b.lang.resize(v[0].lang.size(), n);
    b.traj.resize(v[0].traj.size(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& f = v[static_cast<std::size_t>(i)];
      if (f.pc.size() != b.pc.rows() || f.lang.size() != b.lang.rows() ||
          f.traj.size() != b.traj.rows()) {
        throw Error(ErrorCode::shape_mismatch, "feature vectors have inconsistent dimensions");
      }
      b.pc.col(i) = f.pc;
      b.lang.col(i) = f.lang;
      b.traj.col(i) = f.traj;
    }
    return b;
  }

  FeatureBatch columns(const std::vector<Eigen::Index>& idx) const {
    return {pc(Eigen::all, idx), lang(Eigen::all, idx), traj(Eigen::all, idx)};
  }
};

/// How hidden outputs are treated in a forward pass.
enum class PassMode {
  raw,     // plain activations (training without dropout, pretraining)
  masked,  // multiply by the supplied dropout masks
  eval,    // weight scaling: multiply by (1 - dropout_rate)
};

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> nodes;  // node outputs after masking/scaling
  std::vector<Eigen::MatrixXd> pre;    // per-block pre-activations
};

/// Three-modality network: per-modality layer, two pairwise layers
/// (pc+traj, lang+traj), a joint layer and a logistic output.
class MultimodalNet {
 public:
  MultimodalNet() = default;

  /// Builds the wiring with zero parameters.
  MultimodalNet(const InputDims& inputs, const NetConfig& config)
      : inputs_(inputs), config_(config) {
    config_.validate();
    if (inputs.pc == 0 || inputs.lang == 0 || inputs.traj == 0) {
      throw Error(ErrorCode::shape_mismatch, "all three input modalities need a width");
    }
    const auto& w = config_.widths;
    if (config_.multimodal) {
      add("h1_pc", 1, {0}, w.h1_pc);
      add("h1_lang", 1, {1}, w.h1_lang);
      add("h1_traj", 1, {2}, w.h1_traj);
      add("h2_pc_traj", 2, {3, 5}, w.h2_pt);
      add("h2_lang_traj", 2, {4, 5}, w.h2_lt);
      add("h3", 3, {6, 7}, w.h3);
      add("output", kOutputLayer, {8}, 1, Activation::logistic);
    } else {
      add("h1", 1, {0, 1, 2}, w.h1_pc + w.h1_lang + w.h1_traj);
      add("h2", 2, {3}, w.h2_pt + w.h2_lt);
      add("h3", 3, {4}, w.h3);
      add("output", kOutputLayer, {5}, 1, Activation::logistic);
    }
  }

  /// Uniform Glorot initialization followed by max-norm projection.
  void initialize(std::mt19937_64& rng) {
    for (auto& b : blocks_) {
      const double r = std::sqrt(6.0 / static_cast<double>(b.in_size() + b.out_size()));
      std::uniform_real_distribution<double> u(-r, r);
      for (Eigen::Index i = 0; i < b.weight.size(); ++i) b.weight.data()[i] = u(rng);
      b.bias.setZero();
    }
    project_max_norm();
  }

  const InputDims& inputs() const { return inputs_; }
  const NetConfig& config() const { return config_; }
  NetConfig& mutable_config() { return config_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::vector<Block>& blocks() { return blocks_; }

  int node_count() const { return kInputNodes + static_cast<int>(blocks_.size()); }
  Eigen::Index node_size(int node) const {
    switch (node) {
      case 0: return static_cast<Eigen::Index>(inputs_.pc);
      case 1: return static_cast<Eigen::Index>(inputs_.lang);
      case 2: return static_cast<Eigen::Index>(inputs_.traj);
      default: return blocks_[static_cast<std::size_t>(node - kInputNodes)].out_size();
    }
  }
  static int node_of(std::size_t block) { return kInputNodes + static_cast<int>(block); }

  void check(const FeatureBatch& x) const {
    if (x.pc.rows() != node_size(0) || x.lang.rows() != node_size(1) ||
        x.traj.rows() != node_size(2) || x.lang.cols() != x.pc.cols() ||
        x.traj.cols() != x.pc.cols()) {
      throw Error(ErrorCode::shape_mismatch,
                  "features do not match network input dims (" + std::to_string(inputs_.pc) +
                      ", " + std::to_string(inputs_.lang) + ", " +
                      std::to_string(inputs_.traj) + ")");
    }
  }

  Eigen::MatrixXd gather(const std::vector<Eigen::MatrixXd>& nodes, const Block& b) const {
    Eigen::MatrixXd in(b.in_size(), nodes[0].cols());
    Eigen::Index row = 0;
    for (int s : b.sources) {
      const auto& n = nodes[static_cast<std::size_t>(s)];
      in.middleRows(row, n.rows()) = n;
      row += n.rows();
    }
    return in;
  }

  /// Full pass. `masks` is indexed by node and only read in masked mode.
  ForwardTrace trace(const FeatureBatch& x, PassMode mode,
                     const std::vector<Eigen::MatrixXd>* masks = nullptr,
                     int up_to_layer = kOutputLayer) const {
    check(x);
    ForwardTrace t;
    t.nodes.resize(static_cast<std::size_t>(node_count()));
    t.pre.resize(blocks_.size());
    t.nodes[0] = x.pc;
    t.nodes[1] = x.lang;
    t.nodes[2] = x.traj;
    const double keep = 1.0 - config_.dropout_rate;
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const Block& b = blocks_[k];
      if (b.layer > up_to_layer) break;
      Eigen::MatrixXd z = b.weight * gather(t.nodes, b);
      z.colwise() += b.bias;
      auto& out = t.nodes[static_cast<std::size_t>(node_of(k))];
      if (b.activation == Activation::logistic) {
        out = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      } else {
        out = z.cwiseMax(0.0);
        if (mode == PassMode::masked && masks) {
          out = out.cwiseProduct((*masks)[static_cast<std::size_t>(node_of(k))]);
        } else if (mode == PassMode::eval) {
          out *= keep;
        }
      }
      t.pre[k] = std::move(z);
    }
    return t;
  }

  /// Probabilities of a good match, inference mode.
  Eigen::VectorXd forward_batch(const FeatureBatch& x) const {
    auto t = trace(x, PassMode::eval);
    return t.nodes.back().row(0).transpose();
  }

  double forward(const FeatureVector& f) const {
    return forward_batch(FeatureBatch::from({f}))(0);
  }

  /// Rescales every weight row to norm <= maxnorm_c.
  void project_max_norm() {
    for (auto& b : blocks_) {
      for (Eigen::Index r = 0; r < b.weight.rows(); ++r) {
        const double n = b.weight.row(r).norm();
        if (n > config_.maxnorm_c) b.weight.row(r) *= config_.maxnorm_c / n;
      }
    }
  }

  double max_row_norm() const {
    double m = 0.0;
    for (const auto& b : blocks_) {
      if (b.weight.size() > 0) m = std::max(m, b.weight.rowwise().norm().maxCoeff());
    }
    return m;
  }

  bool all_finite() const {
    return std::all_of(blocks_.begin(), blocks_.end(), [](const Block& b) {
      return b.weight.allFinite() && b.bias.allFinite();
    });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += static_cast<std::size_t>(b.weight.size() + b.bias.size());
    return n;
  }

 private:
  void add(std::string name, int layer, std::vector<int> sources, std::size_t width,
           Activation act = Activation::relu) {
    Eigen::Index in = 0;
    for (int s : sources) in += node_size(s);
    Block b;
    b.name = std::move(name);
    b.layer = layer;
    b.sources = std::move(sources);
    b.activation = act;
    b.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(width), in);
    b.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
    blocks_.push_back(std::move(b));
  }

  InputDims inputs_;
  NetConfig config_;
  std::vector<Block> blocks_;
};

struct BlockGradient {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Mean negative log-likelihood of `labels` (0/1) and its gradient with
/// respect to every block. With `masks` the hidden outputs are dropped
/// exactly as during fine-tuning; without, no dropout is applied.
inline std::vector<BlockGradient> nll_gradient(const MultimodalNet& net, const FeatureBatch& x,
                                               const Eigen::VectorXd& labels, double* loss,
                                               const std::vector<Eigen::MatrixXd>* masks = nullptr) {
  const Eigen::Index n = x.size();
  if (labels.size() != n) throw Error(ErrorCode::shape_mismatch, "label count mismatch");
  const auto t = net.trace(x, masks ? PassMode::masked : PassMode::raw, masks);
  const auto& blocks = net.blocks();
  const Eigen::RowVectorXd z = t.pre.back().row(0);
  if (loss) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // softplus(z) - y z, computed stably
      const double v = z(i);
      const double sp = v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
      s += sp - labels(i) * v;
    }
    *loss = s / static_cast<double>(n);
  }

  std::vector<BlockGradient> grads(blocks.size());
  std::vector<Eigen::MatrixXd> d_nodes(static_cast<std::size_t>(net.node_count()));
  for (std::size_t k = blocks.size(); k-- > 0;) {
    const Block& b = blocks[k];
    const auto node = static_cast<std::size_t>(MultimodalNet::node_of(k));
    Eigen::MatrixXd delta;
    if (b.activation == Activation::logistic) {
      delta = (t.nodes[node] - labels.transpose()) / static_cast<double>(n);
    } else {
      if (d_nodes[node].size() == 0) {
        grads[k] = {Eigen::MatrixXd::Zero(b.out_size(), b.in_size()),
                    Eigen::VectorXd::Zero(b.out_size())};
        continue;
      }
      delta = d_nodes[node];
      if (masks) delta = delta.cwiseProduct((*masks)[node]);
      delta = delta.cwiseProduct(
          t.pre[k].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    }
    const Eigen::MatrixXd in = net.gather(t.nodes, b);
    grads[k].weight = delta * in.transpose();
    grads[k].bias = delta.rowwise().sum();
    const Eigen::MatrixXd d_in = b.weight.transpose() * delta;
    Eigen::Index row = 0;
    for (int s : b.sources) {
      const auto src = static_cast<std::size_t>(s);
      const Eigen::Index rows = net.node_size(s);
      if (s >= kInputNodes) {
        if (d_nodes[src].size() == 0) {
          d_nodes[src] = d_in.middleRows(row, rows);
        } else {
          d_nodes[src] += d_in.middleRows(row, rows);
        }
      }
      row += rows;
    }
  }
  return grads;
}

inline double nll(const MultimodalNet& net, const FeatureBatch& x, const Eigen::VectorXd& labels) {
  const Eigen::VectorXd p = net.forward_batch(x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double q = std::clamp(labels(i) > 0.5 ? p(i) : 1.0 - p(i), 1e-300, 1.0);
    s -= std::log(q);
  }
  return s / static_cast<double>(p.size());
}

/// Denoising autoencoder objective for one block with tied weights:
///   h = relu(W x~ + b),  x^ = relu(W^T h + b'),
///   loss = mean over columns of ||x^ - x||^2 + lambda * ||h||_1.
struct AutoencoderGradient {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Eigen::VectorXd decoder_bias;
  double loss = 0.0;
  double reconstruction = 0.0;
};

inline AutoencoderGradient autoencoder_gradient(const Eigen::MatrixXd& weight,
                                                const Eigen::VectorXd& bias,
                                                const Eigen::VectorXd& decoder_bias,
                                                const Eigen::MatrixXd& corrupted,
                                                const Eigen::MatrixXd& target, double lambda,
                                                bool with_gradient = true) {
  const double n = static_cast<double>(target.cols());
  Eigen::MatrixXd hz = weight * corrupted;
  hz.colwise() += bias;
  const Eigen::MatrixXd h = hz.cwiseMax(0.0);
  Eigen::MatrixXd rz = weight.transpose() * h;
  rz.colwise() += decoder_bias;
  const Eigen::MatrixXd r = rz.cwiseMax(0.0);
  const Eigen::MatrixXd err = r - target;

  AutoencoderGradient g;
  g.reconstruction = err.squaredNorm() / n;
  g.loss = g.reconstruction + lambda * h.sum() / n;  // h >= 0
  if (!with_gradient) return g;

  const auto step = [](double v) { return v > 0.0 ? 1.0 : 0.0; };
  const Eigen::MatrixXd d_rz = (2.0 / n) * err.cwiseProduct(rz.unaryExpr(step));
  Eigen::MatrixXd d_h = weight * d_rz;
  d_h.array() += lambda / n;
  const Eigen::MatrixXd d_hz = d_h.cwiseProduct(hz.unaryExpr(step));
  g.weight = d_hz * corrupted.transpose() + h * d_rz.transpose();
  g.bias = d_hz.rowwise().sum();
  g.decoder_bias = d_rz.rowwise().sum();
  return g;
}

/// Called after every parameter update with the current network.
using UpdateHook = std::function<void(const MultimodalNet&)>;

struct LossCurve {
  std::string block;
  int layer = 0;
  std::vector<double> values;  // entry 0 is before training
};

struct TrainingReport {
  std::vector<LossCurve> curves;
  bool degenerate_labels = false;
  std::size_t updates = 0;
};

namespace detail {

inline std::vector<Eigen::Index> shuffled(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

inline Eigen::MatrixXd bernoulli_mask(Eigen::Index rows, Eigen::Index cols, double keep,
                                      std::mt19937_64& rng) {
  std::bernoulli_distribution d(keep);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng) ? 1.0 : 0.0;
  return m;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Greedy layer-wise pretraining with stacked sparse denoising
/// autoencoders. Each hidden block learns to reconstruct its (clean) input
/// from a corrupted copy; upper layers see the clean encodings of the
/// layers below. The output block keeps its random initialization.
inline MultimodalNet pretrain(const FeatureBatch& data, const InputDims& dims,
                              const NetConfig& config, TrainingReport* report = nullptr,
                              const UpdateHook& hook = {}) {
  if (data.size() == 0) throw Error(ErrorCode::empty_pool, "no pretraining data");
  MultimodalNet net(dims, config);
  std::mt19937_64 rng(detail::mix_seed(config.rng_seed, 1));
  net.initialize(rng);
  net.check(data);

  const Eigen::Index n = data.size();
  const auto batch = static_cast<Eigen::Index>(config.batch_size);
  const double keep = 1.0 - config.corruption_p;
  ForwardTrace clean = net.trace(data, PassMode::raw, nullptr, 0);

  for (int layer = 1; layer < kOutputLayer; ++layer) {
    for (std::size_t k = 0; k < net.blocks().size(); ++k) {
      Block& b = net.blocks()[k];
      if (b.layer != layer) continue;
      const Eigen::MatrixXd input = net.gather(clean.nodes, b);
      Eigen::VectorXd decoder_bias = Eigen::VectorXd::Zero(b.in_size());
      const double input_scale = std::max(1.0, input.colwise().squaredNorm().mean());
      LossCurve curve{b.name, layer, {}};
      // The curve tracks the denoising objective itself: reconstruction of
      // the clean input from one fixed corrupted copy, drawn from its own
      // stream so it does not perturb training.
      std::mt19937_64 eval_rng(detail::mix_seed(config.rng_seed, 3 + k));
      const Eigen::MatrixXd eval_input =
          keep < 1.0 ? Eigen::MatrixXd(input.cwiseProduct(
                           detail::bernoulli_mask(input.rows(), input.cols(), keep, eval_rng)))
                     : input;
      auto evaluate = [&](std::size_t epoch) {
        const auto g = autoencoder_gradient(b.weight, b.bias, decoder_bias, eval_input, input,
                                            config.sparsity_lambda, false);
        if (!std::isfinite(g.loss)) {
          throw Error(ErrorCode::divergence, "pretraining diverged at epoch " +
                                                 std::to_string(epoch) + " in layer " +
                                                 std::to_string(layer) + " (" + b.name + ")");
        }
        curve.values.push_back(g.reconstruction);
      };
      evaluate(0);
      for (std::size_t epoch = 0; epoch < config.epochs_pretrain; ++epoch) {
        const double lr = config.pretrain_learning_rate_at(epoch) / input_scale;
        const auto order = detail::shuffled(n, rng);
        for (Eigen::Index start = 0; start < n; start += batch) {
          const Eigen::Index len = std::min(batch, n - start);
          const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
          const Eigen::MatrixXd x = input(Eigen::all, idx);
          const Eigen::MatrixXd noisy =
              keep < 1.0 ? Eigen::MatrixXd(x.cwiseProduct(
                               detail::bernoulli_mask(x.rows(), x.cols(), keep, rng)))
                         : x;
          const auto g = autoencoder_gradient(b.weight, b.bias, decoder_bias, noisy, x,
                                              config.sparsity_lambda);
          b.weight -= lr * g.weight;
          b.bias -= lr * g.bias;
          decoder_bias -= lr * g.decoder_bias;
          net.project_max_norm();
          if (report) ++report->updates;
          if (hook) hook(net);
        }
        evaluate(epoch + 1);
      }
      if (report) report->curves.push_back(std::move(curve));
    }
    clean = net.trace(data, PassMode::raw, nullptr, layer);
  }
  return net;
}

/// Mini-batch SGD on the mean negative log-likelihood with dropout on every
/// hidden output and max-norm projection after each step.
inline MultimodalNet finetune(MultimodalNet net, const FeatureBatch& data,
                              const Eigen::VectorXd& labels, const NetConfig& config,
                              TrainingReport* report = nullptr, const UpdateHook& hook = {}) {
  if (data.size() == 0) throw Error(ErrorCode::empty_pool, "no fine-tuning examples");
  net.mutable_config() = config;
  config.validate();
  net.check(data);
  const bool has_pos = (labels.array() > 0.5).any();
  const bool has_neg = (labels.array() <= 0.5).any();
  if (report) report->degenerate_labels = !(has_pos && has_neg);

  std::mt19937_64 rng(detail::mix_seed(config.rng_seed, 2));
  const Eigen::Index n = data.size();
  const auto batch = static_cast<Eigen::Index>(config.batch_size);
  const double keep = 1.0 - config.dropout_rate;
  LossCurve curve{"nll", kOutputLayer, {nll(net, data, labels)}};

  for (std::size_t epoch = 0; epoch < config.epochs_finetune; ++epoch) {
    const double lr = config.learning_rate_at(epoch);
    const auto order = detail::shuffled(n, rng);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
      const FeatureBatch x = data.columns(idx);
      const Eigen::VectorXd y = labels(idx);
      std::vector<Eigen::MatrixXd> masks;
      if (config.dropout_rate > 0.0) {
        masks.resize(static_cast<std::size_t>(net.node_count()));
        for (std::size_t k = 0; k < net.blocks().size(); ++k) {
          const Block& b = net.blocks()[k];
          if (b.activation != Activation::relu) continue;
          masks[static_cast<std::size_t>(MultimodalNet::node_of(k))] =
              detail::bernoulli_mask(b.out_size(), len, keep, rng);
        }
      }
      const auto grads = nll_gradient(net, x, y, nullptr, masks.empty() ? nullptr : &masks);
      for (std::size_t k = 0; k < grads.size(); ++k) {
        net.blocks()[k].weight -= lr * grads[k].weight;
        net.blocks()[k].bias -= lr * grads[k].bias;
      }
      net.project_max_norm();
      if (report) ++report->updates;
      if (hook) hook(net);
    }
    const double loss = nll(net, data, labels);
    if (!std::isfinite(loss) || !net.all_finite()) {
      throw Error(ErrorCode::divergence,
                  "fine-tuning diverged at epoch " + std::to_string(epoch + 1));
    }
    curve.values.push_back(loss);
  }
  if (report) report->curves.push_back(std::move(curve));
  return net;
}

}  // namespace mtransfer
