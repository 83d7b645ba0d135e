#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "melex/rng.hpp"
#include "melex/tensor.hpp"

namespace melex {

/// A named weight tensor with its gradient accumulator and Adam state.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
  std::int64_t step = 0;

  Parameter(std::string name_, Tensor value_);
  void zero_grad() { grad.fill(0.0); }
};

class Layer {
 public:
  virtual ~Layer() = default;
  /// Pure compute; safe to call concurrently on shared parameters.
  virtual Tensor forward(const Tensor& x) const = 0;
  /// x is the input the forward pass saw. Accumulates parameter gradients
  /// into Parameter::grad and returns dLoss/dx.
  virtual Tensor backward(const Tensor& x, const Tensor& upstream) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual void init(Rng& rng) { (void)rng; }
};

/// Valid (no padding) convolution, stride 1. Input [C,H,W] -> [F,H-kh+1,W-kw+1].
class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t out_channels, std::size_t in_channels, std::size_t kernel_h,
         std::size_t kernel_w, std::string name);
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& upstream) override;
  std::vector<Parameter*> parameters() override { return {&kernels_, &bias_}; }
  void init(Rng& rng) override;

 private:
  Parameter kernels_;  // [F,C,kh,kw]
  Parameter bias_;     // [F]
};

/// out = W x + b. Input [n] -> [m].
class Dense final : public Layer {
 public:
  Dense(std::size_t out_features, std::size_t in_features, std::string name);
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& upstream) override;
  std::vector<Parameter*> parameters() override { return {&weights_, &bias_}; }
  void init(Rng& rng) override;

 private:
  Parameter weights_;  // [m,n]
  Parameter bias_;     // [m]
};

class Relu final : public Layer {
 public:
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& upstream) override;
};

class Sigmoid final : public Layer {
 public:
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& upstream) override;
};

class SoftmaxLayer final : public Layer {
 public:
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& upstream) override;
};

/// Reshape to rank 1; gradients pass through unchanged.
class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& upstream) override;
};

/// Per-layer inputs cached by a forward pass, consumed by backward.
struct ForwardTrace {
  std::vector<Tensor> inputs;
  Tensor output;
};

class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  /// Deterministic forward pass. With a trace, records what backward needs.
  Tensor forward(const Tensor& input, ForwardTrace* trace = nullptr) const;

  /// Reverse-mode gradients for every parameter; returns dLoss/dInput.
  /// Requires the trace of a matching forward pass.
  Tensor backward(const ForwardTrace& trace, const Tensor& upstream);

  std::vector<Parameter*> parameters();
  std::size_t parameter_count();
  void zero_grads();
  void init(std::uint64_t seed);

  std::size_t layer_count() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct BceResult {
  double loss;
  double dloss_dp;
};

/// loss = -[y ln p + (1-y) ln(1-p)], p clamped to [1e-7, 1 - 1e-7].
BceResult binary_cross_entropy(double p, int y);

/// Numerically stable softmax; outputs sum to 1.
Tensor softmax(const Tensor& logits);

struct CrossEntropyResult {
  double loss;
  Tensor grad_logits;  // softmax - one_hot(target)
};

CrossEntropyResult cross_entropy(const Tensor& logits, std::size_t target);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update from Parameter::grad; increments step counts.
void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg);

/// Versioned binary checkpoint: magic MELO, format version, model-kind tag,
/// scalar metadata, then named tensors (rank, dims, little-endian f64 data).
struct Checkpoint {
  std::string kind;
  std::vector<std::pair<std::string, double>> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  double meta_value(const std::string& key) const;
  const Tensor& tensor(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace melex
