// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "oransim/tensor.hpp"

namespace oransim::nn {

enum class Activation : std::uint8_t { kLinear = 0, kRelu = 1 };

// Valid padding, stride 1. Weights are laid out (kh, kw, in_channels, filters).
struct Conv2D {
  std::size_t filters = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  Activation activation = Activation::kRelu;
  bool operator==(const Conv2D&) const = default;
};

// Stride equals the pool size; trailing rows/columns that do not fill a window are dropped.
struct MaxPool2D {
  std::size_t pool_h = 0;
  std::size_t pool_w = 0;
  bool operator==(const MaxPool2D&) const = default;
};

struct Flatten {
  bool operator==(const Flatten&) const = default;
};

// Weights are laid out (inputs, units).
struct Dense {
  std::size_t units = 0;
  Activation activation = Activation::kLinear;
  bool operator==(const Dense&) const = default;
};

using LayerSpec = std::variant<Conv2D, MaxPool2D, Flatten, Dense>;

struct Architecture {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  bool operator==(const Architecture&) const = default;
};

/// Shape produced by `layer` given `input`. Throws InvalidArgument when the
/// layer cannot consume the input (rank mismatch, kernel larger than input).
Shape layer_output_shape(const LayerSpec& layer, const Shape& input);
std::size_t layer_parameter_count(const LayerSpec& layer, const Shape& input);

struct LayerParams {
  Tensor weights;  // empty for parameterless layers
  Tensor bias;
};

class Model {
 public:
  /// Validates the architecture and allocates zero-valued parameters.
  explicit Model(Architecture arch);
  /// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static Model initialized(Architecture arch, std::uint64_t seed);

  const Architecture& architecture() const noexcept { return arch_; }
  const Shape& input_shape() const noexcept { return arch_.input_shape; }
  // shapes[i] is the input of layer i; shapes.back() is the logits shape.
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }
  std::size_t num_classes() const;

  std::size_t parameter_count() const;
  std::vector<std::size_t> layer_parameter_counts() const;

  std::vector<LayerParams>& params() noexcept { return params_; }
  const std::vector<LayerParams>& params() const noexcept { return params_; }

  void initialize(std::uint64_t seed);

 private:
  Architecture arch_;
  std::vector<Shape> shapes_;
  std::vector<LayerParams> params_;
};

// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
  std::vector<Tensor> activations;                    // activations[0] = input, back() = logits
  std::vector<std::vector<std::uint32_t>> pool_argmax;  // per layer; empty unless MaxPool2D
};

Tensor forward(const Model& model, const Tensor& x);
ForwardTrace forward_trace(const Model& model, const Tensor& x);

/// Backpropagates `dlogits` through a recorded trace. Parameter gradients are
/// accumulated into `param_grads` when it is non-null (it must match
/// model.params() in shape). Returns dL/dx, or an empty tensor when
/// `want_input_grad` is false.
Tensor backward(const Model& model, const ForwardTrace& trace, std::span<const double> dlogits,
                std::vector<LayerParams>* param_grads, bool want_input_grad = true);

std::vector<LayerParams> zero_grads_like(const Model& model);

// ---------------------------------------------------------------- losses

inline constexpr double kProbabilityFloor = 1e-12;

std::vector<double> softmax_t(std::span<const double> logits, double temperature);
Tensor softmax_t(const Tensor& logits, double temperature);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> dlogits;
};

/// -log P(label, T). P is clamped to [1e-12, 1 - 1e-12] before the log, the
/// same floor the KL term uses; inside the clamp region the loss is flat and
/// its gradient is exactly zero.
double cross_entropy_t(const Tensor& logits, std::size_t label, double temperature);
LossAndGrad cross_entropy_t_grad(std::span<const double> logits, std::size_t label, double temperature);

/// sum_i p_t(i) log(p_t(i) / p_s(i)). Both inputs must be strictly positive;
/// clamp with clamp_probabilities() first.
double kl_loss(const Tensor& teacher_probs, const Tensor& student_probs);
double kl_loss(std::span<const double> teacher_probs, std::span<const double> student_probs);
Tensor clamp_probabilities(const Tensor& probs, double floor = kProbabilityFloor);

/// KL(teacher || softmax_t(student_logits, T)) with the student distribution
/// clamped at the probability floor, and its gradient w.r.t. the student logits.
LossAndGrad kl_loss_grad(std::span<const double> teacher_probs, std::span<const double> student_logits,
                         double temperature);

/// Gradient of cross_entropy_t(forward(model, x), label, T) with respect to x.
Tensor grad_input(const Model& model, const Tensor& x, std::size_t label, double temperature = 1.0);

// -------------------------------------------------------------- training

struct LabeledSet {
  std::vector<Tensor> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return inputs.size(); }
  bool empty() const noexcept { return inputs.empty(); }
  void push_back(Tensor x, std::size_t label) {
    inputs.push_back(std::move(x));
    labels.push_back(label);
  }
};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double temperature = 1.0;

  void validate() const;
};

// Per-sample loss: (logits, sample index in the dataset, label).
using LossFn = std::function<LossAndGrad(std::span<const double>, std::size_t, std::size_t)>;

/// Minibatch SGD with a seeded per-epoch shuffle. Uses cross_entropy_t at
/// cfg.temperature unless a custom loss is supplied.
Model train(Model model, const LabeledSet& data, const TrainConfig& cfg);
Model train(Model model, const LabeledSet& data, const TrainConfig& cfg, const LossFn& loss);

double mean_loss(const Model& model, const LabeledSet& data, double temperature = 1.0);
double accuracy(const Model& model, const LabeledSet& data);
std::size_t argmax(std::span<const double> values);

// ------------------------------------------------------ gradient checking

struct FiniteDiffOptions {
  double step = 1e-5;
  double temperature = 1.0;
  // 0 checks every input element; otherwise a seeded sample of this many.
  std::size_t max_elements = 0;
  std::uint64_t seed = 0;
};

/// Max element-wise relative error between grad_input and central differences,
/// with denominator max(|a|, |b|, 1e-8). Where the +/- probes land on a
/// different ReLU / max-pool branch than the base point the step is shrunk
/// until both probes stay on the same linear piece.
double finite_diff_check(const Model& model, const Tensor& x, std::size_t label,
                         const FiniteDiffOptions& options = {});

}  // namespace oransim::nn
