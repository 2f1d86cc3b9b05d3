// SPDX-License-Identifier: Apache-2.0
#include "oransim/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "oransim/errors.hpp"

namespace oransim::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_rank3(const Shape& s, const char* what) {
  if (s.size() != 3) throw InvalidArgument(std::string(what) + " expects a rank-3 (h, w, c) input, got " + shape_to_string(s));
}

void apply_activation(Activation act, std::span<double> v) {
  if (act == Activation::kRelu) {
    for (auto& x : v) x = x > 0.0 ? x : 0.0;
  }
}

// dOut *= activation'(out), in place.
void activation_backward(Activation act, std::span<const double> out, std::span<double> grad) {
  if (act == Activation::kRelu) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!(out[i] > 0.0)) grad[i] = 0.0;
    }
  }
}

// Rows are output positions, columns are (ki, kj, c) patch entries.
RowMat im2col(const Tensor& in, std::size_t kh, std::size_t kw) {
  const auto h = in.shape()[0], w = in.shape()[1], c = in.shape()[2];
  const auto oh = h - kh + 1, ow = w - kw + 1;
  RowMat cols(static_cast<Eigen::Index>(oh * ow), static_cast<Eigen::Index>(kh * kw * c));
  const double* src = in.data().data();
  for (std::size_t oi = 0; oi < oh; ++oi) {
    for (std::size_t oj = 0; oj < ow; ++oj) {
      double* row = cols.data() + (oi * ow + oj) * kh * kw * c;
      for (std::size_t ki = 0; ki < kh; ++ki) {
        std::memcpy(row + ki * kw * c, src + ((oi + ki) * w + oj) * c, kw * c * sizeof(double));
      }
    }
  }
  return cols;
}

void col2im_add(const RowMat& cols, Tensor& out, std::size_t kh, std::size_t kw) {
  const auto h = out.shape()[0], w = out.shape()[1], c = out.shape()[2];
  const auto oh = h - kh + 1, ow = w - kw + 1;
  double* dst = out.data().data();
  for (std::size_t oi = 0; oi < oh; ++oi) {
    for (std::size_t oj = 0; oj < ow; ++oj) {
      const double* row = cols.data() + (oi * ow + oj) * kh * kw * c;
      for (std::size_t ki = 0; ki < kh; ++ki) {
        double* d = dst + ((oi + ki) * w + oj) * c;
        const double* s = row + ki * kw * c;
        for (std::size_t k = 0; k < kw * c; ++k) d[k] += s[k];
      }
    }
  }
}

Tensor conv_forward(const Conv2D& layer, const LayerParams& p, const Tensor& in, const Shape& out_shape) {
  const RowMat cols = im2col(in, layer.kernel_h, layer.kernel_w);
  Tensor out(out_shape);
  const ConstMatMap w(p.weights.data().data(), cols.cols(), static_cast<Eigen::Index>(layer.filters));
  MatMap o(out.data().data(), cols.rows(), static_cast<Eigen::Index>(layer.filters));
  o.noalias() = cols * w;
  o.rowwise() += ConstVecMap(p.bias.data().data(), static_cast<Eigen::Index>(layer.filters)).transpose();
  apply_activation(layer.activation, out.data());
  return out;
}

Tensor pool_forward(const MaxPool2D& layer, const Tensor& in, const Shape& out_shape,
                    std::vector<std::uint32_t>* argmax) {
  const auto w = in.shape()[1], c = in.shape()[2];
  const auto oh = out_shape[0], ow = out_shape[1];
  Tensor out(out_shape);
  if (argmax) argmax->assign(out.size(), 0);
  const double* src = in.data().data();
  for (std::size_t oi = 0; oi < oh; ++oi) {
    for (std::size_t oj = 0; oj < ow; ++oj) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((oi * layer.pool_h) * w + oj * layer.pool_w) * c + ch;
        for (std::size_t pi = 0; pi < layer.pool_h; ++pi) {
          for (std::size_t pj = 0; pj < layer.pool_w; ++pj) {
            const std::size_t idx = ((oi * layer.pool_h + pi) * w + oj * layer.pool_w + pj) * c + ch;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = (oi * ow + oj) * c + ch;
        out[o] = src[best];
        if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return out;
}

Tensor dense_forward(const Dense& layer, const LayerParams& p, const Tensor& in) {
  Tensor out(Shape{layer.units});
  const ConstMatMap w(p.weights.data().data(), static_cast<Eigen::Index>(in.size()), static_cast<Eigen::Index>(layer.units));
  VecMap o(out.data().data(), static_cast<Eigen::Index>(layer.units));
  o.noalias() = w.transpose() * ConstVecMap(in.data().data(), static_cast<Eigen::Index>(in.size()));
  o += ConstVecMap(p.bias.data().data(), static_cast<Eigen::Index>(layer.units));
  apply_activation(layer.activation, out.data());
  return out;
}

Tensor run_forward(const Model& model, const Tensor& x, ForwardTrace* trace) {
  if (x.shape() != model.input_shape()) {
    throw InvalidArgument("input shape " + shape_to_string(x.shape()) + " does not match model input " +
                          shape_to_string(model.input_shape()));
  }
  const auto& layers = model.architecture().layers;
  const auto& shapes = model.shapes();
  if (trace) {
    trace->activations.clear();
    trace->activations.reserve(layers.size() + 1);
    trace->activations.push_back(x);
    trace->pool_argmax.assign(layers.size(), {});
  }
  Tensor cur = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& p = model.params()[i];
    cur = std::visit(Overloaded{
                         [&](const Conv2D& l) { return conv_forward(l, p, cur, shapes[i + 1]); },
                         [&](const MaxPool2D& l) {
                           return pool_forward(l, cur, shapes[i + 1], trace ? &trace->pool_argmax[i] : nullptr);
                         },
                         [&](const Flatten&) { return cur.reshaped(shapes[i + 1]); },
                         [&](const Dense& l) { return dense_forward(l, p, cur); },
                     },
                     layers[i]);
    if (trace) trace->activations.push_back(cur);
  }
  return cur;
}

}  // namespace

// ------------------------------------------------------------------ shapes

Shape layer_output_shape(const LayerSpec& layer, const Shape& in) {
  return std::visit(
      Overloaded{
          [&](const Conv2D& l) -> Shape {
            require_rank3(in, "Conv2D");
            if (l.filters == 0 || l.kernel_h == 0 || l.kernel_w == 0) throw InvalidArgument("Conv2D dims must be positive");
            if (l.kernel_h > in[0] || l.kernel_w > in[1]) throw InvalidArgument("Conv2D kernel larger than input " + shape_to_string(in));
            return {in[0] - l.kernel_h + 1, in[1] - l.kernel_w + 1, l.filters};
          },
          [&](const MaxPool2D& l) -> Shape {
            require_rank3(in, "MaxPool2D");
            if (l.pool_h == 0 || l.pool_w == 0) throw InvalidArgument("MaxPool2D dims must be positive");
            if (l.pool_h > in[0] || l.pool_w > in[1]) throw InvalidArgument("MaxPool2D window larger than input " + shape_to_string(in));
            return {in[0] / l.pool_h, in[1] / l.pool_w, in[2]};
          },
          [&](const Flatten&) -> Shape { return {shape_volume(in)}; },
          [&](const Dense& l) -> Shape {
            if (in.size() != 1) throw InvalidArgument("Dense expects a rank-1 input, got " + shape_to_string(in));
            if (l.units == 0) throw InvalidArgument("Dense size must be positive");
            return {l.units};
          },
      },
      layer);
}

std::size_t layer_parameter_count(const LayerSpec& layer, const Shape& in) {
  return std::visit(Overloaded{
                        [&](const Conv2D& l) { return l.kernel_h * l.kernel_w * in[2] * l.filters + l.filters; },
                        [&](const MaxPool2D&) { return std::size_t{0}; },
                        [&](const Flatten&) { return std::size_t{0}; },
                        [&](const Dense& l) { return in[0] * l.units + l.units; },
                    },
                    layer);
}

// ------------------------------------------------------------------- model

Model::Model(Architecture arch) : arch_(std::move(arch)) {
  if (arch_.input_shape.empty()) throw InvalidArgument("model input shape is empty");
  for (auto d : arch_.input_shape) {
    if (d == 0) throw InvalidArgument("model input dims must be positive");
  }
  if (arch_.layers.empty()) throw InvalidArgument("model needs at least one layer");
  shapes_.push_back(arch_.input_shape);
  for (const auto& layer : arch_.layers) {
    const Shape& in = shapes_.back();
    Shape out = layer_output_shape(layer, in);
    LayerParams p;
    if (const auto* c = std::get_if<Conv2D>(&layer)) {
      p.weights = Tensor(Shape{c->kernel_h, c->kernel_w, in[2], c->filters});
      p.bias = Tensor(Shape{c->filters});
    } else if (const auto* d = std::get_if<Dense>(&layer)) {
      p.weights = Tensor(Shape{in[0], d->units});
      p.bias = Tensor(Shape{d->units});
    }
    params_.push_back(std::move(p));
    shapes_.push_back(std::move(out));
  }
  if (shapes_.back().size() != 1 || shapes_.back()[0] < 2) {
    throw InvalidArgument("model must end in a rank-1 output with at least two classes");
  }
}

Model Model::initialized(Architecture arch, std::uint64_t seed) {
  Model m(std::move(arch));
  m.initialize(seed);
  return m;
}

std::size_t Model::num_classes() const { return shapes_.back()[0]; }

std::size_t Model::parameter_count() const {
  auto counts = layer_parameter_counts();
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::vector<std::size_t> Model::layer_parameter_counts() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    out.push_back(layer_parameter_count(arch_.layers[i], shapes_[i]));
  }
  return out;
}

void Model::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params_) {
    if (p.weights.empty()) continue;
    const auto& s = p.weights.shape();
    const std::size_t fan_in = s.size() == 4 ? s[0] * s[1] * s[2] : s[0];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : p.weights.data()) w = dist(rng);
    std::fill(p.bias.data().begin(), p.bias.data().end(), 0.0);
  }
}

// ---------------------------------------------------------------- forward

Tensor forward(const Model& model, const Tensor& x) { return run_forward(model, x, nullptr); }

ForwardTrace forward_trace(const Model& model, const Tensor& x) {
  ForwardTrace t;
  run_forward(model, x, &t);
  return t;
}

std::vector<LayerParams> zero_grads_like(const Model& model) {
  std::vector<LayerParams> g;
  g.reserve(model.params().size());
  for (const auto& p : model.params()) {
    LayerParams z;
    if (!p.weights.empty()) {
      z.weights = Tensor(p.weights.shape());
      z.bias = Tensor(p.bias.shape());
    }
    g.push_back(std::move(z));
  }
  return g;
}

// --------------------------------------------------------------- backward

Tensor backward(const Model& model, const ForwardTrace& trace, std::span<const double> dlogits,
                std::vector<LayerParams>* param_grads, bool want_input_grad) {
  const auto& layers = model.architecture().layers;
  if (trace.activations.size() != layers.size() + 1) throw InvalidArgument("trace does not belong to this model");
  if (dlogits.size() != model.num_classes()) throw InvalidArgument("dlogits size does not match class count");
  if (param_grads && param_grads->size() != layers.size()) throw InvalidArgument("gradient buffer does not match model");

  // Layers before the first parameterised layer need no gradient unless the
  // caller asked for dL/dx.
  std::size_t stop = 0;
  if (!want_input_grad) {
    while (stop < layers.size() && model.params()[stop].weights.empty()) ++stop;
  }

  Tensor grad(model.shapes().back(), std::vector<double>(dlogits.begin(), dlogits.end()));
  for (std::size_t ii = layers.size(); ii-- > 0;) {
    const Tensor& in = trace.activations[ii];
    const Tensor& out = trace.activations[ii + 1];
    const auto& p = model.params()[ii];
    const bool need_dx = want_input_grad || ii > stop;
    std::visit(
        Overloaded{
            [&](const Conv2D& l) {
              activation_backward(l.activation, out.data(), grad.data());
              const RowMat cols = im2col(in, l.kernel_h, l.kernel_w);
              const auto nf = static_cast<Eigen::Index>(l.filters);
              const ConstMatMap g(grad.data().data(), cols.rows(), nf);
              if (param_grads) {
                auto& pg = (*param_grads)[ii];
                MatMap(pg.weights.data().data(), cols.cols(), nf).noalias() += cols.transpose() * g;
                VecMap(pg.bias.data().data(), nf) += g.colwise().sum().transpose();
              }
              if (need_dx) {
                const ConstMatMap w(p.weights.data().data(), cols.cols(), nf);
                RowMat dcols = g * w.transpose();
                Tensor dx(in.shape());
                col2im_add(dcols, dx, l.kernel_h, l.kernel_w);
                grad = std::move(dx);
              }
            },
            [&](const MaxPool2D&) {
              if (!need_dx) return;
              Tensor dx(in.shape());
              const auto& am = trace.pool_argmax[ii];
              for (std::size_t o = 0; o < grad.size(); ++o) dx[am[o]] += grad[o];
              grad = std::move(dx);
            },
            [&](const Flatten&) { grad = grad.reshaped(in.shape()); },
            [&](const Dense& l) {
              activation_backward(l.activation, out.data(), grad.data());
              const auto n_in = static_cast<Eigen::Index>(in.size());
              const auto n_out = static_cast<Eigen::Index>(l.units);
              const ConstVecMap g(grad.data().data(), n_out);
              if (param_grads) {
                auto& pg = (*param_grads)[ii];
                MatMap(pg.weights.data().data(), n_in, n_out).noalias() +=
                    ConstVecMap(in.data().data(), n_in) * g.transpose();
                VecMap(pg.bias.data().data(), n_out) += g;
              }
              if (need_dx) {
                Tensor dx(in.shape());
                VecMap(dx.data().data(), n_in).noalias() = ConstMatMap(p.weights.data().data(), n_in, n_out) * g;
                grad = std::move(dx);
              }
            },
        },
        layers[ii]);
    if (!need_dx) return {};
  }
  return grad;
}

// ------------------------------------------------------------------ losses

namespace {
void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("temperature must be positive and finite");
}
}  // namespace

std::vector<double> softmax_t(std::span<const double> logits, double temperature) {
  check_temperature(temperature);
  if (logits.size() < 2) throw InvalidArgument("softmax needs at least two logits");
  for (double z : logits) {
    if (!std::isfinite(z)) throw InvalidArgument("softmax logits must be finite");
  }
  const double zmax = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - zmax) / temperature);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

Tensor softmax_t(const Tensor& logits, double temperature) {
  return Tensor(logits.shape(), softmax_t(logits.data(), temperature));
}

LossAndGrad cross_entropy_t_grad(std::span<const double> logits, std::size_t label, double temperature) {
  if (label >= logits.size()) throw InvalidArgument("label " + std::to_string(label) + " out of range");
  const auto p = softmax_t(logits, temperature);
  LossAndGrad out;
  out.dlogits.assign(logits.size(), 0.0);
  const double py = p[label];
  if (py < kProbabilityFloor) {
    out.loss = -std::log(kProbabilityFloor);
  } else if (py > 1.0 - kProbabilityFloor) {
    out.loss = -std::log1p(-kProbabilityFloor);
  } else {
    // log-sum-exp form keeps the loss accurate when p_y is close to 1.
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double z : logits) s += std::exp((z - zmax) / temperature);
    out.loss = std::log(s) - (logits[label] - zmax) / temperature;
    for (std::size_t j = 0; j < p.size(); ++j) {
      out.dlogits[j] = (p[j] - (j == label ? 1.0 : 0.0)) / temperature;
    }
  }
  return out;
}

double cross_entropy_t(const Tensor& logits, std::size_t label, double temperature) {
  return cross_entropy_t_grad(logits.data(), label, temperature).loss;
}

double kl_loss(std::span<const double> teacher, std::span<const double> student) {
  if (teacher.size() != student.size() || teacher.empty()) throw InvalidArgument("kl_loss: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    if (!(teacher[i] > 0.0) || !(student[i] > 0.0)) {
      throw InvalidArgument("kl_loss: probabilities must be strictly positive (clamp first)");
    }
    s += teacher[i] * std::log(teacher[i] / student[i]);
  }
  return s;
}

double kl_loss(const Tensor& teacher, const Tensor& student) { return kl_loss(teacher.data(), student.data()); }

Tensor clamp_probabilities(const Tensor& probs, double floor) {
  Tensor out = probs;
  for (auto& v : out.data()) v = std::max(v, floor);
  return out;
}

LossAndGrad kl_loss_grad(std::span<const double> teacher, std::span<const double> student_logits,
                         double temperature) {
  const auto ps = softmax_t(student_logits, temperature);
  if (teacher.size() != ps.size()) throw InvalidArgument("kl_loss_grad: size mismatch");
  LossAndGrad out;
  out.dlogits.assign(ps.size(), 0.0);
  // d/dz_j of -sum_i pt_i log(ps_i) over unclamped i is
  // -(1/T) sum_i pt_i (delta_ij - ps_j).
  double active_mass = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!(teacher[i] > 0.0)) throw InvalidArgument("kl_loss_grad: teacher probabilities must be positive");
    const double q = std::max(ps[i], kProbabilityFloor);
    out.loss += teacher[i] * std::log(teacher[i] / q);
    if (ps[i] >= kProbabilityFloor) {
      active_mass += teacher[i];
      out.dlogits[i] -= teacher[i] / temperature;
    }
  }
  for (std::size_t j = 0; j < ps.size(); ++j) out.dlogits[j] += active_mass * ps[j] / temperature;
  return out;
}

Tensor grad_input(const Model& model, const Tensor& x, std::size_t label, double temperature) {
  const auto trace = forward_trace(model, x);
  const auto lg = cross_entropy_t_grad(trace.activations.back().data(), label, temperature);
  return backward(model, trace, lg.dlogits, nullptr, true);
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning_rate must be >= 0");
  if (epochs == 0) throw InvalidArgument("epochs must be positive");
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  check_temperature(temperature);
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

Model train(Model model, const LabeledSet& data, const TrainConfig& cfg) {
  const double t = cfg.temperature;
  return train(std::move(model), data, cfg, [t](std::span<const double> z, std::size_t, std::size_t y) {
    return cross_entropy_t_grad(z, y, t);
  });
}

Model train(Model model, const LabeledSet& data, const TrainConfig& cfg, const LossFn& loss) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("training set is empty");
  if (data.labels.size() != data.inputs.size()) throw InvalidArgument("labels and inputs differ in length");
  for (auto y : data.labels) {
    if (y >= model.num_classes()) throw InvalidArgument("label out of range");
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  auto grads = zero_grads_like(model);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (auto& g : grads) {
        std::fill(g.weights.data().begin(), g.weights.data().end(), 0.0);
        std::fill(g.bias.data().begin(), g.bias.data().end(), 0.0);
      }
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const auto trace = forward_trace(model, data.inputs[idx]);
        const auto lg = loss(trace.activations.back().data(), idx, data.labels[idx]);
        backward(model, trace, lg.dlogits, &grads, false);
      }
      const double scale = cfg.learning_rate / static_cast<double>(end - start);
      for (std::size_t li = 0; li < grads.size(); ++li) {
        auto& p = model.params()[li];
        for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= scale * grads[li].weights[i];
        for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= scale * grads[li].bias[i];
      }
    }
  }
  return model;
}

double mean_loss(const Model& model, const LabeledSet& data, double temperature) {
  if (data.empty()) throw InvalidArgument("dataset is empty");
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    s += cross_entropy_t(forward(model, data.inputs[i]), data.labels[i], temperature);
  }
  return s / static_cast<double>(data.size());
}

double accuracy(const Model& model, const LabeledSet& data) {
  if (data.empty()) throw InvalidArgument("dataset is empty");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = forward(model, data.inputs[i]);
    if (argmax(z.data()) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ------------------------------------------------------- gradient checking

namespace {

// ReLU on/off bits and pool winners along one forward pass.
std::vector<std::uint32_t> branch_signature(const Model& model, const ForwardTrace& t) {
  std::vector<std::uint32_t> sig;
  const auto& layers = model.architecture().layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto* c = std::get_if<Conv2D>(&layers[i]);
    const auto* d = std::get_if<Dense>(&layers[i]);
    if ((c && c->activation == Activation::kRelu) || (d && d->activation == Activation::kRelu)) {
      for (double v : t.activations[i + 1].data()) sig.push_back(v > 0.0 ? 1u : 0u);
    } else if (!t.pool_argmax[i].empty()) {
      sig.insert(sig.end(), t.pool_argmax[i].begin(), t.pool_argmax[i].end());
    }
  }
  return sig;
}

}  // namespace

double finite_diff_check(const Model& model, const Tensor& x, std::size_t label, const FiniteDiffOptions& opt) {
  if (!(opt.step > 0.0)) throw InvalidArgument("finite difference step must be positive");
  const Tensor analytic = grad_input(model, x, label, opt.temperature);
  const auto base_sig = branch_signature(model, forward_trace(model, x));

  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (opt.max_elements != 0 && opt.max_elements < idx.size()) {
    std::mt19937_64 rng(opt.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(opt.max_elements);
  }

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i : idx) {
    double h = opt.step;
    double numeric = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt, h *= 0.25) {
      probe[i] = x[i] + h;
      const auto tp = forward_trace(model, probe);
      probe[i] = x[i] - h;
      const auto tm = forward_trace(model, probe);
      probe[i] = x[i];
      const double lp = cross_entropy_t_grad(tp.activations.back().data(), label, opt.temperature).loss;
      const double lm = cross_entropy_t_grad(tm.activations.back().data(), label, opt.temperature).loss;
      numeric = (lp - lm) / (2.0 * h);
      if (branch_signature(model, tp) == base_sig && branch_signature(model, tm) == base_sig) break;
    }
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace oransim::nn
