// SPDX-License-Identifier: Apache-2.0
#include "oransim/models.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "oransim/errors.hpp"

namespace oransim::models {

using nn::Activation;

nn::Architecture spec_architecture() {
  const auto relu = Activation::kRelu;
  return {{kSpecImageSize, kSpecImageSize, 1},
          {nn::Conv2D{16, 3, 3, relu}, nn::MaxPool2D{2, 2}, nn::Conv2D{16, 3, 3, relu}, nn::MaxPool2D{2, 2},
           nn::Conv2D{32, 3, 3, relu}, nn::MaxPool2D{2, 2}, nn::Conv2D{32, 3, 3, relu}, nn::Flatten{},
           nn::Dense{32, relu}, nn::Dense{2, Activation::kLinear}}};
}

nn::Architecture kpm_architecture(const KpmDescriptor& desc) {
  if (desc.m == 0 || desc.t == 0) throw InvalidArgument("kpm model: m and t must be >= 1");
  if (desc.hidden_sizes.empty()) throw InvalidArgument("kpm model: hidden_sizes must be non-empty");
  nn::Architecture arch{{desc.m * desc.t}, {}};
  for (std::size_t h : desc.hidden_sizes) {
    if (h == 0) throw InvalidArgument("kpm model: hidden size must be positive");
    arch.layers.push_back(nn::Dense{h, Activation::kRelu});
  }
  arch.layers.push_back(nn::Dense{2, Activation::kLinear});
  return arch;
}

nn::Model build_spec_model(std::uint64_t seed) { return nn::Model::initialized(spec_architecture(), seed); }

nn::Model build_kpm_model(std::size_t m, std::size_t t, const std::vector<std::size_t>& hidden_sizes,
                          std::uint64_t seed) {
  return build_kpm_model(KpmDescriptor{m, t, hidden_sizes}, seed);
}

nn::Model build_kpm_model(const KpmDescriptor& desc, std::uint64_t seed) {
  return nn::Model::initialized(kpm_architecture(desc), seed);
}

Prediction predict(const nn::Model& model, const Tensor& x) {
  Tensor logits = nn::forward(model, x);
  Prediction p;
  p.probabilities = nn::softmax_t(logits.data(), 1.0);
  p.label = nn::argmax(logits.data());
  return p;
}

// ------------------------------------------------------------ serialization

namespace {

constexpr char kMagic[4] = {'O', 'R', 'M', 'L'};
enum LayerTag : std::uint8_t { kTagConv = 1, kTagPool = 2, kTagFlatten = 3, kTagDense = 4 };

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void dim(std::size_t v) {
    if (v > UINT32_MAX) throw InvalidArgument("model dimension exceeds u32");
    u32(static_cast<std::uint32_t>(v));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw InvalidArgument("model file truncated");
  }
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

Activation read_activation(std::uint8_t v) {
  if (v > 1) throw InvalidArgument("model file: unknown activation");
  return static_cast<Activation>(v);
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const nn::Model& model) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(kModelFileVersion);
  const auto& arch = model.architecture();
  w.u8(static_cast<std::uint8_t>(arch.input_shape.size()));
  for (auto d : arch.input_shape) w.dim(d);
  w.dim(arch.layers.size());
  for (const auto& layer : arch.layers) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, nn::Conv2D>) {
            w.u8(kTagConv);
            w.dim(l.filters);
            w.dim(l.kernel_h);
            w.dim(l.kernel_w);
            w.u8(static_cast<std::uint8_t>(l.activation));
          } else if constexpr (std::is_same_v<L, nn::MaxPool2D>) {
            w.u8(kTagPool);
            w.dim(l.pool_h);
            w.dim(l.pool_w);
          } else if constexpr (std::is_same_v<L, nn::Flatten>) {
            w.u8(kTagFlatten);
          } else {
            w.u8(kTagDense);
            w.dim(l.units);
            w.u8(static_cast<std::uint8_t>(l.activation));
          }
        },
        layer);
  }
  w.u64(model.parameter_count());
  for (const auto& p : model.params()) {
    for (double v : p.weights.data()) w.f32(v);
    for (double v : p.bias.data()) w.f32(v);
  }
  return w.take();
}

nn::Model deserialize_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw InvalidArgument("model file: bad magic");
  }
  if (std::uint8_t v = r.u8(); v != kModelFileVersion) {
    throw InvalidArgument("model file: unsupported version " + std::to_string(v));
  }
  nn::Architecture arch;
  std::size_t rank = r.u8();
  for (std::size_t i = 0; i < rank; ++i) arch.input_shape.push_back(r.u32());
  std::size_t n_layers = r.u32();
  if (n_layers > 1024) throw InvalidArgument("model file: implausible layer count");
  for (std::size_t i = 0; i < n_layers; ++i) {
    switch (r.u8()) {
      case kTagConv: {
        nn::Conv2D c;
        c.filters = r.u32();
        c.kernel_h = r.u32();
        c.kernel_w = r.u32();
        c.activation = read_activation(r.u8());
        arch.layers.emplace_back(c);
        break;
      }
      case kTagPool: {
        nn::MaxPool2D p;
        p.pool_h = r.u32();
        p.pool_w = r.u32();
        arch.layers.emplace_back(p);
        break;
      }
      case kTagFlatten:
        arch.layers.emplace_back(nn::Flatten{});
        break;
      case kTagDense: {
        nn::Dense d;
        d.units = r.u32();
        d.activation = read_activation(r.u8());
        arch.layers.emplace_back(d);
        break;
      }
      default:
        throw InvalidArgument("model file: unknown layer tag");
    }
  }
  nn::Model model(std::move(arch));
  if (r.u64() != model.parameter_count()) throw InvalidArgument("model file: parameter count mismatch");
  for (auto& p : model.params()) {
    for (double& v : p.weights.data()) v = r.f32();
    for (double& v : p.bias.data()) v = r.f32();
  }
  if (!r.done()) throw InvalidArgument("model file: trailing bytes");
  return model;
}

void save_model(const nn::Model& model, const std::filesystem::path& path) {
  auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open model file for writing", path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to model file", path.string());
}

nn::Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file", path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace oransim::models
