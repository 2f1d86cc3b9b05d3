// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "oransim/nn.hpp"

namespace oransim::models {

inline constexpr std::size_t kSpecImageSize = 128;
inline constexpr std::size_t kSpecParameterCount = 163922;

// Class indices shared by both variants.
inline constexpr std::size_t kSoi = 0;
inline constexpr std::size_t kCwi = 1;

nn::Architecture spec_architecture();

struct KpmDescriptor {
  std::size_t m = 4;
  std::size_t t = 15;
  std::vector<std::size_t> hidden_sizes{80, 20};
};

nn::Architecture kpm_architecture(const KpmDescriptor& desc);

nn::Model build_spec_model(std::uint64_t seed);
nn::Model build_kpm_model(std::size_t m, std::size_t t, const std::vector<std::size_t>& hidden_sizes,
                          std::uint64_t seed);
nn::Model build_kpm_model(const KpmDescriptor& desc, std::uint64_t seed);

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

Prediction predict(const nn::Model& model, const Tensor& x);

// .orml: "ORML", version byte, architecture descriptor, then every weight and
// bias as little-endian float32 in layer order. All integers are little-endian.
inline constexpr std::uint8_t kModelFileVersion = 1;

std::vector<std::uint8_t> serialize_model(const nn::Model& model);
nn::Model deserialize_model(const std::vector<std::uint8_t>& bytes);
void save_model(const nn::Model& model, const std::filesystem::path& path);
nn::Model load_model(const std::filesystem::path& path);

}  // namespace oransim::models
