// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "oransim/errors.hpp"
#include "oransim/models.hpp"

using namespace oransim;
using namespace oransim::models;

namespace {

// Closed-form parameter count, independent of the library's layer arithmetic.
std::size_t conv_params(std::size_t k, std::size_t cin, std::size_t cout) { return k * k * cin * cout + cout; }
std::size_t dense_params(std::size_t in, std::size_t out) { return in * out + out; }

Tensor random_input(const Shape& s, std::mt19937_64& rng) {
  Tensor t(s);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

}  // namespace

TEST(SpecModel, ParameterCountIsExact) {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    EXPECT_EQ(build_spec_model(seed).parameter_count(), kSpecParameterCount);
  }
}

TEST(SpecModel, PerLayerCountsMatchHandArithmetic) {
  // 128 -conv-> 126 -pool-> 63 -conv-> 61 -pool-> 30 -conv-> 28 -pool-> 14 -conv-> 12; 12*12*32 = 4608
  std::vector<std::size_t> expected{conv_params(3, 1, 16),  conv_params(3, 16, 16), conv_params(3, 16, 32),
                                    conv_params(3, 32, 32), dense_params(4608, 32), dense_params(32, 2)};
  EXPECT_EQ(expected, (std::vector<std::size_t>{160, 2320, 4640, 9248, 147488, 66}));
  auto counts = build_spec_model(0).layer_parameter_counts();
  std::vector<std::size_t> nonzero;
  for (auto c : counts) {
    if (c) nonzero.push_back(c);
  }
  EXPECT_EQ(nonzero, expected);
}

TEST(SpecModel, ZeroInputGivesFiniteTwoLogits) {
  auto m = build_spec_model(3);
  Tensor logits = nn::forward(m, Tensor(Shape{128, 128, 1}));
  EXPECT_EQ(logits.shape(), (Shape{2}));
  EXPECT_TRUE(logits.all_finite());
}

TEST(KpmModel, DefaultsGiveSixtyInputsAnd6542Parameters) {
  auto m = build_kpm_model(KpmDescriptor{}, 0);
  EXPECT_EQ(m.input_shape(), (Shape{60}));
  EXPECT_EQ(m.parameter_count(), 61u * 80 + 81 * 20 + 21 * 2);
  EXPECT_EQ(m.parameter_count(), 6542u);
}

TEST(KpmModel, SingleWindowInput) {
  auto m = build_kpm_model(4, 1, {80, 20}, 0);
  EXPECT_EQ(m.input_shape(), (Shape{4}));
  EXPECT_EQ(nn::forward(m, Tensor(Shape{4})).size(), 2u);
}

TEST(KpmModel, RejectsBadDescriptors) {
  EXPECT_THROW(build_kpm_model(4, 15, {}, 0), InvalidArgument);
  EXPECT_THROW(build_kpm_model(0, 15, {8}, 0), InvalidArgument);
  EXPECT_THROW(build_kpm_model(4, 0, {8}, 0), InvalidArgument);
}

TEST(Predict, ArgmaxOfLogits) {
  nn::Model m({{2}, {nn::Dense{2, nn::Activation::kLinear}}});
  // identity weights, logits = x
  m.params()[0].weights = Tensor({2, 2}, {1, 0, 0, 1});
  auto p = predict(m, Tensor{3.0, -1.0});
  EXPECT_EQ(p.label, 0u);
  EXPECT_NEAR(p.probabilities[0] + p.probabilities[1], 1.0, 1e-12);
  EXPECT_EQ(predict(m, Tensor{-1.0, 3.0}).label, 1u);
}

TEST(Predict, IsPure) {
  auto m = build_kpm_model(KpmDescriptor{}, 5);
  std::mt19937_64 rng(1);
  Tensor x = random_input({60}, rng);
  auto a = predict(m, x);
  auto b = predict(m, x);
  EXPECT_EQ(a.label, b.label);
  EXPECT_EQ(a.probabilities, b.probabilities);
}

TEST(Predict, ShapeMismatchRejected) {
  auto m = build_kpm_model(KpmDescriptor{}, 5);
  EXPECT_THROW(predict(m, Tensor(Shape{59})), InvalidArgument);
}

TEST(Predict, ClassInvariantToTemperature) {
  auto m = build_kpm_model(KpmDescriptor{}, 8);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    Tensor x = random_input({60}, rng);
    auto logits = nn::forward(m, x);
    std::size_t cls = predict(m, x).label;
    for (double t : {0.5, 2.0, 20.0, 100.0}) EXPECT_EQ(nn::argmax(nn::softmax_t(logits.data(), t)), cls);
  }
}

TEST(ModelFile, RoundTripPreservesPredictions) {
  std::mt19937_64 rng(4);
  auto path = std::filesystem::temp_directory_path() / "oransim_roundtrip.orml";
  for (auto* build : {+[] { return build_kpm_model(KpmDescriptor{}, 11); }, +[] { return build_spec_model(12); }}) {
    nn::Model m = build();
    save_model(m, path);
    nn::Model back = load_model(path);
    EXPECT_EQ(back.architecture(), m.architecture());
    int n = m.input_shape().size() == 1 ? 100 : 10;
    for (int i = 0; i < n; ++i) {
      Tensor x = random_input(m.input_shape(), rng);
      auto a = predict(m, x).probabilities;
      auto b = predict(back, x).probabilities;
      for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LT(std::abs(a[k] - b[k]), 1e-5);
    }
    // A second save of the loaded model is byte-identical (values already float32).
    EXPECT_EQ(serialize_model(back), serialize_model(load_model(path)));
  }
  std::filesystem::remove(path);
}

TEST(ModelFile, HeaderLayout) {
  auto bytes = serialize_model(build_kpm_model(4, 1, {3}, 0));
  ASSERT_GE(bytes.size(), 6u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "ORML");
  EXPECT_EQ(bytes[4], kModelFileVersion);
}

TEST(ModelFile, RejectsCorruptInput) {
  auto bytes = serialize_model(build_kpm_model(4, 1, {3}, 0));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_model(bad), InvalidArgument);
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(deserialize_model(bad), InvalidArgument);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(deserialize_model(bad), InvalidArgument);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(deserialize_model(bad), InvalidArgument);
  EXPECT_THROW(load_model("/nonexistent/dir/model.orml"), IoError);
}
