#include <gtest/gtest.h>

#include <filesystem>

#include "l2h/loss.hpp"
#include "l2h/net.hpp"
#include "test_support.hpp"

namespace l2h {
namespace {

using testing::random_tensor;
using testing::rel_err;

NetConfig small_config() {
  NetConfig c;
  c.blocks = 2;
  c.branch_channels = {4, 2, 2};
  c.input_channels = 3;
  c.num_classes = 3;
  return c;
}

TEST(Net, ParameterCounts) {
  NetConfig paper;
  paper.num_classes = 12;
  EXPECT_EQ(make_params<float>(paper).count(), 341068u);
  EXPECT_EQ(make_params<float>(NetConfig{}).count(), 340955u);
  EXPECT_EQ(make_params<float>(small_config()).count(), 835u);
}

TEST(Net, ReceptiveField) {
  EXPECT_EQ(receptive_field(NetConfig{}), 10);
  EXPECT_EQ(receptive_field(small_config()), 4);
}

TEST(Net, ValidateRejectsBadConfigs) {
  NetConfig c;
  c.num_classes = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = NetConfig{};
  c.kernels = {1, 4, 5};
  EXPECT_THROW(c.validate(), ConfigError);
  c = NetConfig{};
  c.blocks = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Net, InitIsSeedDeterministic) {
  auto a = init_params<float>(NetConfig{}, 42);
  auto b = init_params<float>(NetConfig{}, 42);
  auto c = init_params<float>(NetConfig{}, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (const auto& l : a.layers) {
    const double bound = std::sqrt(6.0 / (l.in_channels * l.ksize * l.ksize));
    for (float w : l.weight) EXPECT_LE(std::abs(w), bound);
    for (float v : l.bias) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Net, ForwardShapesAndSoftmax) {
  auto cfg = small_config();
  auto p = init_params<double>(cfg, 3);
  auto img = random_tensor<double>(3, 9, 11, 4);
  auto f = forward(p, cfg, img);
  f.logits.require_shape(3, 9, 11, "logits");
  ASSERT_EQ(f.features.size(), 2u);
  for (const auto& t : f.features) {
    t.require_shape(8, 9, 11, "features");
    for (double v : t.data) EXPECT_GE(v, 0.0);
  }
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 11; ++x) {
      double s = 0;
      for (int l = 0; l < 3; ++l) s += f.cp.at(l, y, x);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Net, ForwardRejectsWrongChannels) {
  auto cfg = small_config();
  auto p = init_params<double>(cfg, 3);
  auto img = random_tensor<double>(4, 5, 5, 4);
  EXPECT_THROW(forward(p, cfg, img), ShapeError);
}

TEST(Net, TranslationCovarianceAwayFromBorders) {
  auto cfg = small_config();
  auto p = init_params<float>(cfg, 5);
  auto big = random_tensor<float>(3, 40, 40, 6);
  const int dy = 5, dx = 7, h = 25, w = 22;
  Tensor<float> crop(3, h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) crop.at(c, y, x) = big.at(c, y + dy, x + dx);
  auto fb = forward(p, cfg, big);
  auto fc = forward(p, cfg, crop);
  const int r = receptive_field(cfg);
  for (int l = 0; l < 3; ++l)
    for (int y = r; y < h - r; ++y)
      for (int x = r; x < w - r; ++x) ASSERT_EQ(fc.logits.at(l, y, x), fb.logits.at(l, y + dy, x + dx));
}

TEST(Net, BackwardWithoutCacheThrows) {
  auto cfg = small_config();
  auto p = init_params<double>(cfg, 3);
  auto img = random_tensor<double>(3, 5, 5, 4);
  ForwardResult<double> empty;
  Tensor<double> g(3, 5, 5);
  EXPECT_THROW(backward(p, cfg, img, empty, g, {}), StateError);
}

// Finite-difference check of the full loss (masked CE + DVA) with respect to
// every parameter of a reduced network. The mask is frozen so the loss is
// smooth in the parameters.
TEST(Net, GradientMatchesFiniteDifferences) {
  auto cfg = small_config();
  auto params = init_params<double>(cfg, 11);
  // Nonzero biases so that bias gradients are exercised away from the init.
  for (auto& l : params.layers)
    for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.05 * (static_cast<double>(i % 3) - 1.0);
  auto image = random_tensor<double>(3, 6, 7, 12);

  LabelPatch labels{7, 6, {}};
  for (int i = 0; i < 42; ++i) labels.labels.push_back(static_cast<std::uint8_t>(i % 5 == 0 ? 0 : 1 + (i * 7) % 3));

  LossConfig lc;
  lc.tau = 0.0;
  lc.gamma = 0.3;
  auto base = forward(params, cfg, image);
  // Half the labeled pixels confident, the rest vague with their own label.
  ConfidenceMask mask;
  mask.width = 7;
  mask.height = 6;
  mask.area.resize(42);
  mask.assigned.resize(42);
  for (int i = 0; i < 42; ++i) {
    if (labels.labels[i] == 0) continue;
    mask.assigned[i] = labels.labels[i];
    if (i % 2 == 0) {
      mask.area[i] = Area::Confident;
      ++mask.confident;
    } else {
      mask.area[i] = Area::Vague;
      ++mask.vague;
    }
  }

  auto res = l2h_loss_masked(base.cp, base.features, labels, mask, lc);
  ASSERT_GT(res.dva, 0.0);
  auto grads = backward(params, cfg, image, base, res.grad_logits, res.grad_features);

  auto loss_at = [&](const NetParams<double>& p) {
    auto f = forward(p, cfg, image);
    return l2h_loss_masked(f.cp, f.features, labels, mask, lc).loss;
  };

  std::vector<double*> ps;
  params.for_each([&](double& v) { ps.push_back(&v); });
  std::vector<double> gs;
  grads.for_each([&](const double& v) { gs.push_back(v); });
  ASSERT_EQ(ps.size(), gs.size());

  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double saved = *ps[i];
    *ps[i] = saved + h;
    const double up = loss_at(params);
    *ps[i] = saved - h;
    const double down = loss_at(params);
    *ps[i] = saved;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, rel_err(fd, gs[i], 1e-6));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Net, CheckpointRoundTrip) {
  auto cfg = small_config();
  auto p = init_params<float>(cfg, 99);
  auto bytes = encode_checkpoint(cfg, p);
  auto ck = decode_checkpoint(bytes);
  EXPECT_EQ(ck.config, cfg);
  EXPECT_EQ(ck.params, p);

  const auto path = std::filesystem::temp_directory_path() / "l2h_net_test.ckpt";
  save_checkpoint(path, cfg, p);
  auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.params, p);
  std::filesystem::remove(path);
}

TEST(Net, CheckpointRejectsCorruption) {
  auto cfg = small_config();
  auto bytes = encode_checkpoint(cfg, init_params<float>(cfg, 1));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bytes.pop_back();
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}

TEST(Net, DescribeListsEveryLayer) {
  const auto text = describe(NetConfig{});
  EXPECT_NE(text.find("340955"), std::string::npos);
  EXPECT_NE(text.find("head"), std::string::npos);
}

}  // namespace
}  // namespace l2h
