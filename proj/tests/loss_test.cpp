#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "l2h/loss.hpp"
#include "l2h/net.hpp"
#include "test_support.hpp"

namespace l2h {
namespace {

using testing::random_tensor;
using testing::rel_err;

LabelPatch random_labels(int w, int h, int L, std::mt19937_64& rng, double unlabeled = 0.2) {
  LabelPatch p{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
  std::uniform_real_distribution<double> u;
  for (auto& v : p.labels) v = u(rng) < unlabeled ? 0 : static_cast<std::uint8_t>(1 + rng() % L);
  return p;
}

Tensor<double> softmax_of(const Tensor<double>& logits) {
  Tensor<double> cp;
  softmax_channels(logits, cp);
  return cp;
}

TEST(Cas, Definition) {
  LossConfig cfg;
  Tensor<double> cp(2, 1, 3);
  // pixel 0: peak 0.9 on label; pixel 1: peak 0.9 elsewhere; pixel 2: unlabeled
  cp.at(0, 0, 0) = 0.9;
  cp.at(1, 0, 0) = 0.1;
  cp.at(0, 0, 1) = 0.1;
  cp.at(1, 0, 1) = 0.9;
  cp.at(0, 0, 2) = 0.5;
  cp.at(1, 0, 2) = 0.5;
  LabelPatch labels{3, 1, {1, 1, 0}};
  auto m = cas_select(cp, labels, cfg);
  EXPECT_EQ(m.area[0], Area::Confident);
  EXPECT_EQ(m.area[1], Area::Vague);
  EXPECT_EQ(m.area[2], Area::Excluded);
  EXPECT_EQ(m.confident, 1u);
  EXPECT_EQ(m.vague, 1u);
  EXPECT_EQ(m.assigned[0], 1);
  EXPECT_EQ(m.assigned[1], 2);  // predicted class
  cfg.vague_assignment = VagueAssignment::Label;
  EXPECT_EQ(cas_select(cp, labels, cfg).assigned[1], 1);
}

TEST(Cas, UniformCpGivesEmptyCa) {
  Tensor<double> cp(4, 3, 3, 0.25);
  LabelPatch labels{3, 3, std::vector<std::uint8_t>(9, 2)};
  auto m = cas_select(cp, labels, LossConfig{});
  EXPECT_EQ(m.confident, 0u);
  EXPECT_EQ(m.vague, 9u);
}

TEST(Cas, PartitionIsExhaustive) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    auto cp = softmax_of(random_tensor<double>(4, 7, 6, rng(), -3, 3));
    auto labels = random_labels(6, 7, 4, rng);
    LossConfig cfg;
    cfg.tau = 0.3 + 0.05 * (trial % 10);
    auto m = cas_select(cp, labels, cfg);
    std::size_t ca = 0, va = 0, ex = 0;
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const bool c = m.area[p] == Area::Confident, v = m.area[p] == Area::Vague, e = m.area[p] == Area::Excluded;
      ASSERT_EQ(c + v + e, 1);
      ASSERT_EQ(e, labels.labels[p] == 0);
      ca += c;
      va += v;
      ex += e;
    }
    EXPECT_EQ(ca, m.confident);
    EXPECT_EQ(va, m.vague);
    EXPECT_EQ(ca + va + ex, labels.size());
  }
}

TEST(Cas, RaisingTauNeverGrowsCa) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto cp = softmax_of(random_tensor<double>(3, 8, 8, rng(), -4, 4));
    auto labels = random_labels(8, 8, 3, rng);
    LossConfig lo, hi;
    lo.tau = 0.2 + 0.6 * std::uniform_real_distribution<double>()(rng);
    hi.tau = lo.tau + (0.99 - lo.tau) * std::uniform_real_distribution<double>()(rng);
    auto a = cas_select(cp, labels, lo), b = cas_select(cp, labels, hi);
    for (std::size_t p = 0; p < labels.size(); ++p)
      if (b.g(p)) ASSERT_TRUE(a.g(p));
  }
}

TEST(Cas, AgreementCanBeDisabled) {
  Tensor<double> cp(2, 1, 1);
  cp.at(0, 0, 0) = 0.1;
  cp.at(1, 0, 0) = 0.9;
  LabelPatch labels{1, 1, {1}};
  LossConfig cfg;
  cfg.require_agreement = false;
  EXPECT_EQ(cas_select(cp, labels, cfg).confident, 1u);
}

TEST(Cas, RejectsMismatchAndBadLabels) {
  Tensor<double> cp(2, 2, 2, 0.5);
  EXPECT_THROW(cas_select(cp, LabelPatch{3, 2, std::vector<std::uint8_t>(6, 1)}, LossConfig{}), ShapeError);
  EXPECT_THROW(cas_select(cp, LabelPatch{2, 2, {1, 1, 3, 1}}, LossConfig{}), UnknownClassError);
}

TEST(MaskedCe, WorkedExample) {
  Tensor<double> cp(2, 1, 2);
  cp.at(0, 0, 0) = 0.8;
  cp.at(1, 0, 0) = 0.2;
  cp.at(0, 0, 1) = 0.6;
  cp.at(1, 0, 1) = 0.4;
  LabelPatch labels{2, 1, {1, 1}};
  ConfidenceMask m = all_labeled(labels);
  m.area[1] = Area::Vague;
  m.confident = 1;
  m.vague = 1;
  EXPECT_NEAR(masked_ce(cp, labels, m).loss, 0.2231435513142097, 1e-9);
}

TEST(MaskedCe, PerfectPredictionsAndEmptyCa) {
  Tensor<double> cp(3, 2, 2);
  LabelPatch labels{2, 2, {1, 2, 3, 1}};
  for (int p = 0; p < 4; ++p) cp.data[(labels.labels[p] - 1) * 4 + p] = 1.0;
  EXPECT_EQ(masked_ce(cp, labels, all_labeled(labels)).loss, 0.0);

  auto none = cas_select(Tensor<double>(3, 2, 2, 1.0 / 3), labels, LossConfig{});
  auto r = masked_ce(cp, labels, none);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grad_logits.data) EXPECT_EQ(g, 0.0);
}

TEST(MaskedCe, ZeroProbabilityIsClamped) {
  Tensor<double> cp(2, 1, 1);
  cp.at(1, 0, 0) = 1.0;
  LabelPatch labels{1, 1, {1}};
  EXPECT_NEAR(masked_ce(cp, labels, all_labeled(labels)).loss, -std::log(1e-12), 1e-9);
}

TEST(MaskedCe, DuplicatedPatchLeavesLossUnchanged) {
  std::mt19937_64 rng(3);
  auto cp = softmax_of(random_tensor<double>(3, 4, 5, 4));
  auto labels = random_labels(5, 4, 3, rng);
  const double single = masked_ce(cp, labels, all_labeled(labels)).loss;
  // Stack the patch twice vertically: one patch with twice the pixels.
  Tensor<double> cp2(3, 8, 5);
  LabelPatch labels2{5, 8, {}};
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 5; ++x) cp2.at(c, y, x) = cp.at(c, y % 4, x);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 5; ++x) labels2.labels.push_back(labels.labels[(y % 4) * 5 + x]);
  EXPECT_NEAR(masked_ce(cp2, labels2, all_labeled(labels2)).loss, single, 1e-14);
}

double ce_of_logits(const Tensor<double>& logits, const LabelPatch& labels, const ConfidenceMask& m) {
  return masked_ce(softmax_of(logits), labels, m).loss;
}

TEST(MaskedCe, GradientMatchesFiniteDifferences) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    auto logits = random_tensor<double>(2, 3, 3, seed + 1000, -2, 2);
    auto labels = random_labels(3, 3, 2, rng, 0.0);
    LossConfig cfg;
    cfg.tau = 0.55;
    auto mask = cas_select(softmax_of(logits), labels, cfg);
    if (mask.confident == 0) mask = all_labeled(labels);
    auto r = masked_ce(softmax_of(logits), labels, mask);
    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      auto up = logits, down = logits;
      up.data[i] += h;
      down.data[i] -= h;
      const double fd = (ce_of_logits(up, labels, mask) - ce_of_logits(down, labels, mask)) / (2 * h);
      worst = std::max(worst, rel_err(fd, r.grad_logits.data[i], 1e-9));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Dva, WorkedExample) {
  std::vector<Tensor<double>> f{Tensor<double>(2, 1, 2)};
  f[0].at(0, 0, 0) = 1.0;  // CA pixel (1, 0)
  f[0].at(1, 0, 1) = 1.0;  // VA pixel (0, 1)
  ConfidenceMask m;
  m.width = 2;
  m.height = 1;
  m.area = {Area::Confident, Area::Vague};
  m.assigned = {1, 1};
  m.confident = m.vague = 1;
  LossConfig cfg;
  EXPECT_NEAR(dva_loss(f, m, 1, cfg).loss, 0.1, 1e-12);
  cfg.variance_form = VarianceForm::Norm;
  EXPECT_NEAR(dva_loss(f, m, 1, cfg).loss, 0.05 * std::sqrt(2.0), 1e-12);
}

TEST(Dva, EqualMeansAndEmptySetsGiveZero) {
  std::vector<Tensor<double>> f{Tensor<double>(3, 2, 2, 0.7)};
  ConfidenceMask m;
  m.width = m.height = 2;
  m.area = {Area::Confident, Area::Vague, Area::Confident, Area::Excluded};
  m.assigned = {1, 1, 2, 0};
  m.confident = 2;
  m.vague = 1;
  auto r = dva_loss(f, m, 2, LossConfig{});
  EXPECT_EQ(r.loss, 0.0);
  // Class 2 has no VA pixel: its term is skipped, so its pixel gets no gradient.
  f[0].at(0, 1, 0) = 5.0;
  r = dva_loss(f, m, 2, LossConfig{});
  EXPECT_EQ(r.loss, 0.0);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(r.grad_features[0].at(c, 1, 0), 0.0);
}

TEST(Dva, NonNegativeOnRandomCases) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tensor<double>> f{random_tensor<double>(4, 5, 5, rng()), random_tensor<double>(2, 5, 5, rng())};
    auto cp = softmax_of(random_tensor<double>(3, 5, 5, rng(), -3, 3));
    auto labels = random_labels(5, 5, 3, rng);
    LossConfig cfg;
    cfg.tau = 0.4;
    auto m = cas_select(cp, labels, cfg);
    EXPECT_GE(dva_loss(f, m, 3, cfg).loss, 0.0);
  }
}

struct DvaCase {
  std::vector<Tensor<double>> features;
  ConfidenceMask mask;
};

DvaCase random_dva_case(std::uint64_t seed, int B, int L, int side) {
  std::mt19937_64 rng(seed);
  DvaCase c;
  for (int b = 0; b < B; ++b) c.features.push_back(random_tensor<double>(3 + b, side, side, rng()));
  c.mask.width = c.mask.height = side;
  const std::size_t n = static_cast<std::size_t>(side) * side;
  c.mask.area.resize(n);
  c.mask.assigned.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    const int k = static_cast<int>(rng() % 5);
    if (k == 0) continue;
    c.mask.area[p] = k <= 2 ? Area::Confident : Area::Vague;
    c.mask.assigned[p] = static_cast<std::uint8_t>(1 + rng() % L);
    (k <= 2 ? c.mask.confident : c.mask.vague)++;
  }
  return c;
}

TEST(Dva, GradientMatchesFiniteDifferences) {
  for (auto form : {VarianceForm::SquaredNorm, VarianceForm::Norm}) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto c = random_dva_case(seed, 2, 3, 4);
      LossConfig cfg;
      cfg.variance_form = form;
      auto r = dva_loss(c.features, c.mask, 3, cfg);
      const double h = 1e-6;
      for (std::size_t b = 0; b < c.features.size(); ++b)
        for (std::size_t i = 0; i < c.features[b].size(); ++i) {
          auto up = c.features, down = c.features;
          up[b].data[i] += h;
          down[b].data[i] -= h;
          const double fd = (dva_loss(up, c.mask, 3, cfg).loss - dva_loss(down, c.mask, 3, cfg).loss) / (2 * h);
          worst = std::max(worst, rel_err(fd, r.grad_features[b].data[i], 1e-9));
        }
    }
    EXPECT_LT(worst, 1e-5);
  }
}

TEST(L2hLoss, GammaZeroReducesToMaskedCe) {
  std::mt19937_64 rng(6);
  auto cp = softmax_of(random_tensor<double>(3, 6, 6, 7, -3, 3));
  std::vector<Tensor<double>> f{random_tensor<double>(4, 6, 6, 8)};
  auto labels = random_labels(6, 6, 3, rng);
  LossConfig cfg;
  cfg.gamma = 0.0;
  cfg.tau = 0.4;
  auto r = l2h_loss(cp, f, labels, cfg);
  auto ce = masked_ce(cp, labels, cas_select(cp, labels, cfg));
  EXPECT_EQ(r.loss, ce.loss);
  EXPECT_EQ(r.dva, 0.0);
  EXPECT_EQ(r.grad_logits, ce.grad_logits);
  for (double g : r.grad_features[0].data) EXPECT_EQ(g, 0.0);
}

TEST(L2hLoss, AllUnlabeledGivesZero) {
  auto cp = softmax_of(random_tensor<double>(3, 4, 4, 9));
  std::vector<Tensor<double>> f{random_tensor<double>(2, 4, 4, 10)};
  LabelPatch labels{4, 4, std::vector<std::uint8_t>(16, 0)};
  auto r = l2h_loss(cp, f, labels, LossConfig{});
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grad_logits.data) EXPECT_EQ(g, 0.0);
  for (double g : r.grad_features[0].data) EXPECT_EQ(g, 0.0);
}

TEST(L2hLoss, TotalIsSumOfComponents) {
  std::mt19937_64 rng(11);
  auto cp = softmax_of(random_tensor<double>(3, 5, 5, 12, -3, 3));
  std::vector<Tensor<double>> f{random_tensor<double>(4, 5, 5, 13), random_tensor<double>(2, 5, 5, 14)};
  auto labels = random_labels(5, 5, 3, rng);
  LossConfig cfg;
  cfg.tau = 0.4;
  auto r = l2h_loss(cp, f, labels, cfg);
  auto ce = masked_ce(cp, labels, r.mask);
  auto dva = dva_loss(f, r.mask, 3, cfg);
  EXPECT_NEAR(r.loss, ce.loss + dva.loss, 1e-15);
  EXPECT_EQ(r.grad_logits, ce.grad_logits);
  EXPECT_EQ(r.grad_features[0], dva.grad_features[0]);
  EXPECT_EQ(r.grad_features[1], dva.grad_features[1]);
}

TEST(LossConfigTest, Validation) {
  LossConfig c;
  c.tau = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = LossConfig{};
  c.gamma = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  auto cp = softmax_of(random_tensor<double>(2, 2, 2, 1));
  LabelPatch labels{2, 2, {1, 1, 1, 1}};
  EXPECT_THROW(l2h_loss(cp, {}, labels, c), ConfigError);
}

}  // namespace
}  // namespace l2h
