#include <gtest/gtest.h>

#include <omp.h>

#include "l2h/synth.hpp"
#include "l2h/train.hpp"
#include "test_support.hpp"

namespace l2h {
namespace {

const GeoRef kGeo1m{0.0, 2560.0, 1.0, -1.0, "LOCAL_1M"};

NetConfig small_net(int classes = 5) {
  NetConfig c;
  c.blocks = 2;
  c.branch_channels = {6, 4, 2};
  c.num_classes = classes;
  return c;
}

RasterGrid random_image(int w, int h, std::uint64_t seed, GeoRef geo = kGeo1m) {
  auto img = RasterGrid::make_bands(w, h, 3, geo);
  auto t = testing::random_tensor<float>(3, h, w, seed, 0.0, 1.0);
  std::copy(t.data.begin(), t.data.end(), img.values().begin());
  return img;
}

TEST(MakePairs, CandidateGridArithmetic) {
  auto img = RasterGrid::make_bands(2560, 2560, 3, kGeo1m);
  auto labels = RasterGrid::make_classes(256, 256, kGeo1m.scaled(10), 2);
  TrainConfig cfg;
  cfg.patch_size = 250;  // 10 per axis, the 60-pixel remainder is unused
  auto pairs = make_pairs(img, labels, cfg);
  EXPECT_EQ(pairs.size(), 100u);
  cfg.patch_size = 256;
  EXPECT_THROW(make_pairs(img, labels, cfg), ConfigError);
}

TEST(MakePairs, AllUnlabeledGivesNothing) {
  auto img = RasterGrid::make_bands(200, 200, 3, kGeo1m);
  auto labels = RasterGrid::make_classes(20, 20, kGeo1m.scaled(10), cls::kUnlabeled);
  TrainConfig cfg;
  cfg.patch_size = 50;
  EXPECT_TRUE(make_pairs(img, labels, cfg).empty());
}

TEST(MakePairs, PatchesAreBlockConstantAndMatchSource) {
  auto spec = SceneSpec{};
  spec.width = spec.height = 300;
  spec.cell_size = 30;
  auto scene = generate(spec);
  TrainConfig cfg;
  cfg.patch_size = 60;
  auto pairs = make_pairs(scene.image, scene.products[0], cfg);
  ASSERT_EQ(pairs.size(), 25u);
  for (const auto& p : pairs) {
    ASSERT_EQ(p.window.x % 10, 0);
    for (int y = 0; y < 60; ++y)
      for (int x = 0; x < 60; ++x) {
        const auto v = p.labels.labels[y * 60 + x];
        ASSERT_EQ(v, p.labels.labels[(y / 10 * 10) * 60 + x / 10 * 10]);
        ASSERT_EQ(v, scene.products[0].class_at((p.window.x + x) / 10, (p.window.y + y) / 10));
        ASSERT_EQ(p.image.at(1, y, x), scene.image.value_at(1, p.window.x + x, p.window.y + y));
      }
  }
  auto again = make_pairs(scene.image, scene.products[0], cfg);
  for (std::size_t i = 0; i < pairs.size(); ++i) EXPECT_EQ(pairs[i].window, again[i].window);
  cfg.max_patches = 7;
  EXPECT_EQ(make_pairs(scene.image, scene.products[0], cfg).size(), 7u);
}

TEST(MakePairs, MisalignmentIsRejected) {
  auto labels = RasterGrid::make_classes(20, 20, kGeo1m.scaled(10), 2);
  TrainConfig cfg;
  cfg.patch_size = 50;
  EXPECT_THROW(make_pairs(RasterGrid::make_bands(190, 200, 3, kGeo1m), labels, cfg), AlignmentError);
  GeoRef off = kGeo1m;
  off.origin_x += 5.0;
  EXPECT_THROW(make_pairs(RasterGrid::make_bands(200, 200, 3, off), labels, cfg), AlignmentError);
  cfg.patch_size = 55;
  EXPECT_THROW(make_pairs(RasterGrid::make_bands(200, 200, 3, kGeo1m), labels, cfg), ConfigError);
}

std::vector<TrainingPair> tiny_pairs() {
  SceneSpec spec;
  spec.width = spec.height = 120;
  spec.cell_size = 20;
  spec.seed = 2;
  auto scene = generate(spec);
  TrainConfig cfg;
  cfg.patch_size = 30;
  cfg.max_patches = 6;
  return make_pairs(scene.image, scene.products[0], cfg);
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.patch_size = 30;
  cfg.batch_size = 2;
  cfg.epochs = 3;
  cfg.learning_rate = 0.01;
  cfg.warmup_epochs = 1;
  cfg.seed = 5;
  return cfg;
}

TEST(Train, ZeroLearningRateKeepsInitialParams) {
  auto pairs = tiny_pairs();
  auto cfg = tiny_train_config();
  cfg.learning_rate = 0.0;
  auto res = train(pairs, small_net(), cfg);
  EXPECT_EQ(res.params, init_params<float>(small_net(), cfg.seed));
  EXPECT_EQ(res.log.size(), 9u);
}

TEST(Train, SameSeedIsBitIdenticalAcrossThreadCounts) {
  auto pairs = tiny_pairs();
  auto cfg = tiny_train_config();
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto a = train(pairs, small_net(), cfg);
  omp_set_num_threads(4);
  auto b = train(pairs, small_net(), cfg);
  omp_set_num_threads(saved);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(to_jsonl(a.log[i]), to_jsonl(b.log[i]));
  EXPECT_NE(a.params, init_params<float>(small_net(), cfg.seed));
}

TEST(Train, LogMarksWarmupAsFullyConfident) {
  auto res = train(tiny_pairs(), small_net(), tiny_train_config());
  for (const auto& s : res.log) {
    if (s.epoch == 0) EXPECT_EQ(s.ca_fraction, 1.0);
    EXPECT_GE(s.ca_fraction, 0.0);
    EXPECT_LE(s.ca_fraction, 1.0);
  }
  EXPECT_EQ(to_jsonl(StepLog{3, 1, 0.5, 0.25, 0.75}),
            "{\"step\":3,\"epoch\":1,\"ce\":0.5,\"dva\":0.25,\"ca_fraction\":0.75}");
}

TEST(Train, DivergenceIsReported) {
  auto cfg = tiny_train_config();
  cfg.learning_rate = 1e30;
  try {
    train(tiny_pairs(), small_net(), cfg);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    bool finite = true;
    e.last_good().for_each([&](float v) { finite &= std::isfinite(v); });
    EXPECT_TRUE(finite);
    EXPECT_STREQ(e.name(), "DivergenceError");
  }
}

TEST(Train, RejectsEmptyPairsAndBadConfig) {
  EXPECT_THROW(train({}, small_net(), tiny_train_config()), ConfigError);
  auto cfg = tiny_train_config();
  cfg.momentum = 1.0;
  EXPECT_THROW(train(tiny_pairs(), small_net(), cfg), ConfigError);
}

TEST(Predict, SmallImageEqualsSingleForward) {
  auto net = small_net();
  auto params = init_params<float>(net, 3);
  auto img = random_image(90, 70, 4);
  MosaicPolicy policy;
  auto pred = predict_tiled(params, net, img, policy);
  auto cp = forward(params, net, to_tensor(img)).cp;
  EXPECT_EQ(pred.classes.georef(), img.georef());
  for (int y = 0; y < 70; ++y)
    for (int x = 0; x < 90; ++x) {
      int best = 0;
      for (int l = 1; l < 5; ++l)
        if (cp.at(l, y, x) > cp.at(best, y, x)) best = l;
      ASSERT_EQ(pred.classes.class_at(x, y), best + 1);
      ASSERT_EQ(pred.confidence.value_at(0, x, y), cp.at(best, y, x));
    }
}

TEST(Predict, InferMatchesForward) {
  auto net = small_net();
  auto params = init_params<float>(net, 6);
  auto t = to_tensor(random_image(40, 33, 7));
  EXPECT_EQ(infer(params, net, t), forward(params, net, t).cp);
}

TEST(Predict, TiledEqualsMonolithicBitExactly) {
  auto net = small_net();
  auto params = init_params<float>(net, 8);
  auto img = random_image(300, 260, 9);
  const int R = receptive_field(net);
  auto whole = predict_tiled(params, net, img, MosaicPolicy{1024, 2 * R, Blend::CropCenter});
  for (int overlap : {2 * R, 2 * R + 3, 40}) {
    auto tiled = predict_tiled(params, net, img, MosaicPolicy{64, overlap, Blend::CropCenter});
    EXPECT_EQ(tiled.classes, whole.classes) << overlap;
    EXPECT_EQ(tiled.confidence, whole.confidence) << overlap;
  }
}

TEST(Predict, ProbAverageCommitsEveryPixel) {
  auto net = small_net();
  auto params = init_params<float>(net, 10);
  auto img = random_image(130, 90, 11);
  auto pred = predict_tiled(params, net, img, MosaicPolicy{50, 12, Blend::ProbAverage});
  for (auto v : pred.classes.classes()) {
    ASSERT_GE(v, 1);
    ASSERT_LE(v, 5);
  }
}

TEST(Predict, PolicyValidation) {
  auto net = small_net();
  auto params = init_params<float>(net, 1);
  auto img = random_image(60, 60, 2);
  const int R = receptive_field(net);
  EXPECT_THROW(predict_tiled(params, net, img, MosaicPolicy{2 * R, 2 * R - 1, Blend::CropCenter}), ConfigError);
  EXPECT_THROW(predict_tiled(params, net, img, MosaicPolicy{40, 2 * R - 1, Blend::CropCenter}), ConfigError);
  auto two_band = RasterGrid::make_bands(60, 60, 2, kGeo1m);
  EXPECT_THROW(predict_tiled(params, net, two_band, MosaicPolicy{}), FormatError);
}

TEST(Predict, OwnershipBoundsSplitOverlapsAtMidpoints) {
  EXPECT_EQ(ownership_bounds({0, 224, 244}, 256, 500), (std::vector<int>{0, 240, 362, 500}));
  EXPECT_EQ(ownership_bounds({0}, 100, 100), (std::vector<int>{0, 100}));
}

TEST(TrainConfigTest, FromConfig) {
  auto kv = KeyValueConfig::parse(
      "patch_size = 100\nbatch_size = 3\nepochs = 4\nlearning_rate = 0.002\ngamma = 0.01\ntau = 0.8\n"
      "vague_assignment = label\nvariance_form = 2-norm\n");
  auto cfg = TrainConfig::from_config(kv);
  EXPECT_EQ(cfg.patch_size, 100);
  EXPECT_EQ(cfg.batch_size, 3);
  EXPECT_DOUBLE_EQ(cfg.loss.gamma, 0.01);
  EXPECT_DOUBLE_EQ(cfg.loss.tau, 0.8);
  EXPECT_EQ(cfg.loss.vague_assignment, VagueAssignment::Label);
  EXPECT_EQ(cfg.loss.variance_form, VarianceForm::Norm);
  EXPECT_THROW(TrainConfig::from_config(KeyValueConfig::parse("variance_form = cubic\n")), ConfigError);
}

}  // namespace
}  // namespace l2h
