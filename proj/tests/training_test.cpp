#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "antq/errors.hpp"
#include "antq/training.hpp"

namespace antq {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.model_dim = 16;
  c.num_heads = 2;
  c.segment_layers = 1;
  c.video_layers = 1;
  c.decoder_layers = 1;
  c.num_queries = 6;
  c.window_k = 5;
  return c;
}

// Two activities over disjoint classes with a fixed order and fixed
// durations, so every segment determines its future label set.
std::vector<ActivityGrammar> deterministic_grammars() {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ActivityGrammar> out;
  for (int a = 0; a < 2; ++a) {
    ActivityGrammar g;
    g.name = "activity" + std::to_string(a);
    for (int i = 0; i < 4; ++i) g.classes.push_back(4 * a + i);
    g.initial = {1, 0, 0, 0};
    g.transitions = {{0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}, {1, 0, 0, 0}};
    g.durations.assign(4, {10, 10});
    for (int i = 0; i < 4; ++i) {
      std::vector<double> mu(16);
      for (auto& v : mu) v = normal(rng);
      g.prototypes.push_back(mu);
    }
    out.push_back(g);
  }
  return out;
}

std::vector<VideoSample> deterministic_videos(std::size_t count, std::uint64_t seed) {
  return generate_dataset(deterministic_grammars(), {.count = count, .min_length = 40, .max_length = 40, .seed = seed});
}

Stage2Config quick_stage2(std::size_t steps) {
  Stage2Config c;
  c.steps = steps;
  c.batch_size = 2;
  return c;
}

TEST(Stage1, DeterministicGrammarIsLearnedExactly) {
  const auto train = deterministic_videos(40, 1);
  const auto val = deterministic_videos(20, 2);
  AnticipatrModel model(small_config(), 1);
  Stage1Config config;
  config.steps = 300;
  const auto log = train_stage1(model, train, config);
  ASSERT_EQ(log.size(), 300u);
  const auto metrics = evaluate_stage1(model, val, config);
  EXPECT_EQ(metrics.examples, 60u);
  EXPECT_GE(metrics.exact_match, 0.95);
  EXPECT_GT(metrics.mean_ap, 0.95);
}

TEST(Stage1, OverfitsSingleBatch) {
  const auto videos = deterministic_videos(1, 5);
  AnticipatrModel model(small_config(), 2);
  Stage1Config config;
  config.steps = 300;
  config.batch_size = 3;
  const auto log = train_stage1(model, videos, config);
  const double first = log.front().loss;
  const double last = evaluate_stage1(model, videos, config).loss;
  EXPECT_LT(last, 0.05 * first) << "first " << first << " last " << last;
}

TEST(Stage1, CheckpointReproducesValidationLoss) {
  const auto videos = deterministic_videos(6, 3);
  AnticipatrModel model(small_config(), 2);
  Stage1Config config;
  config.steps = 20;
  train_stage1(model, videos, config);
  const auto path = std::filesystem::temp_directory_path() / "antq_training_test_stage1.bin";
  save_model(path, model);
  AnticipatrModel reloaded(small_config(), 77);
  load_segment_encoder(path, reloaded);
  EXPECT_EQ(evaluate_stage1(model, videos, config).loss, evaluate_stage1(reloaded, videos, config).loss);
  std::filesystem::remove(path);
}

TEST(Stage1, NonFiniteLossAborts) {
  auto videos = deterministic_videos(2, 4);
  videos[0].features[3] = std::numeric_limits<float>::quiet_NaN();
  videos[1].features[3] = std::numeric_limits<float>::quiet_NaN();
  AnticipatrModel model(small_config(), 2);
  Stage1Config config;
  config.steps = 5;
  EXPECT_THROW(train_stage1(model, videos, config), NumericalError);
}

TEST(Stage2, FrozenSegmentEncoderIsBitIdentical) {
  const auto videos = deterministic_videos(4, 6);
  AnticipatrModel model(small_config(), 3);
  const auto segment_before = snapshot(model.segment_encoder().parameters());
  const auto rest_before = snapshot(model.stage2_parameters(false));
  train_stage2(model, videos, quick_stage2(5));
  EXPECT_TRUE(identical(segment_before, snapshot(model.segment_encoder().parameters())));
  EXPECT_FALSE(identical(rest_before, snapshot(model.stage2_parameters(false))));
}

TEST(Stage2, FinetuningUpdatesSegmentEncoder) {
  const auto videos = deterministic_videos(4, 6);
  AnticipatrModel model(small_config(), 3);
  const auto before = snapshot(model.segment_encoder().encoder_parameters());
  auto config = quick_stage2(5);
  config.finetune_segment_encoder = true;
  train_stage2(model, videos, config);
  EXPECT_FALSE(identical(before, snapshot(model.segment_encoder().encoder_parameters())));
}

TEST(Stage2, SameSeedSameRun) {
  const auto videos = deterministic_videos(4, 6);
  AnticipatrModel a(small_config(), 3), b(small_config(), 3);
  const auto la = train_stage2(a, videos, quick_stage2(8));
  const auto lb = train_stage2(b, videos, quick_stage2(8));
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_EQ(la[i].loss, lb[i].loss);
  EXPECT_TRUE(identical(snapshot(a.parameters()), snapshot(b.parameters())));
}

TEST(Stage2, LossComponentsAreLogged) {
  const auto videos = deterministic_videos(4, 6);
  AnticipatrModel model(small_config(), 3);
  std::size_t calls = 0;
  const auto log = train_stage2(model, videos, quick_stage2(3), [&](const StepLog&) { ++calls; });
  EXPECT_EQ(calls, 3u);
  for (const auto& e : log) {
    EXPECT_GT(e.classification, 0.0);
    EXPECT_NEAR(e.loss, e.classification + 3.0 * e.l1 + 5.0 * e.iou, 1e-9 * e.loss);
  }
}

TEST(Stage2, NonFiniteLossAborts) {
  auto videos = deterministic_videos(1, 4);
  for (auto& f : videos[0].features) f = std::numeric_limits<float>::quiet_NaN();
  AnticipatrModel model(small_config(), 2);
  EXPECT_THROW(train_stage2(model, videos, quick_stage2(2)), NumericalError);
}

TEST(Stage2, DrawnExamplesStayInRange) {
  const auto videos = deterministic_videos(3, 8);
  const Stage2Config config;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto ex = draw_stage2_example(videos, config, rng);
    ASSERT_LT(ex.video, videos.size());
    const int length = videos[ex.video].length;
    EXPECT_GE(ex.observed, 1);
    EXPECT_LE(ex.observed, static_cast<int>(std::lround(0.6 * length)));
    EXPECT_GE(ex.anticipation, 1);
    EXPECT_LE(ex.observed + ex.anticipation, length);
  }
}

TEST(Stage2, NormalizedGroundtruthUsesWindowFractions) {
  const auto videos = deterministic_videos(1, 8);
  // instances [1,10] [11,20] [21,30] [31,40]; window (15, 35]
  const auto gt = normalized_groundtruth(videos[0], 15, 20, 6, 8);
  ASSERT_EQ(gt.num_real, 3u);
  EXPECT_DOUBLE_EQ(gt.spans[0].start, 0.0);
  EXPECT_DOUBLE_EQ(gt.spans[0].end, 0.25);
  EXPECT_DOUBLE_EQ(gt.spans[1].start, 0.25);
  EXPECT_DOUBLE_EQ(gt.spans[1].end, 0.75);
  EXPECT_DOUBLE_EQ(gt.spans[2].end, 1.0);
  EXPECT_EQ(gt.labels[3], 8);
}

TEST(Configs, Validation) {
  Stage1Config s1;
  s1.batch_size = 0;
  EXPECT_THROW(s1.validate(), ConfigError);
  Stage2Config s2;
  s2.observe_max = 1.0;
  EXPECT_THROW(s2.validate(), ConfigError);
  s2 = {};
  s2.anticipate_min = 0.0;
  EXPECT_THROW(s2.validate(), ConfigError);
  s2 = {};
  s2.optimizer.lr = 0.0;
  EXPECT_THROW(s2.validate(), ConfigError);
}

}  // namespace
}  // namespace antq
