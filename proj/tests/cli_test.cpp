#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "antq/errors.hpp"
#include "commands.hpp"
#include "run_config.hpp"

namespace antq::cli {
namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("antq_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig small_run(const fs::path& out) {
  RunConfig c;
  c.out = out;
  c.train_videos = 12;
  c.val_videos = 4;
  c.test_videos = 6;
  c.model.model_dim = 16;
  c.model.num_heads = 2;
  c.model.segment_layers = c.model.video_layers = c.model.decoder_layers = 1;
  c.stage1.steps = 10;
  c.stage2.steps = 10;
  c.stage2.lr_decay_step = 0;
  return c;
}

int run_tool(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ANTQ_TOOL_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(RunConfigTest, SnapshotRoundTrips) {
  RunConfig a;
  a.seed = 42;
  a.stage2.observe_choices = {0.1, 0.30000000000000004};
  a.stage2.matcher = MatcherKind::Hungarian;
  a.protocol.pooling = MocPooling::PerVideo;
  a.model.positions_from_end = !a.model.positions_from_end;
  RunConfig b;
  apply_config_text(b, a.to_text());
  EXPECT_EQ(a.entries(), b.entries());
  EXPECT_EQ(b.stage2.observe_choices[1], 0.30000000000000004);
}

TEST(RunConfigTest, EveryKeyIsSettable) {
  RunConfig c;
  for (const auto& [key, value] : c.entries()) EXPECT_NO_THROW(c.set(key, value)) << key;
}

TEST(RunConfigTest, ErrorsNameTheLine) {
  RunConfig c;
  try {
    apply_config_text(c, "# comment\n\nseed = 3\nmodel.dim = abc\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
  EXPECT_EQ(c.seed, 3u);
  EXPECT_THROW(apply_config_text(c, "no_equals_sign\n"), ConfigError);
  EXPECT_THROW(c.set("unknown.key", "1"), ConfigError);
  EXPECT_THROW(c.set("eval.oracle", "maybe"), ConfigError);
  EXPECT_THROW(c.set("stage2.matcher", "auction"), ConfigError);
}

TEST(RunConfigTest, ValidationRejectsSweepsOutsideRange) {
  RunConfig c;
  c.protocol.beta_a = {10, 100};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.protocol.alpha_o = {0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  EXPECT_NO_THROW(c.validate());
}

TEST(GenData, SameSeedGivesIdenticalFilesAndCountsMatchRecount) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  std::ostringstream log;
  gen_data(small_run(a), log);
  gen_data(small_run(b), log);
  for (const char* split : {"train", "val", "test"}) {
    const std::string name = std::string(split) + ".jsonl";
    EXPECT_EQ(slurp(a / "data" / name), slurp(b / "data" / name)) << split;
  }

  // Independent recount straight from the JSON lines.
  const RunConfig config = small_run(a);
  std::map<std::string, std::vector<std::size_t>> recount;
  std::map<std::string, std::size_t> lines;
  for (const char* split : {"train", "val", "test"}) {
    std::ifstream in(a / "data" / (std::string(split) + ".jsonl"));
    recount[split].assign(config.grammar.num_classes, 0);
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      ++lines[split];
      const auto video = nlohmann::json::parse(line);
      for (const auto& inst : video["instances"]) ++recount[split][inst["c"].get<std::size_t>()];
    }
  }
  EXPECT_EQ(lines["train"], config.train_videos);
  EXPECT_EQ(lines["val"], config.val_videos);
  EXPECT_EQ(lines["test"], config.test_videos);

  std::istringstream csv(slurp(a / "data" / "class_counts.csv"));
  std::string row;
  std::getline(csv, row);
  EXPECT_EQ(row, "class,name,train,val,test");
  for (std::size_t c = 0; c < config.grammar.num_classes; ++c) {
    ASSERT_TRUE(std::getline(csv, row));
    std::ostringstream expect;
    expect << c << ",action" << c << ',' << recount["train"][c] << ',' << recount["val"][c] << ','
           << recount["test"][c];
    EXPECT_EQ(row, expect.str());
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, WritesArtifactsAndIsDeterministic) {
  const fs::path dir = scratch("pipeline");
  RunConfig config = small_run(dir);
  std::ostringstream log;
  gen_data(config, log);
  train_stage1(config, log);
  train_stage2(config, log);
  eval(config, log);
  for (const char* f : {"stage1.bin", "model.bin", "stage1_log.csv", "stage2_log.csv", "stage1_metrics.json",
                        "moc.csv", "map.csv", "metrics.json", "plots/moc_vs_beta_a.svg", "plots/stage2_loss.svg",
                        "gen-data.config", "train-stage1.config", "train-stage2.config", "eval.config"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;

  RunConfig snapshot;
  apply_config_file(snapshot, dir / "eval.config");
  EXPECT_EQ(snapshot.data_dir, dir / "data");
  EXPECT_EQ(snapshot.checkpoint, dir / "model.bin");

  const std::string first = slurp(dir / "metrics.json");
  const std::string first_model = slurp(dir / "model.bin");
  train_stage1(config, log);
  train_stage2(config, log);
  eval(config, log);
  EXPECT_EQ(first, slurp(dir / "metrics.json"));
  EXPECT_EQ(first_model, slurp(dir / "model.bin"));

  std::istringstream stage2(slurp(dir / "stage2_log.csv"));
  std::string header;
  std::getline(stage2, header);
  EXPECT_EQ(header, "step,loss,ce,l1,iou,grad_norm");
  fs::remove_all(dir);
}

TEST(Pipeline, OracleEvaluationIsPerfectOnTheFullGrid) {
  const fs::path dir = scratch("oracle");
  RunConfig config = small_run(dir);
  config.oracle = true;
  std::ostringstream log;
  gen_data(config, log);
  const auto report = eval(config, log);
  ASSERT_EQ(report.moc.size(), 8u);
  for (const auto& cell : report.moc) EXPECT_EQ(cell.moc, 1.0);
  for (const auto& cell : report.map) EXPECT_EQ(cell.result.all, 1.0);
  const auto j = nlohmann::json::parse(slurp(dir / "metrics.json"));
  EXPECT_EQ(j["moc"].size(), 8u);
  for (const auto& cell : j["map"]) {
    EXPECT_TRUE(cell.contains("all"));
    EXPECT_TRUE(cell.contains("freq"));
    EXPECT_TRUE(cell.contains("rare"));
  }
  EXPECT_EQ(slurp(dir / "map.csv").substr(0, 20), "alpha_o,all,freq,rar");
  fs::remove_all(dir);
}

TEST(Pipeline, MissingInputsAreUsageErrors) {
  const fs::path dir = scratch("missing");
  RunConfig config = small_run(dir);
  std::ostringstream log;
  EXPECT_THROW(train_stage1(config, log), UsageError);
  gen_data(config, log);
  EXPECT_THROW(train_stage2(config, log), UsageError);
  EXPECT_THROW(eval(config, log), UsageError);
  config.skip_stage1 = true;
  config.stage2.finetune_segment_encoder = true;
  EXPECT_NO_THROW(train_stage2(config, log));
  fs::remove_all(dir);
}

TEST(Tool, ExitCodes) {
  const fs::path dir = scratch("tool");
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  const std::string out = " --out " + dir.string();
  const std::string small =
      " --set data.train_videos=6 --set data.val_videos=2 --set data.test_videos=3 --set model.dim=16"
      " --set model.heads=2";

  EXPECT_EQ(run_tool("--help", log), 0);
  EXPECT_EQ(run_tool("", log), 2);
  EXPECT_EQ(run_tool("eval --bogus", log), 2);
  EXPECT_EQ(run_tool("config --set nope=1", log), 2);
  EXPECT_EQ(run_tool("config --set stage2.lr=0", log), 2);
  EXPECT_EQ(run_tool("train-stage2" + out, log), 2);
  EXPECT_EQ(run_tool("gen-data" + out + small, log), 0);
  EXPECT_NE(slurp(log).find("instances per class"), std::string::npos);
  EXPECT_EQ(run_tool("train-stage2" + out + small, log), 2);  // no stage-1 checkpoint
  EXPECT_EQ(run_tool("eval" + out + small, log), 2);          // no model checkpoint
  EXPECT_EQ(run_tool("train-stage1" + out + small + " --set stage1.steps=50 --set stage1.lr=1e200"
                     " --set stage1.max_grad_norm=0",
                     log),
            3);
  EXPECT_EQ(run_tool("eval --oracle --no-plots" + out + small, log), 0);
  fs::remove_all(dir);
}

TEST(Tool, FlagsOverrideConfigFile) {
  const fs::path dir = scratch("flags");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "seed = 5\nstage2.lambda_l1 = 2\nstage2.matcher = greedy\nout = elsewhere\n";
  }
  const fs::path log = dir / "log.txt";
  ASSERT_EQ(run_tool("config --config " + (dir / "run.cfg").string() +
                         " --seed 9 --no-l1 --matcher hungarian --no-se --out " + dir.string(),
                     log),
            0);
  RunConfig printed;
  apply_config_text(printed, slurp(log));
  EXPECT_EQ(printed.seed, 9u);
  EXPECT_EQ(printed.stage2.loss.lambda_l1, 0.0);
  EXPECT_EQ(printed.stage2.matcher, MatcherKind::Hungarian);
  EXPECT_FALSE(printed.model.use_segment_encoder);
  EXPECT_EQ(printed.out, dir);

  ASSERT_EQ(run_tool("config --config " + (dir / "run.cfg").string() + " --no-stage1", log), 0);
  apply_config_text(printed, slurp(log));
  EXPECT_EQ(printed.seed, 5u);
  EXPECT_EQ(printed.stage2.loss.lambda_l1, 2.0);
  EXPECT_TRUE(printed.skip_stage1);
  EXPECT_TRUE(printed.stage2.finetune_segment_encoder);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace antq::cli
