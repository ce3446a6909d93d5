#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "antq/data.hpp"
#include "antq/evaluation.hpp"
#include "antq/model.hpp"
#include "antq/training.hpp"

namespace antq::cli {

namespace fs = std::filesystem;

/// Every knob of a run. Defaults describe the toy-grammar experiment; a
/// flat key=value file or --set flags override them.
struct RunConfig {
  std::uint64_t seed = 1;
  fs::path out = "run";
  fs::path data_dir;           // empty: <out>/data
  fs::path stage1_checkpoint;  // empty: <out>/stage1.bin
  fs::path checkpoint;         // empty: <out>/model.bin

  ToyGrammarOptions grammar;
  std::size_t train_videos = 200;
  std::size_t val_videos = 40;
  std::size_t test_videos = 60;
  int min_length = 50;
  int max_length = 70;

  ModelConfig model;
  Stage1Config stage1;
  Stage2Config stage2;
  bool skip_stage1 = false;

  ProtocolConfig protocol;
  double threshold = 0.0;
  bool oracle = false;
  bool plots = true;

  RunConfig();

  /// Throws ConfigError for an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  /// All keys with their current values, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;
  void validate() const;

  fs::path data_path() const { return data_dir.empty() ? out / "data" : data_dir; }
  fs::path stage1_path() const { return stage1_checkpoint.empty() ? out / "stage1.bin" : stage1_checkpoint; }
  fs::path model_path() const { return checkpoint.empty() ? out / "model.bin" : checkpoint; }

  /// Model configuration with class count and feature width taken from the
  /// grammar.
  ModelConfig resolved_model() const;
  /// Stage configurations carrying seeds derived from the master seed.
  Stage1Config resolved_stage1() const;
  Stage2Config resolved_stage2() const;
  std::uint64_t model_seed() const { return derive_seed(seed, 4); }
  /// "train", "val" or "test".
  DatasetSpec split_spec(const std::string& split) const;
};

/// Applies `key = value` lines; '#' starts a comment, blank lines are skipped.
/// Errors name the line number.
void apply_config_text(RunConfig& config, const std::string& text);
void apply_config_file(RunConfig& config, const fs::path& path);

}  // namespace antq::cli
