#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "antq/errors.hpp"

namespace antq::cli {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <class T>
void parse_into(const std::string& key, const std::string& text, T& target) {
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1" || text == "yes") target = true;
    else if (text == "false" || text == "0" || text == "no") target = false;
    else throw ConfigError("bad boolean for " + key + ": '" + text + "'");
  } else if constexpr (std::is_arithmetic_v<T>) {
    target = parse_number<T>(key, text);
  } else if constexpr (std::is_same_v<T, fs::path>) {
    target = text;
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    target.clear();
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
      item = trim(item);
      if (!item.empty()) target.push_back(parse_number<double>(key, item));
    }
  } else if constexpr (std::is_same_v<T, MatcherKind>) {
    if (text == "greedy") target = MatcherKind::Greedy;
    else if (text == "hungarian") target = MatcherKind::Hungarian;
    else throw ConfigError("bad matcher for " + key + ": '" + text + "' (greedy|hungarian)");
  } else if constexpr (std::is_same_v<T, MocPooling>) {
    if (text == "global") target = MocPooling::Global;
    else if (text == "per_video") target = MocPooling::PerVideo;
    else throw ConfigError("bad pooling for " + key + ": '" + text + "' (global|per_video)");
  } else {
    static_assert(sizeof(T) == 0, "unsupported config field type");
  }
}

template <class T>
std::string format(const T& value) {
  if constexpr (std::is_same_v<T, bool>) {
    return value ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_double(value);
  } else if constexpr (std::is_arithmetic_v<T>) {
    return std::to_string(value);
  } else if constexpr (std::is_same_v<T, fs::path>) {
    return value.string();
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    std::string out;
    for (std::size_t i = 0; i < value.size(); ++i) out += (i ? "," : "") + format_double(value[i]);
    return out;
  } else if constexpr (std::is_same_v<T, MatcherKind>) {
    return value == MatcherKind::Greedy ? "greedy" : "hungarian";
  } else {
    return value == MocPooling::Global ? "global" : "per_video";
  }
}

// Calls f(key, member) for every configurable field, in snapshot order.
template <class Config, class F>
void visit_fields(Config& c, F&& f) {
  f("seed", c.seed);
  f("out", c.out);
  f("data_dir", c.data_dir);
  f("stage1_checkpoint", c.stage1_checkpoint);
  f("checkpoint", c.checkpoint);

  f("grammar.activities", c.grammar.num_activities);
  f("grammar.classes", c.grammar.num_classes);
  f("grammar.feature_dim", c.grammar.feature_dim);
  f("grammar.chain_fidelity", c.grammar.chain_fidelity);
  f("grammar.shared_per_activity", c.grammar.shared_per_activity);
  f("grammar.min_duration", c.grammar.min_duration);
  f("grammar.max_duration", c.grammar.max_duration);
  f("grammar.noise_sigma", c.grammar.noise_sigma);
  f("grammar.seed", c.grammar.seed);

  f("data.train_videos", c.train_videos);
  f("data.val_videos", c.val_videos);
  f("data.test_videos", c.test_videos);
  f("data.min_length", c.min_length);
  f("data.max_length", c.max_length);

  f("model.dim", c.model.model_dim);
  f("model.segment_layers", c.model.segment_layers);
  f("model.video_layers", c.model.video_layers);
  f("model.decoder_layers", c.model.decoder_layers);
  f("model.heads", c.model.num_heads);
  f("model.ffn_dim", c.model.ffn_dim);
  f("model.queries", c.model.num_queries);
  f("model.window_k", c.model.window_k);
  f("model.horizon_max", c.model.horizon_max);
  f("model.dropout", c.model.dropout_p);
  f("model.positions_from_end", c.model.positions_from_end);
  f("model.segment_encoder", c.model.use_segment_encoder);

  f("stage1.steps", c.stage1.steps);
  f("stage1.batch_size", c.stage1.batch_size);
  f("stage1.lr", c.stage1.optimizer.lr);
  f("stage1.weight_decay", c.stage1.optimizer.weight_decay);
  f("stage1.max_grad_norm", c.stage1.optimizer.max_grad_norm);
  f("stage1.sliding_window", c.stage1.sliding_window);
  f("stage1.include_empty_future", c.stage1.include_empty_future);

  f("stage2.steps", c.stage2.steps);
  f("stage2.batch_size", c.stage2.batch_size);
  f("stage2.lr", c.stage2.optimizer.lr);
  f("stage2.weight_decay", c.stage2.optimizer.weight_decay);
  f("stage2.max_grad_norm", c.stage2.optimizer.max_grad_norm);
  f("stage2.lr_decay_step", c.stage2.lr_decay_step);
  f("stage2.warmup_steps", c.stage2.warmup_steps);
  f("stage2.observe_min", c.stage2.observe_min);
  f("stage2.observe_max", c.stage2.observe_max);
  f("stage2.anticipate_min", c.stage2.anticipate_min);
  f("stage2.anticipate_max", c.stage2.anticipate_max);
  f("stage2.observe_choices", c.stage2.observe_choices);
  f("stage2.anticipate_choices", c.stage2.anticipate_choices);
  f("stage2.lambda_l1", c.stage2.loss.lambda_l1);
  f("stage2.lambda_iou", c.stage2.loss.lambda_iou);
  f("stage2.null_weight", c.stage2.loss.null_weight);
  f("stage2.matcher", c.stage2.matcher);
  f("stage2.finetune_segment_encoder", c.stage2.finetune_segment_encoder);
  f("stage2.skip_stage1", c.skip_stage1);

  f("eval.beta_o", c.protocol.beta_o);
  f("eval.beta_a", c.protocol.beta_a);
  f("eval.alpha_o", c.protocol.alpha_o);
  f("eval.pooling", c.protocol.pooling);
  f("eval.threads", c.protocol.threads);
  f("eval.threshold", c.threshold);
  f("eval.oracle", c.oracle);
  f("eval.plots", c.plots);
}

}  // namespace

RunConfig::RunConfig() {
  grammar.min_duration = 10;
  grammar.max_duration = 10;
  model.model_dim = 32;
  model.dropout_p = 0.0;
  stage2.steps = 24000;
  stage2.lr_decay_step = 18000;
  stage2.observe_choices = {0.2, 0.25, 0.3, 0.5, 0.75};
  stage2.anticipate_choices = {0.1, 0.2, 0.3, 0.5, 1.0};
}

void RunConfig::set(const std::string& key, const std::string& value) {
  bool found = false;
  visit_fields(*this, [&](const char* name, auto& member) {
    if (key == name) {
      parse_into(key, value, member);
      found = true;
    }
  });
  if (!found) throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  visit_fields(*this, [&](const char* name, const auto& member) { out.emplace_back(name, format(member)); });
  return out;
}

std::string RunConfig::to_text() const {
  std::string text;
  for (const auto& [key, value] : entries()) text += key + " = " + value + "\n";
  return text;
}

void RunConfig::validate() const {
  if (out.empty()) throw ConfigError("out must not be empty");
  if (train_videos == 0 || test_videos == 0) throw ConfigError("train and test splits must be non-empty");
  if (min_length < 2 || min_length > max_length) throw ConfigError("invalid video length range");
  if (grammar.min_duration < 1 || grammar.min_duration > grammar.max_duration)
    throw ConfigError("invalid action duration range");
  if (threshold < 0.0 || threshold > 1.0) throw ConfigError("eval.threshold must lie in [0, 1]");
  for (const auto* list : {&protocol.beta_o, &protocol.beta_a, &protocol.alpha_o})
    for (double v : *list)
      if (!(v > 0.0 && v < 100.0)) throw ConfigError("sweep values must lie in (0, 100)");
  resolved_model().validate();
  stage1.validate();
  stage2.validate();
  protocol.validate();
}

ModelConfig RunConfig::resolved_model() const {
  ModelConfig m = model;
  m.num_classes = grammar.num_classes;
  m.feature_dim = grammar.feature_dim;
  return m;
}

Stage1Config RunConfig::resolved_stage1() const {
  Stage1Config c = stage1;
  c.seed = derive_seed(seed, 5);
  return c;
}

Stage2Config RunConfig::resolved_stage2() const {
  Stage2Config c = stage2;
  c.seed = derive_seed(seed, 6);
  return c;
}

DatasetSpec RunConfig::split_spec(const std::string& split) const {
  DatasetSpec spec{.min_length = min_length, .max_length = max_length, .prefix = split};
  if (split == "train") {
    spec.count = train_videos;
    spec.seed = derive_seed(seed, 1);
  } else if (split == "val") {
    spec.count = val_videos;
    spec.seed = derive_seed(seed, 2);
  } else if (split == "test") {
    spec.count = test_videos;
    spec.seed = derive_seed(seed, 3);
  } else {
    throw UsageError("unknown split '" + split + "'");
  }
  return spec;
}

void apply_config_text(RunConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::size_t number = 0;
  for (std::string line; std::getline(in, line);) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    apply_config_text(config, buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace antq::cli
