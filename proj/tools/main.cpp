#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "antq/errors.hpp"
#include "commands.hpp"

namespace {

using antq::cli::RunConfig;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Options {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  bool no_l1 = false;
  bool no_iou = false;
  bool finetune_se = false;
  bool no_se = false;
  bool no_stage1 = false;
  bool oracle = false;
  bool no_plots = false;
  std::string matcher;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App& cmd, Options& o) {
  cmd.add_option("--config", o.config_file, "Flat key = value config file")->check(CLI::ExistingFile);
  cmd.add_option("--seed", o.seed, "Master seed");
  cmd.add_option("--out", o.out, "Output directory");
  cmd.add_option("--set", o.overrides, "Override a config key (key=value), repeatable");
}

void add_model_flags(CLI::App& cmd, Options& o) {
  cmd.add_flag("--no-se", o.no_se, "Drop the segment encoder");
}

void add_stage2_flags(CLI::App& cmd, Options& o) {
  cmd.add_flag("--no-l1", o.no_l1, "Zero the L1 span term");
  cmd.add_flag("--no-iou", o.no_iou, "Zero the IoU span term");
  cmd.add_flag("--finetune-se", o.finetune_se, "Train the segment encoder jointly");
  cmd.add_flag("--no-stage1", o.no_stage1, "Start from an untrained segment encoder");
  cmd.add_option("--matcher", o.matcher, "Set correspondence")->check(CLI::IsMember({"greedy", "hungarian"}));
}

void add_eval_flags(CLI::App& cmd, Options& o) {
  cmd.add_flag("--oracle", o.oracle, "Use groundtruth as the prediction");
  cmd.add_flag("--no-plots", o.no_plots, "Skip SVG output");
  cmd.add_option("--threads", o.threads, "Evaluation threads");
}

// The config file is applied first; explicit flags win over it.
RunConfig resolve(const Options& o) {
  RunConfig config;
  if (!o.config_file.empty()) antq::cli::apply_config_file(config, o.config_file);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw antq::ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) config.seed = *o.seed;
  if (!o.out.empty()) config.out = o.out;
  if (o.no_l1) config.stage2.loss.lambda_l1 = 0.0;
  if (o.no_iou) config.stage2.loss.lambda_iou = 0.0;
  if (o.finetune_se) config.stage2.finetune_segment_encoder = true;
  if (o.no_se) config.model.use_segment_encoder = false;
  if (o.no_stage1) {
    config.skip_stage1 = true;
    config.stage2.finetune_segment_encoder = true;
  }
  if (!o.matcher.empty()) config.set("stage2.matcher", o.matcher);
  if (o.oracle) config.oracle = true;
  if (o.no_plots) config.plots = false;
  if (o.threads) config.protocol.threads = *o.threads;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-term action anticipation: data, two-stage training and evaluation"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Generate train/val/test splits from the toy grammar");
  auto* s1 = app.add_subcommand("train-stage1", "Train the segment encoder");
  auto* s2 = app.add_subcommand("train-stage2", "Train the anticipation model");
  auto* ev = app.add_subcommand("eval", "Evaluate MoC and label-set mAP over the protocol grid");
  auto* rep = app.add_subcommand("report", "Print metric tables and render plots from CSVs");
  auto* dump = app.add_subcommand("config", "Print the resolved configuration");
  for (auto* cmd : {gen, s1, s2, ev, rep, dump}) add_common(*cmd, o);
  for (auto* cmd : {s1, s2, ev, dump}) add_model_flags(*cmd, o);
  for (auto* cmd : {s2, ev, dump}) add_stage2_flags(*cmd, o);
  for (auto* cmd : {ev, dump}) add_eval_flags(*cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const RunConfig config = resolve(o);
    if (gen->parsed()) antq::cli::gen_data(config, std::cout);
    else if (s1->parsed()) antq::cli::train_stage1(config, std::cout);
    else if (s2->parsed()) antq::cli::train_stage2(config, std::cout);
    else if (ev->parsed()) antq::cli::eval(config, std::cout);
    else if (rep->parsed()) antq::cli::report(config, std::cout);
    else if (dump->parsed()) {
      config.validate();
      std::cout << config.to_text();
    }
  } catch (const antq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const antq::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kConfigError;
  } catch (const antq::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfigError;
  } catch (const antq::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
