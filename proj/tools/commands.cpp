#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "antq/errors.hpp"
#include "svg.hpp"

namespace antq::cli {
namespace {

constexpr const char* kSplits[] = {"train", "val", "test"};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("missing file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void begin(const RunConfig& config, const std::string& command) {
  config.validate();
  RunConfig snapshot = config;
  snapshot.data_dir = config.data_path();
  snapshot.stage1_checkpoint = config.stage1_path();
  snapshot.checkpoint = config.model_path();
  write_file(config.out / (command + ".config"), snapshot.to_text());
}

std::vector<VideoSample> load_split(const RunConfig& config, const std::string& split) {
  const fs::path path = config.data_path() / (split + ".jsonl");
  if (!fs::exists(path)) throw UsageError("dataset " + path.string() + " not found; run gen-data first");
  return load_dataset(path);
}

std::string class_name(std::size_t c) { return "action" + std::to_string(c); }

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s) {
  try {
    return s.empty() ? std::nan("") : std::stod(s);
  } catch (const std::exception&) {
    return std::nan("");
  }
}

Series csv_column(const std::vector<std::vector<std::string>>& rows, std::size_t column, const std::string& name) {
  Series s{name, {}, {}};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() <= column) continue;
    s.x.push_back(to_double(rows[r][0]));
    s.y.push_back(to_double(rows[r][column]));
  }
  return s;
}

// Loss curves are smoothed with a trailing mean so that per-batch noise
// does not hide the trend.
Series smoothed(Series s, std::size_t window) {
  Series out{s.name, {}, {}};
  double sum = 0.0;
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    sum += s.y[i];
    if (i >= window) sum -= s.y[i - window];
    if ((i + 1) % window == 0 || i + 1 == s.y.size()) {
      out.x.push_back(s.x[i]);
      out.y.push_back(sum / static_cast<double>(std::min(window, i + 1)));
    }
  }
  return out;
}

void render_plots(const RunConfig& config, std::ostream& log) {
  const fs::path plots = config.out / "plots";
  if (const fs::path p = config.out / "stage1_log.csv"; fs::exists(p)) {
    const auto rows = read_csv(p);
    write_file(plots / "stage1_loss.svg",
               line_chart("Stage 1 (BCE)", "step", "loss", {smoothed(csv_column(rows, 1, "bce"), 20)}));
    log << "wrote " << (plots / "stage1_loss.svg").string() << '\n';
  }
  if (const fs::path p = config.out / "stage2_log.csv"; fs::exists(p)) {
    const auto rows = read_csv(p);
    const std::size_t w = std::max<std::size_t>(1, rows.size() / 200);
    write_file(plots / "stage2_loss.svg",
               line_chart("Stage 2 loss", "step", "loss",
                          {smoothed(csv_column(rows, 1, "total"), w), smoothed(csv_column(rows, 2, "ce"), w),
                           smoothed(csv_column(rows, 3, "l1"), w), smoothed(csv_column(rows, 4, "iou"), w)}));
    log << "wrote " << (plots / "stage2_loss.svg").string() << '\n';
  }
  if (const fs::path p = config.out / "moc.csv"; fs::exists(p)) {
    const auto rows = read_csv(p);
    if (!rows.empty()) {
      std::vector<Series> series;
      for (std::size_t r = 1; r < rows.size(); ++r) {
        Series s{"beta_o=" + rows[r][0], {}, {}};
        for (std::size_t c = 1; c < rows[r].size() && c < rows[0].size(); ++c) {
          const auto& head = rows[0][c];
          s.x.push_back(to_double(head.substr(head.find('=') + 1)));
          s.y.push_back(to_double(rows[r][c]));
        }
        series.push_back(std::move(s));
      }
      write_file(plots / "moc_vs_beta_a.svg", line_chart("MoC accuracy", "beta_a (%)", "MoC", series));
      log << "wrote " << (plots / "moc_vs_beta_a.svg").string() << '\n';
    }
  }
}

}  // namespace

void gen_data(const RunConfig& config, std::ostream& log) {
  begin(config, "gen-data");
  const auto grammars = make_toy_grammars(config.grammar);
  fs::create_directories(config.data_path());
  const std::size_t classes = config.grammar.num_classes;
  std::vector<std::vector<std::size_t>> counts;
  for (const char* split : kSplits) {
    const auto videos = generate_dataset(grammars, config.split_spec(split));
    save_dataset(config.data_path() / (std::string(split) + ".jsonl"), videos);
    counts.push_back(class_counts(videos, classes));
    log << split << ": " << videos.size() << " videos\n";
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back(class_name(c));
  save_class_names(config.data_path() / "classes.txt", names);

  std::ostringstream csv;
  csv << "class,name,train,val,test\n";
  log << "instances per class (train/val/test):\n";
  for (std::size_t c = 0; c < classes; ++c) {
    csv << c << ',' << names[c] << ',' << counts[0][c] << ',' << counts[1][c] << ',' << counts[2][c] << '\n';
    log << "  " << std::left << std::setw(10) << names[c] << std::right << std::setw(6) << counts[0][c]
        << std::setw(6) << counts[1][c] << std::setw(6) << counts[2][c] << '\n';
  }
  write_file(config.data_path() / "class_counts.csv", csv.str());
}

void train_stage1(const RunConfig& config, std::ostream& log) {
  begin(config, "train-stage1");
  if (!config.model.use_segment_encoder) throw ConfigError("stage 1 needs the segment encoder");
  const auto train = load_split(config, "train");
  const auto val = load_split(config, "val");
  AnticipatrModel model(config.resolved_model(), config.model_seed());
  const Stage1Config stage1 = config.resolved_stage1();

  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream csv;
  csv << "step,loss,grad_norm\n" << std::setprecision(10);
  const std::size_t every = std::max<std::size_t>(1, stage1.steps / 10);
  train_stage1(model, train, stage1, [&](const StepLog& s) {
    csv << s.step << ',' << s.loss << ',' << s.grad_norm << '\n';
    if (s.step % every == 0)
      log << "stage1 step " << s.step << " loss " << s.loss << " (" << elapsed_since(t0) << " s)\n";
  });
  save_model(config.stage1_path(), model);
  write_file(config.out / "stage1_log.csv", csv.str());

  const auto metrics = val.empty() ? Stage1Metrics{} : evaluate_stage1(model, val, stage1);
  nlohmann::ordered_json j;
  j["val_loss"] = metrics.loss;
  j["mean_ap"] = metrics.mean_ap;
  j["exact_match"] = metrics.exact_match;
  j["examples"] = metrics.examples;
  auto ap = nlohmann::ordered_json::array();
  for (double v : metrics.per_class_ap) ap.push_back(std::isnan(v) ? nlohmann::ordered_json() : nlohmann::ordered_json(v));
  j["per_class_ap"] = ap;
  write_file(config.out / "stage1_metrics.json", j.dump(2) + "\n");
  log << "stage1 validation: loss " << metrics.loss << " mAP " << metrics.mean_ap << " exact-match "
      << metrics.exact_match << '\n';
}

void train_stage2(const RunConfig& config, std::ostream& log) {
  begin(config, "train-stage2");
  const auto train = load_split(config, "train");
  AnticipatrModel model(config.resolved_model(), config.model_seed());
  Stage2Config stage2 = config.resolved_stage2();
  if (config.model.use_segment_encoder && !config.skip_stage1) {
    if (!fs::exists(config.stage1_path()))
      throw UsageError("stage-1 checkpoint " + config.stage1_path().string() + " not found");
    load_segment_encoder(config.stage1_path(), model);
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream csv;
  csv << "step,loss,ce,l1,iou,grad_norm\n" << std::setprecision(10);
  const std::size_t every = std::max<std::size_t>(1, stage2.steps / 20);
  train_stage2(model, train, stage2, [&](const StepLog& s) {
    csv << s.step << ',' << s.loss << ',' << s.classification << ',' << s.l1 << ',' << s.iou << ','
        << s.grad_norm << '\n';
    if (s.step % every == 0)
      log << "stage2 step " << s.step << " loss " << s.loss << " ce " << s.classification << " l1 " << s.l1
          << " iou " << s.iou << " (" << elapsed_since(t0) << " s)\n";
  });
  save_model(config.model_path(), model);
  write_file(config.out / "stage2_log.csv", csv.str());
  log << "saved " << config.model_path().string() << '\n';
}

EvaluationReport eval(const RunConfig& config, std::ostream& log) {
  begin(config, "eval");
  const auto train = load_split(config, "train");
  const auto test = load_split(config, "test");
  const auto counts = class_counts(train, config.grammar.num_classes);

  EvaluationReport report;
  if (config.oracle) {
    report = evaluate(test, oracle_predictor(), config.grammar.num_classes, counts, config.protocol);
  } else {
    if (!fs::exists(config.model_path()))
      throw UsageError("checkpoint " + config.model_path().string() + " not found");
    AnticipatrModel model(config.resolved_model(), config.model_seed());
    load_model(config.model_path(), model);
    report = evaluate(test, model_predictor(model, config.threshold), config.grammar.num_classes, counts,
                      config.protocol);
  }
  write_file(config.out / "moc.csv", moc_csv(report));
  write_file(config.out / "map.csv", map_csv(report));
  write_file(config.out / "metrics.json", report_json(report));
  log << "MoC (rows beta_o, columns beta_a)\n" << moc_csv(report) << "label-set mAP\n" << map_csv(report);
  if (config.plots) render_plots(config, log);
  return report;
}

void report(const RunConfig& config, std::ostream& log) {
  begin(config, "report");
  bool any = false;
  for (const char* name : {"stage1_metrics.json", "moc.csv", "map.csv"}) {
    const fs::path p = config.out / name;
    if (!fs::exists(p)) continue;
    any = true;
    log << "== " << name << '\n' << read_file(p);
  }
  if (!any) throw UsageError("no results in " + config.out.string() + "; run eval first");
  render_plots(config, log);
}

}  // namespace antq::cli
