#include "antq/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "antq/errors.hpp"

namespace antq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// True when a should be painted over b.
bool outranks(const ScoredInstance& a, const ScoredInstance& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.start != b.start) return a.start < b.start;
  return a.label < b.label;
}

double nan_mean(const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? kNaN : sum / static_cast<double>(n);
}

}  // namespace

Timeline build_timeline(std::span<const ScoredInstance> preds, int observed, int anticipation) {
  if (anticipation < 1) throw UsageError("anticipation must be >= 1");
  const int lo = observed + 1;
  const int hi = observed + anticipation;
  Timeline timeline(static_cast<std::size_t>(anticipation), kNoLabel);
  std::vector<const ScoredInstance*> owner(timeline.size(), nullptr);
  for (const auto& p : preds) {
    if (p.start < lo || p.end > hi || p.end < p.start) {
      throw UsageError("prediction [" + std::to_string(p.start) + ", " + std::to_string(p.end) +
                       "] outside window (" + std::to_string(observed) + ", " +
                       std::to_string(hi) + "]");
    }
    for (int f = p.start; f <= p.end; ++f) {
      const auto t = static_cast<std::size_t>(f - lo);
      if (owner[t] == nullptr || outranks(p, *owner[t])) {
        owner[t] = &p;
        timeline[t] = p.label;
      }
    }
  }
  return timeline;
}

Timeline groundtruth_timeline(std::span<const ActionInstance> instances, int observed,
                              int anticipation) {
  if (anticipation < 1) throw UsageError("anticipation must be >= 1");
  const int lo = observed + 1;
  const int hi = observed + anticipation;
  Timeline timeline(static_cast<std::size_t>(anticipation), kNoLabel);
  for (const auto& inst : instances) {
    for (int f = std::max(lo, inst.start); f <= std::min(hi, inst.end); ++f) {
      timeline[static_cast<std::size_t>(f - lo)] = inst.label;
    }
  }
  return timeline;
}

namespace {

struct ClassTally {
  std::vector<std::size_t> correct, total;
  explicit ClassTally(std::size_t n) : correct(n, 0), total(n, 0) {}

  void add(const Timeline& pred, const Timeline& gt) {
    if (pred.size() != gt.size()) throw UsageError("timeline lengths differ");
    for (std::size_t t = 0; t < gt.size(); ++t) {
      if (gt[t] == kNoLabel) continue;
      if (gt[t] < 0 || static_cast<std::size_t>(gt[t]) >= total.size()) {
        throw UsageError("groundtruth label outside the class set");
      }
      const auto c = static_cast<std::size_t>(gt[t]);
      ++total[c];
      if (pred[t] == gt[t]) ++correct[c];
    }
  }

  // NaN when no class has groundtruth timesteps.
  double mean() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < total.size(); ++c) {
      if (total[c] == 0) continue;
      sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
      ++n;
    }
    return n == 0 ? kNaN : sum / static_cast<double>(n);
  }
};

}  // namespace

double moc_accuracy(std::span<const Timeline> predicted, std::span<const Timeline> groundtruth,
                    std::size_t num_classes, MocPooling pooling) {
  if (predicted.size() != groundtruth.size()) throw UsageError("timeline counts differ");
  if (pooling == MocPooling::Global) {
    ClassTally tally(num_classes);
    for (std::size_t i = 0; i < predicted.size(); ++i) tally.add(predicted[i], groundtruth[i]);
    const double moc = tally.mean();
    if (std::isnan(moc)) throw UsageError("no groundtruth timesteps");
    return moc;
  }
  std::vector<double> per_video;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    ClassTally tally(num_classes);
    tally.add(predicted[i], groundtruth[i]);
    per_video.push_back(tally.mean());
  }
  const double moc = nan_mean(per_video);
  if (std::isnan(moc)) throw UsageError("no groundtruth timesteps");
  return moc;
}

LabelScores future_label_set(std::span<const ScoredInstance> preds) {
  LabelScores out;
  for (const auto& p : preds) {
    auto [it, inserted] = out.emplace(p.label, p.score);
    if (!inserted) it->second = std::max(it->second, p.score);
  }
  return out;
}

LabelScores future_label_set(const PredictionSet& preds) {
  LabelScores out;
  for (const auto& e : preds.entries) {
    const std::size_t c = e.argmax();
    if (c == preds.null_class()) continue;
    auto [it, inserted] = out.emplace(static_cast<int>(c), e.class_probs[c]);
    if (!inserted) it->second = std::max(it->second, e.class_probs[c]);
  }
  return out;
}

double average_precision(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw UsageError("score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return !positive[a] && positive[b];
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!positive[order[rank]]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  return hits == 0 ? kNaN : sum / static_cast<double>(hits);
}

MapResult mean_average_precision(std::span<const LabelScores> scores,
                                 std::span<const std::set<int>> groundtruth,
                                 std::size_t num_classes,
                                 std::span<const std::size_t> train_counts) {
  if (scores.size() != groundtruth.size()) throw UsageError("score and groundtruth counts differ");
  if (train_counts.size() != num_classes) throw UsageError("train counts must cover every class");
  MapResult result;
  result.per_class.assign(num_classes, kNaN);
  std::vector<double> s(scores.size());
  std::unique_ptr<bool[]> pos(new bool[scores.size()]);
  std::vector<double> freq, rare;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const int label = static_cast<int>(c);
    for (std::size_t v = 0; v < scores.size(); ++v) {
      const auto it = scores[v].find(label);
      s[v] = it == scores[v].end() ? 0.0 : it->second;
      pos[v] = groundtruth[v].count(label) > 0;
    }
    const double ap = average_precision(s, std::span<const bool>(pos.get(), scores.size()));
    result.per_class[c] = ap;
    if (train_counts[c] > kFrequentThreshold) freq.push_back(ap);
    if (train_counts[c] < kRareThreshold) rare.push_back(ap);
  }
  result.all = nan_mean(result.per_class);
  result.freq = nan_mean(freq);
  result.rare = nan_mean(rare);
  return result;
}

Predictor model_predictor(const AnticipatrModel& model, double threshold) {
  return [&model, threshold](const VideoSample& video, int observed, std::span<const int> horizons) {
    const auto obs = model.encode(video.observed(static_cast<std::size_t>(observed)));
    std::vector<std::vector<ScoredInstance>> out;
    for (int t_a : horizons) {
      const auto set = model.predict(obs, static_cast<double>(t_a));
      std::vector<ScoredInstance> kept;
      for (const auto& e : set.entries) {
        const std::size_t c = e.argmax();
        if (c == set.null_class() || e.class_probs[c] < threshold) continue;
        kept.push_back(to_frames(static_cast<int>(c), e.class_probs[c], e.span, observed, t_a));
      }
      out.push_back(std::move(kept));
    }
    return out;
  };
}

Predictor oracle_predictor() {
  return [](const VideoSample& video, int observed, std::span<const int> horizons) {
    std::vector<std::vector<ScoredInstance>> out;
    for (int t_a : horizons) {
      std::vector<ScoredInstance> kept;
      for (const auto& inst : target_set(video, observed, t_a)) {
        kept.push_back({inst.label, 1.0, inst.start, inst.end});
      }
      out.push_back(std::move(kept));
    }
    return out;
  };
}

void ProtocolConfig::validate() const {
  auto check = [](const std::vector<double>& values, const char* name, bool allow_100) {
    for (double v : values) {
      if (!(v > 0.0 && (allow_100 ? v <= 100.0 : v < 100.0))) {
        throw ConfigError(std::string(name) + " values must lie in (0, 100)");
      }
    }
  };
  check(beta_o, "beta_o", false);
  check(beta_a, "beta_a", true);
  check(alpha_o, "alpha_o", false);
  if (threads == 0) throw ConfigError("threads must be >= 1");
}

double EvaluationReport::moc_at(double beta_o, double beta_a) const {
  for (const auto& c : moc) {
    if (c.beta_o == beta_o && c.beta_a == beta_a) return c.moc;
  }
  throw UsageError("no MoC cell for the requested fractions");
}

double EvaluationReport::mean_moc() const {
  std::vector<double> v;
  for (const auto& c : moc) v.push_back(c.moc);
  return nan_mean(v);
}

double EvaluationReport::mean_map() const {
  std::vector<double> v;
  for (const auto& c : map) v.push_back(c.result.all);
  return nan_mean(v);
}

namespace {

struct VideoOutcome {
  std::vector<Timeline> pred, gt;  // row-major over beta_o x beta_a
  std::vector<LabelScores> scores;  // per alpha_o
  std::vector<std::set<int>> labels;
};

VideoOutcome evaluate_video(const VideoSample& video, const Predictor& predictor,
                            const ProtocolConfig& config) {
  VideoOutcome out;
  for (double beta_o : config.beta_o) {
    const auto split = split_observed(video.length, beta_o);
    std::vector<int> horizons;
    for (double beta_a : config.beta_a) horizons.push_back(split.anticipation(beta_a));
    const auto preds = predictor(video, split.observed, horizons);
    if (preds.size() != horizons.size()) throw UsageError("predictor returned the wrong horizon count");
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      out.pred.push_back(build_timeline(preds[h], split.observed, horizons[h]));
      out.gt.push_back(groundtruth_timeline(video.instances, split.observed, horizons[h]));
    }
  }
  for (double alpha_o : config.alpha_o) {
    const auto split = split_observed(video.length, alpha_o);
    const int horizon[] = {split.remaining};
    const auto preds = predictor(video, split.observed, horizon);
    if (preds.size() != 1) throw UsageError("predictor returned the wrong horizon count");
    out.scores.push_back(future_label_set(preds.front()));
    std::set<int> labels;
    for (const auto& inst : target_set(video, split.observed, split.remaining)) labels.insert(inst.label);
    out.labels.push_back(std::move(labels));
  }
  return out;
}

}  // namespace

EvaluationReport evaluate(std::span<const VideoSample> videos, const Predictor& predictor,
                          std::size_t num_classes, std::span<const std::size_t> train_counts,
                          const ProtocolConfig& config) {
  config.validate();
  if (videos.empty()) throw UsageError("no videos to evaluate");
  std::vector<VideoOutcome> outcomes(videos.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < videos.size(); i = next++) {
      try {
        outcomes[i] = evaluate_video(videos[i], predictor, config);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = videos.size();
      }
    }
  };
  const std::size_t n_threads = std::min(config.threads, videos.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvaluationReport report;
  report.num_videos = videos.size();
  const std::size_t n_cells = config.beta_o.size() * config.beta_a.size();
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    std::vector<Timeline> pred, gt;
    for (const auto& o : outcomes) {
      pred.push_back(o.pred[cell]);
      gt.push_back(o.gt[cell]);
    }
    report.moc.push_back({config.beta_o[cell / config.beta_a.size()],
                          config.beta_a[cell % config.beta_a.size()],
                          moc_accuracy(pred, gt, num_classes, config.pooling)});
  }
  for (std::size_t a = 0; a < config.alpha_o.size(); ++a) {
    std::vector<LabelScores> scores;
    std::vector<std::set<int>> labels;
    for (const auto& o : outcomes) {
      scores.push_back(o.scores[a]);
      labels.push_back(o.labels[a]);
    }
    report.map.push_back(
        {config.alpha_o[a], mean_average_precision(scores, labels, num_classes, train_counts)});
  }
  return report;
}

namespace {

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

nlohmann::ordered_json nullable(double v) {
  return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
}

}  // namespace

std::string moc_csv(const EvaluationReport& report) {
  std::vector<double> betas_o, betas_a;
  for (const auto& c : report.moc) {
    if (std::find(betas_o.begin(), betas_o.end(), c.beta_o) == betas_o.end()) betas_o.push_back(c.beta_o);
    if (std::find(betas_a.begin(), betas_a.end(), c.beta_a) == betas_a.end()) betas_a.push_back(c.beta_a);
  }
  std::ostringstream os;
  os << "beta_o";
  for (double b : betas_a) os << ",beta_a=" << b;
  os << '\n';
  for (double o : betas_o) {
    os << o;
    for (double a : betas_a) os << ',' << number(report.moc_at(o, a));
    os << '\n';
  }
  return os.str();
}

std::string map_csv(const EvaluationReport& report) {
  std::ostringstream os;
  os << "alpha_o,all,freq,rare\n";
  std::vector<double> all, freq, rare;
  for (const auto& c : report.map) {
    os << c.alpha_o << ',' << number(c.result.all) << ',' << number(c.result.freq) << ','
       << number(c.result.rare) << '\n';
    all.push_back(c.result.all);
    freq.push_back(c.result.freq);
    rare.push_back(c.result.rare);
  }
  os << "mean," << number(nan_mean(all)) << ',' << number(nan_mean(freq)) << ','
     << number(nan_mean(rare)) << '\n';
  return os.str();
}

std::string report_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["num_videos"] = report.num_videos;
  auto moc = nlohmann::ordered_json::array();
  for (const auto& c : report.moc) {
    moc.push_back({{"beta_o", c.beta_o}, {"beta_a", c.beta_a}, {"moc", nullable(c.moc)}});
  }
  j["moc"] = std::move(moc);
  j["mean_moc"] = nullable(report.mean_moc());
  auto map = nlohmann::ordered_json::array();
  for (const auto& c : report.map) {
    auto per_class = nlohmann::ordered_json::array();
    for (double ap : c.result.per_class) per_class.push_back(nullable(ap));
    map.push_back({{"alpha_o", c.alpha_o},
                   {"all", nullable(c.result.all)},
                   {"freq", nullable(c.result.freq)},
                   {"rare", nullable(c.result.rare)},
                   {"per_class", std::move(per_class)}});
  }
  j["map"] = std::move(map);
  j["mean_map"] = nullable(report.mean_map());
  return j.dump(2) + "\n";
}

}  // namespace antq
