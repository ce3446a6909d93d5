#include "antq/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace antq {

using nlohmann::json;

namespace {

std::size_t draw(const std::vector<double>& probs, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> dist(probs.begin(), probs.end());
  return dist(rng);
}

void validate_distribution(const std::vector<double>& p, std::size_t n, const std::string& what) {
  if (p.size() != n) throw ConfigError(what + " has the wrong length");
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v)) throw ConfigError(what + " has a negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(what + " does not sum to 1");
}

}  // namespace

void ActivityGrammar::validate() const {
  const std::size_t n = classes.size();
  if (n == 0) throw ConfigError("grammar " + name + " has no classes");
  validate_distribution(initial, n, "grammar " + name + " initial distribution");
  if (transitions.size() != n || durations.size() != n || prototypes.size() != n) {
    throw ConfigError("grammar " + name + " tables disagree with its class list");
  }
  for (std::size_t i = 0; i < n; ++i) {
    validate_distribution(transitions[i], n, "grammar " + name + " transition row");
    if (durations[i].first < 1 || durations[i].second < durations[i].first) {
      throw ConfigError("grammar " + name + " has an invalid duration range");
    }
    if (prototypes[i].size() != prototypes.front().size()) {
      throw ConfigError("grammar " + name + " prototypes differ in width");
    }
  }
  if (noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
}

int ActivityGrammar::min_duration() const {
  int m = durations.front().first;
  for (const auto& d : durations) m = std::min(m, d.first);
  return m;
}

Tensor VideoSample::feature_tensor() const { return observed(static_cast<std::size_t>(length)); }

Tensor VideoSample::observed(std::size_t frames) const {
  if (frames == 0 || frames > static_cast<std::size_t>(length)) {
    throw UsageError("observed(" + std::to_string(frames) + ") on video of length " +
                     std::to_string(length));
  }
  std::vector<double> data(features.begin(),
                           features.begin() + static_cast<std::ptrdiff_t>(frames * feature_dim));
  return Tensor({frames, feature_dim}, std::move(data));
}

int VideoSample::label_at(int frame) const {
  for (const auto& inst : instances) {
    if (frame >= inst.start && frame <= inst.end) return inst.label;
  }
  throw UsageError("frame " + std::to_string(frame) + " not annotated in video " + id);
}

VideoSample sample_video(const ActivityGrammar& grammar, std::uint64_t seed, int length_budget) {
  grammar.validate();
  if (length_budget < grammar.min_duration()) {
    throw UsageError("length budget shorter than the minimum action duration");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  VideoSample video;
  video.activity = grammar.name;
  video.length = length_budget;
  video.feature_dim = grammar.feature_dim();
  video.features.reserve(static_cast<std::size_t>(length_budget) * video.feature_dim);

  std::size_t state = draw(grammar.initial, rng);
  int t = 1;
  while (t <= length_budget) {
    const auto [lo, hi] = grammar.durations[state];
    const int duration = std::uniform_int_distribution<int>(lo, hi)(rng);
    const int end = std::min(length_budget, t + duration - 1);
    video.instances.push_back({grammar.classes[state], t, end});
    const auto& mu = grammar.prototypes[state];
    for (int f = t; f <= end; ++f) {
      for (double m : mu) {
        const double x = grammar.noise_sigma > 0.0 ? m + grammar.noise_sigma * noise(rng) : m;
        video.features.push_back(static_cast<float>(x));
      }
    }
    t = end + 1;
    state = draw(grammar.transitions[state], rng);
  }
  return video;
}

namespace {

std::vector<double> future_labels(const VideoSample& video, int after_frame, std::size_t num_classes) {
  std::vector<double> target(num_classes, 0.0);
  for (const auto& inst : video.instances) {
    if (inst.end > after_frame) {
      if (inst.label < 0 || static_cast<std::size_t>(inst.label) >= num_classes) {
        throw UsageError("instance label outside the class set");
      }
      target[static_cast<std::size_t>(inst.label)] = 1.0;
    }
  }
  return target;
}

}  // namespace

std::vector<Stage1Example> stage1_examples(const VideoSample& video, std::size_t num_classes,
                                           bool include_empty_future) {
  std::vector<Stage1Example> out;
  for (const auto& inst : video.instances) {
    if (inst.end >= video.length && !include_empty_future) continue;
    out.push_back({Segment{video.id, inst.start, inst.end}, future_labels(video, inst.end, num_classes)});
  }
  return out;
}

std::vector<Stage1Example> sliding_window_examples(const VideoSample& video, std::size_t k,
                                                   std::size_t num_classes,
                                                   bool include_empty_future) {
  if (k == 0) throw UsageError("window length must be >= 1");
  std::vector<Stage1Example> out;
  for (int start = 1; start <= video.length; start += static_cast<int>(k)) {
    const int end = std::min(video.length, start + static_cast<int>(k) - 1);
    if (end >= video.length && !include_empty_future) continue;
    out.push_back({Segment{video.id, start, end}, future_labels(video, end, num_classes)});
  }
  return out;
}

int ObservationSplit::anticipation(double beta_a) const {
  if (!(beta_a > 0.0 && beta_a <= 100.0)) throw UsageError("beta_a must be in (0, 100]");
  const int t = static_cast<int>(std::lround(beta_a / 100.0 * remaining));
  return std::max(1, t);
}

ObservationSplit split_observed(int length, double beta_o) {
  if (!(beta_o > 0.0 && beta_o < 100.0)) throw UsageError("beta_o must be in (0, 100)");
  const int observed = std::max(1, static_cast<int>(std::lround(beta_o / 100.0 * length)));
  if (observed >= length) {
    throw UsageError("observation covers the whole video (T_o = T = " + std::to_string(length) + ")");
  }
  return {observed, length - observed};
}

std::vector<ActionInstance> target_set(const VideoSample& video, int observed, int anticipation) {
  if (observed < 0 || anticipation < 1 || observed + anticipation > video.length) {
    throw UsageError("anticipation window exceeds the video");
  }
  const int lo = observed + 1;
  const int hi = observed + anticipation;
  std::vector<ActionInstance> out;
  for (const auto& inst : video.instances) {
    if (inst.end < lo || inst.start > hi) continue;
    out.push_back({inst.label, std::max(inst.start, lo), std::min(inst.end, hi)});
  }
  return out;
}

std::vector<std::size_t> class_counts(const std::vector<VideoSample>& videos, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& v : videos) {
    for (const auto& inst : v.instances) {
      if (inst.label >= 0 && static_cast<std::size_t>(inst.label) < num_classes) {
        ++counts[static_cast<std::size_t>(inst.label)];
      }
    }
  }
  return counts;
}

std::string video_to_json_line(const VideoSample& video) {
  json j;
  j["id"] = video.id;
  j["activity"] = video.activity;
  j["T"] = video.length;
  j["d"] = video.feature_dim;
  json rows = json::array();
  for (int t = 0; t < video.length; ++t) {
    json row = json::array();
    for (std::size_t c = 0; c < video.feature_dim; ++c) {
      row.push_back(video.features[static_cast<std::size_t>(t) * video.feature_dim + c]);
    }
    rows.push_back(std::move(row));
  }
  j["features"] = std::move(rows);
  json inst = json::array();
  for (const auto& a : video.instances) inst.push_back({{"c", a.label}, {"ts", a.start}, {"te", a.end}});
  j["instances"] = std::move(inst);
  return j.dump();
}

namespace {

VideoSample parse_video(const json& j) {
  VideoSample v;
  v.id = j.at("id").get<std::string>();
  v.activity = j.at("activity").get<std::string>();
  v.length = j.at("T").get<int>();
  v.feature_dim = j.at("d").get<std::size_t>();
  if (v.length < 1 || v.feature_dim < 1) throw ParseError("T and d must be positive");
  const auto& rows = j.at("features");
  if (!rows.is_array() || rows.size() != static_cast<std::size_t>(v.length)) {
    throw ParseError("features must hold T rows");
  }
  v.features.reserve(static_cast<std::size_t>(v.length) * v.feature_dim);
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != v.feature_dim) throw ParseError("feature row must hold d values");
    for (const auto& x : row) v.features.push_back(x.get<float>());
  }
  int expected = 1;
  for (const auto& a : j.at("instances")) {
    ActionInstance inst{a.at("c").get<int>(), a.at("ts").get<int>(), a.at("te").get<int>()};
    if (inst.label < 0 || inst.start != expected || inst.end < inst.start || inst.end > v.length) {
      throw ParseError("instances must tile frames 1..T in order");
    }
    expected = inst.end + 1;
    v.instances.push_back(inst);
  }
  if (expected != v.length + 1) throw ParseError("instances do not cover the whole video");
  return v;
}

}  // namespace

VideoSample video_from_json_line(const std::string& line) {
  try {
    return parse_video(json::parse(line));
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

void save_dataset(const std::filesystem::path& path, const std::vector<VideoSample>& videos) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UsageError("cannot write dataset " + path.string());
  for (const auto& v : videos) out << video_to_json_line(v) << '\n';
  if (!out) throw UsageError("failed writing dataset " + path.string());
}

std::vector<VideoSample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open dataset " + path.string());
  std::vector<VideoSample> videos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      videos.push_back(video_from_json_line(line));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return videos;
}

void save_class_names(const std::filesystem::path& path, const std::vector<std::string>& names) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << json(names).dump(2) << '\n';
}

std::vector<std::string> load_class_names(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(in).get<std::vector<std::string>>();
  } catch (const std::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<ActivityGrammar> make_toy_grammars(const ToyGrammarOptions& o) {
  if (o.num_activities == 0 || o.num_classes <= o.num_activities) {
    throw ConfigError("toy grammar needs more classes than activities");
  }
  if (o.chain_fidelity < 0.0 || o.chain_fidelity > 1.0) throw ConfigError("chain_fidelity in [0,1]");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> prototypes(o.num_classes, std::vector<double>(o.feature_dim));
  for (auto& p : prototypes)
    for (auto& v : p) v = normal(rng);

  const std::size_t num_shared = o.num_classes - o.num_activities;
  if (o.shared_per_activity == 0 || o.shared_per_activity > num_shared) {
    throw ConfigError("shared_per_activity must be in [1, num_classes - num_activities]");
  }

  std::vector<ActivityGrammar> grammars;
  for (std::size_t a = 0; a < o.num_activities; ++a) {
    ActivityGrammar g;
    g.name = "activity" + std::to_string(a);
    g.classes.push_back(static_cast<int>(a));
    for (std::size_t j = 0; j < o.shared_per_activity; ++j) {
      g.classes.push_back(static_cast<int>(o.num_activities + (a + j) % num_shared));
    }
    const std::size_t n = g.classes.size();
    g.initial.assign(n, 0.0);
    g.initial[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(n, 0.0);
      const std::size_t next = (i + 1) % n;
      const std::size_t others = n > 2 ? n - 2 : 0;
      if (others == 0) {
        row[next] = 1.0;
      } else {
        row[next] = o.chain_fidelity;
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i && j != next) row[j] = (1.0 - o.chain_fidelity) / static_cast<double>(others);
        }
      }
      g.transitions.push_back(std::move(row));
      g.durations.emplace_back(o.min_duration, o.max_duration);
      g.prototypes.push_back(prototypes[static_cast<std::size_t>(g.classes[i])]);
    }
    g.noise_sigma = o.noise_sigma;
    g.validate();
    grammars.push_back(std::move(g));
  }
  return grammars;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<VideoSample> generate_dataset(const std::vector<ActivityGrammar>& grammars,
                                          const DatasetSpec& spec) {
  if (grammars.empty()) throw ConfigError("no grammars to sample from");
  if (spec.min_length > spec.max_length || spec.min_length < 2) throw ConfigError("invalid length range");
  std::vector<VideoSample> videos;
  videos.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::uint64_t seed = derive_seed(spec.seed, i);
    std::mt19937_64 rng(seed);
    const auto& g = grammars[std::uniform_int_distribution<std::size_t>(0, grammars.size() - 1)(rng)];
    const int length = std::uniform_int_distribution<int>(spec.min_length, spec.max_length)(rng);
    VideoSample v = sample_video(g, derive_seed(seed, 1), length);
    v.id = spec.prefix + std::to_string(i);
    videos.push_back(std::move(v));
  }
  return videos;
}

}  // namespace antq
