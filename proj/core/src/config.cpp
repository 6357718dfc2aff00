#include "trackfm/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace trackfm {

WindowMode window_mode_from_string(std::string_view s) {
  if (s == "track" || s == "track_based") return WindowMode::track_based;
  if (s == "time" || s == "time_based") return WindowMode::time_based;
  throw ConfigError("unknown window mode: " + std::string(s));
}

const char* to_string(WindowMode m) {
  return m == WindowMode::track_based ? "track" : "time";
}

Weighting weighting_from_string(std::string_view s) {
  if (s == "uniform") return Weighting::uniform;
  if (s == "inverse_distance" || s == "inverse") return Weighting::inverse_distance;
  throw ConfigError("unknown weighting: " + std::string(s));
}

const char* to_string(Weighting w) {
  return w == Weighting::uniform ? "uniform" : "inverse_distance";
}

Loss loss_from_string(std::string_view s) {
  if (s == "logistic") return Loss::logistic;
  if (s == "squared") return Loss::squared;
  throw ConfigError("unknown loss: " + std::string(s));
}

const char* to_string(Loss l) {
  return l == Loss::logistic ? "logistic" : "squared";
}

PositiveWeight positive_weight_from_string(std::string_view s) {
  if (s == "unit") return PositiveWeight::unit;
  if (s == "cooc_weight" || s == "cooc") return PositiveWeight::cooc_weight;
  throw ConfigError("unknown positive weight mode: " + std::string(s));
}

const char* to_string(PositiveWeight p) {
  return p == PositiveWeight::unit ? "unit" : "cooc_weight";
}

ComposeMode compose_mode_from_string(std::string_view s) {
  if (s == "track_plus_side") return ComposeMode::track_plus_side;
  if (s == "track_only") return ComposeMode::track_only;
  if (s == "track_plus_context_plus_side")
    return ComposeMode::track_plus_context_plus_side;
  throw ConfigError("unknown compose mode: " + std::string(s));
}

const char* to_string(ComposeMode m) {
  switch (m) {
    case ComposeMode::track_plus_side: return "track_plus_side";
    case ComposeMode::track_only: return "track_only";
    case ComposeMode::track_plus_context_plus_side:
      return "track_plus_context_plus_side";
  }
  return "?";
}

std::vector<uint64_t> parse_bin_edges(std::string_view csv) {
  std::vector<uint64_t> edges;
  size_t start = 0;
  while (start <= csv.size()) {
    size_t pos = csv.find(',', start);
    std::string_view item = pos == std::string_view::npos
                                ? csv.substr(start)
                                : csv.substr(start, pos - start);
    if (!item.empty()) {
      uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size()) {
        throw ConfigError("bad bin edge: " + std::string(item));
      }
      edges.push_back(v);
    }
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (edges.empty()) throw ConfigError("bins: no edges given");
  return edges;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// Sectioned key = value lines; '#' and ';' start comments.
std::map<std::string, std::string> parse_ini(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::string section;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#' || s.front() == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": bad section header");
      }
      section = std::string(trim(s.substr(1, s.size() - 2)));
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    std::string key = std::string(trim(s.substr(0, eq)));
    std::string value = std::string(trim(s.substr(eq + 1)));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    kv[section + "." + key] = value;
  }
  return kv;
}

class KvReader {
 public:
  explicit KvReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  std::optional<std::string> take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    std::string v = it->second;
    kv_.erase(it);
    return v;
  }

  template <typename T>
  void number(const std::string& key, T& out) {
    auto v = take(key);
    if (!v) return;
    const char* first = v->data();
    const char* last = v->data() + v->size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
      throw ConfigError("config: bad numeric value for " + key + ": " + *v);
    }
  }

  void boolean(const std::string& key, bool& out) {
    auto v = take(key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes") {
      out = true;
    } else if (*v == "false" || *v == "0" || *v == "no") {
      out = false;
    } else {
      throw ConfigError("config: bad boolean value for " + key + ": " + *v);
    }
  }

  void finish() const {
    if (kv_.empty()) return;
    throw ConfigError("config: unknown key '" + kv_.begin()->first + "'");
  }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace

PipelineConfig parse_pipeline_config_text(const std::string& text) {
  KvReader kv(parse_ini(text));
  PipelineConfig cfg;

  if (auto v = kv.take("paths.events")) cfg.events = *v;
  if (auto v = kv.take("paths.workdir")) cfg.workdir = *v;
  if (auto v = kv.take("paths.side_features")) cfg.side_features = *v;

  kv.number("global.seed", cfg.seed);
  kv.number("global.threads", cfg.threads);
  if (auto v = kv.take("global.format")) {
    cfg.format = snapshot_format_from_string(*v);
  }

  kv.number("ingest.min_items_per_user", cfg.ingest.min_items_per_user);
  kv.number("ingest.min_users_per_item", cfg.ingest.min_users_per_item);
  kv.number("ingest.max_interactions_per_item",
            cfg.ingest.max_interactions_per_item);
  kv.number("ingest.full_listen_fraction", cfg.ingest.full_listen_fraction);
  kv.number("ingest.full_listen_absolute", cfg.ingest.full_listen_absolute);

  kv.number("split.timestamp", cfg.split_timestamp);

  if (auto v = kv.take("window.mode")) {
    cfg.window.mode = window_mode_from_string(*v);
  }
  kv.number("window.radius", cfg.window.radius_tracks);
  kv.number("window.radius_seconds", cfg.window.radius_seconds);
  if (auto v = kv.take("window.weighting")) {
    cfg.window.weighting = weighting_from_string(*v);
  }

  if (auto v = kv.take("train.loss")) cfg.train.loss = loss_from_string(*v);
  kv.number("train.negatives", cfg.train.negatives_per_positive);
  kv.number("train.smoothing", cfg.train.smoothing_exponent);
  kv.number("train.dim", cfg.train.k);
  kv.number("train.epochs", cfg.train.epochs);
  kv.number("train.learning_rate", cfg.train.learning_rate);
  kv.number("train.lambda1", cfg.train.lambda1);
  kv.number("train.lambda2", cfg.train.lambda2);
  if (auto v = kv.take("train.positive_weight")) {
    cfg.train.positive_weight = positive_weight_from_string(*v);
  }
  kv.boolean("train.include_context_side", cfg.train.include_context_side);
  if (auto v = kv.take("train.compose")) {
    cfg.compose = compose_mode_from_string(*v);
  }

  kv.boolean("als.enabled", cfg.als_enabled);
  kv.number("als.dim", cfg.als.k);
  kv.number("als.sweeps", cfg.als.sweeps);
  kv.number("als.lambda", cfg.als.lambda);
  if (auto v = kv.take("als.alpha")) {
    if (*v != "auto") {
      double a = 0.0;
      auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), a);
      if (ec != std::errc() || ptr != v->data() + v->size()) {
        throw ConfigError("config: bad als.alpha: " + *v);
      }
      cfg.als.alpha = a;
    }
  }

  if (auto v = kv.take("eval.bins")) cfg.eval.bin_edges = parse_bin_edges(*v);
  if (auto v = kv.take("eval.max_eval_tracks_per_query")) {
    uint32_t n = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), n);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
      throw ConfigError("config: bad eval.max_eval_tracks_per_query: " + *v);
    }
    if (n > 0) cfg.eval.max_eval_tracks_per_query = n;
  }

  kv.finish();
  cfg.propagate_globals();
  return cfg;
}

PipelineConfig parse_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pipeline_config_text(buf.str());
}

void PipelineConfig::propagate_globals() {
  ingest.rng_seed = seed;
  window.rng_seed = seed;
  train.rng_seed = seed;
  train.threads = threads;
  als.rng_seed = seed;
  als.threads = threads;
  eval.rng_seed = seed;
}

void PipelineConfig::validate() const {
  if (events.empty()) throw ConfigError("config: paths.events is required");
  if (workdir.empty()) throw ConfigError("config: paths.workdir is required");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  ingest.validate();
  window.validate();
  train.validate();
  if (als_enabled) als.validate();
  eval.validate();
}

}  // namespace trackfm
