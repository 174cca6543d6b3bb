#include "b2dcnn/config.hpp"

#include <charconv>
#include <fstream>
#include <tuple>

namespace b2dcnn {

namespace {

int to_int(const std::string& v, const std::string& key) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& v, const std::string& key) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::pair<int, int> parse_size_pair(const std::string& s, const std::string& what) {
  const auto x = s.find('x');
  if (x == std::string::npos || x == 0 || x + 1 >= s.size()) {
    throw ConfigError("config: '" + what + "' expects \"KxD\" (e.g. 3x3), got '" + s + "'");
  }
  const int a = to_int(s.substr(0, x), what);
  const int b = to_int(s.substr(x + 1), what);
  if (a < 1 || b < 1) {
    throw ConfigError("config: '" + what + "' sizes must be positive, got '" + s + "'");
  }
  return {a, b};
}

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "variant") {
    cfg.variant = variant_from_string(value);
  } else if (key == "embed-dim") {
    cfg.embed_dim = to_int(value, key);
  } else if (key == "hidden") {
    cfg.hidden = to_int(value, key);
  } else if (key == "filters") {
    cfg.n_filters = to_int(value, key);
  } else if (key == "filter") {
    std::tie(cfg.filter_k, cfg.filter_d) = parse_size_pair(value, key);
  } else if (key == "pool") {
    std::tie(cfg.pool_p1, cfg.pool_p2) = parse_size_pair(value, key);
  } else if (key == "dropout-embed") {
    cfg.dropout_embed = to_double(value, key);
  } else if (key == "dropout-blstm") {
    cfg.dropout_blstm = to_double(value, key);
  } else if (key == "dropout-penult") {
    cfg.dropout_penult = to_double(value, key);
  } else if (key == "lambda") {
    cfg.lambda = to_double(value, key);
  } else if (key == "lr") {
    cfg.lr = to_double(value, key);
  } else if (key == "batch") {
    cfg.batch = to_int(value, key);
  } else if (key == "epochs") {
    cfg.epochs = to_int(value, key);
  } else if (key == "seed") {
    cfg.seed = to_u64(value, key);
  } else if (key == "metric") {
    cfg.metric = metric_from_string(value);
  } else if (key == "threads") {
    cfg.threads = to_int(value, key);
  } else if (key == "max-len") {
    cfg.max_len = to_int(value, key);
  } else if (key == "cv") {
    cfg.cv = to_int(value, key);
  } else if (key == "dev-fraction") {
    cfg.dev_fraction = to_double(value, key);
  } else if (key == "lowercase") {
    cfg.lowercase = to_bool(value, key);
  } else if (key == "train") {
    cfg.train_path = value;
  } else if (key == "dev") {
    cfg.dev_path = value;
  } else if (key == "test") {
    cfg.test_path = value;
  } else if (key == "embeddings") {
    cfg.embeddings_path = value;
  } else if (key == "checkpoint") {
    cfg.checkpoint_path = value;
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected \"key = value\"");
    }
    apply_config_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace b2dcnn
