// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "error.hpp"

namespace ernetcl {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorCode::kConfig, "config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct PresetRow {
  const char* name;
  double lr;
  double delta;
  double sigma;
  std::size_t batch;
  std::size_t depth_te;
  std::size_t depth_se;
  double dropout;
};

constexpr PresetRow kPresets[] = {
    {"meld", 1e-5, 10, 0.4, 128, 4, 4, 0.2},
    {"iemocap", 1e-4, 9, 0.7, 64, 2, 6, 0.1},
    {"emorynlp", 1e-5, 7, 0.6, 128, 4, 3, 0.2},
    {"dailydialog", 1e-5, 9, 0.6, 128, 3, 6, 0.2},
};

}  // namespace

ModelConfig preset(std::string_view name) {
  for (const auto& row : kPresets) {
    if (name == row.name) {
      ModelConfig cfg;
      cfg.learning_rate = row.lr;
      cfg.delta = row.delta;
      cfg.sigma = row.sigma;
      cfg.batch_size = row.batch;
      cfg.depth_te = row.depth_te;
      cfg.depth_se = row.depth_se;
      cfg.dropout = row.dropout;
      cfg.heads = 4;
      cfg.weight_decay = 3e-4;
      cfg.seed = 2023;
      return cfg;
    }
  }
  fail(ErrorCode::kConfig, "unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& row : kPresets) names.emplace_back(row.name);
  return names;
}

void validate(const ModelConfig& cfg, bool require_dims) {
  auto bad = [](const std::string& msg) { fail(ErrorCode::kConfig, msg); };
  if (require_dims && cfg.feature_dim == 0) bad("feature_dim must be positive");
  if (require_dims && cfg.num_classes == 0) bad("num_classes must be positive");
  if (cfg.heads == 0) bad("heads must be positive");
  if (cfg.feature_dim != 0 && cfg.feature_dim % cfg.heads != 0) {
    bad("heads (" + std::to_string(cfg.heads) + ") must divide feature_dim (" +
        std::to_string(cfg.feature_dim) + ")");
  }
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (!(cfg.sigma > 0.0 && cfg.sigma <= 1.0)) bad("sigma must lie in (0, 1]");
  if (!(cfg.delta >= 1.0) || !std::isfinite(cfg.delta)) bad("delta must be >= 1");
  if (!(cfg.learning_rate > 0.0)) bad("learning_rate must be positive");
  if (cfg.batch_size == 0) bad("batch_size must be positive");
  if (!(cfg.weight_decay >= 0.0)) bad("weight_decay must be non-negative");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) bad("beta1 must lie in [0, 1)");
  if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) bad("beta2 must lie in [0, 1)");
  if (!(cfg.adam_eps > 0.0)) bad("adam_eps must be positive");
  if (!(cfg.grad_clip >= 0.0)) bad("grad_clip must be non-negative");
}

void set_config_value(ModelConfig& cfg, std::string_view key, std::string_view value) {
  const auto size = [&] { return parse_number<std::size_t>(key, value); };
  const auto real = [&] { return parse_number<double>(key, value); };
  if (key == "feature_dim") cfg.feature_dim = size();
  else if (key == "num_classes") cfg.num_classes = size();
  else if (key == "depth_te") cfg.depth_te = size();
  else if (key == "depth_se") cfg.depth_se = size();
  else if (key == "heads") cfg.heads = size();
  else if (key == "dropout") cfg.dropout = real();
  else if (key == "max_epochs") cfg.max_epochs = size();
  else if (key == "sigma") cfg.sigma = real();
  else if (key == "delta") cfg.delta = real();
  else if (key == "learning_rate") cfg.learning_rate = real();
  else if (key == "batch_size") cfg.batch_size = size();
  else if (key == "weight_decay") cfg.weight_decay = real();
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "beta1") cfg.beta1 = real();
  else if (key == "beta2") cfg.beta2 = real();
  else if (key == "adam_eps") cfg.adam_eps = real();
  else if (key == "grad_clip") cfg.grad_clip = real();
  else fail(ErrorCode::kConfig, "unknown config key '" + std::string(key) + "'");
}

ModelConfig parse_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string preset_name;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = line;
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = trim(sv);
    if (sv.empty()) continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kParse, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(sv.substr(0, eq)));
    std::string value(trim(sv.substr(eq + 1)));
    if (key.empty() || value.empty()) {
      fail(ErrorCode::kParse, "config line " + std::to_string(line_no) + ": empty key or value");
    }
    if (key == "preset") {
      preset_name = value;
    } else {
      pairs.emplace_back(std::move(key), std::move(value));
    }
  }
  ModelConfig cfg = preset_name.empty() ? ModelConfig{} : preset(preset_name);
  for (const auto& [k, v] : pairs) set_config_value(cfg, k, v);
  validate(cfg, false);
  return cfg;
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "feature_dim = " << cfg.feature_dim << '\n'
     << "num_classes = " << cfg.num_classes << '\n'
     << "depth_te = " << cfg.depth_te << '\n'
     << "depth_se = " << cfg.depth_se << '\n'
     << "heads = " << cfg.heads << '\n'
     << "dropout = " << format_double(cfg.dropout) << '\n'
     << "max_epochs = " << cfg.max_epochs << '\n'
     << "sigma = " << format_double(cfg.sigma) << '\n'
     << "delta = " << format_double(cfg.delta) << '\n'
     << "learning_rate = " << format_double(cfg.learning_rate) << '\n'
     << "batch_size = " << cfg.batch_size << '\n'
     << "weight_decay = " << format_double(cfg.weight_decay) << '\n'
     << "seed = " << cfg.seed << '\n'
     << "beta1 = " << format_double(cfg.beta1) << '\n'
     << "beta2 = " << format_double(cfg.beta2) << '\n'
     << "adam_eps = " << format_double(cfg.adam_eps) << '\n'
     << "grad_clip = " << format_double(cfg.grad_clip) << '\n';
  return os.str();
}

void apply_environment(ModelConfig& cfg) {
  if (const char* seed = std::getenv("ERNETCL_SEED"); seed != nullptr && *seed != '\0') {
    cfg.seed = parse_number<std::uint64_t>("ERNETCL_SEED", trim(seed));
  }
}

}  // namespace ernetcl
