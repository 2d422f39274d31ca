// SPDX-License-Identifier: Apache-2.0
#include "data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "curriculum.hpp"
#include "error.hpp"

namespace ernetcl::data {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

// Random access into the float32 sidecar.
class Sidecar {
 public:
  explicit Sidecar(std::string path) : path_(std::move(path)) {}

  std::vector<double> read(std::uint64_t offset, std::size_t dim, const std::string& ctx) {
    if (!in_.is_open()) {
      in_.open(path_, std::ios::binary);
      if (!in_) fail(ErrorCode::kIo, ctx + ": cannot open feature sidecar " + path_);
    }
    std::vector<unsigned char> raw(dim * 4);
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(offset));
    in_.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in_) fail(ErrorCode::kFormat, ctx + ": sidecar read past end of " + path_);
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | raw[i * 4 + static_cast<std::size_t>(b)];
      out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return out;
  }

 private:
  std::string path_;
  std::ifstream in_;
};

Conversation parse_conversation(std::string_view line, const std::string& ctx, Sidecar& sidecar) {
  // Optional `<id>\t` header ahead of the JSON body.
  std::string_view header;
  if (const auto brace = line.find('{'); brace != std::string_view::npos && brace > 0) {
    header = trim(line.substr(0, brace));
    line = line.substr(brace);
  }
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, ctx + ": malformed record: " + e.what());
  }
  auto parse_err = [&](const std::string& msg) -> void { fail(ErrorCode::kParse, ctx + ": " + msg); };
  if (!doc.is_object()) parse_err("record is not an object");
  if (!doc.contains("id") || !doc["id"].is_string()) parse_err("missing string field 'id'");
  if (!doc.contains("utterances") || !doc["utterances"].is_array()) {
    parse_err("missing array field 'utterances'");
  }
  Conversation conv;
  conv.id = doc["id"].get<std::string>();
  if (!header.empty() && header != conv.id) {
    parse_err("header id '" + std::string(header) + "' does not match record id '" + conv.id + "'");
  }
  for (const auto& u : doc["utterances"]) {
    if (!u.is_object()) parse_err("utterance is not an object");
    Utterance utt;
    if (!u.contains("speaker")) parse_err("utterance without 'speaker'");
    const auto& spk = u["speaker"];
    if (spk.is_string()) utt.speaker = spk.get<std::string>();
    else if (spk.is_number_integer()) utt.speaker = std::to_string(spk.get<long long>());
    else parse_err("speaker must be a string");
    if (!u.contains("label") || !u["label"].is_number_integer()) parse_err("utterance without integer 'label'");
    utt.label = u["label"].get<int>();
    if (u.contains("features")) {
      if (!u["features"].is_array()) parse_err("'features' must be an array");
      for (const auto& f : u["features"]) {
        if (!f.is_number()) parse_err("non-numeric feature value");
        utt.features.push_back(f.get<double>());
      }
    } else if (u.contains("offset") && u.contains("dim")) {
      if (!u["offset"].is_number_unsigned() || !u["dim"].is_number_unsigned()) {
        parse_err("'offset' and 'dim' must be non-negative integers");
      }
      utt.features = sidecar.read(u["offset"].get<std::uint64_t>(), u["dim"].get<std::size_t>(), ctx);
    } else {
      parse_err("utterance needs 'features' or 'offset'/'dim'");
    }
    conv.utterances.push_back(std::move(utt));
  }
  if (conv.utterances.empty()) fail(ErrorCode::kFormat, ctx + ": conversation '" + conv.id + "' is empty");
  return conv;
}

}  // namespace

std::size_t Dataset::feature_dim() const {
  for (const auto& c : conversations) {
    if (!c.utterances.empty()) return c.utterances.front().features.size();
  }
  return 0;
}

std::size_t Dataset::utterance_count() const {
  std::size_t n = 0;
  for (const auto& c : conversations) n += c.size();
  return n;
}

// ---------------------------------------------------------------------------
// Label map

LabelMap parse_label_map(std::string_view text) {
  LabelMap map;
  std::vector<std::pair<int, std::string>> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    const auto tab = sv.find('\t');
    if (tab == std::string_view::npos) {
      fail(ErrorCode::kParse, "label map line " + std::to_string(line_no) + ": expected <index>\\t<name>");
    }
    const std::string left(trim(sv.substr(0, tab)));
    const std::string right(trim(sv.substr(tab + 1)));
    if (left == "neutral") {
      try {
        map.neutral_index = std::stoi(right);
      } catch (const std::exception&) {
        fail(ErrorCode::kParse, "label map line " + std::to_string(line_no) + ": bad neutral index");
      }
      continue;
    }
    if (map.neutral_index) {
      fail(ErrorCode::kParse, "label map line " + std::to_string(line_no) + ": entries after neutral line");
    }
    int idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoi(left, &used);
      if (used != left.size()) throw std::invalid_argument(left);
    } catch (const std::exception&) {
      fail(ErrorCode::kParse, "label map line " + std::to_string(line_no) + ": bad index '" + left + "'");
    }
    entries.emplace_back(idx, right);
  }
  std::sort(entries.begin(), entries.end());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != static_cast<int>(i)) {
      fail(ErrorCode::kFormat, "label map indices must be 0..K-1 without gaps");
    }
    map.names.push_back(entries[i].second);
  }
  if (map.neutral_index &&
      (*map.neutral_index < 0 || *map.neutral_index >= static_cast<int>(map.names.size()))) {
    fail(ErrorCode::kLabel, "neutral index " + std::to_string(*map.neutral_index) + " outside label map");
  }
  return map;
}

LabelMap load_label_map(const std::string& path) { return parse_label_map(read_file(path)); }

std::string format_label_map(const Dataset& ds) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ds.label_names.size(); ++i) os << i << '\t' << ds.label_names[i] << '\n';
  if (ds.neutral_index) os << "neutral\t" << *ds.neutral_index << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Load / save

Dataset load_dataset(const std::string& path, const std::string& labels_path) {
  const std::string text = read_file(path);
  Sidecar sidecar(path + ".bin");
  Dataset ds;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    Conversation conv = parse_conversation(sv, where(path, line_no), sidecar);
    for (const auto& u : conv.utterances) {
      if (dim == 0) dim = u.features.size();
      if (u.features.empty() || u.features.size() != dim) {
        fail(ErrorCode::kFormat, where(path, line_no) + ": conversation '" + conv.id + "' has a " +
                                     std::to_string(u.features.size()) + "-dim feature vector, expected " +
                                     std::to_string(dim));
      }
      if (u.label < 0) {
        fail(ErrorCode::kLabel, where(path, line_no) + ": negative label in conversation '" + conv.id + "'");
      }
      max_label = std::max(max_label, u.label);
    }
    ds.conversations.push_back(std::move(conv));
  }

  std::string map_path = labels_path;
  if (map_path.empty() && std::filesystem::exists(path + ".labels")) map_path = path + ".labels";
  if (!map_path.empty()) {
    LabelMap map = load_label_map(map_path);
    if (max_label >= static_cast<int>(map.names.size())) {
      fail(ErrorCode::kLabel, path + ": label " + std::to_string(max_label) + " not in label map " + map_path);
    }
    ds.label_names = std::move(map.names);
    ds.neutral_index = map.neutral_index;
  } else {
    for (int i = 0; i <= max_label; ++i) ds.label_names.push_back(std::to_string(i));
  }
  for (auto& c : ds.conversations) c.difficulty = curriculum::difficulty(c);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  for (const auto& c : ds.conversations) {
    json utts = json::array();
    for (const auto& u : c.utterances) {
      utts.push_back({{"speaker", u.speaker}, {"label", u.label}, {"features", u.features}});
    }
    json doc = {{"id", c.id}, {"utterances", std::move(utts)}};
    out << doc.dump() << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path);
  std::ofstream labels(path + ".labels", std::ios::trunc);
  labels << format_label_map(ds);
  if (!labels) fail(ErrorCode::kIo, "cannot write " + path + ".labels");
}

// ---------------------------------------------------------------------------
// Batching

Tensor Batch::conversation_features(std::size_t i) const {
  const std::size_t block = max_len * dim;
  std::vector<double> v(features.begin() + static_cast<std::ptrdiff_t>(i * block),
                        features.begin() + static_cast<std::ptrdiff_t>((i + 1) * block));
  return Tensor::from_values({max_len, dim}, std::move(v));
}

std::span<const std::uint8_t> Batch::conversation_mask(std::size_t i) const {
  return std::span<const std::uint8_t>(valid).subspan(i * max_len, max_len);
}

std::size_t Batch::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  b.size = indices.size();
  b.dim = ds.feature_dim();
  for (auto i : indices) b.max_len = std::max(b.max_len, ds.conversations.at(i).size());
  b.features.assign(b.size * b.max_len * b.dim, 0.0);
  b.labels.assign(b.size * b.max_len, kPadLabel);
  b.valid.assign(b.size * b.max_len, 0);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Conversation& c = ds.conversations[indices[k]];
    for (std::size_t t = 0; t < c.size(); ++t) {
      const auto& f = c.utterances[t].features;
      std::copy(f.begin(), f.end(), b.features.begin() + static_cast<std::ptrdiff_t>((k * b.max_len + t) * b.dim));
      b.labels[k * b.max_len + t] = c.utterances[t].label;
      b.valid[k * b.max_len + t] = 1;
    }
    b.lengths.push_back(c.size());
    b.conv_ids.push_back(c.id);
    b.difficulties.push_back(c.difficulty);
    b.conv_indices.push_back(indices[k]);
  }
  return b;
}

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, Rng& rng, bool shuffle) {
  if (batch_size == 0) fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  std::vector<std::size_t> order(ds.conversations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.push_back(make_batch(ds, std::span<const std::size_t>(order).subspan(start, end - start)));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Synthetic data

SynthSpec parse_synth_spec(std::string_view text) {
  SynthSpec spec;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = line;
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = trim(sv);
    if (sv.empty()) continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kParse, "synth spec line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(sv.substr(0, eq)));
    const std::string value(trim(sv.substr(eq + 1)));
    try {
      if (key == "num_conversations") spec.num_conversations = std::stoul(value);
      else if (key == "speakers_per_conv") spec.speakers_per_conv = std::stoul(value);
      else if (key == "len_min") spec.len_min = std::stoul(value);
      else if (key == "len_max") spec.len_max = std::stoul(value);
      else if (key == "num_classes") spec.num_classes = std::stoul(value);
      else if (key == "feature_dim") spec.feature_dim = std::stoul(value);
      else if (key == "class_separation") spec.class_separation = std::stod(value);
      else if (key == "shift_prob") spec.shift_prob = std::stod(value);
      else if (key == "neutral_index") spec.neutral_index = std::stoi(value);
      else fail(ErrorCode::kConfig, "synth spec line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      fail(ErrorCode::kParse, "synth spec line " + std::to_string(line_no) + ": bad value '" + value + "'");
    }
  }
  return spec;
}

SynthSpec load_synth_spec(const std::string& path) { return parse_synth_spec(read_file(path)); }

Dataset synthesize(const SynthSpec& spec, Rng& rng) {
  if (spec.num_conversations == 0 || spec.speakers_per_conv == 0 || spec.len_min == 0 ||
      spec.len_max < spec.len_min || spec.num_classes == 0 || spec.feature_dim == 0) {
    fail(ErrorCode::kConfig, "synth spec: counts must be positive and len_min <= len_max");
  }
  if (!(spec.shift_prob >= 0.0 && spec.shift_prob <= 1.0)) {
    fail(ErrorCode::kConfig, "synth spec: shift_prob must lie in [0, 1]");
  }
  if (!(spec.class_separation >= 0.0)) fail(ErrorCode::kConfig, "synth spec: class_separation must be >= 0");
  if (spec.neutral_index &&
      (*spec.neutral_index < 0 || *spec.neutral_index >= static_cast<int>(spec.num_classes))) {
    fail(ErrorCode::kConfig, "synth spec: neutral_index outside [0, num_classes)");
  }
  const std::size_t k = spec.num_classes, d = spec.feature_dim;
  // Means at radius sep/sqrt(2): orthogonal axes when k <= d (pairwise
  // distance exactly sep), random directions otherwise.
  const double radius = spec.class_separation / std::sqrt(2.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> means(k, std::vector<double>(d, 0.0));
  for (std::size_t c = 0; c < k; ++c) {
    if (k <= d) {
      means[c][c] = radius;
    } else {
      double norm = 0.0;
      for (auto& x : means[c]) {
        x = gauss(rng);
        norm += x * x;
      }
      for (auto& x : means[c]) x *= radius / std::sqrt(norm);
    }
  }

  std::uniform_int_distribution<std::size_t> length_dist(spec.len_min, spec.len_max);
  std::uniform_int_distribution<std::size_t> speaker_dist(0, spec.speakers_per_conv - 1);
  std::uniform_int_distribution<int> label_dist(0, static_cast<int>(k) - 1);
  std::uniform_int_distribution<int> other_dist(0, std::max(0, static_cast<int>(k) - 2));
  std::bernoulli_distribution shift(spec.shift_prob);

  Dataset ds;
  for (std::size_t c = 0; c < k; ++c) ds.label_names.push_back("class" + std::to_string(c));
  ds.neutral_index = spec.neutral_index;
  for (std::size_t i = 0; i < spec.num_conversations; ++i) {
    Conversation conv;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%05zu", i);
    conv.id = id;
    const std::size_t n = length_dist(rng);
    std::vector<int> state(spec.speakers_per_conv, -1);
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t s = speaker_dist(rng);
      int& label = state[s];
      if (label < 0) {
        label = label_dist(rng);
      } else if (k > 1 && shift(rng)) {
        const int other = other_dist(rng);
        label = other >= label ? other + 1 : other;
      }
      Utterance u;
      u.speaker = "s" + std::to_string(s);
      u.label = label;
      u.features.resize(d);
      for (std::size_t j = 0; j < d; ++j) u.features[j] = means[static_cast<std::size_t>(label)][j] + gauss(rng);
      conv.utterances.push_back(std::move(u));
    }
    conv.difficulty = curriculum::difficulty(conv);
    ds.conversations.push_back(std::move(conv));
  }
  return ds;
}

}  // namespace ernetcl::data
