// SPDX-License-Identifier: Apache-2.0
#include "checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "error.hpp"

namespace ernetcl {

namespace {

constexpr std::string_view kMagic = "ernetcl-checkpoint";
constexpr std::string_view kEndConfig = "end-config";

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(v & 0xffu)));
    v = static_cast<U>(v >> 8);
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U get_le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string get_line() {
    const auto nl = bytes_.find('\n', pos_);
    if (nl == std::string::npos) fail(ErrorCode::kFormat, "checkpoint: truncated header");
    std::string s = bytes_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::kFormat, "checkpoint: truncated parameter block");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out += std::string(kMagic) + " " + std::to_string(kCheckpointVersion) + "\n";
  out += format_config(ckpt.config);
  out += std::string(kEndConfig) + "\n";
  const auto named = ckpt.params.named_parameters();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_le<std::uint64_t>(out, e);
    for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  const std::string magic = in.get_line();
  const std::string expected = std::string(kMagic) + " " + std::to_string(kCheckpointVersion);
  if (magic.rfind(kMagic, 0) != 0) fail(ErrorCode::kFormat, "not a checkpoint file");
  if (magic != expected) fail(ErrorCode::kFormat, "unsupported checkpoint version: " + magic);
  std::string config_text;
  for (std::string line = in.get_line(); line != kEndConfig; line = in.get_line()) {
    config_text += line + "\n";
  }
  Checkpoint ckpt;
  ckpt.config = parse_config(config_text);
  Rng scratch(0);
  ckpt.params = init_params(ckpt.config, scratch);

  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : ckpt.params.named_parameters()) by_name.emplace(name, t);
  const auto count = in.get_le<std::uint32_t>();
  if (count != by_name.size()) {
    fail(ErrorCode::kFormat, "checkpoint holds " + std::to_string(count) + " tensors, config implies " +
                                 std::to_string(by_name.size()));
  }
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto name = in.get_bytes(in.get_le<std::uint32_t>());
    const auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorCode::kFormat, "checkpoint: unexpected tensor '" + name + "'");
    Shape shape(in.get_le<std::uint32_t>());
    for (auto& e : shape) e = static_cast<std::size_t>(in.get_le<std::uint64_t>());
    Tensor& t = it->second;
    if (shape != t.shape()) {
      fail(ErrorCode::kFormat, "checkpoint: tensor '" + name + "' has shape " + to_string(shape) +
                                   ", expected " + to_string(t.shape()));
    }
    auto dst = t.mutable_values();
    for (auto& v : dst) v = std::bit_cast<double>(in.get_le<std::uint64_t>());
    by_name.erase(it);
  }
  if (!in.at_end()) fail(ErrorCode::kFormat, "checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write checkpoint " + path);
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace ernetcl
