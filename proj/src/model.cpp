// SPDX-License-Identifier: Apache-2.0
#include "model.hpp"

#include "error.hpp"

namespace ernetcl {

namespace {

void add_gru(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             const te::GruDirection& g) {
  out.emplace_back(prefix + ".w_z", g.w_z);
  out.emplace_back(prefix + ".w_r", g.w_r);
  out.emplace_back(prefix + ".w_h", g.w_h);
  out.emplace_back(prefix + ".u_z", g.u_z);
  out.emplace_back(prefix + ".u_r", g.u_r);
  out.emplace_back(prefix + ".u_h", g.u_h);
  out.emplace_back(prefix + ".b_z", g.b_z);
  out.emplace_back(prefix + ".b_r", g.b_r);
  out.emplace_back(prefix + ".b_h", g.b_h);
}

te::GruDirection clone_gru(const te::GruDirection& g) {
  return {g.w_z.clone(), g.w_r.clone(), g.w_h.clone(), g.u_z.clone(), g.u_r.clone(),
          g.u_h.clone(), g.b_z.clone(), g.b_r.clone(), g.b_h.clone()};
}

nn::AffineParams clone_affine(const nn::AffineParams& a) { return {a.weight.clone(), a.bias.clone()}; }

nn::NormParams clone_norm(const nn::NormParams& n) { return {n.gain.clone(), n.bias.clone(), n.eps}; }

}  // namespace

std::vector<std::pair<std::string, Tensor>> ModelParams::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t l = 0; l < te_layers.size(); ++l) {
    const auto& p = te_layers[l];
    const std::string pre = "te." + std::to_string(l);
    add_gru(out, pre + ".gru.fwd", p.gru.forward);
    add_gru(out, pre + ".gru.bwd", p.gru.backward);
    out.emplace_back(pre + ".proj.weight", p.proj.weight);
    out.emplace_back(pre + ".proj.bias", p.proj.bias);
    out.emplace_back(pre + ".norm.gain", p.norm.gain);
    out.emplace_back(pre + ".norm.bias", p.norm.bias);
  }
  for (std::size_t l = 0; l < se_layers.size(); ++l) {
    const auto& p = se_layers[l];
    const std::string pre = "se." + std::to_string(l);
    for (std::size_t h = 0; h < p.mha.heads(); ++h) {
      const std::string head = pre + ".mha.head" + std::to_string(h);
      out.emplace_back(head + ".query", p.mha.query[h]);
      out.emplace_back(head + ".key", p.mha.key[h]);
      out.emplace_back(head + ".value", p.mha.value[h]);
    }
    out.emplace_back(pre + ".mha.out.weight", p.mha.output.weight);
    out.emplace_back(pre + ".mha.out.bias", p.mha.output.bias);
    out.emplace_back(pre + ".norm.gain", p.norm.gain);
    out.emplace_back(pre + ".norm.bias", p.norm.bias);
  }
  out.emplace_back("classifier.weight", classifier.weight);
  out.emplace_back("classifier.bias", classifier.bias);
  return out;
}

std::vector<Tensor> ModelParams::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.size();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& t : parameters()) t.zero_grad();
}

ModelParams ModelParams::clone() const {
  ModelParams out;
  for (const auto& p : te_layers) {
    out.te_layers.push_back({{clone_gru(p.gru.forward), clone_gru(p.gru.backward)},
                             clone_affine(p.proj), clone_norm(p.norm), p.dropout_rate});
  }
  for (const auto& p : se_layers) {
    se::SeLayerParams c;
    for (std::size_t h = 0; h < p.mha.heads(); ++h) {
      c.mha.query.push_back(p.mha.query[h].clone());
      c.mha.key.push_back(p.mha.key[h].clone());
      c.mha.value.push_back(p.mha.value[h].clone());
    }
    c.mha.output = clone_affine(p.mha.output);
    c.norm = clone_norm(p.norm);
    c.dropout_rate = p.dropout_rate;
    out.se_layers.push_back(std::move(c));
  }
  out.classifier = clone_affine(classifier);
  return out;
}

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  validate(cfg, true);
  const std::size_t d = cfg.feature_dim;
  ModelParams p;
  for (std::size_t l = 0; l < cfg.depth_te; ++l) {
    p.te_layers.push_back(te::TeLayerParams::init(d, cfg.dropout, rng));
  }
  for (std::size_t l = 0; l < cfg.depth_se; ++l) {
    p.se_layers.push_back(se::SeLayerParams::init(d, cfg.heads, cfg.dropout, rng));
  }
  p.classifier = nn::AffineParams::init(d, cfg.num_classes, rng);
  return p;
}

Tensor encode(const Tensor& x, std::size_t length, const ModelParams& params, nn::Mode mode,
              Rng& rng) {
  const std::size_t d = params.classifier.in_dim();
  if (x.rank() != 2 || x.dim(1) != d) {
    fail(ErrorCode::kShape, "encode: features " + to_string(x.shape()) + " do not match model dim " +
                                std::to_string(d));
  }
  if (length == 0 || length > x.dim(0)) {
    fail(ErrorCode::kRange, "encode: length " + std::to_string(length) + " invalid for " + to_string(x.shape()));
  }
  const nn::RowMask mask = nn::leading_mask(x.dim(0), length);
  Tensor h = x;
  for (const auto& layer : params.te_layers) h = te::te_layer(h, length, layer, mode, rng);
  for (const auto& layer : params.se_layers) h = se::se_layer(h, mask, layer, mode, rng);
  return nn::mask_rows(h, mask);
}

Tensor forward(const data::Batch& batch, const ModelParams& params, nn::Mode mode, Rng& rng) {
  if (batch.size == 0) fail(ErrorCode::kEmpty, "forward: empty batch");
  if (batch.dim != params.classifier.in_dim()) {
    fail(ErrorCode::kShape, "forward: batch feature dim " + std::to_string(batch.dim) +
                                " does not match model dim " + std::to_string(params.classifier.in_dim()));
  }
  std::vector<Tensor> per_conv;
  per_conv.reserve(batch.size);
  for (std::size_t i = 0; i < batch.size; ++i) {
    const Tensor h = encode(batch.conversation_features(i), batch.lengths[i], params, mode, rng);
    per_conv.push_back(nn::softmax(nn::linear(h, params.classifier), 1));
  }
  const std::size_t k = params.classifier.out_dim();
  Tensor flat = per_conv.size() == 1 ? per_conv.front() : concat(per_conv, 0);
  return reshape(flat, {batch.size, batch.max_len, k});
}

int predict(std::span<const double> probs) {
  if (probs.empty()) fail(ErrorCode::kEmpty, "predict: empty probability vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<int>(best);
}

Tensor standard_loss(const Tensor& probs, std::span<const int> labels, std::span<const std::uint8_t> valid) {
  const std::size_t k = probs.shape().back();
  const std::size_t rows = probs.size() / k;
  if (labels.size() != rows || valid.size() != rows) {
    fail(ErrorCode::kShape, "standard_loss: " + std::to_string(rows) + " prediction rows but " +
                                std::to_string(labels.size()) + " labels / " +
                                std::to_string(valid.size()) + " mask entries");
  }
  std::vector<int> lab(rows, data::kPadLabel);
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!valid[r]) continue;
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k) {
      fail(ErrorCode::kLabel, "standard_loss: label " + std::to_string(labels[r]) + " outside [0," +
                                  std::to_string(k) + ")");
    }
    lab[r] = labels[r];
    ++n;
  }
  const std::vector<double> ones(rows, 1.0);
  return weighted_nll(reshape(probs, {rows, k}), lab, ones, static_cast<double>(n));
}

}  // namespace ernetcl
