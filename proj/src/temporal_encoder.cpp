// SPDX-License-Identifier: Apache-2.0
#include "temporal_encoder.hpp"

#include <vector>

#include "error.hpp"

namespace ernetcl::te {

namespace {

// Input-side projections for every time step, computed once per sequence.
struct InputGates {
  Tensor z, r, h;  // [L x hidden]
};

// Recurrent weights transposed once per sequence.
struct RecurrentT {
  Tensor u_z, u_r, u_h;  // [hidden x hidden]
};

InputGates project_inputs(const Tensor& seq, const GruDirection& p) {
  return {add(matmul(seq, transpose(p.w_z)), p.b_z),
          add(matmul(seq, transpose(p.w_r)), p.b_r),
          add(matmul(seq, transpose(p.w_h)), p.b_h)};
}

RecurrentT transpose_recurrent(const GruDirection& p) {
  return {transpose(p.u_z), transpose(p.u_r), transpose(p.u_h)};
}

Tensor step(const InputGates& in, std::size_t t, const RecurrentT& u, const Tensor& h_prev) {
  const Tensor z = sigmoid(add(slice(in.z, t, t + 1, 0), matmul(h_prev, u.u_z)));
  const Tensor r = sigmoid(add(slice(in.r, t, t + 1, 0), matmul(h_prev, u.u_r)));
  const Tensor c = tanh(add(slice(in.h, t, t + 1, 0), matmul(mul(r, h_prev), u.u_h)));
  // (1 - z) * h + z * c, written as h + z * (c - h)
  return add(h_prev, mul(z, sub(c, h_prev)));
}

void check_direction(const GruDirection& p) {
  const std::size_t h = p.hidden_dim(), d = p.input_dim();
  const Shape wx{h, d}, wh{h, h}, b{h};
  const bool ok = p.w_r.shape() == wx && p.w_h.shape() == wx && p.u_z.shape() == wh &&
                  p.u_r.shape() == wh && p.u_h.shape() == wh && p.b_z.shape() == b &&
                  p.b_r.shape() == b && p.b_h.shape() == b;
  if (!ok) fail(ErrorCode::kShape, "GRU parameters have inconsistent shapes");
}

}  // namespace

GruDirection GruDirection::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  GruDirection p;
  p.w_z = alloc({hidden_dim, input_dim}, Init::scaled_uniform(input_dim), rng);
  p.w_r = alloc({hidden_dim, input_dim}, Init::scaled_uniform(input_dim), rng);
  p.w_h = alloc({hidden_dim, input_dim}, Init::scaled_uniform(input_dim), rng);
  p.u_z = alloc({hidden_dim, hidden_dim}, Init::scaled_uniform(hidden_dim), rng);
  p.u_r = alloc({hidden_dim, hidden_dim}, Init::scaled_uniform(hidden_dim), rng);
  p.u_h = alloc({hidden_dim, hidden_dim}, Init::scaled_uniform(hidden_dim), rng);
  p.b_z = alloc({hidden_dim}, Init::zeros(), rng);
  p.b_r = alloc({hidden_dim}, Init::zeros(), rng);
  p.b_h = alloc({hidden_dim}, Init::zeros(), rng);
  return p;
}

TeLayerParams TeLayerParams::init(std::size_t dim, double dropout_rate, Rng& rng) {
  TeLayerParams p;
  p.gru.forward = GruDirection::init(dim, dim, rng);
  p.gru.backward = GruDirection::init(dim, dim, rng);
  p.proj = nn::AffineParams::init(2 * dim, dim, rng);
  p.norm = nn::NormParams::init(dim);
  p.dropout_rate = dropout_rate;
  return p;
}

Tensor gru_cell(const Tensor& x_t, const Tensor& h_prev, const GruDirection& p) {
  check_direction(p);
  if (x_t.shape() != Shape{1, p.input_dim()} || h_prev.shape() != Shape{1, p.hidden_dim()}) {
    fail(ErrorCode::kShape, "gru_cell: input " + to_string(x_t.shape()) + " / state " +
                                to_string(h_prev.shape()) + " do not match parameters");
  }
  return step(project_inputs(x_t, p), 0, transpose_recurrent(p), h_prev);
}

Tensor bigru(const Tensor& seq, std::size_t length, const GruParams& p) {
  check_direction(p.forward);
  check_direction(p.backward);
  if (seq.rank() != 2 || seq.dim(1) != p.forward.input_dim() ||
      p.backward.input_dim() != p.forward.input_dim()) {
    fail(ErrorCode::kShape, "bigru: sequence " + to_string(seq.shape()) +
                                " does not match input dim " + std::to_string(p.forward.input_dim()));
  }
  if (length == 0) fail(ErrorCode::kEmpty, "bigru: empty sequence");
  const std::size_t rows = seq.dim(0);
  if (length > rows) {
    fail(ErrorCode::kRange, "bigru: length " + std::to_string(length) + " exceeds " + std::to_string(rows) + " rows");
  }
  const Tensor valid = length == rows ? seq : slice(seq, 0, length, 0);

  auto run = [&](const GruDirection& dir, bool reverse) {
    const InputGates in = project_inputs(valid, dir);
    const RecurrentT u = transpose_recurrent(dir);
    std::vector<Tensor> states(length);
    Tensor h = Tensor::zeros({1, dir.hidden_dim()});
    for (std::size_t i = 0; i < length; ++i) {
      const std::size_t t = reverse ? length - 1 - i : i;
      h = step(in, t, u, h);
      states[t] = h;
    }
    return concat(states, 0);
  };

  Tensor out = concat(run(p.forward, false), run(p.backward, true), 1);
  if (length < rows) {
    out = concat(out, Tensor::zeros({rows - length, out.dim(1)}), 0);
  }
  return out;
}

Tensor te_layer(const Tensor& x, std::size_t length, const TeLayerParams& p, nn::Mode mode,
                Rng& rng) {
  const Tensor g = bigru(x, length, p.gru);
  const Tensor f = nn::dropout(nn::linear(g, p.proj), p.dropout_rate, mode, rng);
  const Tensor y = nn::layer_norm(add(x, f), p.norm);
  return nn::mask_rows(y, nn::leading_mask(x.dim(0), length));
}

}  // namespace ernetcl::te
