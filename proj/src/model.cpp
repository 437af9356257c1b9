// SPDX-License-Identifier: Apache-2.0
#include "chartforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "byteio.hpp"
#include "chartforge/errors.hpp"
#include "chartforge/parallel.hpp"
#include "chartforge/rng.hpp"

namespace chartforge {

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'F', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;
// Samples per gradient accumulator. Fixed so the reduction order, and hence
// every bit of the gradient, does not depend on the worker count.
constexpr std::size_t kGradChunk = 8;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

ParamLayout::ParamLayout(const ModelDims& d) {
  const std::size_t U = d.units, D = d.latent, F = d.features;
  struct Spec {
    const char* name;
    std::size_t rows, cols;
  };
  const Spec specs[] = {
      {"enc.W_f", U, U + F}, {"enc.W_i", U, U + F}, {"enc.W_c", U, U + F}, {"enc.W_o", U, U + F},
      {"enc.b_f", U, 1},     {"enc.b_i", U, 1},     {"enc.b_c", U, 1},     {"enc.b_o", U, 1},
      {"W_z", D, U},         {"b_z", D, 1},
      {"W_e", kEmbedDim, D}, {"b_e", kEmbedDim, 1},
      {"W_dec", D, kEmbedDim}, {"b_dec", D, 1},
      {"dec.W_f", U, U + D}, {"dec.W_i", U, U + D}, {"dec.W_c", U, U + D}, {"dec.W_o", U, U + D},
      {"dec.b_f", U, 1},     {"dec.b_i", U, 1},     {"dec.b_c", U, 1},     {"dec.b_o", U, 1},
      {"W_out", F, U},       {"b_out", F, 1},
  };
  static_assert(std::size(specs) == static_cast<std::size_t>(Block::Count));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    blocks_[k] = {specs[k].name, offset, specs[k].rows, specs[k].cols};
    offset += specs[k].rows * specs[k].cols;
  }
  total_ = offset;
}

std::span<const double> ModelParams::block(Block b) const {
  const BlockInfo& info = ParamLayout(dims)[b];
  return std::span<const double>(values).subspan(info.offset, info.size());
}

std::span<double> ModelParams::block(Block b) {
  const BlockInfo& info = ParamLayout(dims)[b];
  return std::span<double>(values).subspan(info.offset, info.size());
}

Matrix ModelParams::matrix(Block b) const {
  const BlockInfo& info = ParamLayout(dims)[b];
  const auto s = block(b);
  return Matrix(info.rows, info.cols, std::vector<double>(s.begin(), s.end()));
}

void ModelParams::set(Block b, const Matrix& m) {
  const BlockInfo& info = ParamLayout(dims)[b];
  if (m.rows() != info.rows || m.cols() != info.cols) {
    throw ShapeError(std::string("block ") + info.name + " expects " + std::to_string(info.rows) +
                     "x" + std::to_string(info.cols) + ", got " + m.shape_string());
  }
  std::copy(m.data().begin(), m.data().end(), block(b).begin());
}

ModelParams zero_params(const ModelDims& dims) {
  if (dims.units == 0 || dims.latent == 0 || dims.seq_len == 0 || dims.features == 0) {
    throw ConfigError("model dimensions must all be positive");
  }
  return ModelParams{dims, 0, std::vector<double>(ParamLayout(dims).total(), 0.0)};
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  ModelParams p = zero_params(dims);
  p.seed = seed;
  Rng rng(seed);
  const ParamLayout layout(dims);
  for (const BlockInfo& info : layout.blocks()) {
    if (info.cols == 1) continue;  // biases
    const double bound = 1.0 / std::sqrt(static_cast<double>(info.cols));
    for (std::size_t k = 0; k < info.size(); ++k) {
      p.values[info.offset + k] = rng.uniform(-bound, bound);
    }
  }
  for (Block forget : {Block::EncBf, Block::DecBf}) {
    std::ranges::fill(p.block(forget), 1.0);
  }
  return p;
}

// ---------------------------------------------------------------------------

namespace {

LstmWeights lstm_view(const ModelParams& p, Block first_w, Block first_b, std::size_t inputs) {
  const ParamLayout layout(p.dims);
  const std::size_t U = p.dims.units;
  const std::span<const double> all(p.values);
  return {all.subspan(layout[first_w].offset, 4 * U * (U + inputs)),
          all.subspan(layout[first_b].offset, 4 * U), U, inputs};
}

}  // namespace

LstmWeights encoder_lstm(const ModelParams& p) {
  return lstm_view(p, Block::EncWf, Block::EncBf, p.dims.features);
}

LstmWeights decoder_lstm(const ModelParams& p) {
  return lstm_view(p, Block::DecWf, Block::DecBf, p.dims.latent);
}

LstmStep lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                           std::span<const double> c_prev, const LstmWeights& gates) {
  const std::size_t U = gates.units, I = gates.inputs, row = U + I;
  require(x.size() == I && h_prev.size() == U && c_prev.size() == U &&
              gates.w.size() == 4 * U * row && gates.b.size() == 4 * U,
          "lstm_cell_forward: expected x[" + std::to_string(I) + "], h/c[" + std::to_string(U) +
              "], got x[" + std::to_string(x.size()) + "], h[" + std::to_string(h_prev.size()) +
              "], c[" + std::to_string(c_prev.size()) + "]");
  LstmStep s;
  for (auto* v : {&s.f, &s.i, &s.g, &s.o, &s.c, &s.h, &s.tanh_c}) v->resize(U);
  std::vector<double>* gate_out[4] = {&s.f, &s.i, &s.g, &s.o};
  for (std::size_t r = 0; r < 4 * U; ++r) {
    const double* w = gates.w.data() + r * row;
    const double pre = gates.b[r] + dot(w, h_prev.data(), U) + dot(w + U, x.data(), I);
    const std::size_t gate = r / U;
    (*gate_out[gate])[r % U] = gate == 2 ? std::tanh(pre) : sigmoid(pre);
  }
  for (std::size_t u = 0; u < U; ++u) {
    s.c[u] = s.f[u] * c_prev[u] + s.i[u] * s.g[u];
    s.tanh_c[u] = std::tanh(s.c[u]);
    s.h[u] = s.o[u] * s.tanh_c[u];
  }
  return s;
}

void lstm_cell_backward(std::span<const double> x, std::span<const double> h_prev,
                        std::span<const double> c_prev, const LstmStep& step,
                        const LstmWeights& gates, std::vector<double>& dh, std::vector<double>& dc,
                        std::span<double> dw, std::span<double> db, std::span<double> dx) {
  const std::size_t U = gates.units, I = gates.inputs, row = U + I;
  std::vector<double> da(4 * U);
  for (std::size_t u = 0; u < U; ++u) {
    const double tc = step.tanh_c[u];
    const double d_o = dh[u] * tc;
    const double d_c = dc[u] + dh[u] * step.o[u] * (1.0 - tc * tc);
    const double d_f = d_c * c_prev[u];
    const double d_i = d_c * step.g[u];
    const double d_g = d_c * step.i[u];
    da[u] = d_f * step.f[u] * (1.0 - step.f[u]);
    da[U + u] = d_i * step.i[u] * (1.0 - step.i[u]);
    da[2 * U + u] = d_g * (1.0 - step.g[u] * step.g[u]);
    da[3 * U + u] = d_o * step.o[u] * (1.0 - step.o[u]);
    dc[u] = d_c * step.f[u];
  }
  std::fill(dh.begin(), dh.end(), 0.0);
  for (std::size_t r = 0; r < 4 * U; ++r) {
    const double a = da[r];
    const double* w = gates.w.data() + r * row;
    double* g = dw.data() + r * row;
    axpy(a, h_prev.data(), g, U);
    axpy(a, x.data(), g + U, I);
    db[r] += a;
    axpy(a, w, dh.data(), U);
    if (!dx.empty()) axpy(a, w + U, dx.data(), I);
  }
}

// ---------------------------------------------------------------------------

EncoderTrace encode(std::span<const double> sequence, const ModelParams& params) {
  const ModelDims& d = params.dims;
  require(sequence.size() == d.seq_len * d.features,
          "encode: sequence holds " + std::to_string(sequence.size()) + " values, expected " +
              std::to_string(d.seq_len) + "x" + std::to_string(d.features));
  const LstmWeights lstm = encoder_lstm(params);
  EncoderTrace tr;
  tr.steps.reserve(d.seq_len);
  std::vector<double> h(d.units, 0.0), c(d.units, 0.0);
  for (std::size_t t = 0; t < d.seq_len; ++t) {
    tr.steps.push_back(lstm_cell_forward(sequence.subspan(t * d.features, d.features), h, c, lstm));
    h = tr.steps.back().h;
    c = tr.steps.back().c;
  }
  tr.h_enc = h;

  const auto wz = params.block(Block::LatentW);
  const auto bz = params.block(Block::LatentB);
  tr.z.resize(d.latent);
  tr.z_active.resize(d.latent);
  for (std::size_t k = 0; k < d.latent; ++k) {
    tr.z[k] = bz[k] + dot(wz.data() + k * d.units, tr.h_enc.data(), d.units);
    tr.z_active[k] = relu(tr.z[k]);
  }
  const auto we = params.block(Block::EmbedW);
  const auto be = params.block(Block::EmbedB);
  for (std::size_t k = 0; k < kEmbedDim; ++k) {
    tr.e[k] = be[k] + dot(we.data() + k * d.latent, tr.z_active.data(), d.latent);
  }
  return tr;
}

DecoderTrace decode(std::array<double, kEmbedDim> e, const ModelParams& params) {
  const ModelDims& d = params.dims;
  require(params.values.size() == ParamLayout(d).total(), "decode: parameter vector size mismatch");
  DecoderTrace tr;
  const auto wd = params.block(Block::DecInW);
  const auto bd = params.block(Block::DecInB);
  tr.z_dec.resize(d.latent);
  for (std::size_t k = 0; k < d.latent; ++k) {
    tr.z_dec[k] = bd[k] + dot(wd.data() + k * kEmbedDim, e.data(), kEmbedDim);
  }
  const LstmWeights lstm = decoder_lstm(params);
  const auto wo = params.block(Block::OutW);
  const auto bo = params.block(Block::OutB);
  tr.steps.reserve(d.seq_len);
  tr.x_hat.resize(d.seq_len * d.features);
  std::vector<double> h(d.units, 0.0), c(d.units, 0.0);
  for (std::size_t t = 0; t < d.seq_len; ++t) {
    tr.steps.push_back(lstm_cell_forward(tr.z_dec, h, c, lstm));
    h = tr.steps.back().h;
    c = tr.steps.back().c;
    double* out = tr.x_hat.data() + t * d.features;
    for (std::size_t f = 0; f < d.features; ++f) {
      out[f] = bo[f] + dot(wo.data() + f * d.units, h.data(), d.units);
    }
  }
  return tr;
}

namespace {

void check_batch(const SequenceBatch& batch, const ModelParams& params) {
  require(batch.seq_len == params.dims.seq_len && batch.features == params.dims.features,
          "batch windows are " + std::to_string(batch.seq_len) + "x" +
              std::to_string(batch.features) + " but the model expects " +
              std::to_string(params.dims.seq_len) + "x" + std::to_string(params.dims.features));
  require(batch.inputs.size() == batch.batch * batch.seq_len * batch.features,
          "batch input buffer has the wrong length");
  require(params.values.size() == ParamLayout(params.dims).total(),
          "parameter vector size mismatch");
}

}  // namespace

ForwardResult forward(const SequenceBatch& batch, const ModelParams& params) {
  check_batch(batch, params);
  const ModelDims& d = params.dims;
  ForwardResult out;
  out.traces.resize(batch.batch);
  parallel_for(batch.batch, [&](std::size_t b) {
    SampleTrace& tr = out.traces[b];
    tr.enc = encode(batch.sequence(b), params);
    tr.dec = decode(tr.enc.e, params);
  });
  out.embeddings = Matrix(batch.batch, kEmbedDim);
  out.reconstruction.resize(batch.batch * d.seq_len * d.features);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    for (std::size_t k = 0; k < kEmbedDim; ++k) out.embeddings(b, k) = out.traces[b].enc.e[k];
    std::ranges::copy(out.traces[b].dec.x_hat,
                      out.reconstruction.begin() +
                          static_cast<std::ptrdiff_t>(b * d.seq_len * d.features));
  }
  return out;
}

Matrix embed(const SequenceBatch& batch, const ModelParams& params) {
  check_batch(batch, params);
  Matrix out(batch.batch, kEmbedDim);
  parallel_for(batch.batch, [&](std::size_t b) {
    const EncoderTrace tr = encode(batch.sequence(b), params);
    out(b, 0) = tr.e[0];
    out(b, 1) = tr.e[1];
  });
  return out;
}

namespace {

// Adds one sample's parameter gradient into `grad`.
void backward_sample(const ModelParams& params, const ParamLayout& layout,
                     std::span<const double> sequence, const SampleTrace& tr,
                     std::array<double, kEmbedDim> d_e, std::span<const double> d_xhat,
                     std::span<double> grad) {
  const ModelDims& d = params.dims;
  const std::size_t U = d.units, D = d.latent, F = d.features, L = d.seq_len;
  auto g = [&](Block b) { return grad.subspan(layout[b].offset, layout[b].size()); };
  const std::vector<double> zeros(U, 0.0);

  // Time-distributed output layer.
  const auto wo = params.block(Block::OutW);
  auto g_wo = g(Block::OutW);
  auto g_bo = g(Block::OutB);
  std::vector<std::vector<double>> dh_out(L, std::vector<double>(U, 0.0));
  for (std::size_t t = 0; t < L; ++t) {
    const double* dx = d_xhat.data() + t * F;
    const std::vector<double>& h = tr.dec.steps[t].h;
    for (std::size_t f = 0; f < F; ++f) {
      const double a = dx[f];
      axpy(a, h.data(), g_wo.data() + f * U, U);
      g_bo[f] += a;
      axpy(a, wo.data() + f * U, dh_out[t].data(), U);
    }
  }

  // Decoder LSTM; every step consumed the same z_dec.
  const LstmWeights dec = decoder_lstm(params);
  auto g_dec_w = grad.subspan(layout[Block::DecWf].offset, 4 * U * (U + D));
  auto g_dec_b = grad.subspan(layout[Block::DecBf].offset, 4 * U);
  std::vector<double> dh(U, 0.0), dc(U, 0.0), dz_dec(D, 0.0);
  for (std::size_t t = L; t-- > 0;) {
    for (std::size_t u = 0; u < U; ++u) dh[u] += dh_out[t][u];
    const auto& h_prev = t > 0 ? tr.dec.steps[t - 1].h : zeros;
    const auto& c_prev = t > 0 ? tr.dec.steps[t - 1].c : zeros;
    lstm_cell_backward(tr.dec.z_dec, h_prev, c_prev, tr.dec.steps[t], dec, dh, dc, g_dec_w,
                       g_dec_b, dz_dec);
  }

  // Decoder input layer: z_dec = W_dec e + b_dec.
  const auto wd = params.block(Block::DecInW);
  auto g_wd = g(Block::DecInW);
  auto g_bd = g(Block::DecInB);
  for (std::size_t k = 0; k < D; ++k) {
    axpy(dz_dec[k], tr.enc.e.data(), g_wd.data() + k * kEmbedDim, kEmbedDim);
    g_bd[k] += dz_dec[k];
    axpy(dz_dec[k], wd.data() + k * kEmbedDim, d_e.data(), kEmbedDim);
  }

  // Embedding head and latent ReLU layer.
  const auto we = params.block(Block::EmbedW);
  auto g_we = g(Block::EmbedW);
  auto g_be = g(Block::EmbedB);
  std::vector<double> dz(D, 0.0);
  for (std::size_t k = 0; k < kEmbedDim; ++k) {
    axpy(d_e[k], tr.enc.z_active.data(), g_we.data() + k * D, D);
    g_be[k] += d_e[k];
    axpy(d_e[k], we.data() + k * D, dz.data(), D);
  }
  for (std::size_t k = 0; k < D; ++k) {
    if (!(tr.enc.z[k] > 0.0)) dz[k] = 0.0;
  }
  const auto wz = params.block(Block::LatentW);
  auto g_wz = g(Block::LatentW);
  auto g_bz = g(Block::LatentB);
  std::fill(dh.begin(), dh.end(), 0.0);
  for (std::size_t k = 0; k < D; ++k) {
    axpy(dz[k], tr.enc.h_enc.data(), g_wz.data() + k * U, U);
    g_bz[k] += dz[k];
    axpy(dz[k], wz.data() + k * U, dh.data(), U);
  }

  // Encoder LSTM; only the final hidden state feeds forward.
  const LstmWeights enc = encoder_lstm(params);
  auto g_enc_w = grad.subspan(layout[Block::EncWf].offset, 4 * U * (U + F));
  auto g_enc_b = grad.subspan(layout[Block::EncBf].offset, 4 * U);
  std::fill(dc.begin(), dc.end(), 0.0);
  for (std::size_t t = L; t-- > 0;) {
    const auto& h_prev = t > 0 ? tr.enc.steps[t - 1].h : zeros;
    const auto& c_prev = t > 0 ? tr.enc.steps[t - 1].c : zeros;
    lstm_cell_backward(sequence.subspan(t * F, F), h_prev, c_prev, tr.enc.steps[t], enc, dh, dc,
                       g_enc_w, g_enc_b, {});
  }
}

}  // namespace

std::vector<double> backward(const SequenceBatch& batch, const ModelParams& params,
                             const ForwardResult& fwd, const Matrix& d_embed,
                             std::span<const double> d_recon) {
  check_batch(batch, params);
  const ModelDims& d = params.dims;
  const std::size_t per_sample = d.seq_len * d.features;
  if (fwd.traces.size() != batch.batch) {
    throw ContractError("backward: trace count " + std::to_string(fwd.traces.size()) +
                        " does not match batch size " + std::to_string(batch.batch));
  }
  for (const SampleTrace& tr : fwd.traces) {
    if (tr.enc.steps.size() != d.seq_len || tr.dec.steps.size() != d.seq_len ||
        tr.enc.z.size() != d.latent || tr.dec.x_hat.size() != per_sample) {
      throw ContractError("backward: traces were produced with different model dims");
    }
  }
  require(d_embed.rows() == batch.batch && d_embed.cols() == kEmbedDim,
          "backward: dL/dE must be " + std::to_string(batch.batch) + "x2, got " +
              d_embed.shape_string());
  require(d_recon.size() == batch.batch * per_sample, "backward: dL/dX^ has the wrong length");

  const ParamLayout layout(d);
  const std::size_t chunks = (batch.batch + kGradChunk - 1) / kGradChunk;
  std::vector<std::vector<double>> partial(chunks);
  parallel_for(chunks, [&](std::size_t ch) {
    std::vector<double>& acc = partial[ch];
    acc.assign(layout.total(), 0.0);
    const std::size_t end = std::min(batch.batch, (ch + 1) * kGradChunk);
    for (std::size_t b = ch * kGradChunk; b < end; ++b) {
      backward_sample(params, layout, batch.sequence(b), fwd.traces[b],
                      {d_embed(b, 0), d_embed(b, 1)}, d_recon.subspan(b * per_sample, per_sample),
                      acc);
    }
  });
  if (chunks == 0) return std::vector<double>(layout.total(), 0.0);
  std::vector<double> grad = std::move(partial[0]);
  for (std::size_t ch = 1; ch < chunks; ++ch) {
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += partial[ch][k];
  }
  return grad;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  if (params.values.size() != ParamLayout(params.dims).total()) {
    throw ShapeError("checkpoint: parameter vector does not match dims");
  }
  std::vector<unsigned char> out;
  out.reserve(64 + params.values.size() * 8);
  out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  for (const std::size_t v : {params.dims.units, params.dims.latent, params.dims.seq_len,
                              params.dims.features}) {
    detail::put<std::uint64_t>(out, v);
  }
  detail::put<std::uint64_t>(out, params.seed);
  detail::put<std::uint64_t>(out, params.values.size());
  for (const double v : params.values) detail::put<double>(out, v);
  detail::write_file_atomic(path, out);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  detail::Reader r(detail::read_file(path));
  if (r.remaining() < 4 || std::memcmp(r.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("bad magic, expected CFCK", 0);
  }
  r.get<std::uint32_t>("magic");
  const std::size_t version_at = r.offset();
  if (const auto v = r.get<std::uint32_t>("version"); v != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(v), version_at);
  }
  ModelParams p;
  const std::size_t dims_at = r.offset();
  p.dims.units = r.get<std::uint64_t>("units");
  p.dims.latent = r.get<std::uint64_t>("latent");
  p.dims.seq_len = r.get<std::uint64_t>("seq_len");
  p.dims.features = r.get<std::uint64_t>("features");
  p.seed = r.get<std::uint64_t>("seed");
  const std::size_t count_at = r.offset();
  const auto count = r.get<std::uint64_t>("parameter count");
  if (p.dims.units == 0 || p.dims.latent == 0 || p.dims.seq_len == 0 || p.dims.features == 0 ||
      p.dims.units > (1u << 20) || p.dims.latent > (1u << 20) || p.dims.features > (1u << 26)) {
    throw FormatError("implausible model dims", dims_at);
  }
  if (count != ParamLayout(p.dims).total()) {
    throw FormatError("parameter count " + std::to_string(count) + " does not match dims",
                      count_at);
  }
  if (r.remaining() != count * 8) {
    throw FormatError("parameter payload holds " + std::to_string(r.remaining()) +
                          " bytes, expected " + std::to_string(count * 8),
                      r.offset());
  }
  p.values.resize(count);
  for (double& v : p.values) v = r.get_finite("parameters");
  return p;
}

}  // namespace chartforge
