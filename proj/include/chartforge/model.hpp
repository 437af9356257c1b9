// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "chartforge/dataset.hpp"
#include "chartforge/matrix.hpp"

namespace chartforge {

inline constexpr std::size_t kEmbedDim = 2;

/// U (LSTM width), D (latent width), L (sequence length), F (CSI features).
struct ModelDims {
  std::size_t units = 64;
  std::size_t latent = 32;
  std::size_t seq_len = kDefaultSeqLen;
  std::size_t features = 0;
  bool operator==(const ModelDims&) const = default;
};

/// Parameter blocks in flat-vector order. Gate blocks of one LSTM are laid out
/// f, i, c, o consecutively, so each LSTM's weights also read as a single
/// stacked (4U x (U + input)) matrix followed by a stacked 4U bias.
enum class Block : std::size_t {
  EncWf, EncWi, EncWc, EncWo,
  EncBf, EncBi, EncBc, EncBo,
  LatentW, LatentB,
  EmbedW, EmbedB,
  DecInW, DecInB,
  DecWf, DecWi, DecWc, DecWo,
  DecBf, DecBi, DecBc, DecBo,
  OutW, OutB,
  Count
};

struct BlockInfo {
  const char* name;
  std::size_t offset;
  std::size_t rows;
  std::size_t cols;
  std::size_t size() const { return rows * cols; }
};

/// Offsets of every block for the given dims.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelDims& dims);
  const BlockInfo& operator[](Block b) const { return blocks_[static_cast<std::size_t>(b)]; }
  std::span<const BlockInfo> blocks() const { return blocks_; }
  std::size_t total() const { return total_; }

 private:
  std::array<BlockInfo, static_cast<std::size_t>(Block::Count)> blocks_{};
  std::size_t total_ = 0;
};

/// All weights and biases as one flat vector (see Block for the ordering).
struct ModelParams {
  ModelDims dims;
  std::uint64_t seed = 0;
  std::vector<double> values;

  std::span<const double> block(Block b) const;
  std::span<double> block(Block b);
  /// Copy of a block as a matrix (biases come out as n x 1).
  Matrix matrix(Block b) const;
  void set(Block b, const Matrix& m);

  bool operator==(const ModelParams&) const = default;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, forget-gate biases 1,
/// other biases 0.
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);
/// All-zero parameters.
ModelParams zero_params(const ModelDims& dims);

// ---------------------------------------------------------------------------
// LSTM cell

/// View of one LSTM: stacked gate weights (4U x (U + inputs), rows ordered
/// f, i, c, o; columns ordered [h_prev ; x]) and stacked biases (4U).
struct LstmWeights {
  std::span<const double> w;
  std::span<const double> b;
  std::size_t units = 0;
  std::size_t inputs = 0;
};

LstmWeights encoder_lstm(const ModelParams& p);
LstmWeights decoder_lstm(const ModelParams& p);

/// Activations of one time step.
struct LstmStep {
  std::vector<double> f, i, g, o;  // gates; g is the candidate cell c~
  std::vector<double> c, h;
  std::vector<double> tanh_c;
};

LstmStep lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                           std::span<const double> c_prev, const LstmWeights& gates);

/// Backward through one step. Accumulates into the stacked weight/bias
/// gradient spans, returns dh_prev and dc_prev in place of dh/dc, and adds
/// the input gradient to dx when dx is non-empty.
void lstm_cell_backward(std::span<const double> x, std::span<const double> h_prev,
                        std::span<const double> c_prev, const LstmStep& step,
                        const LstmWeights& gates, std::vector<double>& dh, std::vector<double>& dc,
                        std::span<double> dw, std::span<double> db, std::span<double> dx);

// ---------------------------------------------------------------------------
// Encoder / decoder

struct EncoderTrace {
  std::vector<LstmStep> steps;
  std::vector<double> h_enc;  // U
  std::vector<double> z;      // D, pre-activation
  std::vector<double> z_active;
  std::array<double, kEmbedDim> e{};
};

struct DecoderTrace {
  std::vector<double> z_dec;  // D, repeated over all L steps
  std::vector<LstmStep> steps;
  std::vector<double> x_hat;  // L x F
};

/// Rolls the encoder LSTM over a length-L sequence (L x F, row-major) from a
/// zero state, then the latent ReLU layer and the 2-D embedding head.
EncoderTrace encode(std::span<const double> sequence, const ModelParams& params);

/// Expands a 2-D embedding to the latent width, feeds it to the decoder LSTM
/// at each of the L steps, and maps every hidden state back to F features.
DecoderTrace decode(std::array<double, kEmbedDim> e, const ModelParams& params);

struct SampleTrace {
  EncoderTrace enc;
  DecoderTrace dec;
};

struct ForwardResult {
  Matrix embeddings;                    // B x 2
  std::vector<double> reconstruction;   // B x L x F
  std::vector<SampleTrace> traces;
};

ForwardResult forward(const SequenceBatch& batch, const ModelParams& params);

/// Embeddings only (no decoder), for evaluation.
Matrix embed(const SequenceBatch& batch, const ModelParams& params);

/// Gradient over the flat parameter vector given dL/dE (B x 2) and dL/dX^
/// (B x L x F).
std::vector<double> backward(const SequenceBatch& batch, const ModelParams& params,
                             const ForwardResult& fwd, const Matrix& d_embed,
                             std::span<const double> d_recon);

// ---------------------------------------------------------------------------
// Checkpoints

/// "CFCK" magic, u32 version, u64 U, D, L, F, u64 seed, u64 parameter count,
/// then the flat parameters as little-endian f64. Written to a temporary file
/// and renamed into place.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace chartforge
