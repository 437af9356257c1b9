// SPDX-License-Identifier: Apache-2.0
#include "chartforge/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "chartforge/errors.hpp"
#include "chartforge/rng.hpp"

namespace chartforge {

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kShuffleStream = 0x5000;

}  // namespace

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2 (topology loss needs pairs)");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw ConfigError("lr factor must lie in (0, 1)");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (!(min_lr > 0.0)) throw ConfigError("min_lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  if (units == 0 || latent == 0) throw ConfigError("model widths must be positive");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamHyper& hyper) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!std::isfinite(grads[k])) {
      throw NumericError("non-finite gradient at coordinate " + std::to_string(k) +
                         " on optimizer step " + std::to_string(state.t + 1));
    }
  }
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state does not match the parameter count");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    state.m[k] = hyper.beta1 * state.m[k] + (1.0 - hyper.beta1) * g;
    state.v[k] = hyper.beta2 * state.v[k] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    params[k] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

// ---------------------------------------------------------------------------

PlateauScheduler::PlateauScheduler(double lr, double factor, std::size_t patience, double min_lr,
                                   double rel_tol)
    : lr_(lr), factor_(factor), patience_(patience), min_lr_(min_lr), rel_tol_(rel_tol) {
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("plateau factor must lie in (0, 1)");
  if (patience == 0) throw ConfigError("plateau patience must be at least 1");
}

double PlateauScheduler::step(double val_loss) {
  if (val_loss < best_ * (1.0 - rel_tol_)) {
    best_ = val_loss;
    wait_ = 0;
    return lr_;
  }
  if (++wait_ >= patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    wait_ = 0;
  }
  return lr_;
}

double reduce_lr_on_plateau(std::span<const double> val_losses, double lr, double factor,
                            std::size_t patience, double min_lr, double rel_tol) {
  PlateauScheduler s(lr, factor, patience, min_lr, rel_tol);
  for (const double v : val_losses) s.step(v);
  return s.lr();
}

// ---------------------------------------------------------------------------

namespace {

struct Accumulator {
  double recon = 0.0, topo = 0.0;
  double weight = 0.0;

  void add(const LossBreakdown& part, double w) {
    recon += w * part.recon;
    topo += w * part.topo;
    weight += w;
  }
  LossBreakdown mean(double alpha) const {
    LossBreakdown out;
    out.alpha = alpha;
    if (weight > 0.0) {
      out.recon = recon / weight;
      out.topo = topo / weight;
    }
    out.total = out.recon + alpha * out.topo;
    return out;
  }
};

}  // namespace

LossBreakdown evaluate_loss(const ModelParams& params, const Matrix& flat,
                            std::span<const Window> windows, std::size_t batch_size, double alpha) {
  if (windows.empty()) throw ConfigError("evaluate_loss: no windows");
  batch_size = std::max<std::size_t>(batch_size, 2);
  Accumulator acc;
  std::size_t start = 0;
  while (start < windows.size()) {
    std::size_t end = std::min(windows.size(), start + batch_size);
    if (windows.size() - end == 1) ++end;
    const SequenceBatch batch = gather_batch(flat, windows.subspan(start, end - start),
                                             params.dims.seq_len);
    const ForwardResult fwd = forward(batch, params);
    LossBreakdown part;
    part.recon = reconstruction_loss(batch.targets_csi(), fwd.reconstruction).value;
    part.topo = batch.batch >= 2 ? topology_loss(batch.positions, fwd.embeddings).value : 0.0;
    acc.add(part, static_cast<double>(batch.batch));
    start = end;
  }
  return acc.mean(alpha);
}

TrainResult train(const Matrix& flat, std::size_t seq_len, std::span<const Window> train_set,
                  std::span<const Window> val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (val_set.empty()) throw ConfigError("validation set is empty");

  const ModelDims dims{config.units, config.latent, seq_len, flat.cols()};
  TrainResult result;
  result.params = init_params(dims, derive_seed(config.seed, kInitStream));
  result.params.seed = config.seed;
  ModelParams current = result.params;

  AdamState adam;
  const AdamHyper hyper{config.beta1, config.beta2, config.epsilon};
  PlateauScheduler scheduler(config.lr0, config.lr_factor, config.patience, config.min_lr,
                             config.plateau_rel_tol);
  std::vector<Window> order(train_set.begin(), train_set.end());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = scheduler.lr();
    Rng rng(derive_seed(config.seed, kShuffleStream + epoch));
    rng.shuffle(std::span<Window>(order));

    Accumulator acc;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      if (count < 2) break;
      const SequenceBatch batch =
          gather_batch(flat, std::span<const Window>(order).subspan(start, count), seq_len);
      const ForwardResult fwd = forward(batch, current);
      const TotalLoss loss = total_loss(batch.targets_csi(), fwd.reconstruction, batch.positions,
                                        fwd.embeddings, config.alpha);
      if (!std::isfinite(loss.parts.total)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + " (first window ends at row " +
                           std::to_string(batch.source_indices.front()) + ")");
      }
      const std::vector<double> grad = backward(batch, current, fwd, loss.d_embed, loss.d_recon);
      try {
        adam_step(current.values, grad, adam, lr, hyper);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index) + ")");
      }
      acc.add(loss.parts, static_cast<double>(count));
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train = acc.mean(config.alpha);
    record.val = evaluate_loss(current, flat, val_set, config.batch_size, config.alpha);
    record.lr = lr;
    if (!std::isfinite(record.val.total)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    if (record.val.total < result.history.best_val) {
      result.history.best_val = record.val.total;
      result.history.best_epoch = epoch;
      result.params.values = current.values;
    }
    scheduler.step(record.val.total);
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_recon,train_topo,train_total,val_recon,val_topo,val_total,lr\n";
  char line[256];
  for (const EpochRecord& r : history.epochs) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  r.train.recon, r.train.topo, r.train.total, r.val.recon, r.val.topo, r.val.total,
                  r.lr);
    out << line;
  }
}

}  // namespace chartforge
