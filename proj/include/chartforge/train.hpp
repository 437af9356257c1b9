// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "chartforge/dataset.hpp"
#include "chartforge/loss.hpp"
#include "chartforge/model.hpp"

namespace chartforge {

struct TrainConfig {
  double lr0 = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 150;
  double alpha = kDefaultAlpha;
  double lr_factor = 0.5;
  std::size_t patience = 5;
  double min_lr = 1e-6;
  /// An epoch improves when val < best * (1 - plateau_rel_tol).
  double plateau_rel_tol = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t units = 64;
  std::size_t latent = 32;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update. Lazily sizes a fresh state. Throws
/// NumericError (naming the step and coordinate) on a non-finite gradient,
/// leaving params and state untouched.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamHyper& hyper = {});

// ---------------------------------------------------------------------------
// ReduceLROnPlateau

class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, std::size_t patience, double min_lr,
                   double rel_tol = 1e-4);

  /// Records one epoch's validation loss; returns the learning rate for the
  /// next epoch.
  double step(double val_loss);

  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t stagnant_epochs() const { return wait_; }

 private:
  double lr_;
  double factor_;
  std::size_t patience_;
  double min_lr_;
  double rel_tol_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t wait_ = 0;
};

/// Replays a validation-loss history from `lr` and returns the resulting rate.
double reduce_lr_on_plateau(std::span<const double> val_losses, double lr, double factor,
                            std::size_t patience, double min_lr, double rel_tol = 1e-4);

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown train;
  LossBreakdown val;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
};

struct TrainResult {
  ModelParams params;  // best-validation parameters
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on recon + alpha * topo with plateau scheduling and
/// best-validation checkpointing.
TrainResult train(const Matrix& flat, std::size_t seq_len, std::span<const Window> train_set,
                  std::span<const Window> val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Sample-weighted mean loss over consecutive chunks of `batch_size` windows
/// (a trailing single window joins the previous chunk).
LossBreakdown evaluate_loss(const ModelParams& params, const Matrix& flat,
                            std::span<const Window> windows, std::size_t batch_size, double alpha);

/// epoch,train_recon,train_topo,train_total,val_recon,val_topo,val_total,lr
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace chartforge
