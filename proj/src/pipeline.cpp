// SPDX-License-Identifier: Apache-2.0
#include "chartforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "chartforge/baseline.hpp"
#include "chartforge/errors.hpp"
#include "chartforge/model.hpp"
#include "chartforge/report.hpp"
#include "chartforge/rng.hpp"

namespace chartforge {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kSplitStream = 0x5917;
constexpr std::uint64_t kSubsampleStream = 0x5b5a;
constexpr std::size_t kEmbedChunk = 256;

Json vec2_json(Vec2 v) { return Json::array({v.x, v.y}); }

Json config_json(const TrainConfig& c) {
  Json j;
  j["lr0"] = c.lr0;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["alpha"] = c.alpha;
  j["lr_factor"] = c.lr_factor;
  j["patience"] = c.patience;
  j["min_lr"] = c.min_lr;
  j["plateau_rel_tol"] = c.plateau_rel_tol;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["units"] = c.units;
  j["latent"] = c.latent;
  j["seed"] = c.seed;
  return j;
}

TrainConfig config_from_json(const Json& j) {
  TrainConfig c;
  c.lr0 = j.at("lr0").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.lr_factor = j.at("lr_factor").get<double>();
  c.patience = j.at("patience").get<std::size_t>();
  c.min_lr = j.at("min_lr").get<double>();
  c.plateau_rel_tol = j.at("plateau_rel_tol").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.units = j.at("units").get<std::size_t>();
  c.latent = j.at("latent").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Json manifest(const std::string& command, Json config, const std::vector<fs::path>& artifacts) {
  Json j;
  j["tool"] = "chartforge";
  j["version"] = tool_version();
  j["command"] = command;
  j["config"] = std::move(config);
  Json list = Json::array();
  for (const auto& p : artifacts) list.push_back(p.string());
  j["artifacts"] = std::move(list);
  return j;
}

Matrix window_positions(std::span<const Window> windows) {
  Matrix p(windows.size(), 2);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    p(i, 0) = windows[i].position.x;
    p(i, 1) = windows[i].position.y;
  }
  return p;
}

Matrix embed_windows(const ModelParams& params, const Matrix& flat,
                     std::span<const Window> windows) {
  Matrix out(windows.size(), kEmbedDim);
  for (std::size_t start = 0; start < windows.size(); start += kEmbedChunk) {
    const std::size_t count = std::min(kEmbedChunk, windows.size() - start);
    const Matrix part =
        embed(gather_batch(flat, windows.subspan(start, count), params.dims.seq_len), params);
    std::copy(part.data().begin(), part.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(start * kEmbedDim));
  }
  return out;
}

void log_report(std::ostream& log, const std::string& label, const char* split,
                const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s %-5s n=%zu k=%zu CT=%.4f TW=%.4f KS=%.4f MAE=%.4f m\n",
                label.c_str(), split, r.n_points, r.k_neighbors, r.ct, r.tw, r.ks, r.mae_m);
  log << buf;
}

}  // namespace

std::string tool_version() { return CHARTFORGE_VERSION; }

std::uint64_t split_seed(std::uint64_t seed) { return derive_seed(seed, kSplitStream); }

// ---------------------------------------------------------------------------

TrajectorySpec make_trajectory(const SynthOptions& o) {
  if (o.trajectory == "circle") return CircleTrajectory{o.center, o.radius};
  if (o.trajectory == "lissajous") {
    return LissajousTrajectory{o.center, o.amplitude, o.frequency};
  }
  if (o.trajectory == "polyline") return PolylineTrajectory{o.waypoints};
  throw ConfigError("unknown trajectory '" + o.trajectory + "'");
}

ChannelSpec make_channel(const SynthOptions& o) {
  ChannelSpec c = default_channel(o.links, o.center, o.seed, o.scatterers);
  c.wavelength = o.wavelength;
  c.subcarrier_spacing_hz = o.spacing_hz;
  c.n_subcarriers = o.subcarriers;
  c.n_taps = o.taps;
  c.noise_std = o.noise;
  c.noise_relative = o.noise_relative;
  return c;
}

SynthOutputs cmd_synth(const SynthOptions& o, std::ostream& log) {
  if (o.out.empty()) throw ConfigError("missing output path");
  const CsiDataset d =
      generate_synthetic_csi(make_trajectory(o), make_channel(o), o.n, o.seed, o.seq_len);
  SynthOutputs out;
  out.dataset = o.out;
  out.positions_csv = fs::path(o.out).replace_extension(".positions.csv");
  out.shape = d.shape;
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  save_dataset(d, out.dataset);
  save_positions_csv(d.positions, out.positions_csv);

  Json cfg;
  cfg["trajectory"] = o.trajectory;
  cfg["radius"] = o.radius;
  cfg["center"] = vec2_json(o.center);
  cfg["amplitude"] = vec2_json(o.amplitude);
  cfg["frequency"] = vec2_json(o.frequency);
  Json wp = Json::array();
  for (const Vec2 w : o.waypoints) wp.push_back(vec2_json(w));
  cfg["waypoints"] = wp;
  cfg["n"] = o.n;
  cfg["seed"] = o.seed;
  cfg["links"] = o.links;
  cfg["subcarriers"] = o.subcarriers;
  cfg["taps"] = o.taps;
  cfg["scatterers"] = o.scatterers;
  cfg["wavelength"] = o.wavelength;
  cfg["spacing_hz"] = o.spacing_hz;
  cfg["noise"] = o.noise;
  cfg["noise_relative"] = o.noise_relative;
  const fs::path manifest_path = fs::path(o.out).replace_extension(".manifest.json");
  write_text_file(manifest_path,
                  manifest("synth", cfg, {out.dataset, out.positions_csv, manifest_path}).dump(2) +
                      "\n");

  char buf[256];
  std::snprintf(buf, sizeof buf, "wrote %s: shape (%zu, %zu, %zu, %zu, %zu), F=%zu\n",
                out.dataset.string().c_str(), d.shape[0], d.shape[1], d.shape[2], d.shape[3],
                d.shape[4], d.features());
  log << buf;
  return out;
}

// ---------------------------------------------------------------------------

TrainOutputs cmd_train(const TrainOptions& o, std::ostream& log) {
  if (o.out_dir.empty()) throw ConfigError("missing output directory");
  o.config.validate();
  const CsiDataset d = load_dataset(o.data);
  const FlatCsi flat = flatten(d, o.standardize);
  if (flat.features.rows() < o.seq_len + 1) {
    throw ConfigError("dataset has " + std::to_string(flat.features.rows()) +
                      " samples; training with sequence length " + std::to_string(o.seq_len) +
                      " needs at least " + std::to_string(o.seq_len + 1) +
                      " (two windows to split)");
  }
  const auto windows = build_sequences(flat.features, d.positions, o.seq_len);
  const auto [train_set, val_set] = split(windows, o.split_ratio, split_seed(o.config.seed));
  if (train_set.size() < 2 || val_set.empty()) {
    throw ConfigError("split ratio " + std::to_string(o.split_ratio) + " leaves " +
                      std::to_string(train_set.size()) + " training and " +
                      std::to_string(val_set.size()) + " validation windows");
  }
  log << "windows: " << windows.size() << " (train " << train_set.size() << ", val "
      << val_set.size() << "), F=" << flat.features.cols() << "\n";

  const auto started = std::chrono::steady_clock::now();
  const TrainResult result =
      train(flat.features, o.seq_len, train_set, val_set, o.config, [&](const EpochRecord& r) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "epoch %zu recon=%.6g topo=%.6g total=%.6g val_total=%.6g lr=%.3g (%.1fs)\n",
                      r.epoch, r.train.recon, r.train.topo, r.train.total, r.val.total, r.lr,
                      r.wall_seconds);
        log << buf << std::flush;
      });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  fs::create_directories(o.out_dir);
  TrainOutputs out;
  out.checkpoint = o.out_dir / "checkpoint.bin";
  out.history_csv = o.out_dir / "history.csv";
  out.manifest = o.out_dir / "manifest.json";
  out.history = result.history;
  save_checkpoint(result.params, out.checkpoint);
  write_history_csv(result.history, out.history_csv);

  Json cfg = config_json(o.config);
  cfg["data"] = o.data.string();
  cfg["seq_len"] = o.seq_len;
  cfg["split_ratio"] = o.split_ratio;
  cfg["standardize"] = o.standardize;
  write_text_file(out.manifest,
                  manifest("train", cfg, {out.checkpoint, out.history_csv, out.manifest}).dump(2) +
                      "\n");
  char buf[160];
  std::snprintf(buf, sizeof buf, "best epoch %zu, val_total=%.6g, %.1fs\n",
                result.history.best_epoch, result.history.best_val, seconds);
  log << buf;
  return out;
}

TrainOptions train_options_from_manifest(const fs::path& path) {
  const Json j = Json::parse(read_text_file(path));
  if (j.at("command").get<std::string>() != "train") {
    throw ConfigError(path.string() + " is not a training manifest");
  }
  const Json& cfg = j.at("config");
  TrainOptions o;
  o.config = config_from_json(cfg);
  o.data = cfg.at("data").get<std::string>();
  o.seq_len = cfg.at("seq_len").get<std::size_t>();
  o.split_ratio = cfg.at("split_ratio").get<double>();
  o.standardize = cfg.at("standardize").get<bool>();
  return o;
}

// ---------------------------------------------------------------------------

SplitReport evaluate_split_charts(const Matrix& train_positions, const Matrix& train_chart,
                                  const Matrix& val_positions, const Matrix& val_chart,
                                  std::size_t k, bool with_kl, const fs::path& out_dir,
                                  const std::string& label) {
  SplitReport report;
  report.transform = fit_affine(train_positions, train_chart);
  const ChartEmbedding train_aligned = apply_affine(train_chart, report.transform);
  const ChartEmbedding val_aligned = apply_affine(val_chart, report.transform);
  report.train = evaluate_chart(train_positions, train_aligned, k, with_kl);
  report.val = evaluate_chart(val_positions, val_aligned, k, with_kl);
  if (out_dir.empty()) return report;

  fs::create_directories(out_dir);
  Json metrics;
  metrics["method"] = label;
  metrics["train"] = Json::parse(report.train.to_json());
  metrics["val"] = Json::parse(report.val.to_json());
  write_text_file(out_dir / "metrics.json", metrics.dump(2) + "\n");
  write_text_file(out_dir / "metrics_train.csv", report.train.to_csv());
  write_text_file(out_dir / "metrics_val.csv", report.val.to_csv());
  write_text_file(out_dir / "transform.json", report.transform.to_json() + "\n");
  const auto train_vectors = error_vectors(train_positions, train_aligned);
  const auto val_vectors = error_vectors(val_positions, val_aligned);
  write_text_file(out_dir / "errors_train.csv", error_vectors_csv(train_vectors));
  write_text_file(out_dir / "errors_val.csv", error_vectors_csv(val_vectors));
  write_text_file(out_dir / "chart_train.svg",
                  error_vectors_svg(train_vectors, label + " error vectors (train)"));
  write_text_file(out_dir / "chart_val.svg",
                  error_vectors_svg(val_vectors, label + " error vectors (validation)"));
  return report;
}

namespace {

std::vector<fs::path> split_artifacts(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const char* name : {"metrics.json", "metrics_train.csv", "metrics_val.csv",
                           "transform.json", "errors_train.csv", "errors_val.csv",
                           "chart_train.svg", "chart_val.svg", "manifest.json"}) {
    out.push_back(dir / name);
  }
  return out;
}

}  // namespace

SplitReport cmd_eval(const EvalOptions& o, std::ostream& log) {
  if (o.out_dir.empty()) throw ConfigError("missing output directory");
  const ModelParams params = load_checkpoint(o.checkpoint);
  const CsiDataset d = load_dataset(o.data);
  const FlatCsi flat = flatten(d, o.standardize);
  if (flat.features.cols() != params.dims.features) {
    throw ContractError("checkpoint expects F=" + std::to_string(params.dims.features) +
                        " features but the dataset has F=" +
                        std::to_string(flat.features.cols()));
  }
  const auto windows = build_sequences(flat.features, d.positions, params.dims.seq_len);
  const auto [train_set, val_set] = split(windows, o.split_ratio, split_seed(params.seed));

  const SplitReport report = evaluate_split_charts(
      window_positions(train_set), embed_windows(params, flat.features, train_set),
      window_positions(val_set), embed_windows(params, flat.features, val_set), o.k, o.with_kl,
      o.out_dir, "LSTM-AE");

  Json cfg;
  cfg["data"] = o.data.string();
  cfg["checkpoint"] = o.checkpoint.string();
  cfg["split_ratio"] = o.split_ratio;
  cfg["standardize"] = o.standardize;
  cfg["k"] = o.k;
  cfg["with_kl"] = o.with_kl;
  write_text_file(o.out_dir / "manifest.json",
                  manifest("eval", cfg, split_artifacts(o.out_dir)).dump(2) + "\n");
  log_report(log, "LSTM-AE", "train", report.train);
  log_report(log, "LSTM-AE", "val", report.val);
  return report;
}

SplitReport cmd_baseline(const BaselineOptions& o, std::ostream& log) {
  if (o.out_dir.empty()) throw ConfigError("missing output directory");
  if (o.max_points < 6) throw ConfigError("max_points must be at least 6");
  const CsiDataset d = load_dataset(o.data);
  const FlatCsi flat = flatten(d, o.standardize);
  const auto windows = build_sequences(flat.features, d.positions, o.seq_len);
  auto [train_set, val_set] = split(windows, o.split_ratio, split_seed(o.seed));

  // Pool both splits, subsample to at most max_points, keep split labels.
  std::vector<std::pair<Window, bool>> pool;  // (window, is_train)
  for (const Window& w : train_set) pool.emplace_back(w, true);
  for (const Window& w : val_set) pool.emplace_back(w, false);
  if (pool.size() > o.max_points) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(derive_seed(o.seed, kSubsampleStream));
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(o.max_points);
    std::sort(idx.begin(), idx.end());
    std::vector<std::pair<Window, bool>> kept;
    kept.reserve(idx.size());
    for (const std::size_t i : idx) kept.push_back(pool[i]);
    pool = std::move(kept);
  }

  Matrix features(pool.size(), flat.features.cols());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto src = flat.features.row(pool[i].first.end);
    std::copy(src.begin(), src.end(), features.row(i).begin());
  }
  const Matrix chart = classical_mds(features);

  std::vector<Window> tr, va;
  std::vector<double> tr_chart, va_chart;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto& w = pool[i].second ? tr : va;
    auto& c = pool[i].second ? tr_chart : va_chart;
    w.push_back(pool[i].first);
    c.push_back(chart(i, 0));
    c.push_back(chart(i, 1));
  }
  const std::size_t n_tr = tr.size(), n_va = va.size();
  const SplitReport report = evaluate_split_charts(
      window_positions(tr), Matrix(n_tr, 2, std::move(tr_chart)), window_positions(va),
      Matrix(n_va, 2, std::move(va_chart)), o.k, o.with_kl, o.out_dir, "MDS baseline");

  Json cfg;
  cfg["data"] = o.data.string();
  cfg["seq_len"] = o.seq_len;
  cfg["split_ratio"] = o.split_ratio;
  cfg["seed"] = o.seed;
  cfg["max_points"] = o.max_points;
  cfg["standardize"] = o.standardize;
  cfg["k"] = o.k;
  cfg["with_kl"] = o.with_kl;
  write_text_file(o.out_dir / "manifest.json",
                  manifest("baseline", cfg, split_artifacts(o.out_dir)).dump(2) + "\n");
  log_report(log, "MDS", "train", report.train);
  log_report(log, "MDS", "val", report.val);
  return report;
}

}  // namespace chartforge
