// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Criterion 7 trains the full desk-scale
// model, so a complete run takes several minutes on one core.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "chartforge/align.hpp"
#include "chartforge/errors.hpp"
#include "chartforge/loss.hpp"
#include "chartforge/metrics.hpp"
#include "chartforge/pipeline.hpp"
#include "chartforge/report.hpp"
#include "chartforge/train.hpp"
#include "support.hpp"

using namespace chartforge;
namespace fs = std::filesystem;

namespace {

// Collects the first few failed checks of a criterion for the summary line.
class Verdict {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  void note(const std::string& s) { info_ += (info_.empty() ? "" : ", ") + s; }
  bool ok() const { return failures_ == 0; }
  std::string detail() const {
    if (!ok()) return std::to_string(failures_) + " failed check(s): " + notes_;
    return info_;
  }

 private:
  int failures_ = 0;
  std::string notes_, info_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix move_points(const Matrix& p, double angle, double scale, double tx, double ty) {
  Matrix out(p.rows(), 2);
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    out(i, 0) = scale * (c * p(i, 0) - s * p(i, 1)) + tx;
    out(i, 1) = scale * (s * p(i, 0) + c * p(i, 1)) + ty;
  }
  return out;
}

Matrix apply_raw(const Matrix& e, const Matrix& t) {
  Matrix out(e.rows(), 2);
  for (std::size_t i = 0; i < e.rows(); ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      out(i, c) = e(i, 0) * t(0, c) + e(i, 1) * t(1, c) + t(2, c);
    }
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// ---------------------------------------------------------------------------

void gradient_correctness(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelDims dims{3, 2, 4, 2};
  double worst = 0.0, worst_element = 0.0;
  std::string worst_block;
  for (const std::uint64_t seed : {1u, 2u, 3u, 4u, 5u, 6u}) {
    for (const auto& b : oracle::gradient_check(dims, 3, seed, 0.75, 1e-5)) {
      v.expect(b.norm_rel_error <= 1e-4, "seed " + std::to_string(seed) + " block " + b.name +
                                             " rel error " + fmt("%.3g", b.norm_rel_error));
      if (b.norm_rel_error > worst) worst = b.norm_rel_error, worst_block = b.name;
      worst_element = std::max(worst_element, b.rel_error);
    }
  }
  const double elapsed = seconds_since(t0);
  v.expect(elapsed < 30.0, "runtime " + fmt("%.1f", elapsed) + " s");
  v.note("6 seeds, worst block " + fmt("%.2e", worst) + " (" + worst_block + ")");
  v.note("worst single coordinate " + fmt("%.2e", worst_element));
  v.note(fmt("%.2f s", elapsed));
}

void loss_identities(Verdict& v) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t b = 2 + rng.below(40);
    const Matrix p = oracle::random_points(rng, b, 5.0);
    const Matrix e = oracle::random_points(rng, b, 2.0);
    v.expect(topology_loss(p, p).value == 0.0, "topology(P,P) != 0");

    const double base = topology_loss(p, e).value;
    const double moved =
        topology_loss(move_points(p, rng.uniform(0, 6.28), 1.0, rng.uniform(-5, 5), 3.0),
                      move_points(e, rng.uniform(0, 6.28), 1.0, -2.0, rng.uniform(-5, 5)))
            .value;
    v.expect(std::abs(moved - base) <= 1e-12 * std::max(1.0, base), "rigid motion changed loss");

    const std::size_t l = 1 + rng.below(6), f = 1 + rng.below(5);
    std::vector<double> x(b * l * f), xh(b * l * f);
    for (double& z : x) z = rng.normal();
    for (double& z : xh) z = rng.normal();
    const auto rec = reconstruction_loss(x, xh);
    v.expect(std::abs(rec.value - oracle::reconstruction(x, xh, b, l, f)) <= 1e-12,
             "reconstruction differs from oracle");

    const double alpha = trial == 0 ? kDefaultAlpha : rng.uniform(0, 2);
    const auto tot = total_loss(x, xh, p, e, alpha);
    v.expect(tot.parts.total == tot.parts.recon + alpha * tot.parts.topo, "total != recon + a*topo");
    v.expect(tot.parts.recon == rec.value && tot.parts.topo == base, "total parts differ");
  }
  v.note("20 random batches");
}

void alignment_optimality(Verdict& v) {
  Rng rng(31);
  double worst_fit = 0.0, worst_orth = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix p = oracle::random_points(rng, 20 + rng.below(100), 10.0);
    Matrix a(3, 2);
    for (double& z : a.data()) z = rng.uniform(-3, 3);
    const Matrix e = apply_raw(p, a);
    const double fit = max_abs_diff(apply_affine(e, fit_affine(p, e)).coords(), p);
    worst_fit = std::max(worst_fit, fit);
    v.expect(fit <= 1e-9, "affine recovery residual " + fmt("%.3g", fit));

    const Matrix noisy = oracle::random_points(rng, p.rows(), 3.0);
    const Matrix r = normal_equation_residual(p, noisy, fit_affine(p, noisy));
    for (const double z : r.data()) {
      worst_orth = std::max(worst_orth, std::abs(z));
      v.expect(std::abs(z) <= 1e-8, "normal-equation residual " + fmt("%.3g", z));
    }
  }
  bool raised = false;
  try {
    fit_affine(Matrix{{0, 0}, {1, 2}, {3, 1}, {2, 2}}, Matrix{{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  } catch (const DegenerateGeometryError&) {
    raised = true;
  }
  v.expect(raised, "collinear chart did not raise DegenerateGeometryError");
  v.note("max recovery " + fmt("%.1e", worst_fit) + ", max orthogonality " + fmt("%.1e", worst_orth));
}

void metric_oracles(Verdict& v) {
  Rng rng(41);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng.below(191);
    const Matrix p = oracle::random_points(rng, n, 5.0);
    Matrix e = p;
    const double noise = rng.uniform(0.0, 3.0);
    for (double& z : e.data()) z = rng.uniform(0.2, 2.0) * z + noise * rng.normal();
    const std::size_t k = std::min<std::size_t>(1 + rng.below(10), (2 * n - 2) / 3);
    const double diffs[] = {
        std::abs(continuity_ct(p, e, k) - oracle::continuity(p, e, k)),
        std::abs(trustworthiness_tw(p, e, k) - oracle::trustworthiness(p, e, k)),
        std::abs(ks_statistic(p, e) - oracle::ks(p, e)),
        std::abs(mae(p, ChartEmbedding::meters(e)) - oracle::mae(p, e)),
    };
    for (const double d : diffs) {
      worst = std::max(worst, d);
      v.expect(d <= 1e-12, "N=" + std::to_string(n) + " oracle gap " + fmt("%.3g", d));
    }

    // A quarter turn with a power-of-two scale is exact in floating point.
    Matrix q(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      q(i, 0) = -0.5 * e(i, 1);
      q(i, 1) = 0.5 * e(i, 0);
    }
    v.expect(continuity_ct(p, q, k) == continuity_ct(p, e, k), "CT moved under rotation/scale");
    v.expect(trustworthiness_tw(p, q, k) == trustworthiness_tw(p, e, k),
             "TW moved under rotation/scale");

    const auto id = evaluate_chart(p, ChartEmbedding::meters(p), k);
    v.expect(id.ct == 1.0 && id.tw == 1.0 && id.ks == 0.0 && id.mae_m == 0.0,
             "identity is not (1,1,0,0)");
  }
  v.note("50 instances, max oracle gap " + fmt("%.1e", worst));
}

struct CountRun {
  std::string dataset_bytes;
  std::vector<std::size_t> train_ends, val_ends;
};

CountRun pipeline_counts(Verdict& v, const fs::path& dir) {
  std::ostringstream log;
  SynthOptions o;
  o.n = 20827;
  o.seed = 42;
  o.links = 1;
  o.subcarriers = 1;
  o.taps = 2;
  o.out = dir / "counts.csid";
  cmd_synth(o, log);
  const CsiDataset d = load_dataset(o.out);
  const FlatCsi flat = flatten(d);
  const auto windows = build_sequences(flat.features, d.positions, 10);
  const auto [tr, va] = split(windows, 0.9, split_seed(42));
  v.expect(d.samples() == 20827, "dataset has " + std::to_string(d.samples()) + " samples");
  v.expect(windows.size() == 20818, "windows " + std::to_string(windows.size()));
  v.expect(tr.size() == 18736, "train " + std::to_string(tr.size()));
  v.expect(va.size() == 2082, "val " + std::to_string(va.size()));
  v.note("20827 -> " + std::to_string(windows.size()) + " -> " + std::to_string(tr.size()) + "/" +
         std::to_string(va.size()));
  CountRun run;
  run.dataset_bytes = read_text_file(o.out);
  for (const auto& w : tr) run.train_ends.push_back(w.end);
  for (const auto& w : va) run.val_ends.push_back(w.end);
  return run;
}

void scheduler_contract(Verdict& v) {
  PlateauScheduler s(1e-3, 0.5, 5, 1e-6);
  v.expect(s.step(1.0) == 1e-3, "first epoch changed lr");
  int reductions = 0;
  for (int stagnant = 1; stagnant <= 5; ++stagnant) {
    const double lr = s.step(1.0);
    if (lr != (reductions ? 5e-4 : 1e-3)) ++reductions;
    v.expect((stagnant < 5 && lr == 1e-3) || (stagnant == 5 && lr == 5e-4),
             "stagnant epoch " + std::to_string(stagnant) + " lr " + fmt("%g", lr));
  }
  v.expect(reductions == 1, std::to_string(reductions) + " reductions over 5 flat epochs");

  PlateauScheduler improving(1e-3, 0.5, 5, 1e-6);
  for (int i = 0; i < 200; ++i) {
    v.expect(improving.step(10.0 * std::pow(0.99, i)) == 1e-3, "improving sequence changed lr");
  }

  PlateauScheduler floor(1e-3, 0.5, 5, 1e-6);
  double lowest = 1.0;
  for (int i = 0; i < 500; ++i) lowest = std::min(lowest, floor.step(1.0));
  v.expect(lowest == 1e-6, "lowest lr " + fmt("%g", lowest));
  v.expect(reduce_lr_on_plateau(std::vector<double>(500, 1.0), 1e-3, 0.5, 5, 1e-6) >= 1e-6,
           "functional form dropped below min_lr");
  v.note("single halving at stagnant epoch 5, floor " + fmt("%g", lowest));
}

struct EndToEnd {
  std::string history, checkpoint, metrics_val, svg_val, metrics_train, svg_train;
};

EndToEnd end_to_end(Verdict& v, const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream log;
  SynthOptions s;
  s.trajectory = "circle";
  s.radius = 5.0;
  s.n = 3000;
  s.seed = 42;
  s.links = 2;
  s.subcarriers = 4;
  s.taps = 16;
  s.noise = 0.01;
  s.noise_relative = true;
  s.out = dir / "circle.csid";
  cmd_synth(s, log);

  TrainOptions t;
  t.data = s.out;
  t.out_dir = dir / "train";
  t.standardize = true;
  t.config.units = 32;
  t.config.latent = 16;
  t.config.epochs = 60;
  t.config.seed = 42;
  const auto trained = cmd_train(t, log);

  EvalOptions e;
  e.data = s.out;
  e.checkpoint = trained.checkpoint;
  e.standardize = true;
  e.out_dir = dir / "eval";
  const auto model = cmd_eval(e, log);

  BaselineOptions b;
  b.data = s.out;
  b.seed = 42;
  b.standardize = true;
  b.out_dir = dir / "baseline";
  const auto mds = cmd_baseline(b, log);
  const double elapsed = seconds_since(t0);

  const auto& m = model.val;
  const auto& r = mds.val;
  v.expect(m.ct >= 0.95, "CT " + fmt("%.4f", m.ct));
  v.expect(m.tw >= 0.95, "TW " + fmt("%.4f", m.tw));
  v.expect(m.ks <= 0.10, "KS " + fmt("%.4f", m.ks));
  v.expect(m.mae_m < r.mae_m, "MAE " + fmt("%.4f", m.mae_m) + " vs MDS " + fmt("%.4f", r.mae_m));
  v.expect(m.ct > r.ct && m.tw > r.tw && m.ks < r.ks, "LSTM-AE does not beat MDS on every metric");
  v.expect(elapsed <= 600.0, "runtime " + fmt("%.0f", elapsed) + " s");
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "val LSTM-AE CT=%.4f TW=%.4f KS=%.4f MAE=%.4f m; MDS CT=%.4f TW=%.4f KS=%.4f "
                "MAE=%.4f m; %.0f s",
                m.ct, m.tw, m.ks, m.mae_m, r.ct, r.tw, r.ks, r.mae_m, elapsed);
  v.note(buf);

  EndToEnd out;
  out.history = read_text_file(trained.history_csv);
  out.checkpoint = read_text_file(trained.checkpoint);
  out.metrics_val = read_text_file(e.out_dir / "metrics_val.csv");
  out.metrics_train = read_text_file(e.out_dir / "metrics_train.csv");
  out.svg_val = read_text_file(e.out_dir / "chart_val.svg");
  out.svg_train = read_text_file(e.out_dir / "chart_train.svg");
  return out;
}

// ---------------------------------------------------------------------------

struct Outcome {
  bool ok;
  std::string detail;
};

Outcome run(const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& ex) {
    v.expect(false, std::string("exception: ") + ex.what());
  }
  return {v.ok(), v.detail()};
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "chartforge_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  CountRun counts_a;
  EndToEnd e2e_a;
  bool have_counts = false, have_e2e = false;

  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"loss identities", loss_identities},
      {"alignment optimality", alignment_optimality},
      {"metric oracles", metric_oracles},
      {"pipeline counts",
       [&](Verdict& v) {
         counts_a = pipeline_counts(v, root / "counts_a");
         have_counts = true;
       }},
      {"scheduler contract", scheduler_contract},
      {"end-to-end synthetic experiment",
       [&](Verdict& v) {
         e2e_a = end_to_end(v, root / "e2e_a");
         have_e2e = true;
       }},
      {"determinism",
       [&](Verdict& v) {
         v.expect(have_counts && have_e2e, "criteria 5 and 7 did not produce artifacts");
         if (!have_counts || !have_e2e) return;
         Verdict scratch;
         const CountRun counts_b = pipeline_counts(scratch, root / "counts_b");
         v.expect(counts_b.dataset_bytes == counts_a.dataset_bytes, "count dataset bytes differ");
         v.expect(counts_b.train_ends == counts_a.train_ends &&
                      counts_b.val_ends == counts_a.val_ends,
                  "split differs");
         const EndToEnd b = end_to_end(scratch, root / "e2e_b");
         v.expect(b.history == e2e_a.history, "history.csv differs");
         v.expect(b.checkpoint == e2e_a.checkpoint, "checkpoint.bin differs");
         v.expect(b.metrics_val == e2e_a.metrics_val && b.metrics_train == e2e_a.metrics_train,
                  "metrics CSV differs");
         v.expect(b.svg_val == e2e_a.svg_val && b.svg_train == e2e_a.svg_train, "SVG differs");
         v.note("history, checkpoint, metrics CSV, SVG, split identical");
       }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const Outcome o = run(criteria[i].second);
    if (!o.ok) ++failed;
    std::printf("[%s] criterion %zu: %s%s%s\n", o.ok ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.empty() ? "" : " | ", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
