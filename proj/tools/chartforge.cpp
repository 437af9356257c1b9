// SPDX-License-Identifier: Apache-2.0
//
// chartforge: synthesize CSI, train the LSTM autoencoder, evaluate charts,
// and run the MDS baseline.
//
// Exit status: 0 on success, 2 on usage or configuration errors, 1 on any
// other failure. Failures print one line to stderr of the form
//   chartforge: error[<kind>]: <message>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chartforge/errors.hpp"
#include "chartforge/pipeline.hpp"

namespace cf = chartforge;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << "chartforge: error[" << kind << "]: " << message << "\n";
  return code;
}

cf::Vec2 parse_vec2(const std::string& text, const std::string& flag) {
  double x = 0, y = 0;
  char comma = 0;
  std::istringstream in(text);
  if (!(in >> x >> comma >> y) || comma != ',' || !(in >> std::ws).eof()) {
    throw cf::ConfigError(flag + " expects 'x,y', got '" + text + "'");
  }
  return {x, y};
}

std::vector<cf::Vec2> parse_waypoints(const std::string& text) {
  std::vector<cf::Vec2> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ';')) {
    if (!item.empty()) out.push_back(parse_vec2(item, "--waypoints"));
  }
  return out;
}

struct VecFlags {
  std::string center = "0,0";
  std::string amplitude = "4,3";
  std::string frequency = "1,2";
  std::string waypoints;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSTM-autoencoder channel charting"};
  app.set_version_flag("--version", cf::tool_version());
  app.require_subcommand(1);

  // synth -------------------------------------------------------------------
  cf::SynthOptions synth;
  VecFlags vec;
  std::string synth_out;
  auto* s = app.add_subcommand("synth", "generate a synthetic CSI dataset");
  s->add_option("--traj", synth.trajectory, "circle | lissajous | polyline")
      ->check(CLI::IsMember({"circle", "lissajous", "polyline"}))
      ->capture_default_str();
  s->add_option("--radius", synth.radius, "circle radius [m]")->capture_default_str();
  s->add_option("--center", vec.center, "trajectory center 'x,y' [m]")->capture_default_str();
  s->add_option("--amplitude", vec.amplitude, "Lissajous amplitudes 'ax,ay' [m]")
      ->capture_default_str();
  s->add_option("--frequency", vec.frequency, "Lissajous integer frequencies 'fx,fy'")
      ->capture_default_str();
  s->add_option("--waypoints", vec.waypoints, "closed polyline 'x1,y1;x2,y2;...'");
  s->add_option("--n", synth.n, "number of samples")->capture_default_str();
  s->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
  s->add_option("--links", synth.links, "antenna links (anchors)")->capture_default_str();
  s->add_option("--subcarriers", synth.subcarriers, "subcarrier groups")->capture_default_str();
  s->add_option("--taps", synth.taps, "taps per group")->capture_default_str();
  s->add_option("--scatterers", synth.scatterers, "scatterers per link")->capture_default_str();
  s->add_option("--wavelength", synth.wavelength, "carrier wavelength [m]")
      ->capture_default_str();
  s->add_option("--spacing", synth.spacing_hz, "subcarrier spacing [Hz]")
      ->capture_default_str();
  s->add_option("--noise", synth.noise, "noise standard deviation")->capture_default_str();
  s->add_flag("--noise-relative", synth.noise_relative,
              "scale --noise by the mean CSI magnitude");
  s->add_option("--seq-len", synth.seq_len, "window length the dataset must support")
      ->capture_default_str();
  s->add_option("--out", synth_out, "output .csid path")->required();

  // train -------------------------------------------------------------------
  cf::TrainOptions tr;
  std::string train_data, train_out, train_manifest;
  auto* t = app.add_subcommand("train", "train the LSTM autoencoder");
  auto* t_data = t->add_option("--data", train_data, "dataset .csid path");
  auto* t_manifest =
      t->add_option("--manifest", train_manifest, "rerun the configuration in a train manifest");
  t_manifest->excludes(t_data);
  t->add_option("--out", train_out, "output directory")->required();
  t->add_option("--lr", tr.config.lr0, "initial learning rate")->capture_default_str();
  t->add_option("--batch", tr.config.batch_size, "batch size")->capture_default_str();
  t->add_option("--epochs", tr.config.epochs, "training epochs")->capture_default_str();
  t->add_option("--alpha", tr.config.alpha, "topology loss weight")->capture_default_str();
  t->add_option("--seq-len", tr.seq_len, "window length L")->capture_default_str();
  t->add_option("--seed", tr.config.seed, "seed for init, split, and shuffling")
      ->capture_default_str();
  t->add_option("--units", tr.config.units, "LSTM width U")->capture_default_str();
  t->add_option("--latent", tr.config.latent, "latent width D")->capture_default_str();
  t->add_option("--patience", tr.config.patience, "plateau patience [epochs]")
      ->capture_default_str();
  t->add_option("--min-lr", tr.config.min_lr, "learning-rate floor")->capture_default_str();
  t->add_option("--split", tr.split_ratio, "training fraction")->capture_default_str();
  t->add_flag("--standardize", tr.standardize, "standardize each CSI feature");

  // eval --------------------------------------------------------------------
  cf::EvalOptions ev;
  std::string eval_data, eval_ckpt, eval_out, eval_manifest;
  auto* e = app.add_subcommand("eval", "align and score a trained chart");
  e->add_option("--data", eval_data, "dataset .csid path");
  e->add_option("--checkpoint", eval_ckpt, "checkpoint path");
  e->add_option("--manifest", eval_manifest,
                "train manifest; supplies data, split, standardization, and checkpoint");
  e->add_option("--out", eval_out, "output directory")->required();
  e->add_option("--split", ev.split_ratio, "training fraction")->capture_default_str();
  e->add_flag("--standardize", ev.standardize, "standardize each CSI feature");
  e->add_option("--k", ev.k, "neighborhood size (0: 5% of N)")->capture_default_str();
  e->add_flag("--kl", ev.with_kl, "also report histogram KL divergence");

  // baseline ----------------------------------------------------------------
  cf::BaselineOptions bl;
  std::string bl_data, bl_out;
  auto* b = app.add_subcommand("baseline", "classical MDS baseline chart");
  b->add_option("--data", bl_data, "dataset .csid path")->required();
  b->add_option("--out", bl_out, "output directory")->required();
  b->add_option("--seq-len", bl.seq_len, "window length L")->capture_default_str();
  b->add_option("--split", bl.split_ratio, "training fraction")->capture_default_str();
  b->add_option("--seed", bl.seed, "split and subsample seed")->capture_default_str();
  b->add_option("--max-points", bl.max_points, "subsample cap")->capture_default_str();
  b->add_flag("--standardize", bl.standardize, "standardize each CSI feature");
  b->add_option("--k", bl.k, "neighborhood size (0: 5% of N)")->capture_default_str();
  b->add_flag("--kl", bl.with_kl, "also report histogram KL divergence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    return fail("usage", ex.what(), kExitUsage);
  }

  try {
    if (s->parsed()) {
      synth.center = parse_vec2(vec.center, "--center");
      synth.amplitude = parse_vec2(vec.amplitude, "--amplitude");
      synth.frequency = parse_vec2(vec.frequency, "--frequency");
      synth.waypoints = parse_waypoints(vec.waypoints);
      synth.out = synth_out;
      cf::cmd_synth(synth, std::cout);
    } else if (t->parsed()) {
      if (!train_manifest.empty()) {
        tr = cf::train_options_from_manifest(train_manifest);
      } else if (train_data.empty()) {
        throw cf::ConfigError("train needs --data or --manifest");
      } else {
        tr.data = train_data;
      }
      tr.out_dir = train_out;
      cf::cmd_train(tr, std::cout);
    } else if (e->parsed()) {
      if (!eval_manifest.empty()) {
        const cf::TrainOptions m = cf::train_options_from_manifest(eval_manifest);
        if (eval_data.empty()) eval_data = m.data.string();
        if (eval_ckpt.empty()) {
          eval_ckpt = (std::filesystem::path(eval_manifest).parent_path() / "checkpoint.bin")
                          .string();
        }
        ev.split_ratio = m.split_ratio;
        ev.standardize = m.standardize;
      }
      if (eval_data.empty() || eval_ckpt.empty()) {
        throw cf::ConfigError("eval needs --data and --checkpoint, or --manifest");
      }
      ev.data = eval_data;
      ev.checkpoint = eval_ckpt;
      ev.out_dir = eval_out;
      cf::cmd_eval(ev, std::cout);
    } else if (b->parsed()) {
      bl.data = bl_data;
      bl.out_dir = bl_out;
      cf::cmd_baseline(bl, std::cout);
    }
  } catch (const cf::ConfigError& ex) {
    return fail("usage", ex.what(), kExitUsage);
  } catch (const cf::FormatError& ex) {
    return fail("format", ex.what(), kExitRuntime);
  } catch (const cf::ContractError& ex) {
    return fail("contract", ex.what(), kExitRuntime);
  } catch (const cf::ShapeError& ex) {
    return fail("shape", ex.what(), kExitRuntime);
  } catch (const cf::DegenerateGeometryError& ex) {
    return fail("geometry", ex.what(), kExitRuntime);
  } catch (const cf::NumericError& ex) {
    return fail("numeric", ex.what(), kExitRuntime);
  } catch (const std::filesystem::filesystem_error& ex) {
    return fail("io", ex.what(), kExitRuntime);
  } catch (const std::exception& ex) {
    return fail("runtime", ex.what(), kExitRuntime);
  }
  return 0;
}
