#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scoreloc/config.hpp"
#include "scoreloc/errors.hpp"
#include "scoreloc/evaluation.hpp"
#include "scoreloc/io_formats.hpp"
#include "scoreloc/predictor.hpp"
#include "scoreloc/relocaliser.hpp"
#include "scoreloc/synthetic_world.hpp"

namespace fs = std::filesystem;
using namespace scoreloc;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
};

void add_config_options(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", opts.overrides, "override a setting, key=value");
}

HarnessConfig resolve_config(const CommonOptions& opts) {
  HarnessConfig config = opts.config_path.empty() ? HarnessConfig{} : load_config(opts.config_path);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  config.validate();
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

std::unique_ptr<Predictor> make_predictor(const HarnessConfig& config, const std::string& store) {
  if (!store.empty()) return std::make_unique<FilePredictor>(store);
  return std::make_unique<SyntheticPredictor>(config.predictor);
}

void print_pose(std::uint32_t index, const RigidPosed& pose) {
  const Eigen::Matrix4d m = pose.matrix();
  std::printf("frame %u\n", index);
  for (int r = 0; r < 4; ++r) {
    std::printf("%.9f %.9f %.9f %.9f\n", m(r, 0), m(r, 1), m(r, 2), m(r, 3));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene coordinate relocaliser with online grid-based adaptation"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string format_name = "synthetic_native";
  std::string out_path, state_path, sequence_dir, prediction_store, json_path, csv_path;
  bool raw = false;
  std::vector<std::uint32_t> frame_indices;

  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic world (train/, test/, model)");
  add_config_options(synth, common);
  synth->add_option("-o,--out", out_path, "output directory")->required();
  synth->add_option("--format", format_name, "seven_scenes_like or synthetic_native");

  auto* train = app.add_subcommand("train", "train reservoirs online and save the state");
  add_config_options(train, common);
  train->add_option("--sequence", sequence_dir, "training sequence directory")->required();
  train->add_option("--format", format_name, "seven_scenes_like or synthetic_native");
  train->add_option("--predictions", prediction_store, "replay prediction files instead of the synthetic oracle");
  train->add_option("-o,--out", out_path, "state file")->required();

  auto* reloc = app.add_subcommand("relocalise", "relocalise frames and print camera-to-world poses");
  add_config_options(reloc, common);
  reloc->add_option("--state", state_path, "trained state file")->required()->check(CLI::ExistingFile);
  reloc->add_option("--sequence", sequence_dir, "sequence directory")->required();
  reloc->add_option("--format", format_name, "seven_scenes_like or synthetic_native");
  reloc->add_option("--predictions", prediction_store, "prediction file directory");
  reloc->add_option("--frame", frame_indices, "frame indices (default: all)");
  reloc->add_flag("--raw", raw, "use predictions directly as world points");

  auto* eval = app.add_subcommand("evaluate", "evaluate a test sequence and write a JSON report");
  add_config_options(eval, common);
  eval->add_option("--state", state_path, "trained state file")->required()->check(CLI::ExistingFile);
  eval->add_option("--sequence", sequence_dir, "test sequence directory")->required();
  eval->add_option("--format", format_name, "seven_scenes_like or synthetic_native");
  eval->add_option("--predictions", prediction_store, "prediction file directory");
  eval->add_option("--json", json_path, "report path ('-' for stdout)");
  eval->add_flag("--raw", raw, "use predictions directly as world points");

  std::vector<std::int32_t> counts;
  std::vector<double> divisors = {0.5, 1, 2, 4, 8};
  auto* sweep_res = app.add_subcommand("sweep-reservoirs", "success rate against reservoir count");
  add_config_options(sweep_res, common);
  sweep_res->add_option("--counts", counts, "explicit reservoir counts");
  sweep_res->add_option("--divisors", divisors, "counts as occupied cells / divisor (default 0.5 1 2 4 8)");
  sweep_res->add_option("--csv", csv_path, "output CSV ('-' for stdout)");

  std::vector<double> good = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7};
  auto* sweep_q = app.add_subcommand("sweep-quality", "success rate against good-correspondence fraction");
  add_config_options(sweep_q, common);
  sweep_q->add_option("--good", good, "target good fractions");
  sweep_q->add_option("--csv", csv_path, "output CSV ('-' for stdout)");

  auto* novelty = app.add_subcommand("novelty-report", "success rate binned by distance to training poses");
  add_config_options(novelty, common);
  novelty->add_option("--state", state_path, "trained state file")->required()->check(CLI::ExistingFile);
  novelty->add_option("--sequence", sequence_dir, "test sequence directory")->required();
  novelty->add_option("--format", format_name, "seven_scenes_like or synthetic_native");
  novelty->add_option("--predictions", prediction_store, "prediction file directory");
  novelty->add_option("--csv", csv_path, "output CSV ('-' for stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    const HarnessConfig config = resolve_config(common);
    const SequenceFormat format = parse_sequence_format(format_name);

    if (*synth) {
      const SyntheticWorld world(config.world);
      const fs::path out(out_path);
      save_sequence(world.train(), out / "train", format);
      save_sequence(world.test(), out / "test", format);
      save_scene_model(world.reference_model(), out / "reference.scpm");
      write_text(out / "config.txt", format_config(config));
      std::printf("%zu train / %zu test frames written to %s\n", world.train().size(),
                  world.test().size(), out.string().c_str());
      return 0;
    }

    if (*train) {
      const auto frames = load_sequence(sequence_dir, format);
      const auto predictor = make_predictor(config, prediction_store);
      RelocaliserState state(config.relocaliser);
      state.train_online(frames, *predictor);
      state.save(out_path);
      std::printf("trained on %zu frames, %d reservoirs assigned, model %zu points\n", frames.size(),
                  state.table().assigned_reservoirs(), state.scene_model().size());
      return 0;
    }

    // Test-time settings (RANSAC, ICP, ranking) come from the saved state
    // unless a config file or overrides say otherwise.
    auto load_state = [&] {
      RelocaliserState state = RelocaliserState::Load(state_path);
      if (!common.config_path.empty()) {
        state.set_test_settings(config.relocaliser);
      } else if (!common.overrides.empty()) {
        HarnessConfig patched;
        patched.relocaliser = state.config();
        for (const auto& kv : common.overrides) {
          const auto eq = kv.find('=');
          apply_setting(patched, kv.substr(0, eq), kv.substr(eq + 1));
        }
        patched.relocaliser.validate();
        state.set_test_settings(patched.relocaliser);
      }
      return state;
    };

    if (*reloc) {
      const RelocaliserState state = load_state();
      const auto frames = load_sequence(sequence_dir, format);
      const auto predictor = make_predictor(config, prediction_store);
      int failures = 0;
      for (const auto& frame : frames) {
        if (!frame_indices.empty() &&
            std::find(frame_indices.begin(), frame_indices.end(), frame.index) == frame_indices.end()) {
          continue;
        }
        try {
          print_pose(frame.index, relocalise(state, frame, *predictor, {raw}).pose);
        } catch (const RelocalisationFailed& e) {
          std::printf("frame %u failed: %s\n", frame.index, e.what());
          ++failures;
        }
      }
      return failures == 0 ? 0 : 2;
    }

    if (*eval) {
      const RelocaliserState state = load_state();
      const auto frames = load_sequence(sequence_dir, format);
      const auto predictor = make_predictor(config, prediction_store);
      const EvalReport report = evaluate(state, frames, *predictor, {raw});
      if (!json_path.empty()) write_text(json_path, to_json(report));
      std::fprintf(stderr, "success %.1f%%, median %.4f m / %.3f deg, total %.1f ms/frame\n",
                   100.0 * report.success_rate, report.median_translation, report.median_rotation,
                   report.mean_timings[5]);
      return 0;
    }

    if (*sweep_res) {
      const SyntheticWorld world(config.world);
      if (counts.empty()) {
        const SyntheticPredictor predictor(config.predictor);
        const auto occupied = count_occupied_cells(world.train(), predictor, config.relocaliser.grid);
        for (double d : divisors) {
          counts.push_back(std::max<std::int32_t>(1, static_cast<std::int32_t>(occupied / d)));
        }
      }
      write_text(csv_path, to_csv(sweep_reservoir_count(config, world, counts)));
      return 0;
    }

    if (*sweep_q) {
      const SyntheticWorld world(config.world);
      RelocaliserState state(config.relocaliser);
      state.train_online(world.train(), SyntheticPredictor(config.predictor));
      const std::vector<QualityToggles> toggles = {
          {false, false, false}, {true, false, false}, {true, true, false}, {true, true, true}};
      write_text(csv_path,
                 to_csv(sweep_correspondence_quality(state, config, world, good, toggles)));
      return 0;
    }

    if (*novelty) {
      const RelocaliserState state = load_state();
      const auto frames = load_sequence(sequence_dir, format);
      const auto predictor = make_predictor(config, prediction_store);
      const EvalReport report = evaluate(state, frames, *predictor);
      std::vector<RigidPosed> test_poses;
      const std::unique_ptr<bool[]> success(new bool[report.frames.size()]);
      for (std::size_t i = 0; i < report.frames.size(); ++i) {
        test_poses.push_back(report.frames[i].ground_truth);
        success[i] = report.frames[i].success;
      }
      const auto binning = novelty_binning(state.train_poses(), test_poses,
                                           std::span<const bool>(success.get(), test_poses.size()));
      write_text(csv_path, to_csv(binning));
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
