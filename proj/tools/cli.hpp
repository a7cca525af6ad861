#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pba/pba.hpp"

namespace pba::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInputError = 2, kNumericalFailure = 3 };

struct Options {
  PipelineConfig pipeline;
  int threads = 1;
  std::uint64_t seed = 1;
  int verbosity = 0;

  std::string input;
  std::string output = "pba_out";

  std::string scenario = "plane";
  double rotation_noise = 0.01;
  double translation_noise = 0.01;
  double depth_noise = 0.01;
  int frames = 10;
  int width = 320;
  int height = 240;

  std::string estimate;
  std::string ground_truth;
  std::vector<double> lengths = kitti_segment_lengths();
  std::size_t eval_step = 10;
};

inline void add_pipeline_options(CLI::App& app, PipelineConfig& c) {
  auto opt = [&](const std::string& name, auto& value, const std::string& help) {
    app.add_option(name, value, help)->capture_default_str()->group("Pipeline");
  };
  opt("--window-size", c.window_size, "frames per optimization window");
  opt("--window-stride", c.window_stride, "frames the window advances after each optimization");
  opt("--chain-initialization", c.chain_initialization,
      "initialize frames from the last refined pose and the input relative motion");
  opt("--backward-visibility", c.backward_visibility,
      "gate new points against preceding window frames");

  opt("--nms-radius", c.selection.nms_radius, "non-maximum suppression radius");
  opt("--mask-block-radius", c.selection.mask_block_radius, "occupancy block radius");
  opt("--min-gradient", c.selection.min_gradient, "minimum gradient magnitude of new points");
  opt("--border", c.selection.border, "minimum distance of new points to the image border");

  opt("--zncc-threshold", c.visibility.zncc_threshold, "visibility gate threshold");
  opt("--max-frame-distance", c.visibility.max_frame_distance,
      "max frame distance to the reference frame");
  opt("--zncc-patch-radius", c.visibility.zncc_patch_radius, "visibility gate patch radius");

  opt("--patch-radius", c.solver.patch_radius, "photometric patch radius (1 or 2)");
  opt("--max-iterations", c.solver.max_iterations, "LM iterations per window");
  opt("--function-tolerance", c.solver.function_tolerance, "relative cost change tolerance");
  opt("--gradient-tolerance", c.solver.gradient_tolerance, "gradient max-norm tolerance");
  opt("--parameter-tolerance", c.solver.parameter_tolerance, "relative step norm tolerance");
  opt("--huber-delta", c.solver.huber_delta, "Huber threshold on the patch residual norm");
  opt("--initial-damping", c.solver.initial_damping, "initial LM damping");
  opt("--damping-increase", c.solver.damping_increase, "damping factor after a rejected step");
  opt("--damping-decrease", c.solver.damping_decrease, "damping factor after an accepted step");
  opt("--min-damping", c.solver.min_damping, "lower damping bound");
  opt("--max-damping", c.solver.max_damping, "damping at which LM gives up");
  opt("--min-depth", c.solver.min_depth, "minimum depth of a valid projection");

  opt("--max-disparity", c.stereo.max_disparity, "stereo disparity search range");
  opt("--sad-radius", c.stereo.sad_radius, "stereo SAD window radius");
  opt("--lr-tolerance", c.stereo.lr_tolerance, "left-right consistency tolerance");
  opt("--min-disparity", c.geometry.min_disparity, "smallest disparity triangulated");
}

inline void apply_threads(Options& o) {
  o.pipeline.solver.threads = o.threads;
  o.pipeline.stereo.threads = o.threads;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  fn(f);
}

inline bool any_converged(const std::vector<WindowResult>& windows) {
  for (const auto& w : windows) {
    if (w.report.status == SolverStatus::kConverged ||
        w.report.status == SolverStatus::kDampingLimit) {
      return true;
    }
  }
  return false;
}

/// Camera-to-world trajectory of a finished pipeline.
inline std::vector<Pose> camera_to_world(const Pipeline& pl) {
  std::vector<Pose> out;
  for (const Pose& p : pl.trajectory()) out.push_back(p.inverse());
  return out;
}

struct RefineResult {
  int code = kOk;
  std::vector<Pose> trajectory;  // camera to world
};

inline RefineResult refine(const Options& o, const std::string& config_dump, std::ostream& out,
                           std::ostream& err) {
  RefineResult res;
  const io::Sequence seq(o.input);
  const fs::path dir(o.output);
  fs::create_directories(dir);
  write_text(dir / "config_used.toml", config_dump);

  Pipeline pl(seq.intrinsics(), o.pipeline);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    pl.push(seq.load(i));
    if (o.verbosity > 0) {
      const auto& st = pl.frame_stats().back();
      err << "frame " << st.id << ": visible " << st.visibility_accepted << ", rejected "
          << st.visibility_rejected << ", new points " << st.created << '\n';
    }
  }
  pl.finish();

  res.trajectory = camera_to_world(pl);
  io::save_trajectory(dir / "trajectory.txt", res.trajectory);
  write_with(dir / "points.csv", [&](std::ostream& f) { io::write_points_csv(f, pl.retired_points()); });
  write_with(dir / "iterations.csv",
             [&](std::ostream& f) { io::write_iterations_csv(f, pl.windows()); });

  if (o.verbosity > 0) {
    for (const auto& w : pl.windows()) {
      err << "window " << w.index << ": " << to_string(w.report.status) << " after "
          << w.report.iterations << " iterations, cost " << w.report.initial_cost << " -> "
          << w.report.final_cost << '\n';
    }
  }
  out << "refined " << seq.size() << " frames in " << pl.windows().size() << " windows, "
      << pl.retired_points().size() << " points\n";
  if (!any_converged(pl.windows())) {
    err << "error: no window converged\n";
    res.code = kNumericalFailure;
  }
  return res;
}

/// Writes images, 16-bit disparities, calibration, perturbed and true poses.
inline void write_synthetic_dataset(const fs::path& dir, const synth::SyntheticSequence& seq) {
  fs::create_directories(dir / "disparity");
  for (std::size_t i = 0; i < seq.images.size(); ++i) {
    io::save_image(dir / io::frame_name(i), seq.images[i]);
    io::save_disparity(dir / "disparity" / io::frame_name(i),
                       synth::disparity_from_depth(seq.depths[i], seq.K));
  }
  io::save_calib(dir / "calib.txt", seq.K);
  io::save_trajectory(dir / "poses.txt", seq.init);
  io::save_trajectory(dir / "gt_poses.txt", seq.gt);
}

inline void write_errors_csv(std::ostream& out, const std::vector<Pose>& gt,
                             const std::vector<Pose>& before, const std::vector<Pose>& after) {
  out << "frame,rotation_before_deg,rotation_after_deg,translation_before,translation_after\n"
      << std::setprecision(10);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    out << i << ',' << rotation_error(before[i], gt[i]) * 180.0 / M_PI << ','
        << rotation_error(after[i], gt[i]) * 180.0 / M_PI << ',' << (before[i].t - gt[i].t).norm()
        << ',' << (after[i].t - gt[i].t).norm() << '\n';
  }
}

inline int synth_cmd(Options o, const std::string& config_dump, std::ostream& out,
                     std::ostream& err) {
  const auto scenario = synth::parse_scenario(o.scenario);
  if (!scenario) {
    err << "error: unknown scenario '" << o.scenario << "' (plane, corridor, point-cloud)\n";
    return kInputError;
  }
  synth::SequenceOptions so;
  so.scenario = *scenario;
  so.frames = o.frames;
  so.width = o.width;
  so.height = o.height;
  so.noise = {o.rotation_noise, o.translation_noise, o.depth_noise};
  so.seed = o.seed;
  so.threads = o.threads;
  const synth::SyntheticSequence seq = synth::make_sequence(so);

  write_synthetic_dataset(o.output, seq);
  o.input = o.output;
  std::ostringstream quiet;
  const RefineResult r = refine(o, config_dump, o.verbosity > 0 ? out : quiet, err);

  std::ostringstream csv;
  write_errors_csv(csv, seq.gt, seq.init, r.trajectory);
  write_text(fs::path(o.output) / "errors.csv", csv.str());
  out << csv.str();
  return r.code;
}

inline int eval_cmd(const Options& o, std::ostream& out) {
  const auto est = io::load_trajectory(o.estimate);
  const auto gt = io::load_trajectory(o.ground_truth);
  const auto errors = relative_error(est, gt, o.lengths, o.eval_step);
  out << "length,translation_percent,rotation_deg_per_m,samples\n" << std::setprecision(10);
  for (const auto& e : errors) {
    out << e.length << ',' << e.translation_percent << ',' << e.rotation_deg_per_m << ','
        << e.samples << '\n';
  }
  return kOk;
}

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Photometric bundle adjustment over image sequences"};
  app.name("pba");
  app.set_config("--config", "", "TOML/INI file with option values; flags take precedence");
  app.require_subcommand(1);
  add_pipeline_options(app, o.pipeline);
  app.add_option("--threads", o.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "random seed")->capture_default_str();
  app.add_flag("-v,--verbose", o.verbosity, "print per-frame and per-window progress");

  auto* refine_cmd = app.add_subcommand("refine", "Refine a dataset directory")->fallthrough();
  refine_cmd->add_option("input", o.input, "dataset directory")->required();
  refine_cmd->add_option("-o,--output", o.output, "output directory")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Render, perturb and refine a synthetic sequence")
                    ->fallthrough();
  synth->add_option("--scenario", o.scenario, "plane, corridor or point-cloud")->capture_default_str();
  synth->add_option("--rotation-noise", o.rotation_noise, "pose rotation sigma, radians")
      ->capture_default_str();
  synth->add_option("--translation-noise", o.translation_noise,
                    "pose translation sigma, fraction of the scene scale")
      ->capture_default_str();
  synth->add_option("--depth-noise", o.depth_noise, "relative depth sigma")->capture_default_str();
  synth->add_option("--frames", o.frames, "number of frames")->capture_default_str();
  synth->add_option("--width", o.width, "image width")->capture_default_str();
  synth->add_option("--height", o.height, "image height")->capture_default_str();
  synth->add_option("-o,--output", o.output, "output directory")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "KITTI-style relative error of a trajectory")->fallthrough();
  eval->add_option("estimate", o.estimate, "estimated trajectory")->required();
  eval->add_option("ground_truth", o.ground_truth, "ground-truth trajectory")->required();
  eval->add_option("--lengths", o.lengths, "segment lengths")->delimiter(',')->capture_default_str();
  eval->add_option("--step", o.eval_step, "start frame stride")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    apply_threads(o);
    o.pipeline.validate();
    const std::string config_dump = app.config_to_str(true, false);
    if (refine_cmd->parsed()) return refine(o, config_dump, out, err).code;
    if (synth->parsed()) return synth_cmd(o, config_dump, out, err);
    return eval_cmd(o, out);
  } catch (const io::DatasetError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

}  // namespace pba::cli
