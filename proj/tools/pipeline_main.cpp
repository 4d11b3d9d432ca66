// Command-line driver: align / render / animate / attn / make-toy-body.
// Logs go to stderr; --json prints a machine-readable summary to stdout.
// Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numeric failure.

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "chmp/checkpoint.hpp"
#include "chmp/errors.hpp"
#include "chmp/image_io.hpp"
#include "chmp/pipeline.hpp"
#include "chmp/temporal.hpp"

namespace {

using namespace chmp;
using nlohmann::json;

/// Exclusive ownership of an output directory for the process lifetime.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(dir + "/.lock") {
    std::filesystem::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw IoError("output directory is locked by another process (remove " + path_ +
                    " if stale)");
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

struct CommonOpts {
  std::string body_path;
  std::string motion_path;
  std::string shape_path;
  std::string out_dir = "out";
  std::string checkpoint;
  int width = 256;
  int height = 256;
  int latent_size = 8;
  int latent_channels = 4;
  int diffusion_T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int sample_steps = 10;
  int window_len = 24;
  int window_stride = 12;
  std::uint64_t seed = 0;
  bool backface_cull = true;
  bool json_out = false;
};

void emit_json(const CommonOpts& opts, const json& summary) {
  if (opts.json_out) std::cout << summary.dump() << std::endl;
}

int cmd_make_toy_body(const CommonOpts& opts, int vertices, int joints, int shapes,
                      bool pose_dirs, const std::string& out_file) {
  ToyBodyOptions toy;
  toy.num_vertices = vertices;
  toy.num_joints = joints;
  toy.num_shapes = shapes;
  toy.with_pose_dirs = pose_dirs;
  const BodyModel model = make_toy_body(toy);
  save_body(model, out_file);
  std::cerr << "wrote toy body (V=" << model.num_vertices() << ", K=" << model.num_joints()
            << ", S=" << model.num_shapes() << ", F=" << model.faces.rows() << ") to "
            << out_file << "\n";
  emit_json(opts, json{{"command", "make-toy-body"},
                       {"out", out_file},
                       {"vertices", model.num_vertices()},
                       {"joints", model.num_joints()}});
  return 0;
}

int cmd_align(const CommonOpts& opts, const std::string& out_file, const std::string& ref_bbox,
              int anchor_frame) {
  const BodyModel model = load_body(opts.body_path);
  const MotionSequence motion = load_motion(opts.motion_path);
  const ShapeParams beta_ref = load_shape(opts.shape_path);

  AlignedSequence aligned = align_sequence(beta_ref, motion);
  if (!ref_bbox.empty()) {
    PixelRect rect;
    if (std::sscanf(ref_bbox.c_str(), "%lf,%lf,%lf,%lf", &rect.x, &rect.y, &rect.width,
                    &rect.height) != 4)
      throw InvalidArgumentError("--ref-bbox expects x,y,w,h");
    aligned = fit_camera_scale(rect, aligned, model, anchor_frame);
  }

  for (std::size_t i = 0; i < aligned.frames.size(); ++i) {
    const PixelRect box = projected_bbox(model, aligned.shape, aligned.frames[i]);
    std::cerr << "frame " << i << ": bbox x=" << box.x << " y=" << box.y << " w=" << box.width
              << " h=" << box.height << "\n";
  }

  MotionSequence out;
  out.fps = aligned.fps;
  out.source_shape = aligned.shape;
  out.frames = aligned.frames;
  save_motion(out, out_file);
  std::cerr << "wrote aligned sequence (" << out.frames.size() << " frames) to " << out_file
            << "\n";
  emit_json(opts, json{{"command", "align"},
                       {"out", out_file},
                       {"frames", out.frames.size()}});
  return 0;
}

int cmd_render(const CommonOpts& opts) {
  const BodyModel model = load_body(opts.body_path);
  const MotionSequence motion = load_motion(opts.motion_path);
  DirLock lock(opts.out_dir);

  const auto bones = bones_from_parents(model.parents);
  int rendered = 0;
  for (std::size_t i = 0; i < motion.frames.size(); ++i) {
    const MotionFrame& frame = motion.frames[i];
    const ShapeParams shape{motion.source_shape.beta};
    const PosedMesh mesh = evaluate_body(model, shape, frame.pose);
    RasterOptions raster;
    raster.backface_cull = opts.backface_cull;
    GuidanceMaps maps;
    try {
      frame.camera.validate();
      maps = rasterize_mesh(mesh, frame.camera, opts.width, opts.height, raster);
      maps.skeleton =
          render_skeleton(mesh.joints, bones, frame.camera, opts.width, opts.height);
    } catch (const InvalidArgumentError& e) {
      std::cerr << "warning: frame " << i << ": degenerate camera (" << e.what()
                << "); writing background-only maps\n";
      maps = GuidanceMaps::background(opts.width, opts.height);
    }
    write_frame_outputs(opts.out_dir, static_cast<int>(i), maps, model.num_parts);
    ++rendered;
  }
  std::cerr << "rendered " << rendered << " frame(s) to " << opts.out_dir << "\n";
  emit_json(opts, json{{"command", "render"}, {"out", opts.out_dir}, {"frames", rendered}});
  return 0;
}

struct AnimateResult {
  std::vector<Tensor4> latents;
};

AnimateResult run_animate(const CommonOpts& opts, const std::string& maps_dir, int num_frames,
                          bool use_guidance) {
  const DiffusionSchedule sched = make_schedule(opts.diffusion_T, opts.beta_start, opts.beta_end);

  GuidanceNetConfig net_config;
  net_config.out_channels = opts.latent_channels;
  ToyDenoiserConfig den_config;
  den_config.latent_channels = opts.latent_channels;

  ToyDenoiser denoiser(den_config, opts.seed);
  GuidanceNets nets = make_guidance_nets(net_config, opts.seed);
  if (!opts.checkpoint.empty()) load_checkpoint(opts.checkpoint, denoiser, nets);

  // check all maps exist up front so the error lists every missing frame
  std::vector<int> missing;
  for (int f = 0; f < num_frames; ++f)
    if (!std::filesystem::exists(frame_file(maps_dir, f, "meta", "json"))) missing.push_back(f);
  if (!missing.empty()) {
    std::string list;
    for (int f : missing) list += (list.empty() ? "" : ", ") + std::to_string(f);
    throw IoError("animate: missing guidance maps for frame(s): " + list);
  }

  const int cond_size = 2 * opts.latent_size;  // stride-2 encoder halves it
  std::vector<Tensor4> guidance(static_cast<std::size_t>(num_frames));
  if (use_guidance) {
    for (int f = 0; f < num_frames; ++f) {
      const GuidanceBundle bundle = load_condition_bundle(maps_dir, f, cond_size, cond_size);
      GuidanceBundle encoded;
      for (const auto& [name, cond] : bundle) encoded[name] = encode_condition(nets.at(name), cond);
      guidance[static_cast<std::size_t>(f)] = fuse(encoded);
    }
  }

  const WindowPlan plan = plan_windows(num_frames, opts.window_len, opts.window_stride);
  for (const auto& w : plan.windows)
    std::cerr << "window (" << w.start << "," << w.end << ")\n";

  const NoisePredictor predictor = [&](const Tensor4& z, int t, const Tensor4* y) {
    return denoise(denoiser, z, t, y);
  };

  std::vector<std::vector<Tensor4>> window_outputs;
  for (std::size_t w = 0; w < plan.windows.size(); ++w) {
    const auto& win = plan.windows[w];
    std::vector<Tensor4> outputs;
    for (int pos = 0; pos < win.length(); ++pos) {
      const int frame = win.start + pos;
      // per-(window, frame) noise stream derived from the one seed
      CounterRng rng(opts.seed, 0x414e494dULL + 4096 * w + static_cast<std::uint64_t>(frame));
      Tensor4 z_T(1, opts.latent_channels, opts.latent_size, opts.latent_size);
      for (double& v : z_T.data) v = rng.next_normal();
      const Tensor4* y =
          use_guidance ? &guidance[static_cast<std::size_t>(frame)] : nullptr;
      outputs.push_back(sample(predictor, y, z_T, sched, opts.sample_steps));
    }
    window_outputs.push_back(std::move(outputs));
  }

  AnimateResult result;
  result.latents = aggregate(plan, window_outputs);
  return result;
}

void export_latents(const CommonOpts& opts, const std::vector<Tensor4>& latents) {
  for (std::size_t f = 0; f < latents.size(); ++f) {
    const Tensor4& z = latents[f];
    write_maps_f32(frame_file(opts.out_dir, static_cast<int>(f), "latent", "f32"), z.data, z.c,
                   z.h, z.w);
    // channels tiled horizontally, min-max normalized per frame
    MatX img(z.h, z.w * z.c);
    double lo = 1e300, hi = -1e300;
    for (double v : z.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double range = hi - lo;
    for (int c = 0; c < z.c; ++c)
      for (int y = 0; y < z.h; ++y)
        for (int x = 0; x < z.w; ++x)
          img(y, c * z.w + x) = range > 0 ? (z.at(0, c, y, x) - lo) / range : 0.5;
    write_gray_png(frame_file(opts.out_dir, static_cast<int>(f), "latent", "png"), img);
  }
}

int cmd_animate(const CommonOpts& opts, const std::string& maps_dir, bool no_guidance,
                bool self_check) {
  const MotionSequence motion = load_motion(opts.motion_path);
  const int num_frames = static_cast<int>(motion.frames.size());
  DirLock lock(opts.out_dir);

  const AnimateResult result = run_animate(opts, maps_dir, num_frames, !no_guidance);
  if (self_check) {
    // fresh zero-init nets must be a no-op: compare against guidance disabled
    if (!opts.checkpoint.empty())
      throw InvalidArgumentError("--self-check requires fresh nets (no checkpoint)");
    const AnimateResult reference = run_animate(opts, maps_dir, num_frames, false);
    for (std::size_t f = 0; f < result.latents.size(); ++f)
      if (result.latents[f].data != reference.latents[f].data)
        throw AlignmentError("self-check failed: zero-init guidance changed frame " +
                             std::to_string(f));
    std::cerr << "self-check passed: zero-init guidance is a no-op\n";
  }
  export_latents(opts, result.latents);
  std::cerr << "animated " << num_frames << " frame(s) to " << opts.out_dir << "\n";
  emit_json(opts, json{{"command", "animate"},
                       {"out", opts.out_dir},
                       {"frames", num_frames},
                       {"self_check", self_check}});
  return 0;
}

int cmd_attn(const CommonOpts& opts, const std::string& maps_dir,
             std::vector<std::string> conditions, int frame) {
  if (conditions.empty()) conditions = condition_order();
  for (const std::string& name : conditions) {
    if (std::find(condition_order().begin(), condition_order().end(), name) ==
        condition_order().end()) {
      std::string valid;
      for (const auto& n : condition_order()) valid += (valid.empty() ? "" : ", ") + n;
      throw InvalidArgumentError("unknown condition '" + name + "' (valid: " + valid + ")");
    }
  }
  DirLock lock(opts.out_dir);

  GuidanceNetConfig net_config;
  net_config.out_channels = opts.latent_channels;
  ToyDenoiserConfig den_config;
  den_config.latent_channels = opts.latent_channels;
  ToyDenoiser denoiser(den_config, opts.seed);
  GuidanceNets nets = make_guidance_nets(net_config, opts.seed);
  if (!opts.checkpoint.empty()) load_checkpoint(opts.checkpoint, denoiser, nets);

  const int cond_size = 2 * opts.latent_size;
  const GuidanceBundle bundle = load_condition_bundle(maps_dir, frame, cond_size, cond_size);
  std::vector<std::string> written;
  for (const std::string& name : conditions) {
    const std::string path = frame_file(opts.out_dir, frame, "attn_" + name, "png");
    dump_attention(nets.at(name), bundle.at(name), path);
    written.push_back(path);
    std::cerr << "wrote " << path << "\n";
  }
  emit_json(opts, json{{"command", "attn"}, {"files", written}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D-parametric guidance pipeline: body evaluation, shape alignment, "
               "guidance-map rendering, toy diffusion, temporal aggregation"};
  app.set_config("--config", "", "Read options from an INI file (flags win)");
  app.require_subcommand(1);

  CommonOpts opts;
  app.add_option("--body", opts.body_path, "CHMPBODY model file");
  app.add_option("--motion", opts.motion_path, "motion sequence JSON");
  app.add_option("--shape", opts.shape_path, "reference shape JSON ({\"beta\": [...]})");
  app.add_option("--out", opts.out_dir, "output directory");
  app.add_option("--checkpoint", opts.checkpoint, "CHMPNETS weight checkpoint");
  app.add_option("--width", opts.width, "render width");
  app.add_option("--height", opts.height, "render height");
  app.add_option("--latent-size", opts.latent_size, "latent H=W");
  app.add_option("--latent-channels", opts.latent_channels, "latent channel count");
  app.add_option("--T", opts.diffusion_T, "diffusion steps");
  app.add_option("--beta-start", opts.beta_start, "schedule beta start");
  app.add_option("--beta-end", opts.beta_end, "schedule beta end");
  app.add_option("--steps", opts.sample_steps, "sampler steps");
  app.add_option("--window", opts.window_len, "temporal window length");
  app.add_option("--stride", opts.window_stride, "temporal window stride");
  app.add_option("--seed", opts.seed, "global seed (all randomness derives from it)");
  app.add_flag("--json", opts.json_out, "print a JSON summary to stdout");
  app.add_flag("!--no-backface-cull", opts.backface_cull, "disable back-face culling");

  auto* toy = app.add_subcommand("make-toy-body", "write a procedural toy body model");
  int toy_v = 100, toy_k = 5, toy_s = 10;
  bool toy_pose_dirs = false;
  std::string toy_out = "toy_body.chmpbody";
  toy->add_option("--vertices", toy_v, "vertex count");
  toy->add_option("--joints", toy_k, "joint count");
  toy->add_option("--shapes", toy_s, "shape basis size");
  toy->add_flag("--pose-dirs", toy_pose_dirs, "include pose corrective blend shapes");
  toy->add_option("--out-file", toy_out, "output path");

  auto* align = app.add_subcommand("align", "transfer reference shape onto a motion sequence");
  std::string align_out = "aligned.json";
  std::string ref_bbox;
  int anchor_frame = 0;
  align->add_option("--out-file", align_out, "aligned motion output path");
  align->add_option("--ref-bbox", ref_bbox, "pixel-align cameras to x,y,w,h");
  align->add_option("--anchor-frame", anchor_frame, "frame used for camera fitting");

  auto* render = app.add_subcommand("render", "render guidance maps per frame");

  auto* animate = app.add_subcommand("animate", "sample latents over temporal windows");
  std::string maps_dir;
  bool no_guidance = false, self_check = false;
  animate->add_option("--maps", maps_dir, "rendered guidance maps directory");
  animate->add_flag("--no-guidance", no_guidance, "run unconditioned");
  animate->add_flag("--self-check", self_check,
                    "verify zero-init guidance matches the unconditioned run");

  auto* attn = app.add_subcommand("attn", "export guidance self-attention saliency");
  std::vector<std::string> attn_conditions;
  int attn_frame = 0;
  attn->add_option("--maps", maps_dir, "rendered guidance maps directory");
  attn->add_option("--condition", attn_conditions, "condition name(s), default all");
  attn->add_option("--frame", attn_frame, "frame index");

  // let global options appear after the subcommand name
  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (toy->parsed()) return cmd_make_toy_body(opts, toy_v, toy_k, toy_s, toy_pose_dirs, toy_out);
    if (align->parsed()) return cmd_align(opts, align_out, ref_bbox, anchor_frame);
    if (render->parsed()) return cmd_render(opts);
    if (animate->parsed())
      return cmd_animate(opts, maps_dir.empty() ? opts.out_dir : maps_dir, no_guidance,
                         self_check);
    if (attn->parsed())
      return cmd_attn(opts, maps_dir.empty() ? opts.out_dir : maps_dir, attn_conditions,
                      attn_frame);
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const AlignmentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
