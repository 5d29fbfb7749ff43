// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/checkpoint.hpp"
#include "dynsplat/dataset.hpp"
#include "dynsplat/dynmask.hpp"
#include "dynsplat/evaluate.hpp"
#include "dynsplat/raw_io.hpp"
#include "dynsplat/rasterizer.hpp"
#include "dynsplat/sceneflow.hpp"
#include "dynsplat/synthetic.hpp"
#include "dynsplat/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace dynsplat;

namespace {

void write_text(const fs::path &file, const std::string &text) {
  if (file.has_parent_path())
    fs::create_directories(file.parent_path());
  io::atomic_write(file, text + "\n");
}

int run_synth(const fs::path &spec, const fs::path &out) {
  const SceneDataset ds = generate_synthetic(load_scene_spec(spec));
  save_dataset(ds, out);
  std::cout << "wrote " << ds.num_frames() << " frames to " << out << "\n";
  return 0;
}

int run_masks(const fs::path &dataset, std::optional<fs::path> out, std::uint64_t seed, double eps_temp,
              const std::string &eps_dyn) {
  const SceneDataset ds = load_dataset(dataset);
  DynMaskOptions opt;
  opt.seed = seed;
  opt.eps_temp = eps_temp;
  if (eps_dyn != "auto") {
    try {
      opt.eps_dyn = std::stod(eps_dyn);
    } catch (const std::exception &) {
      throw ValidationError("--eps-dyn expects a number or 'auto'");
    }
  }
  const MotionScoreTable table = compute_motion_scores(ds.flow_fwd, ds.flow_bwd, ds.uncertainty, ds.objects, opt);
  const std::vector<Mask> masks = compose_dynamic_masks(table, ds.objects);
  const fs::path dir = out.value_or(dataset / "dynmask");
  fs::create_directories(dir);
  for (std::size_t t = 0; t < masks.size(); ++t)
    io::write_u8(dir / io::frame_name(static_cast<int>(t), ".u8"), masks[t]);

  nlohmann::json j;
  j["eps_temp"] = table.eps_temp;
  j["eps_dyn"] = table.eps_dyn;
  j["dynamic"] = dynamic_objects(table);
  for (const auto &[id, s] : table.objects)
    j["objects"][std::to_string(id)] = {{"score", s.score}, {"frames", s.frames}, {"per_frame", table.per_frame.at(id)}};
  write_text(dir / "scores.json", j.dump(2));
  std::cout << "dynamic objects:";
  for (int id : dynamic_objects(table))
    std::cout << " " << id;
  std::cout << "\n";
  return 0;
}

int run_train(const fs::path &dataset, const fs::path &config, const fs::path &out, std::optional<std::uint64_t> seed) {
  TrainConfig cfg = load_train_config(config);
  if (seed)
    cfg.seed = *seed;
  const SceneDataset ds = load_dataset(dataset);
  fs::create_directories(out);
  write_text(out / "config.json", train_config_to_json(cfg));
  TrainOptions opts;
  opts.out_dir = out;
  const TrainResult r = train(ds, cfg, opts);
  std::cout << "trained " << cfg.iters_total << " iterations: " << r.set.statics.size() << " static, "
            << r.set.rigids.size() << " rigid, " << r.set.transients.size() << " transient\n";
  return 0;
}

int run_render(const fs::path &ckpt, int frame, std::optional<fs::path> cam_file, std::optional<fs::path> dataset,
               const fs::path &out) {
  const GaussianSet set = load_checkpoint(ckpt);
  CameraFrame cam;
  if (cam_file) {
    const std::vector<CameraFrame> cams = load_cameras(*cam_file);
    if (cams.empty())
      throw ValidationError("camera file holds no cameras");
    cam = cams.size() == 1 ? cams[0] : cams.at(frame);
  } else if (dataset) {
    const std::vector<CameraFrame> cams = load_cameras(*dataset / "cameras.json");
    if (frame < 0 || frame >= static_cast<int>(cams.size()))
      throw ValidationError("frame index out of range");
    cam = cams[frame];
  } else {
    throw ValidationError("render needs --cam or --dataset");
  }
  const RenderOutputs r = render(set, cam, frame);
  fs::create_directories(out);
  io::write_ppm(out / "color.ppm", r.color());
  io::write_f32(out / "alpha.f32", r.alpha);
  io::write_f32(out / "depth.f32", r.depth());
  io::write_f32(out / "dyn_mask.f32", r.dyn_mask());
  io::write_f32(out / "normal.f32", r.normal());
  io::write_f32(out / "v_fwd.f32", r.velocity_fwd());
  io::write_f32(out / "v_bwd.f32", r.velocity_bwd());
  io::write_f32(out / "corr.f32", r.correspondence());
  std::cout << "wrote " << out << "\n";
  return 0;
}

int run_eval(const fs::path &ckpt, const fs::path &dataset, std::optional<fs::path> out) {
  const GaussianSet set = load_checkpoint(ckpt);
  const SceneDataset ds = load_dataset(dataset);
  const EvaluationReport rep = evaluate(set, ds, evaluation_views(ds));
  if (out)
    write_text(*out, rep.to_json());
  for (const auto &v : rep.views)
    std::cout << nlohmann::json{{"frame", v.frame}, {"psnr", v.psnr}, {"ssim", v.ssim}}.dump() << "\n";
  nlohmann::json mean = {{"mean_psnr", rep.mean_psnr}, {"mean_ssim", rep.mean_ssim}};
  if (rep.mean_mask_iou)
    mean["mean_mask_iou"] = *rep.mean_mask_iou;
  std::cout << mean.dump() << "\n";
  return 0;
}

int run_hist(const fs::path &ckpt, int bins, const fs::path &out) {
  const DurationHistogram h = duration_histogram(load_checkpoint(ckpt), bins);
  write_text(out, h.to_json());
  fs::path plot = out;
  plot.replace_extension(".ppm");
  write_histogram_plot(h, plot);
  std::cout << "wrote " << out << " and " << plot << "\n";
  return 0;
}

int run_sceneflow(const fs::path &dataset, const fs::path &out) {
  const SceneDataset ds = load_dataset(dataset);
  const int nf = ds.num_frames();
  fs::create_directories(out / "fwd");
  fs::create_directories(out / "bwd");
  for (int t = 0; t < nf; ++t) {
    ImageD fwd(ds.width(), ds.height(), 3), bwd(ds.width(), ds.height(), 3);
    if (t + 1 < nf)
      fwd = forward_scene_flow(ds.depth[t], ds.depth[t + 1], ds.flow_fwd[t], ds.cameras[t], ds.cameras[t + 1]).flow;
    if (t > 0)
      bwd = backward_scene_flow(ds.depth[t], ds.depth[t - 1], ds.flow_bwd[t], ds.cameras[t], ds.cameras[t - 1]).flow;
    io::write_f32(out / "fwd" / io::frame_name(t, ".f32"), fwd);
    io::write_f32(out / "bwd" / io::frame_name(t, ".f32"), bwd);
  }
  std::cout << "wrote scene flow for " << nf << " frames to " << out << "\n";
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"dynsplat: dynamic Gaussian splatting toolkit"};
  app.require_subcommand(1);

  fs::path spec, out, dataset, config, ckpt;
  std::optional<fs::path> opt_out, cam_file, opt_dataset;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> opt_seed;
  double eps_temp = 1e-4;
  std::string eps_dyn = "auto";
  int frame = 0, bins = 20;

  auto *synth = app.add_subcommand("synth", "Generate a synthetic dataset from a scene spec");
  synth->add_option("--spec", spec, "Scene spec JSON")->required();
  synth->add_option("--out", out, "Output dataset directory")->required();

  auto *masks = app.add_subcommand("masks", "Compute object-wise dynamic masks");
  masks->add_option("--dataset", dataset, "Dataset directory")->required();
  masks->add_option("--out", opt_out, "Output directory (default DATASET/dynmask)");
  masks->add_option("--seed", seed, "LMedS seed");
  masks->add_option("--eps-temp", eps_temp, "Per-frame motion threshold");
  masks->add_option("--eps-dyn", eps_dyn, "Object score threshold, or 'auto' for max score / 4");

  auto *trainc = app.add_subcommand("train", "Optimize a Gaussian scene");
  trainc->add_option("--dataset", dataset, "Dataset directory")->required();
  trainc->add_option("--config", config, "TrainConfig JSON")->required();
  trainc->add_option("--out", out, "Output directory")->required();
  trainc->add_option("--seed", opt_seed, "Overrides the config seed");

  auto *renderc = app.add_subcommand("render", "Render every channel of a checkpoint at one frame");
  renderc->add_option("--ckpt", ckpt, "Checkpoint")->required();
  renderc->add_option("--frame", frame, "Frame index")->required();
  renderc->add_option("--cam", cam_file, "cameras.json-style camera file");
  renderc->add_option("--dataset", opt_dataset, "Dataset providing the camera");
  renderc->add_option("--out", out, "Output directory (color.ppm plus float32 channel planes)")->required();

  auto *evalc = app.add_subcommand("eval", "PSNR / SSIM / mask IoU of a checkpoint");
  evalc->add_option("--ckpt", ckpt, "Checkpoint")->required();
  evalc->add_option("--dataset", dataset, "Dataset directory")->required();
  evalc->add_option("--out", opt_out, "Report JSON");

  auto *histc = app.add_subcommand("hist", "Histogram of temporal durations");
  histc->add_option("--ckpt", ckpt, "Checkpoint")->required();
  histc->add_option("--bins", bins, "Number of bins")->required();
  histc->add_option("--out", out, "Histogram JSON (plot written next to it as .ppm)")->required();

  auto *sflow = app.add_subcommand("sceneflow", "3D scene flow from depth and optical flow");
  sflow->add_option("--dataset", dataset, "Dataset directory")->required();
  sflow->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed())
      return run_synth(spec, out);
    if (masks->parsed())
      return run_masks(dataset, opt_out, seed, eps_temp, eps_dyn);
    if (trainc->parsed())
      return run_train(dataset, config, out, opt_seed);
    if (renderc->parsed())
      return run_render(ckpt, frame, cam_file, opt_dataset, out);
    if (evalc->parsed())
      return run_eval(ckpt, dataset, opt_out);
    if (histc->parsed())
      return run_hist(ckpt, bins, out);
    if (sflow->parsed())
      return run_sceneflow(dataset, out);
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
