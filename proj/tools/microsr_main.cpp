// Command-line surface: dataset preparation/synthesis, two-phase training,
// tiled inference, evaluation and comparison montages.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>

#include "microsr/evaluate.hpp"
#include "microsr/image_io.hpp"
#include "microsr/infer.hpp"
#include "microsr/montage.hpp"
#include "microsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace microsr;

namespace {

struct PrepareArgs {
  std::string data_dir;
  std::int64_t synthetic = 0;
  std::int64_t size = 256;  // HR side length of synthetic pairs
  double noise = 0.05;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::int64_t patch = 64;
  double overlap = 0.5;
};

struct TrainArgs {
  std::string manifest;
  std::string out_dir = "run";
  std::string preset;
  std::string resume;
  bool phase1_only = false;
  // model
  std::int64_t num_rrdb = 23;
  std::int64_t base_channels = 64;
  std::int64_t growth_channels = 32;
  double residual_scale = 0.2;
  double leak = 0.2;
  double init_scale = 0.1;
  // discriminator
  std::vector<std::int64_t> disc_channels = {64, 64, 128, 128, 256, 256, 512, 512};
  std::int64_t disc_dense_units = 1024;
  // extractor
  std::string ext_weights;
  std::vector<std::int64_t> ext_channels = {64, 128, 256};
  std::int64_t ext_truncate_block = 3;
  // losses
  double pixel_weight = 1e-2;
  double perceptual_weight = 1e-2;
  double adversarial_weight = 1.0;
  std::string pixel_norm = "l1";
  std::string perceptual_norm = "l1";
  bool use_texture = false;
  // schedule
  std::int64_t phase1_epochs = 50;
  std::int64_t phase2_epochs = 50;
  double lr_initial = 1e-4;
  double lr_decay = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.99;
  std::int64_t batch_size = 16;
  std::uint64_t seed = 0;
  // data
  std::int64_t patch = 64;
  double overlap = 0.5;
};

struct InferArgs {
  std::string ckpt;
  std::vector<std::string> inputs;
  std::string out_dir = ".";
  std::int64_t tile = 256;
  std::int64_t tile_overlap = 32;
};

struct EvaluateArgs {
  std::string ckpt;
  std::string manifest;
  std::string montage_dir;
  std::vector<std::string> extra_ckpts;
  std::int64_t tile = 256;
  std::int64_t tile_overlap = 32;
};

std::int64_t patches_per_image(std::int64_t lr_h, std::int64_t lr_w, std::int64_t patch,
                               double overlap) {
  const std::int64_t stride = static_cast<std::int64_t>(std::llround(patch * (1.0 - overlap)));
  if (stride < 1) return 0;
  if (lr_h < patch || lr_w < patch) return 0;
  return ((lr_h - patch) / stride + 1) * ((lr_w - patch) / stride + 1);
}

int cmd_prepare(const PrepareArgs& a) {
  fs::create_directories(a.out_dir);
  std::vector<std::pair<std::string, std::string>> entries;
  std::int64_t forecast = 0;

  if (a.synthetic > 0) {
    auto pairs = generate_synthetic_dataset(a.synthetic, a.size, a.noise, a.seed);
    fs::create_directories(fs::path(a.out_dir) / "lr");
    fs::create_directories(fs::path(a.out_dir) / "hr");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      std::ostringstream name;
      name << "pair_" << std::setw(4) << std::setfill('0') << i << ".png";
      const std::string lr_path = (fs::path(a.out_dir) / "lr" / name.str()).string();
      const std::string hr_path = (fs::path(a.out_dir) / "hr" / name.str()).string();
      save_grayscale(lr_path, pairs[i].lr, 16);
      save_grayscale(hr_path, pairs[i].hr, 16);
      entries.emplace_back(lr_path, hr_path);
      forecast += patches_per_image(pairs[i].lr.h, pairs[i].lr.w, a.patch, a.overlap);
    }
  } else {
    const fs::path lr_dir = fs::path(a.data_dir) / "lr";
    const fs::path hr_dir = fs::path(a.data_dir) / "hr";
    if (!fs::is_directory(lr_dir) || !fs::is_directory(hr_dir)) {
      throw DataError("dataset directory must contain lr/ and hr/ subdirectories: " + a.data_dir);
    }
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(lr_dir)) {
      if (e.is_regular_file()) names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    std::int64_t invalid = 0;
    for (const auto& name : names) {
      const std::string lr_path = (lr_dir / name).string();
      const std::string hr_path = (hr_dir / name).string();
      try {
        auto pair = load_image_pair(lr_path, hr_path);
        entries.emplace_back(lr_path, hr_path);
        forecast += patches_per_image(pair.lr.h, pair.lr.w, a.patch, a.overlap);
      } catch (const std::exception& e) {
        ++invalid;
        std::cerr << "invalid pair " << name << ": " << e.what() << "\n";
      }
    }
    if (invalid > 0) std::cerr << invalid << " pair(s) rejected\n";
  }

  if (entries.empty()) throw DataError("no valid image pairs found");
  const std::string manifest = (fs::path(a.out_dir) / "manifest.tsv").string();
  write_manifest(manifest, entries);
  std::cout << "pairs: " << entries.size() << "\n"
            << "patch forecast (patch " << a.patch << ", overlap " << a.overlap
            << "): " << forecast << " total, " << forecast / static_cast<std::int64_t>(entries.size())
            << " per image\n"
            << "manifest: " << manifest << "\n";
  return 0;
}

void apply_preset(TrainArgs& a) {
  if (a.preset.empty() || a.preset == "final") return;
  if (a.preset == "pixel-l2") {
    a.pixel_norm = "l2";
    a.phase1_only = true;
  } else if (a.preset == "gan-l2") {
    a.pixel_norm = "l2";
    a.perceptual_norm = "l2";
  } else if (a.preset == "texture") {
    a.use_texture = true;
  } else {
    throw DataError("unknown preset '" + a.preset +
                    "' (want final, pixel-l2, gan-l2 or texture)");
  }
}

int cmd_train(const TrainArgs& args) {
  TrainerSetup setup;
  setup.gen_cfg.num_rrdb = args.num_rrdb;
  setup.gen_cfg.base_channels = args.base_channels;
  setup.gen_cfg.growth_channels = args.growth_channels;
  setup.gen_cfg.residual_scale = args.residual_scale;
  setup.gen_cfg.leak = args.leak;
  setup.gen_cfg.init_scale = args.init_scale;

  setup.disc_cfg.input_size = 2 * args.patch;
  setup.disc_cfg.channel_sequence = args.disc_channels;
  setup.disc_cfg.dense_units = args.disc_dense_units;
  setup.disc_cfg.leak = args.leak;
  setup.disc_cfg.init_scale = args.init_scale;

  setup.ext_cfg.weight_file = args.ext_weights;
  setup.ext_cfg.block_channels = args.ext_channels;
  setup.ext_cfg.convs_per_block.assign(args.ext_channels.size(), 2);
  if (setup.ext_cfg.convs_per_block.size() >= 3) setup.ext_cfg.convs_per_block[2] = 4;
  setup.ext_cfg.truncate_block = args.ext_truncate_block;
  setup.ext_cfg.seed = mix_seed(args.seed, 12);

  setup.weights.pixel = args.pixel_weight;
  setup.weights.perceptual = args.perceptual_weight;
  setup.weights.adversarial = args.adversarial_weight;
  setup.weights.pixel_norm = parse_norm(args.pixel_norm);
  setup.weights.perceptual_norm = parse_norm(args.perceptual_norm);
  setup.weights.use_texture_instead_of_perceptual = args.use_texture;

  setup.schedule.phase1_epochs = args.phase1_epochs;
  setup.schedule.phase2_epochs = args.phase2_epochs;
  setup.schedule.lr_initial = args.lr_initial;
  setup.schedule.lr_decay_per_epoch = args.lr_decay;
  setup.schedule.beta1 = args.beta1;
  setup.schedule.beta2 = args.beta2;
  setup.schedule.batch_size = args.batch_size;
  setup.schedule.seed = args.seed;

  setup.patch_size = args.patch;
  setup.overlap = args.overlap;
  setup.phase1_only = args.phase1_only;
  setup.out_dir = args.out_dir;
  setup.resume_from = args.resume;

  // Report config conflicts before loading any data.
  setup.gen_cfg.validate();
  setup.schedule.validate();
  setup.weights.validate();
  if (!setup.phase1_only && setup.schedule.phase2_epochs > 0) setup.disc_cfg.validate();

  std::vector<ImagePair> dataset;
  for (const auto& [lr, hr] : read_manifest(args.manifest)) {
    dataset.push_back(load_image_pair(lr, hr));
  }

  auto outcome = train<float>(setup, dataset);
  std::cout << "steps: " << outcome.steps_run << "\n";
  if (outcome.has_validation) {
    std::cout << "validation PSNR: " << outcome.last_val_psnr
              << " dB, SSIM: " << outcome.last_val_ssim << "\n";
  }
  if (outcome.collapse_warning) {
    std::cout << "warning: discriminator collapse detected (L_D < 1e-6 for 100 steps)\n";
  }
  std::cout << "final checkpoint: " << outcome.final_checkpoint << "\n"
            << "metrics log: " << setup.out_dir << "/metrics.csv\n";
  return 0;
}

int cmd_infer(const InferArgs& a) {
  auto st = load_checkpoint<float>(a.ckpt);
  fs::create_directories(a.out_dir);
  for (const auto& input : a.inputs) {
    const auto loaded = load_grayscale(input);
    const auto t0 = std::chrono::steady_clock::now();
    const Image out = infer_tiled(*st.gen, loaded.image, a.tile, a.tile_overlap);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const fs::path in_path(input);
    const std::string out_path =
        (fs::path(a.out_dir) / (in_path.stem().string() + "_x2" + in_path.extension().string()))
            .string();
    save_grayscale(out_path, out, loaded.bit_depth);
    std::cout << input << " (" << loaded.image.h << "x" << loaded.image.w << ") -> " << out_path
              << " (" << out.h << "x" << out.w << ") in " << std::fixed << std::setprecision(1)
              << ms << " ms\n";
  }
  return 0;
}

std::string fmt_metric(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

int cmd_evaluate(const EvaluateArgs& a) {
  auto st = load_checkpoint<float>(a.ckpt);
  std::vector<ImagePair> pairs;
  for (const auto& [lr, hr] : read_manifest(a.manifest)) pairs.push_back(load_image_pair(lr, hr));

  auto restore = [&](const Image& lr) { return infer_tiled(*st.gen, lr, a.tile, a.tile_overlap); };
  const auto summary = evaluate_pairs(pairs, restore);

  std::cout << "image\tbicubic_psnr\tbicubic_ssim\tmodel_psnr\tmodel_ssim\n";
  for (const auto& row : summary.rows) {
    std::cout << row.id << '\t' << fmt_metric(row.psnr_bicubic) << '\t'
              << fmt_metric(row.ssim_bicubic) << '\t' << fmt_metric(row.psnr_model) << '\t'
              << fmt_metric(row.ssim_model) << '\n';
  }
  std::cout << "mean\t" << fmt_metric(summary.mean_psnr_bicubic) << '\t'
            << fmt_metric(summary.mean_ssim_bicubic) << '\t' << fmt_metric(summary.mean_psnr_model)
            << '\t' << fmt_metric(summary.mean_ssim_model) << '\n';

  if (!a.montage_dir.empty()) {
    fs::create_directories(a.montage_dir);
    std::vector<TrainingState<float>> extras;
    for (const auto& path : a.extra_ckpts) extras.push_back(load_checkpoint<float>(path));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      std::vector<Image> panels;
      panels.push_back(bicubic_upsample2x(pairs[i].lr));
      for (auto& ex : extras)
        panels.push_back(infer_tiled(*ex.gen, pairs[i].lr, a.tile, a.tile_overlap));
      panels.push_back(restore(pairs[i].lr));
      panels.push_back(pairs[i].hr);
      std::ostringstream name;
      name << "montage_" << std::setw(4) << std::setfill('0') << i << ".png";
      save_grayscale((fs::path(a.montage_dir) / name.str()).string(), make_montage(panels), 8);
    }
    std::cout << "montages: " << a.montage_dir << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint denoising and 2x super-resolution for grayscale microscopy images"};
  app.require_subcommand(1);

  PrepareArgs pa;
  auto* prepare = app.add_subcommand("prepare", "Validate a dataset or synthesize one; write a manifest");
  auto* data_opt = prepare->add_option("--data", pa.data_dir, "Dataset dir with lr/ and hr/ subdirectories");
  auto* synth_opt = prepare->add_option("--synthetic", pa.synthetic, "Generate N synthetic pairs");
  prepare->add_option("--size", pa.size, "Synthetic HR side length (LR is half)")->capture_default_str();
  prepare->add_option("--noise", pa.noise, "Synthetic LR noise sigma")->capture_default_str();
  prepare->add_option("--seed", pa.seed, "Synthesis seed")->capture_default_str();
  prepare->add_option("--out", pa.out_dir, "Output directory")->capture_default_str();
  prepare->add_option("--patch", pa.patch, "Patch size for the forecast")->capture_default_str();
  prepare->add_option("--overlap", pa.overlap, "Patch overlap fraction")->capture_default_str();
  data_opt->excludes(synth_opt);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Two-phase training (pixel pre-training, then GAN)");
  tr->set_config("--config", "", "Flat key = value config file; explicit flags override it");
  tr->add_option("--manifest", ta.manifest, "Manifest written by prepare")->required();
  tr->add_option("--out", ta.out_dir, "Run directory for checkpoints and metrics.csv")->capture_default_str();
  tr->add_option("--preset", ta.preset, "final | pixel-l2 | gan-l2 | texture");
  tr->add_option("--resume", ta.resume, "Resume from a checkpoint");
  tr->add_flag("--phase1-only", ta.phase1_only, "Stop after the pixel-loss phase");
  tr->add_option("--num-rrdb", ta.num_rrdb)->capture_default_str();
  tr->add_option("--base-channels", ta.base_channels)->capture_default_str();
  tr->add_option("--growth-channels", ta.growth_channels)->capture_default_str();
  tr->add_option("--residual-scale", ta.residual_scale)->capture_default_str();
  tr->add_option("--leak", ta.leak)->capture_default_str();
  tr->add_option("--init-scale", ta.init_scale)->capture_default_str();
  tr->add_option("--disc-channels", ta.disc_channels)->delimiter(',')->capture_default_str();
  tr->add_option("--disc-dense-units", ta.disc_dense_units)->capture_default_str();
  tr->add_option("--ext-weights", ta.ext_weights, "Extractor weight container (default: seeded random)");
  tr->add_option("--ext-channels", ta.ext_channels)->delimiter(',')->capture_default_str();
  tr->add_option("--ext-truncate-block", ta.ext_truncate_block)->capture_default_str();
  tr->add_option("--pixel-weight", ta.pixel_weight)->capture_default_str();
  tr->add_option("--perceptual-weight", ta.perceptual_weight)->capture_default_str();
  tr->add_option("--adversarial-weight", ta.adversarial_weight)->capture_default_str();
  tr->add_option("--pixel-norm", ta.pixel_norm, "l1 | l2")->capture_default_str();
  tr->add_option("--perceptual-norm", ta.perceptual_norm, "l1 | l2")->capture_default_str();
  tr->add_flag("--texture", ta.use_texture, "Texture (Gram) loss instead of perceptual");
  tr->add_option("--phase1-epochs", ta.phase1_epochs)->capture_default_str();
  tr->add_option("--phase2-epochs", ta.phase2_epochs)->capture_default_str();
  tr->add_option("--epochs", [&ta](const std::vector<std::string>& v) {
    ta.phase1_epochs = ta.phase2_epochs = std::stoll(v.at(0));
    return true;
  }, "Set both phase epoch counts at once");
  tr->add_option("--lr", ta.lr_initial)->capture_default_str();
  tr->add_option("--lr-decay", ta.lr_decay)->capture_default_str();
  tr->add_option("--beta1", ta.beta1)->capture_default_str();
  tr->add_option("--beta2", ta.beta2)->capture_default_str();
  tr->add_option("--batch", ta.batch_size)->capture_default_str();
  tr->add_option("--seed", ta.seed)->capture_default_str();
  tr->add_option("--patch", ta.patch)->capture_default_str();
  tr->add_option("--overlap", ta.overlap)->capture_default_str();

  InferArgs ia;
  auto* inf = app.add_subcommand("infer", "Tiled 2x inference on grayscale images");
  inf->add_option("--ckpt", ia.ckpt, "Checkpoint file")->required();
  inf->add_option("--input", ia.inputs, "Input image(s)")->required();
  inf->add_option("--out", ia.out_dir, "Output directory")->capture_default_str();
  inf->add_option("--tile", ia.tile, "LR tile size")->capture_default_str();
  inf->add_option("--tile-overlap", ia.tile_overlap, "LR tile overlap")->capture_default_str();

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "PSNR/SSIM vs bicubic baseline; optional montages");
  ev->add_option("--ckpt", ea.ckpt, "Checkpoint file")->required();
  ev->add_option("--manifest", ea.manifest, "Manifest with HR ground truth")->required();
  ev->add_option("--montage", ea.montage_dir, "Write side-by-side montages here");
  ev->add_option("--extra-ckpt", ea.extra_ckpts, "Intermediate checkpoints as extra panels");
  ev->add_option("--tile", ea.tile)->capture_default_str();
  ev->add_option("--tile-overlap", ea.tile_overlap)->capture_default_str();

  try {
    app.parse(argc, argv);
    if (*prepare) {
      if (pa.synthetic <= 0 && pa.data_dir.empty()) {
        std::cerr << "prepare: need --data or --synthetic\n";
        return 1;
      }
      return cmd_prepare(pa);
    }
    if (*tr) {
      apply_preset(ta);
      return cmd_train(ta);
    }
    if (*inf) return cmd_infer(ia);
    if (*ev) return cmd_evaluate(ea);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
