#include "microsr/trainer.hpp"

#include <algorithm>
#include <iomanip>

namespace microsr {

std::string describe(const TrainSchedule& s) {
  std::ostringstream os;
  os.precision(17);
  os << "phase1_epochs = " << s.phase1_epochs << "\n"
     << "phase2_epochs = " << s.phase2_epochs << "\n"
     << "lr_initial = " << s.lr_initial << "\n"
     << "lr_decay_per_epoch = " << s.lr_decay_per_epoch << "\n"
     << "beta1 = " << s.beta1 << "\n"
     << "beta2 = " << s.beta2 << "\n"
     << "adam_eps = " << s.adam_eps << "\n"
     << "batch_size = " << s.batch_size << "\n"
     << "seed = " << s.seed << "\n";
  return os.str();
}

TrainSchedule parse_schedule(const std::string& text) {
  const auto kv = parse_kv(text);
  auto want = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("schedule snapshot missing key: " + key);
    return it->second;
  };
  TrainSchedule s;
  s.phase1_epochs = std::stoll(want("phase1_epochs"));
  s.phase2_epochs = std::stoll(want("phase2_epochs"));
  s.lr_initial = std::stod(want("lr_initial"));
  s.lr_decay_per_epoch = std::stod(want("lr_decay_per_epoch"));
  s.beta1 = std::stod(want("beta1"));
  s.beta2 = std::stod(want("beta2"));
  s.adam_eps = std::stod(want("adam_eps"));
  s.batch_size = std::stoll(want("batch_size"));
  s.seed = std::stoull(want("seed"));
  return s;
}

void split_train_val(const std::vector<ImagePair>& dataset, std::vector<const ImagePair*>& train,
                     std::vector<const ImagePair*>& val) {
  std::vector<const ImagePair*> sorted;
  sorted.reserve(dataset.size());
  for (const auto& p : dataset) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(),
            [](const ImagePair* a, const ImagePair* b) { return a->id < b->id; });
  train.clear();
  val.clear();
  if (sorted.size() < 5) {
    train = sorted;  // too few pairs to hold anything out
    return;
  }
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i % 10 == 0) {
      val.push_back(sorted[i]);
    } else {
      train.push_back(sorted[i]);
    }
  }
}

namespace {

std::string ckpt_name(std::int64_t phase, std::int64_t epoch) {
  std::ostringstream os;
  os << "ckpt_p" << phase << "_e" << std::setw(3) << std::setfill('0') << epoch << ".bin";
  return os.str();
}

template <typename T>
std::vector<Batch<T>> build_epoch_batches(const std::vector<const ImagePair*>& train,
                                          const TrainerSetup& setup, std::uint64_t epoch_seed) {
  std::vector<PatchPair> patches;
  for (const ImagePair* p : train) {
    auto pp = extract_patches(*p, setup.patch_size, setup.overlap);
    patches.insert(patches.end(), std::make_move_iterator(pp.begin()),
                   std::make_move_iterator(pp.end()));
  }
  // One augmentation stream per epoch keeps the draw sequence reproducible.
  auto rng = make_engine(mix_seed(epoch_seed, 1));
  for (auto& p : patches) p = augment(p, rng).first;
  patches = shuffle_pairs(std::move(patches), mix_seed(epoch_seed, 2));
  return make_batches<T>(patches, setup.schedule.batch_size, setup.drop_last);
}

template <typename T>
std::pair<double, double> evaluate_validation(const Generator<T>& gen,
                                              const std::vector<const ImagePair*>& val) {
  double sum_psnr = 0.0, sum_ssim = 0.0;
  for (const ImagePair* p : val) {
    auto out = gen.forward(image_to_tensor<T>(p->lr));
    const Image img = tensor_to_image(*out);
    sum_psnr += psnr(img, p->hr);
    sum_ssim += ssim(img, p->hr);
  }
  const double n = static_cast<double>(val.size());
  return {sum_psnr / n, sum_ssim / n};
}

}  // namespace

template <typename T>
TrainOutcome train(const TrainerSetup& setup, const std::vector<ImagePair>& dataset) {
  setup.schedule.validate();
  setup.weights.validate();
  setup.gen_cfg.validate();
  if (dataset.empty()) throw DataError("train: dataset is empty");
  for (const auto& p : dataset) validate_pair(p);

  const bool wants_phase2 = !setup.phase1_only && setup.schedule.phase2_epochs > 0;
  if (wants_phase2) {
    setup.disc_cfg.validate();
    setup.ext_cfg.validate();
    if (setup.disc_cfg.input_size != 2 * setup.patch_size) {
      throw DataError("discriminator input size " + std::to_string(setup.disc_cfg.input_size) +
                      " does not match HR patch size " + std::to_string(2 * setup.patch_size));
    }
  }

  std::filesystem::create_directories(setup.out_dir);
  MetricsLog log(setup.out_dir + "/metrics.csv");

  std::vector<const ImagePair*> train_pairs, val_pairs;
  split_train_val(dataset, train_pairs, val_pairs);

  TrainingState<T> st;
  if (!setup.resume_from.empty()) {
    st = load_checkpoint<T>(setup.resume_from);
    if (fnv1a64(describe(st.gen_cfg)) != fnv1a64(describe(setup.gen_cfg))) {
      throw DataError("resume: checkpoint generator config does not match the requested config");
    }
    st.schedule = setup.schedule;
  } else {
    st.gen_cfg = setup.gen_cfg;
    st.disc_cfg = setup.disc_cfg;
    st.schedule = setup.schedule;
    st.gen = std::make_unique<Generator<T>>(setup.gen_cfg, mix_seed(setup.schedule.seed, 10));
    st.opt_g = std::make_unique<AdamGroup<T>>(st.gen->params(), setup.schedule.beta1,
                                              setup.schedule.beta2, setup.schedule.adam_eps);
  }

  TrainOutcome outcome;
  std::string last_ckpt = setup.out_dir + "/ckpt_init.bin";
  if (setup.resume_from.empty()) {
    save_checkpoint(st, last_ckpt);
  } else {
    last_ckpt = setup.resume_from;
  }

  const auto run_validation = [&](std::int64_t phase, std::int64_t epoch, double lr) {
    if (val_pairs.empty()) {
      log.epoch_row(phase, epoch, lr, 0.0, 0.0, false);
      return;
    }
    auto [vp, vs] = evaluate_validation(*st.gen, val_pairs);
    outcome.last_val_psnr = vp;
    outcome.last_val_ssim = vs;
    outcome.has_validation = true;
    log.epoch_row(phase, epoch, lr, vp, vs, true);
  };

  CollapseMonitor monitor;

  // Phase 1: pixel-only pre-training.
  if (st.phase == 1) {
    std::int64_t steps_per_epoch = -1;
    for (std::int64_t e = st.epochs_done; e < setup.schedule.phase1_epochs; ++e) {
      const double lr = lr_at_epoch(setup.schedule, e);
      auto batches =
          build_epoch_batches<T>(train_pairs, setup, mix_seed(setup.schedule.seed, 1000 + e));
      if (steps_per_epoch < 0) steps_per_epoch = static_cast<std::int64_t>(batches.size());
      std::int64_t step = e * steps_per_epoch;
      for (const auto& batch : batches) {
        auto rep = pretrain_step(*st.gen, *st.opt_g, batch, static_cast<T>(lr), setup.weights);
        ++outcome.steps_run;
        if (setup.log_steps) log.step_row(1, e, step++, lr, rep, false);
      }
      st.epochs_done = e + 1;
      run_validation(1, e, lr);
      last_ckpt = setup.out_dir + "/" + ckpt_name(1, e + 1);
      save_checkpoint(st, last_ckpt);
    }
  }

  // Phase 2: joint GAN training with a fresh discriminator unless the
  // checkpoint already carries one.
  if (wants_phase2 && (st.phase == 1 || st.phase == 2)) {
    if (st.phase == 1) {
      st.phase = 2;
      st.epochs_done = 0;
    }
    if (!st.disc) {
      st.disc_cfg = setup.disc_cfg;
      st.disc =
          std::make_unique<Discriminator<T>>(setup.disc_cfg, mix_seed(setup.schedule.seed, 11));
      st.opt_d = std::make_unique<AdamGroup<T>>(st.disc->params(), setup.schedule.beta1,
                                                setup.schedule.beta2, setup.schedule.adam_eps);
    }
    FeatureExtractor<T> extractor(setup.ext_cfg);
    std::int64_t steps_per_epoch = -1;
    for (std::int64_t e = st.epochs_done; e < setup.schedule.phase2_epochs; ++e) {
      const double lr = lr_at_epoch(setup.schedule, e);  // reset to lr_initial at phase start
      auto batches =
          build_epoch_batches<T>(train_pairs, setup, mix_seed(setup.schedule.seed, 2000 + e));
      if (steps_per_epoch < 0) steps_per_epoch = static_cast<std::int64_t>(batches.size());
      std::int64_t step = e * steps_per_epoch;
      for (const auto& batch : batches) {
        auto rep = gan_step(*st.gen, *st.disc, extractor, *st.opt_g, *st.opt_d, batch,
                            static_cast<T>(lr), setup.weights, &monitor);
        ++outcome.steps_run;
        if (setup.log_steps) log.step_row(2, e, step++, lr, rep, true);
      }
      st.epochs_done = e + 1;
      run_validation(2, e, lr);
      last_ckpt = setup.out_dir + "/" + ckpt_name(2, e + 1);
      save_checkpoint(st, last_ckpt);
    }
  }

  outcome.collapse_warning = monitor.warned;
  outcome.final_checkpoint = last_ckpt;
  return outcome;
}

template TrainOutcome train<float>(const TrainerSetup&, const std::vector<ImagePair>&);
template TrainOutcome train<double>(const TrainerSetup&, const std::vector<ImagePair>&);

}  // namespace microsr
