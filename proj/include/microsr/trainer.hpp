#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "microsr/config_kv.hpp"
#include "microsr/container.hpp"
#include "microsr/data_pipeline.hpp"
#include "microsr/losses.hpp"
#include "microsr/metrics.hpp"
#include "microsr/models.hpp"
#include "microsr/optim.hpp"

namespace microsr {

struct TrainSchedule {
  std::int64_t phase1_epochs = 50;
  std::int64_t phase2_epochs = 50;
  double lr_initial = 1e-4;
  double lr_decay_per_epoch = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  std::int64_t batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const {
    if (phase1_epochs < 0 || phase2_epochs < 0) throw DataError("schedule: epochs must be >= 0");
    if (!(lr_decay_per_epoch > 0.0 && lr_decay_per_epoch <= 1.0)) {
      throw DataError("schedule: lr_decay_per_epoch must be in (0,1]");
    }
    if (batch_size < 1) throw DataError("schedule: batch_size must be >= 1");
  }
};

inline double lr_at_epoch(const TrainSchedule& s, std::int64_t epoch) {
  if (epoch < 0) throw DataError("lr_at_epoch: epoch must be >= 0");
  return s.lr_initial * std::pow(s.lr_decay_per_epoch, static_cast<double>(epoch));
}

std::string describe(const TrainSchedule& s);
TrainSchedule parse_schedule(const std::string& text);

// Adam/AMSGrad over a named parameter group. A missing grad buffer counts as
// an all-zero gradient (the parameter was not on the loss path).
template <typename T>
class AdamGroup {
 public:
  AdamGroup(const std::vector<NamedParam<T>>& params, double beta1, double beta2, double eps)
      : beta1_(static_cast<T>(beta1)), beta2_(static_cast<T>(beta2)), eps_(static_cast<T>(eps)) {
    for (const auto& p : params) states_.emplace_back(p.tensor->data.size());
  }

  void step(std::vector<NamedParam<T>>& params, T lr) {
    if (params.size() != states_.size()) throw ShapeError("optimizer: parameter group changed");
    // Validate every gradient before touching any state so a rejected step
    // leaves the whole group unchanged.
    for (const auto& p : params) {
      for (T g : p.tensor->grad) {
        if (!std::isfinite(g)) {
          throw NumericError("optimizer: non-finite gradient in '" + p.name +
                             "'; step rejected");
        }
      }
    }
    static const std::vector<T> kEmpty;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& t = *params[i].tensor;
      if (t.grad.empty()) {
        const std::vector<T> zeros_grad(t.data.size(), T(0));
        adam_amsgrad_step(t, zeros_grad, states_[i], lr, beta1_, beta2_, eps_);
      } else {
        adam_amsgrad_step(t, t.grad, states_[i], lr, beta1_, beta2_, eps_);
      }
    }
  }

  std::vector<AdamState<T>>& states() { return states_; }
  const std::vector<AdamState<T>>& states() const { return states_; }
  std::int64_t step_count() const { return states_.empty() ? 0 : states_[0].step_count; }

 private:
  std::vector<AdamState<T>> states_;
  T beta1_, beta2_, eps_;
};

struct StepReport {
  double loss = 0.0;   // weighted total
  double pixel = 0.0;  // unweighted terms
  double perceptual = 0.0;
  double adv_g = 0.0;
  double adv_d = 0.0;
  double wall_ms = 0.0;
};

// Phase-1 update: pixel loss only, generator parameters only.
template <typename T>
StepReport pretrain_step(Generator<T>& gen, AdamGroup<T>& opt, const Batch<T>& batch, T lr,
                         const LossWeights& weights) {
  const auto t0 = std::chrono::steady_clock::now();
  auto sr = gen.forward(batch.lr);
  auto pix = norm_loss(sr, batch.hr, weights.pixel_norm);
  auto loss = scale(pix, static_cast<T>(weights.pixel));
  if (!std::isfinite(static_cast<double>(loss->item()))) {
    throw NumericError("pretrain step: non-finite loss on batch starting at pair " +
                       std::to_string(batch.first_index));
  }
  backward(loss);
  opt.step(gen.params(), lr);
  StepReport r;
  r.loss = static_cast<double>(loss->item());
  r.pixel = static_cast<double>(pix->item());
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();
  return r;
}

// Tracks the discriminator-collapse guard across steps.
struct CollapseMonitor {
  std::int64_t consecutive_low = 0;
  bool warned = false;

  // Returns true exactly when the warning threshold is crossed.
  bool observe(double adv_d) {
    consecutive_low = (adv_d < 1e-6) ? consecutive_low + 1 : 0;
    if (consecutive_low >= 100 && !warned) {
      warned = true;
      return true;
    }
    return false;
  }
};

// Phase-2 update: one generator step (pixel + perceptual/texture +
// relativistic adversarial), then one discriminator step on the same real
// batch and the detached fakes.
template <typename T>
StepReport gan_step(Generator<T>& gen, Discriminator<T>& disc, const FeatureExtractor<T>& ext,
                    AdamGroup<T>& opt_g, AdamGroup<T>& opt_d, const Batch<T>& batch, T lr,
                    const LossWeights& weights, CollapseMonitor* monitor = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  StepReport r;

  // Generator update. The real logits are detached so only the fake path
  // carries gradients.
  auto sr = gen.forward(batch.lr);
  auto real_logits = detach(disc.forward(batch.hr));
  auto fake_logits = disc.forward(sr);
  auto rad = make_rad_batch(real_logits, fake_logits);
  auto gl = total_generator_loss(weights, sr, batch.hr, rad, ext);
  if (!std::isfinite(static_cast<double>(gl.total->item()))) {
    throw NumericError("gan step: non-finite generator loss on batch starting at pair " +
                       std::to_string(batch.first_index));
  }
  backward(gl.total);
  opt_g.step(gen.params(), lr);

  // Discriminator update on detached fakes.
  auto real_logits2 = disc.forward(batch.hr);
  auto fake_logits2 = disc.forward(detach(sr));
  auto rad2 = make_rad_batch(real_logits2, fake_logits2);
  auto ld = rad_losses(rad2).discriminator;
  if (!std::isfinite(static_cast<double>(ld->item()))) {
    throw NumericError("gan step: non-finite discriminator loss on batch starting at pair " +
                       std::to_string(batch.first_index));
  }
  backward(ld);
  opt_d.step(disc.params(), lr);

  r.loss = static_cast<double>(gl.total->item());
  r.pixel = static_cast<double>(gl.pixel);
  r.perceptual = static_cast<double>(gl.perceptual);
  r.adv_g = static_cast<double>(gl.adversarial);
  r.adv_d = static_cast<double>(ld->item());
  if (monitor) monitor->observe(r.adv_d);
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();
  return r;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

template <typename T>
constexpr const char* scalar_tag() {
  if constexpr (std::is_same_v<T, float>) return "f32";
  else return "f64";
}

template <typename T>
void save_param_group(Container& c, const std::string& prefix,
                      const std::vector<NamedParam<T>>& params, const AdamGroup<T>* opt) {
  for (const auto& p : params) {
    c.put_array<T>(prefix + "/" + p.name, p.tensor->shape, p.tensor->data);
  }
  if (opt) {
    const auto& st = opt->states();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string stem = "opt_" + prefix + "/" + params[i].name;
      const Shape shape = params[i].tensor->shape;
      c.put_array<T>(stem + "/m", shape, st[i].first_moment);
      c.put_array<T>(stem + "/v", shape, st[i].second_moment);
      c.put_array<T>(stem + "/vmax", shape, st[i].max_second_moment);
    }
    c.put_i64("opt_" + prefix + "/step", opt->step_count());
  }
}

template <typename T>
void load_param_group(const Container& c, const std::string& prefix,
                      std::vector<NamedParam<T>>& params, AdamGroup<T>* opt) {
  for (auto& p : params) {
    Shape shape;
    auto values = c.get_array<T>(prefix + "/" + p.name, &shape);
    if (shape != p.tensor->shape) {
      throw DataError("checkpoint entry '" + prefix + "/" + p.name + "' has shape " +
                      shape_str(shape) + ", model expects " + shape_str(p.tensor->shape));
    }
    p.tensor->data = std::move(values);
  }
  if (opt) {
    auto& st = opt->states();
    const std::int64_t steps = c.get_i64("opt_" + prefix + "/step");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string stem = "opt_" + prefix + "/" + params[i].name;
      st[i].first_moment = c.get_array<T>(stem + "/m");
      st[i].second_moment = c.get_array<T>(stem + "/v");
      st[i].max_second_moment = c.get_array<T>(stem + "/vmax");
      st[i].step_count = steps;
    }
  }
}

// Serialized model parameters, optimizer state, epoch counter, phase tag,
// schedule snapshot and config hashes.
template <typename T>
struct TrainingState {
  GeneratorConfig gen_cfg;
  DiscriminatorConfig disc_cfg;
  std::unique_ptr<Generator<T>> gen;
  std::unique_ptr<AdamGroup<T>> opt_g;
  std::unique_ptr<Discriminator<T>> disc;  // phase 2 only
  std::unique_ptr<AdamGroup<T>> opt_d;
  std::int64_t phase = 1;
  std::int64_t epochs_done = 0;  // completed epochs within the current phase
  TrainSchedule schedule;
};

template <typename T>
void save_checkpoint(const TrainingState<T>& st, const std::string& path) {
  Container c;
  c.put_string("meta/kind", "checkpoint");
  c.put_string("meta/scalar", scalar_tag<T>());
  c.put_i64("meta/phase", st.phase);
  c.put_i64("meta/epochs_done", st.epochs_done);
  c.put_string("meta/schedule", describe(st.schedule));
  c.put_string("meta/gen_config", describe(st.gen_cfg));
  c.put_i64("meta/gen_config_hash", static_cast<std::int64_t>(fnv1a64(describe(st.gen_cfg))));
  save_param_group(c, "gen", st.gen->params(), st.opt_g.get());
  if (st.disc) {
    c.put_string("meta/disc_config", describe(st.disc_cfg));
    c.put_i64("meta/disc_config_hash",
              static_cast<std::int64_t>(fnv1a64(describe(st.disc_cfg))));
    save_param_group(c, "disc", st.disc->params(), st.opt_d.get());
  }
  c.save(path);
}

template <typename T>
TrainingState<T> load_checkpoint(const std::string& path) {
  Container c = Container::load(path);
  if (!c.has("meta/kind") || c.get_string("meta/kind") != "checkpoint") {
    throw DataError("not a checkpoint file: " + path);
  }
  if (c.get_string("meta/scalar") != scalar_tag<T>()) {
    throw DataError("checkpoint scalar type " + c.get_string("meta/scalar") +
                    " does not match this build path (" + scalar_tag<T>() + ")");
  }
  TrainingState<T> st;
  st.phase = c.get_i64("meta/phase");
  st.epochs_done = c.get_i64("meta/epochs_done");
  st.schedule = parse_schedule(c.get_string("meta/schedule"));
  st.gen_cfg = parse_generator_config(c.get_string("meta/gen_config"));
  st.gen = std::make_unique<Generator<T>>(st.gen_cfg, /*seed=*/0);
  st.opt_g = std::make_unique<AdamGroup<T>>(st.gen->params(), st.schedule.beta1,
                                            st.schedule.beta2, st.schedule.adam_eps);
  load_param_group(c, "gen", st.gen->params(), st.opt_g.get());
  if (c.has("meta/disc_config")) {
    st.disc_cfg = parse_discriminator_config(c.get_string("meta/disc_config"));
    st.disc = std::make_unique<Discriminator<T>>(st.disc_cfg, /*seed=*/1);
    st.opt_d = std::make_unique<AdamGroup<T>>(st.disc->params(), st.schedule.beta1,
                                              st.schedule.beta2, st.schedule.adam_eps);
    load_param_group(c, "disc", st.disc->params(), st.opt_d.get());
  }
  return st;
}

// ---------------------------------------------------------------------------
// Full training loop
// ---------------------------------------------------------------------------

struct TrainerSetup {
  GeneratorConfig gen_cfg;
  DiscriminatorConfig disc_cfg;
  FeatureExtractorConfig ext_cfg;
  LossWeights weights;
  TrainSchedule schedule;
  std::int64_t patch_size = 64;
  double overlap = 0.5;
  bool drop_last = false;
  bool phase1_only = false;
  std::string out_dir;
  std::string resume_from;
  bool log_steps = true;
};

struct TrainOutcome {
  std::string final_checkpoint;
  bool collapse_warning = false;
  std::int64_t steps_run = 0;
  double last_val_psnr = 0.0;
  double last_val_ssim = 0.0;
  bool has_validation = false;
};

// Append-only CSV log. Missing values stay empty so every preset's
// active/inactive loss columns are visible.
class MetricsLog {
 public:
  explicit MetricsLog(const std::string& path) : path_(path) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw DataError("cannot open metrics log: " + path);
    if (fresh) {
      out_ << "phase,epoch,step,lr,pixel_loss,perceptual_loss,adv_loss_G,adv_loss_D,val_psnr,"
              "val_ssim,wall_ms\n";
    }
  }

  void step_row(std::int64_t phase, std::int64_t epoch, std::int64_t step, double lr,
                const StepReport& r, bool gan) {
    out_ << phase << ',' << epoch << ',' << step << ',' << lr << ',' << r.pixel << ',';
    if (gan) {
      out_ << r.perceptual << ',' << r.adv_g << ',' << r.adv_d;
    } else {
      out_ << ",,";
    }
    out_ << ",,," << r.wall_ms << '\n';
  }

  void epoch_row(std::int64_t phase, std::int64_t epoch, double lr, double val_psnr,
                 double val_ssim, bool has_val) {
    out_ << phase << ',' << epoch << ",," << lr << ",,,,,";
    if (has_val) {
      out_ << val_psnr << ',' << val_ssim;
    } else {
      out_ << ',';
    }
    out_ << ",\n";
    out_.flush();
  }

 private:
  std::string path_;
  std::ofstream out_;
};

// Deterministic 10% holdout by sorted pair id.
void split_train_val(const std::vector<ImagePair>& dataset, std::vector<const ImagePair*>& train,
                     std::vector<const ImagePair*>& val);

template <typename T>
TrainOutcome train(const TrainerSetup& setup, const std::vector<ImagePair>& dataset);

// Instantiated for float (production) and double (verification).
extern template TrainOutcome train<float>(const TrainerSetup&, const std::vector<ImagePair>&);
extern template TrainOutcome train<double>(const TrainerSetup&, const std::vector<ImagePair>&);

}  // namespace microsr
