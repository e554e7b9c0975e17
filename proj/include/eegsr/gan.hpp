#pragma once

// Supervised MSE pretraining and WGAN-GP fine-tuning of the generator,
// with loss history logging and resumable checkpoints.

#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eegsr/adam.hpp"
#include "eegsr/ops.hpp"
#include "eegsr/serialize.hpp"
#include "eegsr/sr_models.hpp"

namespace eegsr {

enum class LossMode { WGAN_GP, DCGAN_smoothed };

inline const char* to_string(LossMode m) { return m == LossMode::WGAN_GP ? "wgan_gp" : "dcgan_smoothed"; }

inline LossMode parse_loss_mode(const std::string& s) {
  if (s == "wgan_gp") return LossMode::WGAN_GP;
  if (s == "dcgan_smoothed") return LossMode::DCGAN_smoothed;
  throw ConfigError("unknown loss mode '" + s + "' (expected wgan_gp or dcgan_smoothed)");
}

struct TrainConfig {
  std::size_t pretrain_epochs = 50;
  std::size_t gan_epochs = 20;
  std::size_t batch_size = 64;
  AdamConfig adam{1e-4, 0.5, 0.9, 1e-8};
  double gp_weight = 10.0;
  std::size_t training_ratio = 3;  // generator updates per discriminator update
  double adv_weight = 1e-2;
  LossMode loss_mode = LossMode::WGAN_GP;
  double real_label = 0.9;  // DCGAN_smoothed only
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 1;  // epochs

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (training_ratio == 0) throw ConfigError("training_ratio must be >= 1");
    if (!(adam.lr > 0) || !(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) || !(adam.eps > 0))
      throw ConfigError("adam: need lr > 0, betas in [0, 1), eps > 0");
    if (gp_weight < 0) throw ConfigError("gp_weight must be >= 0");
    if (adv_weight < 0) throw ConfigError("adv_weight must be >= 0");
    if (!(real_label > 0 && real_label <= 1)) throw ConfigError("real_label must be in (0, 1]");
    if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be >= 1");
  }

  json to_json() const {
    return json{{"pretrain_epochs", pretrain_epochs}, {"gan_epochs", gan_epochs},
                {"batch_size", batch_size},           {"adam_lr", adam.lr},
                {"adam_beta1", adam.beta1},           {"adam_beta2", adam.beta2},
                {"adam_eps", adam.eps},               {"gp_weight", gp_weight},
                {"training_ratio", training_ratio},   {"adv_weight", adv_weight},
                {"loss_mode", to_string(loss_mode)},  {"real_label", real_label},
                {"seed", seed},                       {"checkpoint_every", checkpoint_every}};
  }
};

// --------------------------------------------------------------- data

/// Paired normalized LR inputs (N, 1, c_lr, T) and HR targets (N, 1, c_hr, T).
template <class T>
struct TrainData {
  Tensor<T> lr, hr;

  static TrainData from_sets(const EpochSet& lr_set, const EpochSet& hr_set) {
    if (lr_set.size() != hr_set.size()) throw ShapeError("LR and HR sets differ in size");
    if (lr_set.empty()) throw Error("training set is empty");
    return {epochs_to_tensor<T>(lr_set), epochs_to_tensor<T>(hr_set)};
  }

  std::size_t size() const { return lr.empty() ? 0 : lr.dim(0); }
};

// ------------------------------------------------------------- losses

/// x_hat = eps * real + (1 - eps) * fake with eps ~ U[0, 1) per sample;
/// returns lambda * mean((||dD/dx_hat|| - 1)^2). The result stays
/// differentiable with respect to the critic parameters.
template <class T>
Var<T> gradient_penalty(const Model<T>& disc, const Tensor<T>& real, const Tensor<T>& fake, double lambda,
                        std::mt19937_64& rng, bool training = true) {
  expect_shape(real.shape(), fake.shape(), "gradient_penalty");
  const std::size_t n = real.dim(0), per = real.stride0();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Tensor<T> mix(real.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T e = static_cast<T>(unif(rng));
    for (std::size_t j = 0; j < per; ++j) mix[i * per + j] = e * real[i * per + j] + (T(1) - e) * fake[i * per + j];
  }
  Var<T> x_hat(std::move(mix), true);
  Var<T> score = disc.forward(x_hat, training, &rng);
  Var<T> g = grad(sum_all(score), {x_hat}, /*create_graph=*/true)[0];
  Var<T> norm = sqrt(sum_per_sample(mul(g, g)));
  Var<T> dev = sub(norm, constant(Tensor<T>(Shape{n}, T(1))));
  return scale(mean(mul(dev, dev)), static_cast<T>(lambda));
}

template <class T>
struct DiscriminatorLoss {
  Var<T> total;
  double wasserstein = 0.0;  // mean D(fake) - mean D(real), or the BCE term
  double gp = 0.0;
};

/// WGAN_GP: mean D(fake) - mean D(real) + GP. DCGAN_smoothed: BCE of
/// sigmoid(D) against `real_label` for real and 0 for fake; no penalty.
template <class T>
DiscriminatorLoss<T> discriminator_loss(const Model<T>& disc, const Tensor<T>& real, const Tensor<T>& fake,
                                        double lambda, std::mt19937_64& rng, LossMode mode = LossMode::WGAN_GP,
                                        double real_label = 0.9, bool training = true) {
  Var<T> d_real = disc.forward(constant(real), training, &rng);
  Var<T> d_fake = disc.forward(constant(fake), training, &rng);
  DiscriminatorLoss<T> out;
  if (mode == LossMode::WGAN_GP) {
    Var<T> w = sub(mean(d_fake), mean(d_real));
    out.wasserstein = static_cast<double>(w.item());
    if (lambda != 0.0) {
      Var<T> gp = gradient_penalty(disc, real, fake, lambda, rng, training);
      out.gp = static_cast<double>(gp.item());
      out.total = add(w, gp);
    } else {
      out.total = w;
    }
  } else {
    Var<T> l = add(bce_with_logits(d_real, Tensor<T>(d_real.shape(), static_cast<T>(real_label))),
                   bce_with_logits(d_fake, Tensor<T>(d_fake.shape(), T(0))));
    out.wasserstein = static_cast<double>(l.item());
    out.total = l;
  }
  return out;
}

template <class T>
struct GeneratorLoss {
  Var<T> total, adv, mse, fake;
};

/// total = adv_weight * adv + MSE(G(lr), hr), where adv = -mean D(G(lr)) for
/// WGAN_GP and the BCE against target 1 for DCGAN_smoothed.
template <class T>
GeneratorLoss<T> generator_loss(const Model<T>& gen, const Model<T>& disc, const Tensor<T>& lr, const Tensor<T>& hr,
                                double adv_weight, std::mt19937_64& gen_rng, std::mt19937_64& disc_rng,
                                LossMode mode = LossMode::WGAN_GP, bool training = true) {
  GeneratorLoss<T> out;
  out.fake = gen.forward(constant(lr), training, &gen_rng);
  Var<T> score = disc.forward(out.fake, training, &disc_rng);
  out.adv = mode == LossMode::WGAN_GP ? scale(mean(score), T(-1))
                                      : bce_with_logits(score, Tensor<T>(score.shape(), T(1)));
  out.mse = mse_loss(out.fake, constant(hr));
  out.total = add(scale(out.adv, static_cast<T>(adv_weight)), out.mse);
  return out;
}

// ------------------------------------------------------------ history

struct LossRecord {
  std::size_t step = 0;
  double g_total = 0, g_adv = 0, g_mse = 0, d_loss = 0, gp = 0;
  bool d_update = false;  // a discriminator update followed this step
};

namespace detail {
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

struct LossHistory {
  std::vector<LossRecord> records;

  std::string to_csv() const {
    std::string s = "step,g_total,g_adv,g_mse,d_loss,gp,d_update\n";
    for (const auto& r : records) {
      s += std::to_string(r.step) + ',' + detail::fmt17(r.g_total) + ',' + detail::fmt17(r.g_adv) + ',' +
           detail::fmt17(r.g_mse) + ',' + detail::fmt17(r.d_loss) + ',' + detail::fmt17(r.gp) + ',' +
           (r.d_update ? "1" : "0") + '\n';
    }
    return s;
  }

  static LossHistory from_csv(const std::string& text) {
    LossHistory h;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line.rfind("step,g_total,g_adv,g_mse,d_loss,gp", 0) != 0) throw ParseError("not a loss history CSV");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto cells = eegsr::detail::split_csv_line(line);
      if (cells.size() != 7) throw ParseError("loss history line " + std::to_string(line_no) + ": expected 7 cells");
      LossRecord r;
      r.step = static_cast<std::size_t>(eegsr::detail::parse_double(cells[0], line_no));
      r.g_total = eegsr::detail::parse_double(cells[1], line_no);
      r.g_adv = eegsr::detail::parse_double(cells[2], line_no);
      r.g_mse = eegsr::detail::parse_double(cells[3], line_no);
      r.d_loss = eegsr::detail::parse_double(cells[4], line_no);
      r.gp = eegsr::detail::parse_double(cells[5], line_no);
      r.d_update = eegsr::detail::parse_double(cells[6], line_no) != 0.0;
      h.records.push_back(r);
    }
    return h;
  }
};

// ------------------------------------------------------------ trainer

enum class Phase { Pretrain, Gan };

inline const char* to_string(Phase p) { return p == Phase::Pretrain ? "pretrain" : "gan"; }

inline Phase parse_phase(const std::string& s) {
  if (s == "pretrain") return Phase::Pretrain;
  if (s == "gan") return Phase::Gan;
  throw ParseError("unknown training phase '" + s + "'");
}

/// Training state for one phase. The batch-order, generator-dropout, and
/// critic streams are seeded from cfg.seed the same way in both phases, so a
/// zero adversarial weight reproduces the pretraining trajectory.
template <class T>
class Trainer {
 public:
  Trainer(TrainConfig cfg, Phase phase, Model<T> gen, std::optional<Model<T>> disc = std::nullopt)
      : cfg_(std::move(cfg)), phase_(phase), gen_(std::move(gen)), disc_(std::move(disc)) {
    cfg_.validate();
    if (phase_ == Phase::Gan && !disc_) throw ConfigError("GAN phase needs a discriminator");
    gen_opt_ = Adam<T>(cfg_.adam, gen_.parameters());
    if (disc_) disc_opt_ = Adam<T>(cfg_.adam, disc_->parameters());
    std::seed_seq s_order{cfg_.seed, std::uint64_t{1}}, s_gen{cfg_.seed, std::uint64_t{2}},
        s_disc{cfg_.seed, std::uint64_t{3}};
    order_rng_.seed(s_order);
    gen_rng_.seed(s_gen);
    disc_rng_.seed(s_disc);
  }

  /// One pass over `data` in a seeded random order.
  void run_epoch(const TrainData<T>& data) {
    const std::size_t n = data.size();
    if (n == 0) throw Error("training set is empty");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng_);
    for (std::size_t start = 0; start < n; start += cfg_.batch_size) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + cfg_.batch_size)));
      step(gather_rows(data.lr, idx), gather_rows(data.hr, idx));
    }
    ++epoch_;
  }

  void train(const TrainData<T>& data, std::size_t epochs,
             const std::function<void(const Trainer&)>& on_epoch_end = nullptr) {
    for (std::size_t e = 0; e < epochs; ++e) {
      run_epoch(data);
      if (on_epoch_end) on_epoch_end(*this);
    }
  }

  /// Replaces the epoch targets and checkpoint cadence, which do not affect
  /// the trajectory.
  void set_schedule(std::size_t pretrain_epochs, std::size_t gan_epochs, std::size_t checkpoint_every) {
    cfg_.pretrain_epochs = pretrain_epochs;
    cfg_.gan_epochs = gan_epochs;
    cfg_.checkpoint_every = checkpoint_every;
    cfg_.validate();
  }

  const TrainConfig& config() const { return cfg_; }
  Phase phase() const { return phase_; }
  const Model<T>& generator() const { return gen_; }
  Model<T>& generator() { return gen_; }
  const std::optional<Model<T>>& discriminator() const { return disc_; }
  const Adam<T>& generator_optimizer() const { return gen_opt_; }
  const Adam<T>& discriminator_optimizer() const { return disc_opt_; }
  const LossHistory& history() const { return history_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t generator_steps() const { return g_steps_; }
  std::size_t discriminator_steps() const { return d_steps_; }

 private:
  void step(const Tensor<T>& lr, const Tensor<T>& hr) {
    LossRecord rec;
    rec.step = g_steps_ + 1;
    std::vector<Var<T>> grads;
    Tensor<T> fake;
    if (phase_ == Phase::Pretrain) {
      Var<T> pred = gen_.forward(constant(lr), true, &gen_rng_);
      Var<T> mse = mse_loss(pred, constant(hr));
      rec.g_mse = rec.g_total = static_cast<double>(mse.item());
      check_finite(rec.g_total, "generator");
      grads = grad(mse, gen_.parameters());
    } else {
      auto gl = generator_loss(gen_, *disc_, lr, hr, cfg_.adv_weight, gen_rng_, disc_rng_, cfg_.loss_mode);
      rec.g_total = static_cast<double>(gl.total.item());
      rec.g_adv = static_cast<double>(gl.adv.item());
      rec.g_mse = static_cast<double>(gl.mse.item());
      check_finite(rec.g_total, "generator");
      grads = grad(gl.total, gen_.parameters());
      fake = gl.fake.value();
    }
    gen_opt_.step(gen_.parameters(), grads);
    ++g_steps_;

    if (phase_ == Phase::Gan && g_steps_ % cfg_.training_ratio == 0) {
      auto dl = discriminator_loss(*disc_, hr, fake, cfg_.gp_weight, disc_rng_, cfg_.loss_mode, cfg_.real_label);
      last_d_loss_ = static_cast<double>(dl.total.item());
      last_gp_ = dl.gp;
      check_finite(last_d_loss_, "discriminator");
      auto dgrads = grad(dl.total, disc_->parameters());
      disc_opt_.step(disc_->parameters(), dgrads);
      ++d_steps_;
      rec.d_update = true;
    }
    rec.d_loss = last_d_loss_;
    rec.gp = last_gp_;
    history_.records.push_back(rec);
  }

  void check_finite(double v, const char* which) const {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite ") + which + " loss at step " + std::to_string(g_steps_ + 1) +
                         " (epoch " + std::to_string(epoch_ + 1) + ")");
    }
  }

  TrainConfig cfg_;
  Phase phase_;
  Model<T> gen_;
  std::optional<Model<T>> disc_;
  Adam<T> gen_opt_, disc_opt_;
  std::mt19937_64 order_rng_, gen_rng_, disc_rng_;
  LossHistory history_;
  std::size_t epoch_ = 0, g_steps_ = 0, d_steps_ = 0;
  double last_d_loss_ = 0.0, last_gp_ = 0.0;

  template <class U>
  friend void save_checkpoint(const Trainer<U>&, const fs::path&, const std::string&);
  template <class U>
  friend Trainer<U> load_checkpoint(const fs::path&, const std::string&);
};

/// MSE pretraining for cfg.pretrain_epochs passes.
template <class T>
Trainer<T> pretrain_generator(Model<T> gen, const TrainData<T>& data, const TrainConfig& cfg,
                              const std::function<void(const Trainer<T>&)>& on_epoch_end = nullptr) {
  Trainer<T> tr(cfg, Phase::Pretrain, std::move(gen));
  tr.train(data, cfg.pretrain_epochs, on_epoch_end);
  return tr;
}

/// Adversarial fine-tuning for cfg.gan_epochs passes, starting from fresh
/// optimizer state.
template <class T>
Trainer<T> train_wgan(Model<T> gen, Model<T> disc, const TrainData<T>& data, const TrainConfig& cfg,
                      const std::function<void(const Trainer<T>&)>& on_epoch_end = nullptr) {
  Trainer<T> tr(cfg, Phase::Gan, std::move(gen), std::move(disc));
  tr.train(data, cfg.gan_epochs, on_epoch_end);
  return tr;
}

/// Inference-mode MSE of G(lr) against hr.
template <class T>
double evaluate_mse(const Model<T>& gen, const TrainData<T>& data, std::size_t batch = 256) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + batch); ++i) idx.push_back(i);
    auto pred = gen.predict(gather_rows(data.lr, idx));
    auto hr = gather_rows(data.hr, idx);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      double d = static_cast<double>(pred[i]) - static_cast<double>(hr[i]);
      sum += d * d;
    }
    count += pred.size();
  }
  return sum / static_cast<double>(count);
}

// ---------------------------------------------------------- checkpoints

/// Hash of everything that must match for a checkpoint to be resumable.
/// Epoch targets and checkpoint cadence are excluded so a run can be extended.
inline std::string training_config_hash(const TrainConfig& cfg, const GeneratorConfig& g,
                                        const DiscriminatorConfig& d) {
  json t = cfg.to_json();
  for (const char* k : {"pretrain_epochs", "gan_epochs", "checkpoint_every"}) t.erase(k);
  json j{{"train", t},
         {"generator", {{"c_lr", g.c_lr}, {"scale", g.scale}, {"seg_len", g.seg_len}, {"dropout", g.dropout},
                        {"width_divisor", g.width_divisor}}},
         {"discriminator", {{"c_hr", d.c_hr}, {"seg_len", d.seg_len}, {"dropout", d.dropout},
                            {"width_divisor", d.width_divisor}}}};
  return fnv1a_hex(j.dump());
}

namespace detail {

inline std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void set_rng_state(std::mt19937_64& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw ParseError("corrupted rng state in checkpoint");
}

template <class T>
void save_adam(const Adam<T>& opt, const fs::path& path) {
  std::vector<Tensor<T>> all = opt.first_moments();
  all.insert(all.end(), opt.second_moments().begin(), opt.second_moments().end());
  io::save_tensors(path, all);
}

template <class T>
void load_adam(Adam<T>& opt, const fs::path& path, std::int64_t steps) {
  std::vector<Shape> shapes;
  for (const auto& m : opt.first_moments()) shapes.push_back(m.shape());
  for (const auto& v : opt.second_moments()) shapes.push_back(v.shape());
  auto all = io::load_tensors<T>(path, shapes, precision_name<T>());
  const std::size_t k = opt.first_moments().size();
  for (std::size_t i = 0; i < k; ++i) {
    opt.first_moments()[i] = all[i];
    opt.second_moments()[i] = all[k + i];
  }
  opt.set_steps(steps);
}

}  // namespace detail

/// Writes the complete trainer state under `dir`, replacing any previous
/// checkpoint there only once the new one is fully written.
template <class T>
void save_checkpoint(const Trainer<T>& tr, const fs::path& dir, const std::string& config_hash) {
  fs::path tmp = dir;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  save_model(tr.gen_, tmp, "generator");
  detail::save_adam(tr.gen_opt_, tmp / "generator_adam.bin");
  if (tr.disc_) {
    save_model(*tr.disc_, tmp, "discriminator");
    detail::save_adam(tr.disc_opt_, tmp / "discriminator_adam.bin");
  }
  io::write_text(tmp / "history.csv", tr.history_.to_csv());
  json m{{"format", "eegsr-checkpoint"},
         {"version", 1},
         {"precision", precision_name<T>()},
         {"config_hash", config_hash},
         {"train_config", tr.cfg_.to_json()},
         {"phase", to_string(tr.phase_)},
         {"epoch", tr.epoch_},
         {"generator_steps", tr.g_steps_},
         {"discriminator_steps", tr.d_steps_},
         {"last_d_loss", tr.last_d_loss_},
         {"last_gp", tr.last_gp_},
         {"generator_adam_steps", tr.gen_opt_.steps()},
         {"discriminator_adam_steps", tr.disc_opt_.steps()},
         {"has_discriminator", tr.disc_.has_value()},
         {"rng", {{"order", detail::rng_state(tr.order_rng_)},
                  {"generator", detail::rng_state(tr.gen_rng_)},
                  {"discriminator", detail::rng_state(tr.disc_rng_)}}}};
  io::write_json(tmp / "checkpoint.json", m);
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

inline json read_checkpoint_manifest(const fs::path& dir) {
  if (!fs::exists(dir / "checkpoint.json")) throw MissingInputError("no checkpoint at " + dir.string());
  json m = io::read_json(dir / "checkpoint.json");
  if (!m.is_object() || m.value("format", "") != "eegsr-checkpoint" || m.value("version", 0) != 1)
    throw ParseError("corrupted or unsupported checkpoint manifest in " + dir.string());
  return m;
}

/// Restores a trainer. Refuses when the stored config hash differs from
/// `expected_hash`.
template <class T>
Trainer<T> load_checkpoint(const fs::path& dir, const std::string& expected_hash) {
  json m = read_checkpoint_manifest(dir);
  try {
    if (m.at("config_hash").get<std::string>() != expected_hash) {
      throw ConfigError("checkpoint " + dir.string() + " was written with config hash " +
                        m.at("config_hash").get<std::string>() + ", current config hashes to " + expected_hash);
    }
    if (m.at("precision").get<std::string>() != precision_name<T>())
      throw ConfigError("checkpoint precision " + m.at("precision").get<std::string>() + " differs from " +
                        precision_name<T>());
    const json& tc = m.at("train_config");
    TrainConfig cfg;
    cfg.pretrain_epochs = tc.at("pretrain_epochs");
    cfg.gan_epochs = tc.at("gan_epochs");
    cfg.batch_size = tc.at("batch_size");
    cfg.adam = {tc.at("adam_lr"), tc.at("adam_beta1"), tc.at("adam_beta2"), tc.at("adam_eps")};
    cfg.gp_weight = tc.at("gp_weight");
    cfg.training_ratio = tc.at("training_ratio");
    cfg.adv_weight = tc.at("adv_weight");
    cfg.loss_mode = parse_loss_mode(tc.at("loss_mode"));
    cfg.real_label = tc.at("real_label");
    cfg.seed = tc.at("seed");
    cfg.checkpoint_every = tc.at("checkpoint_every");

    auto gen = load_model<T>(dir, "generator");
    std::optional<Model<T>> disc;
    if (m.at("has_discriminator").get<bool>()) disc = load_model<T>(dir, "discriminator");
    Trainer<T> tr(cfg, parse_phase(m.at("phase")), std::move(gen), std::move(disc));
    detail::load_adam(tr.gen_opt_, dir / "generator_adam.bin", m.at("generator_adam_steps").get<std::int64_t>());
    if (tr.disc_)
      detail::load_adam(tr.disc_opt_, dir / "discriminator_adam.bin",
                        m.at("discriminator_adam_steps").get<std::int64_t>());
    tr.history_ = LossHistory::from_csv(io::read_text(dir / "history.csv"));
    tr.epoch_ = m.at("epoch");
    tr.g_steps_ = m.at("generator_steps");
    tr.d_steps_ = m.at("discriminator_steps");
    tr.last_d_loss_ = m.at("last_d_loss");
    tr.last_gp_ = m.at("last_gp");
    detail::set_rng_state(tr.order_rng_, m.at("rng").at("order"));
    detail::set_rng_state(tr.gen_rng_, m.at("rng").at("generator"));
    detail::set_rng_state(tr.disc_rng_, m.at("rng").at("discriminator"));
    return tr;
  } catch (const json::exception& e) {
    throw ParseError("corrupted checkpoint manifest in " + dir.string() + ": " + e.what());
  }
}

}  // namespace eegsr
