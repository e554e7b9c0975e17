// eegsr: batch driver for the EEG channel super-resolution pipeline.
//
//   synth -> preprocess -> baseline -> pretrain -> gan-train -> sr-infer
//         -> features -> train-clf -> evaluate -> report
//
// Exit codes: 0 ok, 1 other failure, 2 missing input, 3 bad config, 4 NaN.

#include <cstdlib>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <Eigen/Core>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "eegsr/classifier.hpp"
#include "eegsr/config.hpp"
#include "eegsr/gan.hpp"
#include "eegsr/pipeline.hpp"
#include "eegsr/report.hpp"

using namespace eegsr;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> scale;
  std::string data_dir;
  std::string out_dir = "eegsr_out";
  std::optional<std::string> precision;
  std::vector<std::string> overrides;
  std::optional<std::size_t> epochs, batch;
  std::optional<double> adv_weight, gp_weight;
  std::optional<std::size_t> ratio;
  std::optional<std::string> loss_mode;
  bool resume = false;
  std::string model = "gan";
};

struct Run {
  std::string command;
  RunConfig cfg;
  fs::path out;
  fs::path data;

  fs::path scale_dir() const { return out / ("scale" + std::to_string(cfg.scale())); }
  fs::path prepared_dir() const { return scale_dir() / "data"; }

  void persist(const fs::path& dir) const {
    io::write_text(dir / "resolved_config.ini", "# eegsr " + command + "\n" + cfg.to_ini());
  }
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{seed, stream};
  std::mt19937_64 rng(seq);
  return rng();
}

void set_threads() {
  const char* env = std::getenv("EEGSR_THREADS");
  if (!env) return;
  char* end = nullptr;
  long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) throw ConfigError("EEGSR_THREADS must be a positive integer, got '" + std::string(env) + "'");
#ifdef _OPENMP
  omp_set_num_threads(static_cast<int>(n));
#endif
  Eigen::setNbThreads(static_cast<int>(n));
}

// ------------------------------------------------------------- commands

void cmd_synth(const Run& r) {
  auto sc = r.cfg.synthetic();
  fs::path dir = r.out / "raw";
  for (std::size_t k = 0; k < r.cfg.n_subjects(); ++k) {
    auto rec = generate_synthetic(sc, derive_seed(r.cfg.seed(), 100 + k));
    char name[32];
    std::snprintf(name, sizeof name, "S%02zu", k + 1);
    rec.subject_id = name;
    fs::create_directories(dir);
    save_recording(rec, dir / (std::string(name) + ".csv"));
  }
  r.persist(dir);
  std::cout << "synth: wrote " << r.cfg.n_subjects() << " recordings to " << dir.string() << "\n";
}

void cmd_preprocess(const Run& r) {
  fs::path in = r.data.empty() ? r.out / "raw" : r.data;
  if (!fs::is_directory(in)) throw MissingInputError("no recording directory at " + in.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw MissingInputError("no .csv recordings in " + in.string());
  std::vector<RawRecording> recs;
  for (const auto& f : files) recs.push_back(load_recording(f, RecordingFormat::Csv, r.cfg.sample_rate()));
  auto d = preprocess(recs, r.cfg.preprocess());
  for (const auto& w : d.warnings) std::cerr << "warning: " << w << "\n";
  save_prepared(d, r.prepared_dir());
  r.persist(r.prepared_dir());
  std::cout << "preprocess: " << d.train_lr.size() << " train / " << d.val_lr.size() << " val / " << d.test_lr.size()
            << " test segments, " << d.montage.lr_indices.size() << " LR + " << d.montage.hr_indices.size()
            << " HR channels\n";
}

void cmd_baseline(const Run& r) {
  auto d = load_prepared(r.prepared_dir());
  fs::path dir = r.scale_dir() / "baseline";
  save_epoch_set(bicubic_hr(d.val_lr, d.montage), dir / "val_hr", json{{"edge_policy", kBicubicEdgePolicy}});
  save_epoch_set(bicubic_hr(d.test_lr, d.montage), dir / "test_hr", json{{"edge_policy", kBicubicEdgePolicy}});
  r.persist(dir);
  std::cout << "baseline: wrote bicubic predictions to " << dir.string() << "\n";
}

template <class T>
void train_phase(const Run& r, Phase phase, bool resume) {
  auto d = load_prepared(r.prepared_dir());
  const auto C = d.montage.total_channels;
  auto gc = r.cfg.generator(C);
  auto dc = r.cfg.discriminator(C);
  auto tc = r.cfg.train();
  const std::string hash = training_config_hash(tc, gc, dc);
  fs::path dir = r.scale_dir() / to_string(phase);
  fs::path ckpt = dir / "checkpoint";
  const std::size_t target = phase == Phase::Pretrain ? tc.pretrain_epochs : tc.gan_epochs;

  std::optional<Trainer<T>> tr;
  if (resume && fs::exists(ckpt / "checkpoint.json")) {
    tr.emplace(load_checkpoint<T>(ckpt, hash));
    tr->set_schedule(tc.pretrain_epochs, tc.gan_epochs, tc.checkpoint_every);
    std::cout << to_string(phase) << ": resuming after epoch " << tr->epoch() << "\n";
  } else if (phase == Phase::Pretrain) {
    tr.emplace(tc, phase, build_generator<T>(gc, derive_seed(tc.seed, 1)));
  } else {
    fs::path pre = r.scale_dir() / "pretrain" / "checkpoint";
    if (!fs::exists(pre / "generator.json")) throw MissingInputError("no pretrained generator at " + pre.string());
    auto gen = load_model<T>(pre, "generator");
    if (gen.input_shape() != Shape{1, gc.c_lr, gc.seg_len})
      throw ConfigError("pretrained generator does not match the current scale and segment length");
    tr.emplace(tc, phase, std::move(gen), build_discriminator<T>(dc, derive_seed(tc.seed, 2)));
  }

  auto data = TrainData<T>::from_sets(d.train_lr, d.train_hr);
  std::optional<TrainData<T>> val;
  if (!d.val_lr.empty()) val = TrainData<T>::from_sets(d.val_lr, d.val_hr);
  // best/ holds the generator with the lowest validation MSE seen so far.
  fs::path best_dir = dir / "best";
  double best = std::numeric_limits<double>::infinity();
  if (tr->epoch() > 0 && fs::exists(best_dir / "best.json"))
    best = io::read_json(best_dir / "best.json").at("val_mse").get<double>();
  while (tr->epoch() < target) {
    tr->run_epoch(data);
    if (val) {
      double v = evaluate_mse(tr->generator(), *val);
      if (v < best) {
        best = v;
        save_model(tr->generator(), best_dir, "generator");
        io::write_json(best_dir / "best.json", json{{"epoch", tr->epoch()}, {"val_mse", v}});
      }
    }
    const auto& last = tr->history().records.back();
    std::cout << to_string(phase) << " epoch " << tr->epoch() << "/" << target << ": g_total " << last.g_total
              << ", g_mse " << last.g_mse;
    if (phase == Phase::Gan) std::cout << ", d_loss " << last.d_loss << ", gp " << last.gp;
    std::cout << std::endl;
    if (tr->epoch() % tc.checkpoint_every == 0 || tr->epoch() == target) save_checkpoint(*tr, ckpt, hash);
  }
  if (!fs::exists(ckpt / "checkpoint.json")) save_checkpoint(*tr, ckpt, hash);
  io::write_text(dir / "loss_history.csv", tr->history().to_csv());
  double val_mse = d.val_lr.empty()
                       ? std::numeric_limits<double>::quiet_NaN()
                       : evaluate_mse(tr->generator(), TrainData<T>::from_sets(d.val_lr, d.val_hr));
  io::write_json(dir / "summary.json", json{{"epochs", tr->epoch()},
                                            {"generator_steps", tr->generator_steps()},
                                            {"discriminator_steps", tr->discriminator_steps()},
                                            {"val_mse_normalized", d.val_lr.empty() ? json(nullptr) : json(val_mse)},
                                            {"config_hash", hash}});
  r.persist(dir);
  std::cout << to_string(phase) << ": done, normalized val MSE " << val_mse << "\n";
}

template <class T>
void cmd_sr_infer(const Run& r, const std::string& which) {
  if (which != "gan" && which != "pretrain") throw ConfigError("--model must be gan or pretrain");
  auto d = load_prepared(r.prepared_dir());
  fs::path ckpt = r.scale_dir() / which / "checkpoint";
  if (!fs::exists(ckpt / "generator.json")) throw MissingInputError("no generator checkpoint at " + ckpt.string());
  auto gen = load_model<T>(ckpt, "generator");
  fs::path dir = r.scale_dir() / ("sr_" + which);
  save_epoch_set(generator_predict(gen, d.val_lr), dir / "val_hr");
  save_epoch_set(generator_predict(gen, d.test_lr), dir / "test_hr");
  r.persist(dir);
  std::cout << "sr-infer: wrote " << which << " predictions to " << dir.string() << "\n";
}

void cmd_features(const Run& r) {
  auto d = load_prepared(r.prepared_dir());
  auto sr = load_epoch_set(r.scale_dir() / "sr_gan" / "test_hr");
  fs::path dir = r.scale_dir() / "features";
  auto feats = [&](const EpochSet& lr, const EpochSet& hr) {
    return features_from_segments(lr, hr, d.montage, d.norm, d.segments_per_epoch, d.channel_labels);
  };
  write_feature_csv(feats(d.train_lr, d.train_hr), dir / "train_hr.csv");
  write_feature_csv(feats(d.test_lr, d.test_hr), dir / "test_hr.csv");
  write_feature_csv(feats(d.test_lr, sr), dir / "test_wgan.csv");
  r.persist(dir);
  std::cout << "features: wrote PSD features to " << dir.string() << "\n";
}

template <class T>
void cmd_train_clf(const Run& r) {
  auto f = read_feature_csv(r.scale_dir() / "features" / "train_hr.csv");
  auto c = train_classifier<T>(f, r.cfg.classifier());
  fs::path dir = r.scale_dir() / "classifier";
  save_classifier(c, dir);
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < c.epoch_losses.size(); ++e) csv += std::to_string(e + 1) + "," + detail::fmt17(c.epoch_losses[e]) + "\n";
  io::write_text(dir / "loss_history.csv", csv);
  r.persist(dir);
  std::cout << "train-clf: final loss " << c.epoch_losses.back() << "\n";
}

template <class T>
void cmd_evaluate(const Run& r) {
  auto d = load_prepared(r.prepared_dir());
  const int s = r.cfg.scale();
  const std::string hash = read_checkpoint_manifest(r.scale_dir() / "gan" / "checkpoint").at("config_hash");
  std::vector<MetricsRecord> recs;
  for (auto ds : {EvalDataset::Val, EvalDataset::Test}) {
    const auto& truth = ds == EvalDataset::Val ? d.val_hr : d.test_hr;
    const std::string part = ds == EvalDataset::Val ? "val_hr" : "test_hr";
    if (truth.empty()) {
      std::cerr << "warning: " << to_string(ds) << " split is empty; skipped\n";
      continue;
    }
    for (auto m : {SrMethod::Bicubic, SrMethod::WGAN}) {
      auto pred = load_epoch_set(r.scale_dir() / (m == SrMethod::Bicubic ? "baseline" : "sr_gan") / part);
      auto [raw, norm] = hr_errors(pred, truth, d.norm);
      recs.push_back(MetricsRecord::make(ds, s, m, raw, norm, r.cfg.seed(), hash));
    }
  }
  auto clf = load_classifier<T>(r.scale_dir() / "classifier");
  std::vector<ClassMetrics> cms;
  for (auto src : {ClassSource::HR, ClassSource::WGAN}) {
    auto f = read_feature_csv(r.scale_dir() / "features" / (src == ClassSource::HR ? "test_hr.csv" : "test_wgan.csv"));
    std::vector<int> preds;
    for (const auto& p : clf.predict(f.X)) preds.push_back(p.class_id);
    cms.push_back(classification_metrics(preds, f.labels, clf.class_ids, s, src));
  }
  ReportMeta meta;
  meta.extra = {{"seed", std::to_string(r.cfg.seed())}, {"config_hash", hash}};
  fs::path dir = r.scale_dir() / "eval";
  io::write_text(dir / "sr_metrics.csv", metrics_csv(recs, meta));
  io::write_text(dir / "class_metrics.csv", class_metrics_csv(cms, meta));
  r.persist(dir);
  for (const auto& m : recs)
    std::cout << to_string(m.dataset) << " " << to_string(m.method) << ": mse " << m.mse << ", mae " << m.mae << "\n";
  for (const auto& m : cms) std::cout << to_string(m.source) << " accuracy " << m.accuracy << "%\n";
}

void cmd_report(const Run& r) {
  std::vector<fs::path> dirs;
  if (fs::is_directory(r.out))
    for (const auto& e : fs::directory_iterator(r.out))
      if (e.is_directory() && e.path().filename().string().rfind("scale", 0) == 0 && fs::exists(e.path() / "eval"))
        dirs.push_back(e.path() / "eval");
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw MissingInputError("no evaluate outputs under " + r.out.string());
  std::vector<MetricsRecord> recs;
  std::vector<ClassMetrics> cms;
  for (const auto& dir : dirs) {
    for (auto& m : parse_metrics_csv(io::read_text(dir / "sr_metrics.csv"))) recs.push_back(std::move(m));
    for (auto& m : parse_class_metrics_csv(io::read_text(dir / "class_metrics.csv"))) cms.push_back(std::move(m));
  }
  fs::path dir = r.out / "report";
  emit_report(recs, cms, ReportFormat::Markdown, dir / "report.md");
  emit_report(recs, cms, ReportFormat::Csv, dir / "sr_metrics.csv");
  io::write_text(dir / "class_metrics.csv", class_metrics_csv(cms));
  r.persist(dir);
  std::cout << io::read_text(dir / "report.md");
}

template <class T>
void dispatch(const Run& r, const Options& o) {
  const auto& c = r.command;
  if (c == "synth") return cmd_synth(r);
  if (c == "preprocess") return cmd_preprocess(r);
  if (c == "baseline") return cmd_baseline(r);
  if (c == "pretrain") return train_phase<T>(r, Phase::Pretrain, o.resume);
  if (c == "gan-train") return train_phase<T>(r, Phase::Gan, o.resume);
  if (c == "sr-infer") return cmd_sr_infer<T>(r, o.model);
  if (c == "features") return cmd_features(r);
  if (c == "train-clf") return cmd_train_clf<T>(r);
  if (c == "evaluate") return cmd_evaluate<T>(r);
  if (c == "report") return cmd_report(r);
  throw ConfigError("unknown command '" + c + "'");
}

/// Config file first, then generic --set overrides, then dedicated flags.
RunConfig resolve(const std::string& command, const Options& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) {
    if (!fs::exists(o.config_path)) throw MissingInputError("config file " + o.config_path + " not found");
    cfg.load_file(o.config_path);
  }
  for (const auto& a : o.overrides) cfg.set_assignment(a);
  if (o.seed) cfg.set("run.seed", std::to_string(*o.seed));
  if (o.scale) cfg.set("run.scale", std::to_string(*o.scale));
  if (o.precision) cfg.set("run.precision", *o.precision);
  const bool clf = command == "train-clf";
  if (o.epochs)
    cfg.set(clf ? "classifier.epochs" : command == "gan-train" ? "train.gan_epochs" : "train.pretrain_epochs",
            std::to_string(*o.epochs));
  if (o.batch) cfg.set(clf ? "classifier.batch_size" : "train.batch_size", std::to_string(*o.batch));
  if (o.adv_weight) cfg.set("train.adv_weight", detail::shortest(*o.adv_weight));
  if (o.gp_weight) cfg.set("train.gp_weight", detail::shortest(*o.gp_weight));
  if (o.ratio) cfg.set("train.training_ratio", std::to_string(*o.ratio));
  if (o.loss_mode) cfg.set("train.loss_mode", *o.loss_mode);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG channel super-resolution pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "key=value config file with [section] headers");
  app.add_option("--seed", o.seed, "seed for every random stream of the run");
  app.add_option("--scale", o.scale, "channel scale factor")->check(CLI::IsMember({2, 4}));
  app.add_option("--data-dir", o.data_dir, "directory of input recordings (preprocess)");
  app.add_option("--out-dir", o.out_dir, "workspace for all artifacts")->capture_default_str();
  app.add_option("--precision", o.precision, "model precision")->check(CLI::IsMember({"f32", "f64"}));
  app.add_option("--set", o.overrides, "config override section.key=value (repeatable)");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "generate synthetic recordings"},
      {"preprocess", "epoch, split, segment, downsample and normalize recordings"},
      {"baseline", "bicubic channel interpolation on val/test"},
      {"pretrain", "MSE pretraining of the generator"},
      {"gan-train", "adversarial fine-tuning of the pretrained generator"},
      {"sr-infer", "generator predictions on val/test"},
      {"features", "PSD features of HR and super-resolved epochs"},
      {"train-clf", "train the PSD classifier on HR training features"},
      {"evaluate", "SR error and classification metrics"},
      {"report", "markdown and CSV report over every evaluated scale"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (name == "pretrain" || name == "gan-train" || name == "train-clf") {
      sub->add_option("--epochs", o.epochs, "training epochs");
      sub->add_option("--batch", o.batch, "mini-batch size");
    }
    if (name == "pretrain" || name == "gan-train") sub->add_flag("--resume", o.resume, "continue from the checkpoint");
    if (name == "gan-train") {
      sub->add_option("--adv-weight", o.adv_weight, "adversarial loss weight");
      sub->add_option("--gp-weight", o.gp_weight, "gradient penalty weight");
      sub->add_option("--ratio", o.ratio, "generator updates per critic update");
      sub->add_option("--loss-mode", o.loss_mode, "wgan_gp or dcgan_smoothed");
    }
    if (name == "sr-infer") sub->add_option("--model", o.model, "gan or pretrain")->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    set_threads();
    Run r;
    r.command = app.get_subcommands().front()->get_name();
    r.cfg = resolve(r.command, o);
    r.out = o.out_dir;
    r.data = o.data_dir;
    if (r.cfg.precision() == "f64") {
      dispatch<double>(r, o);
    } else {
      dispatch<float>(r, o);
    }
    return 0;
  } catch (const MissingInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
