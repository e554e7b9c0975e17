#pragma once

// Dense softmax classifier over PSD features, with a per-feature z-score
// scaler fitted on the training set.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "eegsr/adam.hpp"
#include "eegsr/ops.hpp"
#include "eegsr/psd.hpp"
#include "eegsr/serialize.hpp"
#include "eegsr/sr_models.hpp"

namespace eegsr {

struct ClassifierTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  AdamConfig adam{1e-3, 0.9, 0.99, 1e-8};
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs == 0 || batch_size == 0) throw ConfigError("classifier: epochs and batch_size must be positive");
    if (!(adam.lr > 0)) throw ConfigError("classifier: learning rate must be positive");
  }
};

/// Per-column mean and population standard deviation (floored at 1e-12).
struct FeatureScaler {
  std::vector<double> mean, scale;

  static FeatureScaler fit(const Eigen::MatrixXd& X) {
    FeatureScaler s;
    const double n = static_cast<double>(X.rows());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      double m = X.col(j).sum() / n;
      double v = (X.col(j).array() - m).square().sum() / n;
      s.mean.push_back(m);
      s.scale.push_back(std::max(std::sqrt(v), 1e-12));
    }
    return s;
  }

  template <class T>
  Tensor<T> transform(const Eigen::MatrixXd& X) const {
    if (static_cast<std::size_t>(X.cols()) != mean.size()) {
      throw ShapeError("classifier expects " + std::to_string(mean.size()) + " features, got " +
                       std::to_string(X.cols()));
    }
    Tensor<T> out({static_cast<std::size_t>(X.rows()), mean.size()});
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (std::size_t j = 0; j < mean.size(); ++j)
        out[static_cast<std::size_t>(i) * mean.size() + j] =
            static_cast<T>((X(i, static_cast<Eigen::Index>(j)) - mean[j]) / scale[j]);
    return out;
  }
};

template <class T>
struct TrainedClassifier {
  Model<T> model;
  std::vector<int> class_ids;  // ascending; one-hot position i <-> class_ids[i]
  FeatureScaler scaler;
  std::vector<double> epoch_losses;

  struct Prediction {
    int class_id;
    std::vector<double> probabilities;
  };

  /// Argmax of the softmax output; ties go to the lowest position.
  std::vector<Prediction> predict(const Eigen::MatrixXd& X) const {
    auto p = model.predict(scaler.transform<T>(X));
    const std::size_t k = class_ids.size();
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < static_cast<std::size_t>(X.rows()); ++i) {
      Prediction pr;
      for (std::size_t c = 0; c < k; ++c) pr.probabilities.push_back(static_cast<double>(p[i * k + c]));
      auto best = std::max_element(pr.probabilities.begin(), pr.probabilities.end());
      pr.class_id = class_ids[static_cast<std::size_t>(best - pr.probabilities.begin())];
      out.push_back(std::move(pr));
    }
    return out;
  }

  Prediction predict_one(std::span<const double> feature) const {
    Eigen::MatrixXd X(1, static_cast<Eigen::Index>(feature.size()));
    for (std::size_t j = 0; j < feature.size(); ++j) X(0, static_cast<Eigen::Index>(j)) = feature[j];
    return predict(X).front();
  }
};

inline std::vector<int> sorted_class_ids(const std::vector<int>& labels) {
  std::set<int> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

/// Minimizes categorical cross-entropy with Adam over seeded shuffled batches.
template <class T = float>
TrainedClassifier<T> train_classifier(const FeatureSet& data, const ClassifierTrainConfig& tc,
                                      ClassifierConfig cc = {}) {
  tc.validate();
  if (data.size() == 0) throw Error("train_classifier: empty feature set");
  auto ids = sorted_class_ids(data.labels);
  if (ids.size() < 2) throw Error("train_classifier: need at least 2 classes, got " + std::to_string(ids.size()));
  cc.input_dim = static_cast<std::size_t>(data.X.cols());
  cc.n_classes = ids.size();

  TrainedClassifier<T> out{build_classifier<T>(cc, tc.seed), ids, FeatureScaler::fit(data.X), {}};
  const Tensor<T> X = out.scaler.template transform<T>(data.X);
  Tensor<T> Y({data.size(), ids.size()});
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto pos = std::lower_bound(ids.begin(), ids.end(), data.labels[i]) - ids.begin();
    Y[i * ids.size() + static_cast<std::size_t>(pos)] = T(1);
  }

  Adam<T> opt(tc.adam, out.model.parameters());
  std::seed_seq seq{tc.seed, std::uint64_t{4}};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(data.size());
  for (std::size_t e = 0; e < tc.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + tc.batch_size)));
      auto xb = gather_rows(X, idx), yb = gather_rows(Y, idx);
      auto pred = out.model.forward(constant(xb), true);
      auto loss = cross_entropy_loss(pred, constant(yb));
      double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv)) throw NumericError("non-finite classifier loss in epoch " + std::to_string(e + 1));
      loss_sum += lv * static_cast<double>(idx.size());
      opt.step(out.model.parameters(), grad(loss, out.model.parameters()));
    }
    out.epoch_losses.push_back(loss_sum / static_cast<double>(data.size()));
  }
  return out;
}

template <class T>
void save_classifier(const TrainedClassifier<T>& c, const fs::path& dir) {
  save_model(c.model, dir, "classifier");
  io::write_json(dir / "classifier_meta.json",
                 json{{"class_ids", c.class_ids}, {"feature_mean", c.scaler.mean}, {"feature_scale", c.scaler.scale},
                      {"epoch_losses", c.epoch_losses}});
}

template <class T>
TrainedClassifier<T> load_classifier(const fs::path& dir) {
  auto meta = io::read_json(dir / "classifier_meta.json");
  try {
    TrainedClassifier<T> c{load_model<T>(dir, "classifier"), meta.at("class_ids").get<std::vector<int>>(),
                           {meta.at("feature_mean").get<std::vector<double>>(),
                            meta.at("feature_scale").get<std::vector<double>>()},
                           meta.at("epoch_losses").get<std::vector<double>>()};
    if (c.model.output_shape() != Shape{c.class_ids.size()})
      throw ParseError("classifier output size does not match its class list");
    return c;
  } catch (const json::exception& e) {
    throw ParseError("corrupted classifier metadata in " + dir.string() + ": " + e.what());
  }
}

}  // namespace eegsr
