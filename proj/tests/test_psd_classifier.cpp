#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <numbers>
#include <random>

#include "eegsr/classifier.hpp"
#include "eegsr/psd.hpp"

using namespace eegsr;

namespace {

Epoch tone_epoch(const std::vector<std::string>& labels, const std::string& channel, double freq, double amp,
                 double phase = 0.3) {
  Epoch e;
  e.data = Signal::Zero(static_cast<Eigen::Index>(labels.size()), 512);
  auto row = static_cast<Eigen::Index>(std::find(labels.begin(), labels.end(), channel) - labels.begin());
  for (Eigen::Index t = 0; t < 512; ++t) e.data(row, t) = amp * std::cos(2 * std::numbers::pi * freq * t / 512.0 + phase);
  e.label = 2;
  return e;
}

/// Mean over Welch segments of sum((w * (x - mean))^2) / sum(w^2), computed
/// in the time domain.
double windowed_variance(const std::vector<double>& x) {
  const std::size_t n = 256;
  double w2 = 0;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = std::sin(std::numbers::pi * i / n);
    w[i] = s * s;  // periodic Hann
    w2 += w[i] * w[i];
  }
  double total = 0;
  std::size_t segs = 0;
  for (std::size_t start = 0; start + n <= x.size(); start += 128, ++segs) {
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m += x[start + i] / n;
    for (std::size_t i = 0; i < n; ++i) total += std::pow(w[i] * (x[start + i] - m), 2);
  }
  return total / (segs * w2);
}

FeatureSet blobs(std::size_t per_class, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, spread);
  const int ids[] = {2, 3, 7};
  FeatureSet f;
  f.X.resize(static_cast<Eigen::Index>(3 * per_class), 96);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      auto r = static_cast<Eigen::Index>(c * per_class + i);
      for (Eigen::Index j = 0; j < 96; ++j) f.X(r, j) = 10.0 + (j % 3 == static_cast<Eigen::Index>(c) ? 5.0 : 0.0) + g(rng);
      f.labels.push_back(ids[c]);
    }
  return f;
}

double accuracy(const TrainedClassifier<double>& c, const FeatureSet& f) {
  auto p = c.predict(f.X);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += p[i].class_id == f.labels[i];
  return 100.0 * ok / p.size();
}

}  // namespace

// -------------------------------------------------------------------- Welch

TEST(Welch, ParsevalOnWhiteNoise) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 3);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(512);
    for (auto& v : x) v = g(rng);
    auto psd = welch_psd(x);
    ASSERT_EQ(psd.size(), 129u);
    double power = 0;
    for (double p : psd) power += p * 2.0;  // bin width 2 Hz
    double ref = windowed_variance(x);
    EXPECT_LT(std::abs(power - ref) / ref, 0.01);
    EXPECT_LT(std::abs(power - ref) / ref, 1e-10);
  }
}

TEST(Welch, OnGridToneClosedForm) {
  // A cosine exactly on bin 5 (10 Hz) puts A^2/6 in its bin and A^2/24 in
  // each Hann neighbour; with 2 Hz bins the sum is A^2/2.
  const double A = 4.0;
  std::vector<double> x(512);
  for (std::size_t t = 0; t < 512; ++t) x[t] = A * std::cos(2 * std::numbers::pi * 10.0 * t / 512.0 + 1.1);
  auto psd = welch_psd(x);
  EXPECT_NEAR(psd[5], A * A / 6, 1e-10);
  EXPECT_NEAR(psd[4], A * A / 24, 1e-10);
  EXPECT_NEAR(psd[6], A * A / 24, 1e-10);
  for (std::size_t k = 0; k < psd.size(); ++k)
    if (k < 4 || k > 6) {
      EXPECT_LT(psd[k], 1e-20);
    }
}

TEST(Welch, RejectsShortSignals) {
  std::vector<double> x(100, 1.0);
  EXPECT_THROW(welch_psd(x), Error);
}

// ------------------------------------------------------------ PSD features

TEST(PsdFeatures, TenHzToneLocalizes) {
  const auto& labels = standard_channel_labels();
  const double A = 12.0;
  auto e = tone_epoch(labels, "Cz", 10.0, A);
  auto f = psd_features(e, labels);
  ASSERT_EQ(f.size(), 96u);
  // Cz is feature channel 1; 10 Hz is bin index 1 within the 12.
  std::size_t argmax = static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
  EXPECT_EQ(argmax, 12u + 1u);
  double band = 0;
  for (std::size_t k = 0; k < 12; ++k) band += f[12 + k] * 2.0;
  EXPECT_NEAR(band, A * A / 2, 0.05 * A * A / 2);
  for (std::size_t j = 0; j < 96; ++j)
    if (j < 12 || j >= 24) {
      EXPECT_EQ(f[j], 0.0);
    }
}

TEST(PsdFeatures, ZeroEpochGivesZeroFeature) {
  Epoch e;
  e.data = Signal::Zero(32, 512);
  auto f = psd_features(e, standard_channel_labels());
  ASSERT_EQ(f.size(), 96u);
  for (double v : f) EXPECT_EQ(v, 0.0);
}

TEST(PsdFeatures, ShapeAndNonNegativityOnRandomInput) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 20);
  for (int trial = 0; trial < 5; ++trial) {
    Epoch e;
    e.data.resize(32, 512);
    for (Eigen::Index i = 0; i < e.data.size(); ++i) e.data.data()[i] = g(rng);
    auto f = psd_features(e, standard_channel_labels());
    ASSERT_EQ(f.size(), 96u);
    for (double v : f) EXPECT_GE(v, 0.0);
  }
}

TEST(PsdFeatures, PermutingUnselectedChannelsChangesNothing) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 20);
  auto labels = standard_channel_labels();
  Epoch e;
  e.data.resize(32, 512);
  for (Eigen::Index i = 0; i < e.data.size(); ++i) e.data.data()[i] = g(rng);
  auto base = psd_features(e, labels);
  // Swap Fp1 (row 0) with O2 (row 16) together with their labels.
  std::swap(labels[0], labels[16]);
  e.data.row(0).swap(e.data.row(16));
  EXPECT_EQ(psd_features(e, labels), base);
}

TEST(PsdFeatures, MissingChannelIsError) {
  auto labels = standard_channel_labels();
  labels[7] = "XX";  // C3
  Epoch e;
  e.data = Signal::Zero(32, 512);
  EXPECT_THROW(psd_features(e, labels), Error);
}

TEST(PsdFeatures, FrequencyGrid) {
  PsdFeatureSpec spec;
  EXPECT_EQ(spec.bins(), (std::vector<std::size_t>{4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15}));
  EXPECT_EQ(spec.dim(), 96u);
  EXPECT_EQ(spec.column_names()[13], "Cz_10Hz");
}

TEST(FeatureCsv, RoundTrip) {
  auto f = blobs(3, 1.0, 5);
  f.columns = PsdFeatureSpec{}.column_names();
  auto path = fs::temp_directory_path() / ("eegsr_feat_" + std::to_string(::getpid()) + ".csv");
  write_feature_csv(f, path);
  auto back = read_feature_csv(path);
  EXPECT_EQ(back.columns, f.columns);
  EXPECT_EQ(back.labels, f.labels);
  EXPECT_EQ(back.X, f.X);
}

// -------------------------------------------------------------- classifier

TEST(Classifier, SeparableBlobsTrainAccuracy) {
  auto f = blobs(60, 1.0, 6);
  ClassifierTrainConfig tc;
  tc.seed = 1;
  auto c = train_classifier<double>(f, tc);
  EXPECT_GE(accuracy(c, f), 95.0);
  EXPECT_EQ(c.class_ids, (std::vector<int>{2, 3, 7}));
}

TEST(Classifier, LossDecreasesOverFirstFiveEpochs) {
  auto f = blobs(60, 1.0, 7);
  ClassifierTrainConfig tc;
  tc.epochs = 5;
  tc.seed = 2;
  auto c = train_classifier<double>(f, tc);
  ASSERT_EQ(c.epoch_losses.size(), 5u);
  EXPECT_LT(c.epoch_losses.back(), c.epoch_losses.front());
}

TEST(Classifier, SameSeedSameWeights) {
  auto f = blobs(20, 1.0, 8);
  ClassifierTrainConfig tc;
  tc.epochs = 3;
  tc.seed = 3;
  auto a = train_classifier<double>(f, tc), b = train_classifier<double>(f, tc);
  for (std::size_t i = 0; i < a.model.parameters().size(); ++i)
    EXPECT_EQ(a.model.parameters()[i].value().storage(), b.model.parameters()[i].value().storage());
}

TEST(Classifier, ProbabilitiesSumToOne) {
  auto f = blobs(20, 3.0, 9);
  ClassifierTrainConfig tc;
  tc.epochs = 2;
  auto c = train_classifier<double>(f, tc);
  for (const auto& p : c.predict(f.X)) {
    EXPECT_NEAR(p.probabilities[0] + p.probabilities[1] + p.probabilities[2], 1.0, 1e-12);
    for (double q : p.probabilities) EXPECT_GE(q, 0.0);
  }
}

TEST(Classifier, ExactTieGoesToFirstClass) {
  auto f = blobs(5, 1.0, 10);
  ClassifierTrainConfig tc;
  tc.epochs = 1;
  auto c = train_classifier<double>(f, tc);
  auto& params = c.model.parameters();
  auto& w = params[params.size() - 2].mutable_value();
  auto& b = params.back().mutable_value();
  std::fill(w.values().begin(), w.values().end(), 0.0);
  std::fill(b.values().begin(), b.values().end(), 0.0);
  auto p = c.predict_one(std::vector<double>(96, 1.0));
  EXPECT_EQ(p.probabilities, (std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}));
  EXPECT_EQ(p.class_id, 2);
}

TEST(Classifier, Errors) {
  auto f = blobs(5, 1.0, 11);
  std::fill(f.labels.begin(), f.labels.end(), 3);
  EXPECT_THROW(train_classifier<double>(f, {}), Error);
  auto g = blobs(5, 1.0, 12);
  ClassifierTrainConfig tc;
  tc.epochs = 1;
  auto c = train_classifier<double>(g, tc);
  EXPECT_THROW(c.predict_one(std::vector<double>(95, 1.0)), ShapeError);
}

TEST(Classifier, SaveLoadRoundTrip) {
  auto f = blobs(10, 1.0, 13);
  ClassifierTrainConfig tc;
  tc.epochs = 2;
  auto c = train_classifier<double>(f, tc);
  auto dir = fs::temp_directory_path() / ("eegsr_clf_" + std::to_string(::getpid()));
  save_classifier(c, dir);
  auto back = load_classifier<double>(dir);
  auto p1 = c.predict(f.X), p2 = back.predict(f.X);
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(p1[i].probabilities, p2[i].probabilities);
}
