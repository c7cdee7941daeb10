#include <doctest.h>

#include <cmath>

#include "adbn/dbn.hpp"
#include "oracle.hpp"

using namespace adbn;

namespace {

// Dataset straight from a feature matrix; label names default to binary.
LabeledDataset make_dataset(const Eigen::MatrixXd& features, const std::vector<int>& labels) {
  LabeledDataset dataset;
  dataset.label_names = {"uncracked", "cracked"};
  dataset.descriptor.target_side = 8;  // unused by the math
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    LabeledSample sample;
    sample.pixels = features.row(r).transpose();
    sample.label = labels[static_cast<std::size_t>(r)];
    sample.cracked = sample.label == 1;
    sample.source = "synthetic:test:" + std::to_string(r);
    dataset.samples.push_back(std::move(sample));
  }
  return dataset;
}

// One saturating layer that copies the binary input into the pattern, so
// activation patterns are fully controllable from the test data.
DbnModel identity_model(Eigen::Index dim) {
  DbnModel model;
  model.input_dim = dim;
  model.label_names = {"uncracked", "cracked"};
  RbmParameters layer = RbmParameters::zeros(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    layer.weights(i, i) = 60.0;
    layer.hidden_bias(i) = -30.0;
  }
  model.layers.push_back(std::move(layer));
  model.head_weights = Eigen::MatrixXd::Zero(2, dim);
  model.head_bias = Eigen::VectorXd::Zero(2);
  return model;
}

}  // namespace

TEST_SUITE_BEGIN("dbn-stack");

TEST_CASE("propagate through zero layers yields one half everywhere") {
  DbnModel model;
  model.input_dim = 4;
  model.label_names = {"a", "b"};
  model.layers.push_back(RbmParameters::zeros(4, 3));
  model.head_weights = Eigen::MatrixXd::Zero(2, 3);
  model.head_bias = Eigen::VectorXd::Zero(2);

  Eigen::VectorXd v(4);
  v << 1, 0, 1, 1;
  auto activations = propagate(model, v);
  REQUIRE(activations.size() == 1);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(activations[0](j) == 0.5);

  model.layers.push_back(RbmParameters::zeros(3, 2));
  model.head_weights = Eigen::MatrixXd::Zero(2, 2);
  activations = propagate(model, v);
  REQUIRE(activations.size() == 2);
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(activations[1](j) == 0.5);
}

TEST_CASE("propagate composes the per-layer conditionals") {
  DbnModel model;
  model.input_dim = 5;
  model.label_names = {"a", "b"};
  model.layers.push_back(oracle::seeded_params(5, 4, 71));
  model.layers.push_back(oracle::seeded_params(4, 3, 72));
  model.head_weights = Eigen::MatrixXd::Zero(2, 3);
  model.head_bias = Eigen::VectorXd::Zero(2);

  Eigen::VectorXd v(5);
  v << 1, 0, 1, 0, 1;
  const auto activations = propagate(model, v);
  const Eigen::VectorXd manual =
      hidden_conditional(hidden_conditional(v, model.layers[0]), model.layers[1]);
  CHECK((activations[1] - manual).cwiseAbs().maxCoeff() == 0.0);
  CHECK((top_features(model, v) - manual).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("classify is uniform under a zero head") {
  DbnModel model = identity_model(3);
  Eigen::VectorXd v(3);
  v << 1, 0, 1;
  const Eigen::VectorXd probs = classify(model, v);
  CHECK(probs(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(probs(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("classify survives huge logits via max subtraction") {
  DbnModel model = identity_model(2);
  model.head_weights << 1000.0, 1000.0, 0.0, 0.0;  // logits ~ (2000, 0)
  Eigen::VectorXd v(2);
  v << 1, 1;
  const Eigen::VectorXd probs = classify(model, v);
  CHECK(std::isfinite(probs(0)));
  CHECK(probs(0) > 1.0 - 1e-12);
  CHECK(probs(1) < 1e-12);
}

TEST_CASE("classify output sums to one on random inputs") {
  DbnModel model;
  model.input_dim = 6;
  model.label_names = {"a", "b", "c"};
  model.layers.push_back(oracle::seeded_params(6, 4, 73));
  model.head_weights = Eigen::MatrixXd::Zero(3, 4);
  model.head_bias = Eigen::VectorXd::Zero(3);
  Rng head_rng(74);
  for (Eigen::Index r = 0; r < 3; ++r) {
    model.head_bias(r) = normal_draw(head_rng, 0.0, 1.0);
    for (Eigen::Index c = 0; c < 4; ++c) model.head_weights(r, c) = normal_draw(head_rng, 0.0, 2.0);
  }
  Rng rng(75);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(6);
    for (Eigen::Index i = 0; i < 6; ++i) v(i) = uniform_unit(rng);
    const Eigen::VectorXd probs = classify(model, v);
    CHECK(std::abs(probs.sum() - 1.0) < 1e-12);
    for (Eigen::Index k = 0; k < 3; ++k) {
      CHECK(probs(k) > 0.0);
      CHECK(probs(k) < 1.0);
    }
  }
}

TEST_CASE("adding a constant to every head logit keeps the argmax") {
  DbnModel model = identity_model(3);
  Rng rng(76);
  for (Eigen::Index r = 0; r < 2; ++r) {
    model.head_bias(r) = normal_draw(rng, 0.0, 1.0);
    for (Eigen::Index c = 0; c < 3; ++c) model.head_weights(r, c) = normal_draw(rng, 0.0, 1.0);
  }
  DbnModel shifted = model;
  shifted.head_bias.array() += 123.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd v(3);
    for (Eigen::Index i = 0; i < 3; ++i) v(i) = uniform_unit(rng) < 0.5 ? 0.0 : 1.0;
    CHECK(predict(model, v, false).label == predict(shifted, v, false).label);
  }
}

TEST_CASE("train_head separates a linearly separable toy set") {
  const Eigen::Index dim = 4;
  Eigen::MatrixXd features(6, dim);
  features << 1, 1, 0, 0, 1, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1, 0, 1, 0, 1, 0, 0, 0, 1;
  const std::vector<int> labels = {0, 0, 0, 1, 1, 1};
  LabeledDataset train = make_dataset(features, labels);

  DbnModel model = identity_model(dim);
  Rng rng(80);
  model = train_head(model, train, 200, 0.5, 3, rng);
  CHECK(count_misclassified(model, train, false) == 0);
}

TEST_CASE("train_head with zero learning rate changes nothing") {
  Eigen::MatrixXd features(2, 3);
  features << 1, 0, 1, 0, 1, 0;
  LabeledDataset train = make_dataset(features, {0, 1});
  DbnModel model = identity_model(3);
  Rng rng(81);
  const DbnModel same = train_head(model, train, 10, 0.0, 2, rng);
  CHECK(same.head_weights == model.head_weights);
  CHECK(same.head_bias == model.head_bias);
}

TEST_CASE("train_head on a single-class dataset reaches full training accuracy") {
  Eigen::MatrixXd features(3, 3);
  features << 1, 0, 1, 0, 1, 0, 1, 1, 0;
  LabeledDataset train = make_dataset(features, {1, 1, 1});
  DbnModel model = identity_model(3);
  Rng rng(82);
  model = train_head(model, train, 100, 0.5, 2, rng);
  CHECK(count_misclassified(model, train, false) == 0);
  Eigen::VectorXd v = features.row(0).transpose();
  CHECK(classify(model, v)(1) > 0.9);
}

TEST_CASE("train_head rejects bad labels and empty data") {
  DbnModel model = identity_model(3);
  Rng rng(83);
  LabeledDataset empty;
  CHECK_THROWS_AS(train_head(model, empty, 10, 0.1, 2, rng), DatasetError);
  Eigen::MatrixXd features(1, 3);
  features << 1, 0, 1;
  LabeledDataset bad = make_dataset(features, {2});  // only two classes exist
  CHECK_THROWS_AS(train_head(model, bad, 10, 0.1, 2, rng), DatasetError);
}

TEST_CASE("layer generation trigger needs both sums above threshold") {
  StructureConfig config;
  config.theta_L1 = 1.0;
  config.theta_L2 = 1.0;
  config.max_layers = 5;
  config.scale_layer_thresholds = false;

  LayerStats converged;
  converged.wd_total = {0.0};
  converged.energy_magnitude = {0.0};
  CHECK_FALSE(check_layer_generation(converged, config));

  LayerStats hot;
  hot.wd_total = {10.0};
  hot.energy_magnitude = {5.0};
  CHECK(check_layer_generation(hot, config));

  LayerStats wd_only;
  wd_only.wd_total = {10.0};
  wd_only.energy_magnitude = {0.5};
  CHECK_FALSE(check_layer_generation(wd_only, config));

  LayerStats energy_only;
  energy_only.wd_total = {0.5};
  energy_only.energy_magnitude = {10.0};
  CHECK_FALSE(check_layer_generation(energy_only, config));

  config.max_layers = 1;
  CHECK_FALSE(check_layer_generation(hot, config));
}

TEST_CASE("layer thresholds scale with depth when configured") {
  StructureConfig config;
  config.theta_L1 = 1.0;
  config.theta_L2 = 1.0;
  config.max_layers = 5;
  config.scale_layer_thresholds = true;
  LayerStats stats;
  stats.wd_total = {1.5, 1.0};  // sum 2.5 vs threshold 1.0 * k = 2.0
  stats.energy_magnitude = {1.5, 1.0};
  CHECK(check_layer_generation(stats, config));
  stats.wd_total = {0.9, 0.9};  // sum 1.8 <= 2.0
  CHECK_FALSE(check_layer_generation(stats, config));
}

TEST_CASE("append_layer chains dimensions and preserves existing layers") {
  Rng rng(84);
  DbnModel model = DbnModel::create(6, 4, {"a", "b"}, rng);
  const Eigen::MatrixXd layer0_weights = model.layers[0].weights;
  DbnModel grown = append_layer(model, 3, rng);
  REQUIRE(grown.layers.size() == 2);
  CHECK(grown.layers[1].visible_size() == 4);
  CHECK(grown.layers[1].hidden_size() == 3);
  CHECK(grown.layers[0].weights == layer0_weights);
  CHECK(grown.head_weights.cols() == 3);
  CHECK(grown.head_weights.isZero());
  grown.check_consistent();

  DbnModel minimal = append_layer(model, 1, rng);
  CHECK(minimal.layers[1].hidden_size() == 1);
}

TEST_CASE("fine_tune adds no overrides to a perfect model") {
  Eigen::MatrixXd features(4, 3);
  features << 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0;
  LabeledDataset train = make_dataset(features, {0, 0, 1, 1});
  DbnModel model = identity_model(3);
  Rng rng(85);
  model = train_head(model, train, 300, 0.5, 2, rng);
  REQUIRE(count_misclassified(model, train, false) == 0);
  const DbnModel tuned = fine_tune(model, train);
  CHECK(tuned.overrides.empty());
}

TEST_CASE("fine_tune fixes a misclassified sample with a unique pattern") {
  Eigen::MatrixXd features(3, 3);
  features << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  LabeledDataset train = make_dataset(features, {0, 0, 1});
  DbnModel model = identity_model(3);  // zero head: everything predicts class 0
  REQUIRE(count_misclassified(model, train, false) == 1);
  const DbnModel tuned = fine_tune(model, train);
  CHECK(tuned.overrides.size() == 1);
  CHECK(count_misclassified(tuned, train, true) == 0);
  const Prediction fixed = predict(tuned, features.row(2).transpose(), true);
  CHECK(fixed.label == 1);
  CHECK(fixed.override_fired);
}

TEST_CASE("fine_tune leaves tied patterns to the head") {
  Eigen::MatrixXd features(2, 3);
  features << 1, 0, 1, 1, 0, 1;  // identical inputs, conflicting labels
  LabeledDataset train = make_dataset(features, {0, 1});
  DbnModel model = identity_model(3);
  const std::size_t before = count_misclassified(model, train, false);
  CHECK(before == 1);  // zero head predicts class 0 for both
  const DbnModel tuned = fine_tune(model, train);
  CHECK(tuned.overrides.empty());
  CHECK(count_misclassified(tuned, train, true) == before);
}

TEST_CASE("fine_tune routes a shared pattern to its majority label") {
  Eigen::MatrixXd features(3, 3);
  features << 0, 1, 0, 0, 1, 0, 0, 1, 0;
  LabeledDataset train = make_dataset(features, {1, 1, 0});
  DbnModel model = identity_model(3);  // zero head predicts 0 for all three
  REQUIRE(count_misclassified(model, train, false) == 2);
  const DbnModel tuned = fine_tune(model, train);
  REQUIRE(tuned.overrides.size() == 1);
  CHECK(count_misclassified(tuned, train, true) == 1);
}

TEST_CASE("fine_tune never increases the training misclassification count") {
  Rng data_rng(86);
  for (int trial = 0; trial < 6; ++trial) {
    const Eigen::Index n = 24, dim = 5;
    Eigen::MatrixXd features(n, dim);
    std::vector<int> labels;
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        features(r, c) = uniform_unit(data_rng) < 0.5 ? 0.0 : 1.0;
      }
      labels.push_back(static_cast<int>(data_rng() % 2));
    }
    LabeledDataset train = make_dataset(features, labels);
    DbnModel model = identity_model(dim);
    Rng head_rng(87 + static_cast<unsigned>(trial));
    model = train_head(model, train, 30, 0.3, 8, head_rng);
    const std::size_t before = count_misclassified(model, train, false);
    const DbnModel tuned = fine_tune(model, train);
    const std::size_t after = count_misclassified(tuned, train, true);
    CHECK(after <= before);
  }
}

TEST_CASE("evaluate reports a perfect predictor cleanly") {
  Eigen::MatrixXd features(4, 3);
  features << 1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 1, 1;
  LabeledDataset data = make_dataset(features, {0, 0, 1, 1});
  DbnModel model = identity_model(3);
  Rng rng(88);
  model = train_head(model, data, 300, 0.5, 2, rng);
  const EvalReport report = evaluate(model, data, false);
  CHECK(report.accuracy() == 1.0);
  CHECK(report.incorrect == 0);
  CHECK(report.confusion(0, 1) == 0);
  CHECK(report.confusion(1, 0) == 0);
}

TEST_CASE("evaluate scores a constant predictor at one half on balanced data") {
  Eigen::MatrixXd features(4, 3);
  features << 1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 1, 1;
  LabeledDataset data = make_dataset(features, {0, 1, 0, 1});
  DbnModel model = identity_model(3);
  model.head_bias(0) = 50.0;  // always predicts class 0
  const EvalReport report = evaluate(model, data, false);
  CHECK(report.accuracy() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("evaluate bookkeeping is self-consistent") {
  Rng data_rng(89);
  const Eigen::Index n = 30, dim = 4;
  Eigen::MatrixXd features(n, dim);
  std::vector<int> labels;
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) features(r, c) = uniform_unit(data_rng);
    labels.push_back(static_cast<int>(data_rng() % 2));
  }
  LabeledDataset data = make_dataset(features, labels);
  DbnModel model = identity_model(dim);
  Rng rng(90);
  model = train_head(model, data, 20, 0.3, 8, rng);
  const EvalReport report = evaluate(model, data, false);

  for (std::size_t k = 0; k < report.categories.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    CHECK(static_cast<std::size_t>(report.confusion.row(row).sum()) ==
          report.categories[k].total);
    if (report.categories[k].total > 0) {
      CHECK(report.categories[k].accuracy() ==
            doctest::Approx(1.0 - static_cast<double>(report.categories[k].incorrect) /
                                      static_cast<double>(report.categories[k].total)));
    }
  }
  CHECK(report.total == static_cast<std::size_t>(n));
  const std::string text = report.to_text();
  CHECK(text.find("overall") != std::string::npos);
  CHECK(text.find("% (") != std::string::npos);
}

TEST_CASE("evaluate rejects an empty dataset") {
  DbnModel model = identity_model(3);
  LabeledDataset empty;
  CHECK_THROWS_AS(evaluate(model, empty, false), DatasetError);
}

TEST_CASE("train_adaptive on a constant dataset stays at one layer") {
  const Eigen::Index dim = 16;
  Eigen::MatrixXd features(8, dim);
  Eigen::VectorXd pattern(dim);
  for (Eigen::Index i = 0; i < dim; ++i) pattern(i) = (i % 3 == 0) ? 1.0 : 0.0;
  for (Eigen::Index r = 0; r < 8; ++r) features.row(r) = pattern.transpose();
  LabeledDataset train = make_dataset(features, {0, 0, 0, 0, 0, 0, 0, 0});

  DbnTrainOptions options;
  options.rbm.epochs = 300;
  options.rbm.batch_size = 8;
  options.rbm.cd.learning_rate = 0.2;
  options.initial_hidden = 4;
  options.head_epochs = 5;
  StructureConfig config;  // defaults: theta_L1 = theta_L2 = 0.1 * k

  Rng rng(91);
  const AdaptiveTrainResult result = train_adaptive(train, options, config, rng);
  CHECK(result.model.layers.size() == 1);
  for (const auto& event : result.events) {
    CHECK(event.kind != StructuralEvent::Kind::Generate);
    CHECK(event.kind != StructuralEvent::Kind::Layer);
  }
}

TEST_CASE("train_adaptive is reproducible given the seed") {
  Eigen::MatrixXd features = Eigen::MatrixXd::Identity(8, 8);
  LabeledDataset train = make_dataset(features, {0, 0, 0, 0, 1, 1, 1, 1});

  DbnTrainOptions options;
  options.rbm.epochs = 60;
  options.rbm.batch_size = 4;
  options.rbm.cd.learning_rate = 0.3;
  options.initial_hidden = 3;
  options.head_epochs = 20;
  StructureConfig config;
  config.theta_G = 1e-4;
  config.max_hidden = 8;
  config.theta_L1 = 0.01;
  config.theta_L2 = 0.01;
  config.max_layers = 2;

  Rng rng_a(92), rng_b(92);
  const AdaptiveTrainResult a = train_adaptive(train, options, config, rng_a);
  const AdaptiveTrainResult b = train_adaptive(train, options, config, rng_b);
  REQUIRE(a.model.layers.size() == b.model.layers.size());
  for (std::size_t l = 0; l < a.model.layers.size(); ++l) {
    CHECK(a.model.layers[l].hidden_size() == b.model.layers[l].hidden_size());
    CHECK(a.model.layers[l].weights == b.model.layers[l].weights);
  }
  CHECK(a.model.head_weights == b.model.head_weights);
  CHECK(a.events.size() == b.events.size());
}

TEST_SUITE_END();
