#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "specsense/classifier.hpp"
#include "specsense/data.hpp"
#include "specsense/errors.hpp"

using namespace specsense;

namespace {

Dataset toy_separable(std::size_t count, std::uint64_t seed) {
    // Two far-apart spherical blobs in 2-D; any sane training run separates
    // them perfectly.
    Dataset ds;
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 0.5);
    for (std::size_t i = 0; i < count; ++i) {
        SensingVector v;
        v.timeslot = i;
        v.true_label = static_cast<int>(i % 2);
        const double center = v.true_label == 0 ? 20.0 : 5.0;
        v.values = Eigen::Vector2d(center + noise(rng), center + noise(rng));
        ds.records.push_back(std::move(v));
    }
    return ds;
}

Dataset default_dataset(std::size_t count, std::uint64_t seed) {
    ScenarioParams params;
    params.seed = 7;
    return generate_dataset(make_scenario(params), count, seed);
}

double holdout_accuracy(const FusionClassifier& model, const Dataset& ds) {
    std::size_t correct = 0;
    for (const auto& r : ds.records)
        correct += model.classify(r.values) == r.true_label ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("training separates the toy dataset perfectly and deterministically") {
    const Dataset ds = toy_separable(400, 3);
    TrainConfig cfg;
    cfg.epochs = 60;
    TrainInfo info;
    const FusionClassifier a = train(ds, cfg, &info);
    CHECK(info.train_accuracy == 1.0);

    const FusionClassifier b = train(ds, cfg);
    REQUIRE(a.weights().size() == b.weights().size());
    for (std::size_t l = 0; l < a.weights().size(); ++l) {
        CHECK(a.weights()[l] == b.weights()[l]);  // bit-identical
        CHECK(a.biases()[l] == b.biases()[l]);
    }
}

TEST_CASE("held-out accuracy on the default scenario clears 99%") {
    const Dataset train_ds = default_dataset(5000, 11);
    const Dataset test_ds = default_dataset(2000, 12);
    const FusionClassifier model = train(train_ds, TrainConfig{});
    CHECK(holdout_accuracy(model, test_ds) >= 0.99);
}

TEST_CASE("training rejects single-label data and reports divergence") {
    Dataset ds = toy_separable(64, 4);
    for (auto& r : ds.records) r.true_label = 1;
    CHECK_THROWS_AS(train(ds, TrainConfig{}), std::invalid_argument);

    Dataset ds2 = toy_separable(64, 4);
    TrainConfig wild;
    wild.learning_rate = 1e300;  // one update overflows the logits
    wild.epochs = 50;
    CHECK_THROWS_AS(train(ds2, wild), TrainingError);
}

TEST_CASE("classify breaks score ties toward channel-unavailable") {
    Eigen::MatrixXd w(2, 2);
    w << 1.0, 2.0, 1.0, 2.0;  // identical rows: scores always tie
    const FusionClassifier model = FusionClassifier::affine(w, Eigen::Vector2d(0.3, 0.3));
    const Eigen::VectorXd x = Eigen::Vector2d(0.7, -1.1);
    const PredictionScores s = model.predict_scores(x);
    CHECK(s.score_0 == s.score_1);
    CHECK(model.classify(x) == 0);
    CHECK(model.score_margin(x) == 0.0);
}

TEST_CASE("prediction is a pure function of the input") {
    const Dataset ds = toy_separable(200, 9);
    const FusionClassifier model = train(ds, TrainConfig{});
    const Eigen::VectorXd x = Eigen::Vector2d(12.0, 9.5);
    const PredictionScores first = model.predict_scores(x);
    for (int i = 0; i < 5; ++i) {
        const PredictionScores again = model.predict_scores(x);
        CHECK(again.score_0 == first.score_0);
        CHECK(again.score_1 == first.score_1);
    }
}

TEST_CASE("affine model exposes its weight rows through the gradients") {
    Eigen::MatrixXd w(2, 3);
    w << 1.0, -2.0, 0.5, 3.0, 0.25, -1.0;
    const FusionClassifier model = FusionClassifier::affine(w, Eigen::Vector2d(0.1, -0.4));
    const Eigen::VectorXd x = Eigen::Vector3d(0.3, 1.2, -0.7);

    const Eigen::VectorXd g = model.margin_gradient(x);
    const Eigen::VectorXd expected = (w.row(1) - w.row(0)).transpose();
    CHECK((g - expected).norm() == 0.0);

    // constant in x for an affine model
    const Eigen::VectorXd g2 = model.margin_gradient(Eigen::Vector3d(5.0, -2.0, 0.0));
    CHECK((g2 - expected).norm() == 0.0);
}

TEST_CASE("margin gradient equals the difference of per-score gradients") {
    const Dataset ds = default_dataset(800, 13);
    const FusionClassifier model = train(ds, TrainConfig{});
    Rng rng(17);
    std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
    for (int i = 0; i < 20; ++i) {
        const Eigen::VectorXd& x = ds.records[pick(rng)].values;
        const auto grads = model.score_gradients(x);
        const Eigen::VectorXd g = model.margin_gradient(x);
        CHECK((g - (grads.grad_1 - grads.grad_0)).lpNorm<Eigen::Infinity>() <= 1e-14);
    }
}

TEST_CASE("reverse-mode gradients match central finite differences") {
    const Dataset ds = default_dataset(2000, 14);
    const FusionClassifier model = train(ds, TrainConfig{});
    Rng rng(15);
    std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
    const double h = 1e-4;  // step on normalized inputs

    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd x = ds.records[pick(rng)].values;
        const Eigen::VectorXd grad = model.margin_gradient(x);
        Eigen::VectorXd fd(x.size());
        for (int j = 0; j < x.size(); ++j) {
            const double step = h * model.norm_std()[j];
            Eigen::VectorXd xp = x, xm = x;
            xp[j] += step;
            xm[j] -= step;
            fd[j] = (model.score_margin(xp) - model.score_margin(xm)) / (2.0 * step);
        }
        const double rel = (grad - fd).lpNorm<Eigen::Infinity>() /
                           std::max(grad.lpNorm<Eigen::Infinity>(), 1e-12);
        worst = std::max(worst, rel);
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("margin is numerically continuous") {
    const Dataset ds = default_dataset(500, 23);
    const FusionClassifier model = train(ds, TrainConfig{});
    const Eigen::VectorXd x = ds.records[0].values;
    const double g0 = model.score_margin(x);
    double prev_gap = std::abs(model.score_margin(x + Eigen::VectorXd::Constant(x.size(), 0.1)) - g0);
    for (double eps : {0.01, 0.001, 0.0001}) {
        const double gap =
            std::abs(model.score_margin(x + Eigen::VectorXd::Constant(x.size(), eps)) - g0);
        CHECK(gap < prev_gap);
        prev_gap = gap;
    }
}

TEST_CASE("dimension mismatches are rejected") {
    const Dataset ds = toy_separable(100, 5);
    const FusionClassifier model = train(ds, TrainConfig{});
    CHECK_THROWS_AS(model.predict_scores(Eigen::Vector3d(1, 2, 3)), std::invalid_argument);
    CHECK_THROWS_AS(model.margin_gradient(Eigen::VectorXd::Ones(9)), std::invalid_argument);
}

TEST_CASE("model persistence round-trips scores bit-exactly") {
    const Dataset ds = default_dataset(1000, 19);
    const FusionClassifier model = train(ds, TrainConfig{});
    const std::string path =
        (std::filesystem::temp_directory_path() / "specsense_model_test.txt").string();
    model.save(path);
    const FusionClassifier loaded = FusionClassifier::load(path);

    Rng rng(20);
    std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
    for (int i = 0; i < 100; ++i) {
        const Eigen::VectorXd& x = ds.records[pick(rng)].values;
        const PredictionScores a = model.predict_scores(x);
        const PredictionScores b = loaded.predict_scores(x);
        CHECK(a.score_0 == b.score_0);
        CHECK(a.score_1 == b.score_1);
    }
    std::filesystem::remove(path);
}

TEST_CASE("corrupt model files are rejected") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "specsense_bad_model.txt").string();
    {
        std::ofstream out(path);
        out << "not-a-model v9\n";
    }
    CHECK_THROWS_AS(FusionClassifier::load(path), ParseError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(FusionClassifier::load(path), ParseError);  // missing file
}

TEST_CASE("evaluation counters track forwards and gradient sweeps") {
    const Dataset ds = toy_separable(100, 6);
    const FusionClassifier model = train(ds, TrainConfig{});
    model.reset_eval_counts();
    const Eigen::VectorXd x = Eigen::Vector2d(10.0, 10.0);
    (void)model.predict_scores(x);
    (void)model.score_margin(x);
    (void)model.margin_gradient(x);
    (void)model.score_gradients(x);
    const EvalCounts counts = model.eval_counts();
    CHECK(counts.forwards == 2);
    CHECK(counts.gradients == 3);  // margin = 1 sweep, score pair = 2
}
