#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "specsense/attack.hpp"
#include "specsense/classifier.hpp"
#include "specsense/data.hpp"
#include "specsense/ddb.hpp"

using namespace specsense;

namespace {

struct AttackFixture {
    ChannelScenario scenario;
    Dataset train_data;
    Dataset test_data;
    FusionClassifier model;
    FusionClassifier surrogate;
    SearchConfig search;

    AttackFixture() {
        ScenarioParams params;
        params.seed = 51;
        scenario = make_scenario(params);
        train_data = generate_dataset(scenario, 3000, 52);
        test_data = generate_dataset(scenario, 2000, 53);
        model = train(train_data, TrainConfig{});
        std::vector<std::pair<Eigen::VectorXd, int>> obs;
        for (std::size_t i = 0; i < 1500; ++i)
            obs.emplace_back(test_data.records[i].values,
                             model.classify(test_data.records[i].values));
        surrogate = train_surrogate(obs);
        set_box_from_data(search, train_data);
        search.outer_rounds = 6;
        search.inner_steps = 100;
    }

    AttackerKnowledge whitebox(std::vector<int> nodes) const {
        AttackerKnowledge k;
        k.controlled_nodes = std::move(nodes);
        k.mode = AttackerMode::WhiteBox;
        return k;
    }
    AttackerKnowledge black(std::vector<int> nodes) const {
        AttackerKnowledge k;
        k.controlled_nodes = std::move(nodes);
        k.mode = AttackerMode::Surrogate;
        k.surrogate = surrogate;
        return k;
    }
};

const AttackFixture& fx() {
    static AttackFixture f;
    return f;
}

}  // namespace

TEST_CASE("attacker knowledge invariants") {
    AttackerKnowledge k;
    k.mode = AttackerMode::WhiteBox;
    k.controlled_nodes = {};
    CHECK_THROWS_AS(k.validate(20), std::invalid_argument);  // needs at least one node
    k.controlled_nodes = {0, 1, 1};
    CHECK_THROWS_AS(k.validate(20), std::invalid_argument);  // duplicates
    k.controlled_nodes = {0, 25};
    CHECK_THROWS_AS(k.validate(20), std::invalid_argument);  // out of range
    std::vector<int> all(20);
    std::iota(all.begin(), all.end(), 0);
    k.controlled_nodes = all;
    CHECK_THROWS_AS(k.validate(20), std::invalid_argument);  // m < n
    k.controlled_nodes = {0, 1, 2};
    CHECK_NOTHROW(k.validate(20));
    k.mode = AttackerMode::Surrogate;
    CHECK_THROWS_AS(k.validate(20), std::invalid_argument);  // surrogate missing
}

TEST_CASE("surrogate agrees with the fusion model it observed") {
    const AttackFixture& f = fx();
    std::size_t agree = 0, checked = 0;
    // held-out slots the surrogate never saw
    for (std::size_t i = 1500; i < f.test_data.size(); ++i) {
        const auto& x = f.test_data.records[i].values;
        agree += f.surrogate.classify(x) == f.model.classify(x) ? 1 : 0;
        ++checked;
    }
    CHECK(static_cast<double>(agree) / static_cast<double>(checked) >= 0.98);
    CHECK_THROWS_AS(train_surrogate({}), std::invalid_argument);
}

TEST_CASE("mask discipline and non-negativity hold for every attack method") {
    const AttackFixture& f = fx();
    const std::vector<int> controlled = {1, 4, 9, 13, 17};
    const AttackerKnowledge k = f.black(controlled);
    auto in_mask = [&](int j) {
        return std::find(controlled.begin(), controlled.end(), j) != controlled.end();
    };
    for (std::size_t i = 0; i < 40; ++i) {
        const SensingVector& x = f.test_data.records[i];
        const AttackOutcome outs[] = {
            fgsm_attack(k, f.model, x, 1.0), pgd_attack(k, f.model, x, 0.25, 8),
            deepfool_attack(k, f.model, x, f.search), lbfgs_attack(k, f.model, x, f.search)};
        for (const auto& o : outs) {
            CHECK(o.attacked);
            for (int j = 0; j < x.values.size(); ++j) {
                if (!in_mask(j)) CHECK(o.perturbed.values[j] == x.values[j]);
                CHECK(o.perturbed.values[j] >= 0.0);
            }
            // success consistency against the true fusion decisions
            CHECK(o.success ==
                  (f.model.classify(o.perturbed.values) != f.model.classify(x.values)));
            CHECK(o.perturbation_norm ==
                  doctest::Approx((o.perturbed.values - x.values).norm()).epsilon(1e-12));
        }
    }
}

TEST_CASE("fgsm with full-vector control flips a linear model past the closed-form threshold") {
    // flip guaranteed when step >= |g(x)| / sum_j |w_gj|
    Eigen::MatrixXd w(2, 4);
    w << 1.0, 0.0, -0.5, 0.25, -1.0, 0.5, 0.5, -0.25;
    const FusionClassifier linear = FusionClassifier::affine(w, Eigen::Vector2d(0.0, 0.2));
    const Eigen::VectorXd wg = (w.row(1) - w.row(0)).transpose();

    AttackerKnowledge k;
    k.mode = AttackerMode::WhiteBox;
    k.controlled_nodes = {0, 1, 2};  // m < n required; x[3] = 0 keeps it inert
    SensingVector x;
    x.timeslot = 0;
    x.values = Eigen::Vector4d(2.0, 1.0, 3.0, 0.0);
    x.true_label = 0;

    const double margin = linear.score_margin(x.values);
    double reach = 0.0;
    for (int j : k.controlled_nodes) reach += std::abs(wg[j]);
    const double critical = std::abs(margin) / reach;

    const AttackOutcome below = fgsm_attack(k, linear, x, 0.5 * critical);
    CHECK(!below.success);
    const AttackOutcome above = fgsm_attack(k, linear, x, 1.5 * critical);
    CHECK(above.success);
}

TEST_CASE("fgsm with no controlled nodes is the identity") {
    const AttackFixture& f = fx();
    AttackerKnowledge k;
    k.mode = AttackerMode::WhiteBox;  // empty set: no validation, identity outcome
    const SensingVector& x = f.test_data.records[0];
    const AttackOutcome o = fgsm_attack(k, f.model, x, 1.0);
    CHECK(o.perturbed.values == x.values);
    CHECK(!o.success);
    CHECK(o.perturbation_norm == 0.0);
}

TEST_CASE("single-step pgd is one unit-gradient step of the requested length") {
    const AttackFixture& f = fx();
    const AttackerKnowledge k = f.whitebox({0, 1, 2, 3, 4, 5, 6});
    const SensingVector& x = f.test_data.records[7];
    const AttackOutcome o = pgd_attack(k, f.model, x, 0.35, 1);
    // no clamping triggered for this interior point, so the step length is exact
    CHECK(o.perturbation_norm == doctest::Approx(0.35).epsilon(1e-9));
}

TEST_CASE("pgd at matched budget succeeds at least as often as fgsm, minus slack") {
    const AttackFixture& f = fx();
    const AttackerKnowledge k = f.black({0, 1, 2, 3, 4, 5, 6});
    // FGSM's total L2 movement is step * sqrt(m); match PGD's budget to it
    const double step = 1.0;
    const double l2_budget = step * std::sqrt(7.0);
    const int steps = 8;
    int fgsm_hits = 0, pgd_hits = 0;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
        const SensingVector& x = f.test_data.records[i];
        fgsm_hits += fgsm_attack(k, f.model, x, step).success ? 1 : 0;
        pgd_hits += pgd_attack(k, f.model, x, l2_budget / steps, steps).success ? 1 : 0;
    }
    // per-step projection makes PGD at least competitive
    CHECK(static_cast<double>(pgd_hits) / n >= static_cast<double>(fgsm_hits) / n - 0.10);
}

TEST_CASE("fgsm success rate at defaults sits in the reported band") {
    const AttackFixture& f = fx();
    const AttackerKnowledge k = f.black({0, 1, 2, 3, 4, 5, 6});
    int hits = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i)
        hits += fgsm_attack(k, f.model, f.test_data.records[i], 1.0).success ? 1 : 0;
    const double rate = static_cast<double>(hits) / n;
    MESSAGE("fgsm success rate on this scenario seed: ", rate);
    // the strict [0.25, 0.60] band is asserted on the default pipeline
    // configuration in the experiment tests; across scenario seeds the rate
    // spreads wider
    CHECK(rate >= 0.15);
    CHECK(rate <= 0.75);
}

TEST_CASE("boundary-seeking attack with full control tracks the analytic distance") {
    Eigen::MatrixXd w(2, 5);
    w << 0.4, -0.2, 0.6, 0.1, -0.3, -0.4, 0.5, -0.2, 0.3, 0.2;
    const FusionClassifier linear = FusionClassifier::affine(w, Eigen::Vector2d(0.1, -0.1));
    const BoundaryDirection dir((w.row(1) - w.row(0)).transpose(), -0.2);

    AttackerKnowledge k;
    k.mode = AttackerMode::WhiteBox;
    k.controlled_nodes = {0, 1, 2, 3};  // all weightful coordinates
    SearchConfig cfg;
    cfg.box_lo = Eigen::VectorXd::Constant(5, -25.0);
    cfg.box_hi = Eigen::VectorXd::Constant(5, 25.0);

    SensingVector x;
    x.timeslot = 0;
    x.values = (Eigen::VectorXd(5) << 3.0, 2.0, 1.0, 2.5, 0.0).finished();
    x.true_label = 0;
    // restrict the analytic minimum to the controlled subspace
    Eigen::VectorXd wg = (w.row(1) - w.row(0)).transpose();
    Eigen::VectorXd masked = Eigen::VectorXd::Zero(5);
    for (int j : k.controlled_nodes) masked[j] = wg[j];
    const double analytic = std::abs(linear.score_margin(x.values)) / masked.norm();

    const AttackOutcome o = deepfool_attack(k, linear, x, cfg);
    CHECK(o.success);
    CHECK(o.perturbation_norm == doctest::Approx(analytic * 1.02).epsilon(0.01));
}

TEST_CASE("masked attacks cannot beat unrestricted ones") {
    const AttackFixture& f = fx();
    const SensingVector& x = f.test_data.records[11];
    SearchConfig free_cfg = f.search;
    const DdbResult free_df = deepfool_ddb(f.model, x.values, free_cfg);
    SearchConfig masked_cfg = f.search;
    masked_cfg.coordinate_mask = {0, 1, 2};
    const DdbResult masked_df = deepfool_ddb(f.model, x.values, masked_cfg);
    if (free_df.converged && masked_df.converged)
        CHECK(masked_df.distance >= free_df.distance - f.search.stop_threshold);
}

TEST_CASE("scheduler obeys the occurrence ratio exactly at the extremes") {
    const AttackFixture& f = fx();
    const AttackerKnowledge k = f.black({0, 1, 2, 3, 4, 5, 6});
    std::vector<SensingVector> stream(f.test_data.records.begin(),
                                      f.test_data.records.begin() + 300);

    AttackConfig cfg;
    cfg.occurrence_ratio = 0.0;
    cfg.seed = 7;
    const auto none = schedule_attacks(stream, k, f.model, cfg, f.search);
    for (std::size_t i = 0; i < stream.size(); ++i) {
        CHECK(!none[i].attacked);
        CHECK(none[i].perturbed.values == stream[i].values);
    }

    cfg.occurrence_ratio = 1.0;
    const auto all = schedule_attacks(stream, k, f.model, cfg, f.search);
    for (const auto& o : all) CHECK(o.attacked);
}

TEST_CASE("scheduler hit fraction matches the ratio and is seed-deterministic") {
    const AttackFixture& f = fx();
    const AttackerKnowledge k = f.black({0, 1, 2, 3, 4, 5, 6});
    std::vector<SensingVector> stream;
    stream.reserve(10000);
    for (std::size_t i = 0; i < 10000; ++i)
        stream.push_back(f.test_data.records[i % f.test_data.size()]);
    for (std::size_t i = 0; i < stream.size(); ++i) stream[i].timeslot = i;

    AttackConfig cfg;
    cfg.occurrence_ratio = 0.3;
    cfg.seed = 99;
    const auto a = schedule_attacks(stream, k, f.model, cfg, f.search, 4);
    const auto b = schedule_attacks(stream, k, f.model, cfg, f.search, 1);
    double fired = 0;
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].attacked == b[i].attacked);  // parallel == serial
        CHECK(a[i].perturbed.values == b[i].perturbed.values);
        fired += a[i].attacked ? 1 : 0;
    }
    CHECK(fired / 10000.0 == doctest::Approx(0.3).epsilon(0.066));  // within 0.02 absolute
}

TEST_CASE("targeted oracle lands exactly on the requested level set") {
    Rng rng(61);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd w(8);
    for (int j = 0; j < 8; ++j) w[j] = normal(rng);
    const BoundaryDirection boundary(w, 0.7);
    Eigen::VectorXd x(8);
    for (int j = 0; j < 8; ++j) x[j] = normal(rng);

    const std::vector<int> controlled = {0, 2, 5};
    SUBCASE("zero target distance means the boundary itself") {
        const TargetedDdbResult r = targeted_ddb_attack(boundary, x, 0.0, controlled, 1);
        REQUIRE(r.feasible);
        CHECK(std::abs(boundary.weights.dot(r.perturbed) + boundary.bias) <= 1e-9);
        for (int j = 0; j < 8; ++j)
            if (j != 0 && j != 2 && j != 5) CHECK(r.perturbed[j] == x[j]);
    }
    SUBCASE("requested distances are achieved on both sides") {
        for (int side : {-1, 1}) {
            const TargetedDdbResult r = targeted_ddb_attack(boundary, x, 1.25, controlled, side);
            REQUIRE(r.feasible);
            CHECK(r.achieved_distance == doctest::Approx(1.25).epsilon(1e-9));
        }
    }
    SUBCASE("weightless controlled coordinates are infeasible") {
        Eigen::VectorXd w2 = w;
        w2[0] = w2[2] = w2[5] = 0.0;
        const BoundaryDirection degenerate(w2, 0.7);
        const TargetedDdbResult r = targeted_ddb_attack(degenerate, x, 1.0, controlled, 1);
        CHECK(!r.feasible);
    }
    SUBCASE("corrupted knowledge of the uncontrolled coordinates shifts the result") {
        Eigen::VectorXd believed = x;
        Rng corrupt(62);
        std::uniform_real_distribution<double> wobble(0.8, 1.2);
        for (int j = 0; j < 8; ++j)
            if (j != 0 && j != 2 && j != 5) believed[j] *= wobble(corrupt);
        const TargetedDdbResult r =
            targeted_ddb_attack(boundary, x, 1.25, controlled, 1, &believed);
        REQUIRE(r.feasible);
        CHECK(std::abs(r.achieved_distance - 1.25) > 1e-6);  // belief error surfaces
    }
}

TEST_CASE("attack csv trace has the documented schema") {
    const AttackFixture& f = fx();
    const AttackerKnowledge k = f.black({0, 1, 2});
    std::vector<SensingVector> stream(f.test_data.records.begin(),
                                      f.test_data.records.begin() + 10);
    AttackConfig cfg;
    cfg.seed = 3;
    const auto outcomes = schedule_attacks(stream, k, f.model, cfg, f.search);
    const std::string path =
        (std::filesystem::temp_directory_path() / "specsense_trace.csv").string();
    save_attack_csv(outcomes, cfg.method, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "timeslot,attacked,success,perturbation_norm,method");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) rows += !line.empty();
    CHECK(rows == 10);
    std::filesystem::remove(path);
}
