#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "specsense/data.hpp"
#include "specsense/errors.hpp"

using namespace specsense;

namespace {

// Independent Gamma sampler (Marsaglia-Tsang squeeze) used as the oracle
// against the library's generator; shares no code with sample_timeslot.
double oracle_gamma(double shape, double scale, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    double boost = 1.0;
    if (shape < 1.0) {
        boost = std::pow(uniform(rng), 1.0 / shape);
        shape += 1.0;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform(rng);
        if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v * scale;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return boost * d * v * scale;
    }
}

ChannelScenario two_node_scenario(int samples = 4) {
    Eigen::VectorXd h0(2), h1(2);
    h0 << 2.0, 3.0;
    h1 << 1.0, 1.5;
    return ChannelScenario(2, samples, h0, h1, 0.5);
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("scenario invariants are enforced") {
    Eigen::VectorXd h0(2), h1(2);
    h0 << 2.0, 3.0;
    h1 << 1.0, 1.5;
    CHECK_THROWS_AS(ChannelScenario(0, 4, h0, h1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(ChannelScenario(2, 0, h0, h1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(ChannelScenario(3, 4, h0, h1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(ChannelScenario(2, 4, h0, h1, 1.5), std::invalid_argument);
    Eigen::VectorXd bad = h1;
    bad[0] = 0.0;
    CHECK_THROWS_AS(ChannelScenario(2, 4, h0, bad, 0.5), std::invalid_argument);
    // identical scales leave the likelihood ratio flat
    CHECK_THROWS_AS(ChannelScenario(2, 4, h0, h0, 0.5), std::invalid_argument);
}

TEST_CASE("gamma(1, beta) draws are exponential with mean beta") {
    Eigen::VectorXd h0(1), h1(1);
    h0 << 0.7;
    h1 << 0.2;
    ChannelScenario sc(1, 1, h0, h1, 0.5);
    Rng rng(5);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) sum += sample_timeslot(sc, 0, rng).values[0];
    CHECK(sum / n == doctest::Approx(0.7).epsilon(0.03));
}

TEST_CASE("gamma moments match shape*scale and the independent oracle") {
    const int draws = 10000;
    const int T = 64;
    const double beta = 0.5;
    Eigen::VectorXd h0(1), h1(1);
    h0 << beta;
    h1 << beta * 0.5;
    ChannelScenario sc(1, T, h0, h1, 0.5);

    Rng rng(42);
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double v = sample_timeslot(sc, 0, rng).values[0];
        sum += v;
        sq += v * v;
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;

    Rng oracle_rng(43);
    double osum = 0.0, osq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double v = oracle_gamma(T, beta, oracle_rng);
        osum += v;
        osq += v * v;
    }
    const double omean = osum / draws;
    const double ovar = osq / draws - omean * omean;

    CHECK(mean == doctest::Approx(T * beta).epsilon(0.02));
    CHECK(var == doctest::Approx(T * beta * beta).epsilon(0.05));
    CHECK(omean == doctest::Approx(T * beta).epsilon(0.02));
    CHECK(ovar == doctest::Approx(T * beta * beta).epsilon(0.05));
    CHECK(mean == doctest::Approx(omean).epsilon(0.02));
    CHECK(var == doctest::Approx(ovar).epsilon(0.08));
}

TEST_CASE("generate_dataset rejects zero count and is seed-deterministic") {
    const ChannelScenario sc = two_node_scenario();
    CHECK_THROWS_AS(generate_dataset(sc, 0, 1), std::invalid_argument);

    const Dataset a = generate_dataset(sc, 500, 9);
    const Dataset b = generate_dataset(sc, 500, 9);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.records[i].true_label == b.records[i].true_label);
        CHECK(a.records[i].values == b.records[i].values);  // bit-identical
        CHECK(a.records[i].timeslot == i);
    }
    const Dataset c = generate_dataset(sc, 500, 10);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        any_diff = any_diff || a.records[i].values != c.records[i].values;
    CHECK(any_diff);
}

TEST_CASE("label fraction follows the occupancy prior") {
    const ChannelScenario sc = two_node_scenario();
    const Dataset ds = generate_dataset(sc, 20000, 3);
    double ones = 0;
    for (const auto& r : ds.records) ones += r.true_label;
    CHECK(ones / 20000.0 == doctest::Approx(0.5).epsilon(0.04));  // within 0.02 absolute

    Eigen::VectorXd h0 = sc.scale_h0, h1 = sc.scale_h1;
    const ChannelScenario all0(2, 4, h0, h1, 1.0);
    const Dataset d0 = generate_dataset(all0, 200, 3);
    for (const auto& r : d0.records) CHECK(r.true_label == 0);
}

TEST_CASE("csv round trip preserves values and labels") {
    const ChannelScenario sc = two_node_scenario();
    const Dataset ds = generate_dataset(sc, 200, 17);
    const std::string path = temp_path("specsense_roundtrip.csv");
    save_csv(ds, path);
    const Dataset back = load_csv(path);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.records[i].true_label == ds.records[i].true_label);
        for (int j = 0; j < 2; ++j)
            CHECK(back.records[i].values[j] == ds.records[i].values[j]);  // %.17g is exact
    }
    std::filesystem::remove(path);
}

TEST_CASE("csv loader reports schema and validation failures with line numbers") {
    const std::string path = temp_path("specsense_bad.csv");
    auto write = [&](const char* text) {
        std::ofstream out(path);
        out << text;
    };

    write("node_1,node_2,label\n1.0,2.0,0\n0.5,0.25,1\n2.0,1.0,0\n");
    CHECK(load_csv(path).size() == 3);

    write("node_1,node_2,label\n1.0,-2.0,0\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("line 2"), ParseError);

    write("node_1,node_2,label\n1.0,0\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("columns"), ParseError);

    write("node_1,node_2,label\n1.0,2.0,7\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);

    write("node_1,label\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);  // header ok but no rows

    write("power_a,label\n1.0,0\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);  // wrong header names

    write("node_1,node_2,label\n1.0,oops,1\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("line 2"), ParseError);

    std::filesystem::remove(path);
}

TEST_CASE("estimate_scale_params recovers generator scales") {
    ScenarioParams params;
    params.seed = 21;
    const ChannelScenario sc = make_scenario(params);
    const Dataset ds = generate_dataset(sc, 20000, 22);
    const ScaleEstimates est = estimate_scale_params(ds, sc.sample_count);
    for (int j = 0; j < sc.node_count; ++j) {
        CHECK(est.scale_h0[j] == doctest::Approx(sc.scale_h0[j]).epsilon(0.03));
        CHECK(est.scale_h1[j] == doctest::Approx(sc.scale_h1[j]).epsilon(0.03));
    }
}

TEST_CASE("single record per class estimates values / T exactly") {
    Dataset ds;
    SensingVector a, b;
    a.timeslot = 0;
    a.values = Eigen::Vector2d(4.0, 8.0);
    a.true_label = 0;
    b.timeslot = 1;
    b.values = Eigen::Vector2d(1.0, 2.0);
    b.true_label = 1;
    ds.records = {a, b};
    const ScaleEstimates est = estimate_scale_params(ds, 4);
    CHECK(est.scale_h0[0] == 1.0);
    CHECK(est.scale_h0[1] == 2.0);
    CHECK(est.scale_h1[0] == 0.25);
    CHECK(est.scale_h1[1] == 0.5);
}

TEST_CASE("estimation requires both label classes") {
    const ChannelScenario sc = two_node_scenario();
    Dataset ds = generate_dataset(sc, 50, 3);
    for (auto& r : ds.records) r.true_label = 0;
    CHECK_THROWS_AS(estimate_scale_params(ds, 4), EstimationError);
    ds.records.clear();
    CHECK_THROWS_AS(estimate_scale_params(ds, 4), EstimationError);
}

TEST_CASE("make_scenario is deterministic and heterogeneous") {
    ScenarioParams params;
    params.seed = 5;
    const ChannelScenario a = make_scenario(params);
    const ChannelScenario b = make_scenario(params);
    CHECK(a.scale_h0 == b.scale_h0);
    CHECK(a.scale_h1 == b.scale_h1);
    CHECK((a.scale_h0.array() > a.scale_h1.array()).all());  // occupied adds power
    bool hetero = false;
    for (int j = 1; j < a.node_count; ++j) hetero = hetero || a.scale_h1[j] != a.scale_h1[0];
    CHECK(hetero);
}
