#include "specsense/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "specsense/errors.hpp"
#include "specsense/parallel.hpp"
#include "specsense/rng.hpp"

namespace specsense {

namespace {

constexpr const char* kVersion = "specsense 0.1.0";

// Stage seeds derived from the master seed. Sweep points use
// kStageAttackBase + point index so each point owns an independent stream.
enum : std::uint64_t {
    kStageScenario = 1,
    kStageTrainData = 2,
    kStageTestData = 3,
    kStageSurrogate = 4,
    kStageAttackBase = 1000,
};

[[noreturn]] void stage_fail(const char* stage, const std::exception& e) {
    throw std::runtime_error(std::string("pipeline stage '") + stage + "': " + e.what());
}

struct IterationStats {
    double mean = 0.0, variance = 0.0;
    double p25 = 0.0, p50 = 0.0, p75 = 0.0;
    double cdf5 = 0.0, cdf15 = 0.0;
    std::size_t total_iterations = 0;
};

IterationStats iteration_stats(const DdbBatch& batch) {
    IterationStats s;
    std::vector<double> iters;
    iters.reserve(batch.results.size());
    for (const auto& r : batch.results) {
        iters.push_back(static_cast<double>(r.iterations));
        s.total_iterations += static_cast<std::size_t>(r.iterations);
    }
    if (iters.empty()) return s;
    const double n = static_cast<double>(iters.size());
    s.mean = std::accumulate(iters.begin(), iters.end(), 0.0) / n;
    for (double v : iters) s.variance += (v - s.mean) * (v - s.mean);
    s.variance /= n;
    std::sort(iters.begin(), iters.end());
    auto quantile = [&](double q) {
        const double idx = q * (n - 1.0);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min<std::size_t>(lo + 1, iters.size() - 1);
        const double frac = idx - static_cast<double>(lo);
        return iters[lo] * (1.0 - frac) + iters[hi] * frac;
    };
    s.p25 = quantile(0.25);
    s.p50 = quantile(0.50);
    s.p75 = quantile(0.75);
    auto cdf_at = [&](double v) {
        return static_cast<double>(std::upper_bound(iters.begin(), iters.end(), v) -
                                   iters.begin()) / n;
    };
    s.cdf5 = cdf_at(5.0);
    s.cdf15 = cdf_at(15.0);
    return s;
}

double flag_rate(const std::vector<KsDecision>& decisions) {
    if (decisions.empty()) return 0.0;
    std::size_t flagged = 0;
    for (const auto& d : decisions) flagged += d.flagged ? 1 : 0;
    return static_cast<double>(flagged) / static_cast<double>(decisions.size());
}

Dataset dataset_from_outcomes(const Dataset& base, const std::vector<AttackOutcome>& outcomes) {
    Dataset ds;
    ds.scenario = base.scenario;
    ds.records.reserve(outcomes.size());
    for (const auto& o : outcomes) ds.records.push_back(o.perturbed);
    return ds;
}

ExperimentReport make_report(const ExperimentConfig& config, std::string sweep) {
    ExperimentReport rep;
    rep.sweep = std::move(sweep);
    rep.seed = config.seed;
    rep.config_hash = config_hash(config);
    rep.version = kVersion;
    rep.scale = config.scale;
    if (config.scale < 1.0)
        rep.notes = "scaled run: paper-anchored floors carry an extra -0.05 slack";
    return rep;
}

}  // namespace

PipelineContext build_context(const ExperimentConfig& config) {
    config.validate();
    PipelineContext ctx;
    ctx.config = config;

    try {
        if (config.explicit_scale_h0 || config.explicit_scale_h1) {
            if (!config.explicit_scale_h0 || !config.explicit_scale_h1)
                throw ConfigError("scenario: explicit scales require both scale_h0 and scale_h1");
            ctx.scenario = ChannelScenario(static_cast<int>(config.explicit_scale_h0->size()),
                                           config.scenario.samples, *config.explicit_scale_h0,
                                           *config.explicit_scale_h1,
                                           config.scenario.occupancy_prior);
        } else {
            ScenarioParams params = config.scenario;
            params.seed = derive_seed(config.seed, kStageScenario) ^ config.scenario.seed;
            ctx.scenario = make_scenario(params);
        }
    } catch (const std::exception& e) {
        stage_fail("scenario", e);
    }

    try {
        ctx.train_data = generate_dataset(ctx.scenario, config.effective_train_size(),
                                          derive_seed(config.seed, kStageTrainData));
        ctx.test_data = generate_dataset(ctx.scenario, config.effective_test_size(),
                                         derive_seed(config.seed, kStageTestData));
    } catch (const std::exception& e) {
        stage_fail("generate", e);
    }

    try {
        ctx.model = train(ctx.train_data, config.train, &ctx.train_info);
    } catch (const std::exception& e) {
        stage_fail("train", e);
    }

    try {
        ctx.estimates = estimate_scale_params(ctx.train_data, ctx.scenario.sample_count);
        ctx.direction = lrt_direction(ctx.estimates.scale_h0, ctx.estimates.scale_h1,
                                      ctx.scenario.sample_count, config.lrt_threshold);
    } catch (const std::exception& e) {
        stage_fail("lrt-direction", e);
    }

    ctx.search = config.search;
    set_box_from_data(ctx.search, ctx.train_data);

    try {
        DdbBatch train_batch = compute_ddb_set(ctx.model, ctx.train_data, config.ddb_method,
                                               &ctx.direction, ctx.search, config.threads);
        ctx.baseline_distances = train_batch.converged_distances();
        ctx.baseline_nonconverged = train_batch.non_converged;
        DdbBatch clean_batch = compute_ddb_set(ctx.model, ctx.test_data, config.ddb_method,
                                               &ctx.direction, ctx.search, config.threads);
        ctx.clean_test_ddbs = clean_batch.converged_distances();
        ctx.clean_nonconverged = clean_batch.non_converged;
    } catch (const std::exception& e) {
        stage_fail("baseline-ddb", e);
    }

    if (config.attacker_mode == AttackerMode::Surrogate) {
        try {
            const std::size_t obs_count =
                std::min(config.surrogate_observations, ctx.test_data.size());
            std::vector<std::pair<Eigen::VectorXd, int>> observations;
            observations.reserve(obs_count);
            // The attacker watches the first slots of the test stream and the
            // decisions the fusion center announces for them.
            for (std::size_t i = 0; i < obs_count; ++i) {
                const auto& x = ctx.test_data.records[i].values;
                observations.emplace_back(x, ctx.model.classify(x));
            }
            TrainConfig surrogate_cfg = config.train;
            surrogate_cfg.weight_seed = derive_seed(config.seed, kStageSurrogate);
            TrainInfo info;
            ctx.surrogate = train_surrogate(observations, surrogate_cfg, &info);
            std::size_t agree = 0;
            for (const auto& [x, y] : observations)
                agree += (ctx.surrogate.classify(x) == y) ? 1 : 0;
            ctx.surrogate_agreement =
                static_cast<double>(agree) / static_cast<double>(observations.size());
        } catch (const std::exception& e) {
            stage_fail("surrogate", e);
        }
    }

    return ctx;
}

ReportRow evaluate_point(const PipelineContext& ctx, const PointSettings& point) {
    const ExperimentConfig& cfg = ctx.config;
    ReportRow row;
    row.group_size = point.group_size;
    row.ratio = point.ratio;
    row.malicious_count = static_cast<int>(point.controlled_nodes.size());
    row.alpha = point.alpha;
    row.ddb_method = to_string(cfg.ddb_method);
    row.attack_method = to_string(point.attack_method);
    row.nonconverged_train = ctx.baseline_nonconverged;

    AttackerKnowledge knowledge;
    knowledge.controlled_nodes = point.controlled_nodes;
    knowledge.mode = cfg.attacker_mode;
    if (cfg.attacker_mode == AttackerMode::Surrogate) knowledge.surrogate = ctx.surrogate;

    AttackConfig attack_cfg;
    attack_cfg.method = point.attack_method;
    attack_cfg.step_size = point.attack_step;
    attack_cfg.pgd_steps = point.pgd_steps;
    attack_cfg.occurrence_ratio = point.ratio;

    // Solver-driven attackers get a lighter inner budget; they only need a
    // label flip, not a tight minimum.
    SearchConfig attack_search = ctx.search;
    attack_search.outer_rounds = std::min(ctx.search.outer_rounds, 6);
    attack_search.inner_steps = std::min(ctx.search.inner_steps, 100);

    const bool solver_attack = point.attack_method == AttackMethod::DeepFool ||
                               point.attack_method == AttackMethod::Lbfgs;
    const std::size_t stream_len =
        solver_attack ? std::min(cfg.attack_subset, ctx.test_data.size())
                      : ctx.test_data.size();

    const DdbBaseline baseline = ctx.baseline();
    std::size_t flagged_attacked = 0, groups_attacked = 0;
    std::size_t attacked_slots = 0, attack_successes = 0;
    std::size_t nonconverged_test = 0;
    IterationStats iters;
    EvalCounts counts{};

    std::vector<SensingVector> stream(ctx.test_data.records.begin(),
                                      ctx.test_data.records.begin() +
                                          static_cast<std::ptrdiff_t>(stream_len));
    for (int trial = 0; trial < cfg.trials; ++trial) {
        AttackConfig trial_cfg = attack_cfg;
        trial_cfg.seed = derive_seed(point.attack_seed, static_cast<std::uint64_t>(trial));
        std::vector<AttackOutcome> outcomes;
        try {
            outcomes = schedule_attacks(stream, knowledge, ctx.model, trial_cfg, attack_search,
                                        cfg.threads);
        } catch (const std::exception& e) {
            stage_fail("attack", e);
        }
        for (const auto& o : outcomes) {
            attacked_slots += o.attacked ? 1 : 0;
            attack_successes += o.success ? 1 : 0;
        }

        Dataset attacked = dataset_from_outcomes(ctx.test_data, outcomes);
        try {
            ctx.model.reset_eval_counts();
            DdbBatch batch = compute_ddb_set(ctx.model, attacked, cfg.ddb_method,
                                             &ctx.direction, ctx.search, cfg.threads);
            const EvalCounts c = ctx.model.eval_counts();
            counts.forwards += c.forwards;
            counts.gradients += c.gradients;
            nonconverged_test += batch.non_converged;
            if (trial == 0) iters = iteration_stats(batch);

            const auto decisions =
                stream_detect(baseline, batch.converged_distances(), point.group_size,
                              point.alpha);
            for (const auto& d : decisions) flagged_attacked += d.flagged ? 1 : 0;
            groups_attacked += decisions.size();
        } catch (const std::exception& e) {
            stage_fail("test-ddb", e);
        }
    }

    // Matched clean stream: the same test data with no attacks applied.
    std::vector<double> clean(ctx.clean_test_ddbs.begin(),
                              ctx.clean_test_ddbs.begin() +
                                  static_cast<std::ptrdiff_t>(std::min(
                                      stream_len, ctx.clean_test_ddbs.size())));
    const auto clean_decisions = stream_detect(baseline, clean, point.group_size, point.alpha);

    row.detection_rate = groups_attacked
                             ? static_cast<double>(flagged_attacked) /
                                   static_cast<double>(groups_attacked)
                             : 0.0;
    row.false_alarm_rate = flag_rate(clean_decisions);
    row.groups = groups_attacked;
    row.attacked_slots = attacked_slots;
    row.attack_successes = attack_successes;
    row.attack_success_rate =
        attacked_slots ? static_cast<double>(attack_successes) /
                             static_cast<double>(attacked_slots)
                       : 0.0;
    row.mean_iterations = iters.mean;
    row.iterations_variance = iters.variance;
    row.iter_p25 = iters.p25;
    row.iter_p50 = iters.p50;
    row.iter_p75 = iters.p75;
    row.cdf_iter_5 = iters.cdf5;
    row.cdf_iter_15 = iters.cdf15;
    if (iters.total_iterations > 0) {
        row.grad_evals_per_iteration = static_cast<double>(counts.gradients) /
                                       static_cast<double>(cfg.trials) /
                                       static_cast<double>(iters.total_iterations);
        row.forward_evals_per_iteration = static_cast<double>(counts.forwards) /
                                          static_cast<double>(cfg.trials) /
                                          static_cast<double>(iters.total_iterations);
    }
    row.nonconverged_test = nonconverged_test;
    return row;
}

namespace {

PointSettings default_point(const ExperimentConfig& cfg, int index) {
    PointSettings p;
    p.group_size = cfg.group_size;
    p.alpha = cfg.alpha;
    p.ratio = cfg.occurrence_ratio;
    p.controlled_nodes = cfg.effective_controlled_nodes();
    p.attack_method = cfg.attack_method;
    p.attack_step = cfg.attack_step;
    p.pgd_steps = cfg.pgd_steps;
    p.attack_seed = derive_seed(cfg.seed, kStageAttackBase + static_cast<std::uint64_t>(index));
    return p;
}

}  // namespace

ExperimentReport run_pipeline(const ExperimentConfig& config) {
    PipelineContext ctx = build_context(config);
    ExperimentReport rep = make_report(config, "single");
    ReportRow row = evaluate_point(ctx, default_point(config, 0));
    row.point = 0;
    rep.rows.push_back(std::move(row));
    return rep;
}

ExperimentReport run_group_size_sweep(const ExperimentConfig& config,
                                      const std::vector<std::size_t>& sizes) {
    PipelineContext ctx = build_context(config);
    ExperimentReport rep = make_report(config, "group-size");
    // One attacked stream shared by every grouping, as if the detector were
    // re-run at different batch sizes over the same traffic.
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        PointSettings p = default_point(config, 0);
        p.group_size = sizes[i];
        ReportRow row = evaluate_point(ctx, p);
        row.point = static_cast<int>(i);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

ExperimentReport run_occurrence_sweep(const ExperimentConfig& config,
                                      const std::vector<double>& ratios_in,
                                      const std::vector<std::size_t>& sizes) {
    std::vector<double> ratios = ratios_in;
    if (ratios.empty())
        for (int r = 1; r <= 10; ++r) ratios.push_back(0.1 * r);
    PipelineContext ctx = build_context(config);
    ExperimentReport rep = make_report(config, "occurrence");
    int point = 0;
    for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
        for (std::size_t si = 0; si < sizes.size(); ++si) {
            PointSettings p = default_point(config, static_cast<int>(ri));
            p.ratio = ratios[ri];
            p.group_size = sizes[si];
            ReportRow row = evaluate_point(ctx, p);
            row.point = point++;
            rep.rows.push_back(std::move(row));
        }
    }
    return rep;
}

ExperimentReport run_malicious_count_sweep(const ExperimentConfig& config,
                                           const std::vector<int>& m_values) {
    PipelineContext ctx = build_context(config);
    ExperimentReport rep = make_report(config, "malicious-count");
    for (std::size_t i = 0; i < m_values.size(); ++i) {
        const int m = m_values[i];
        if (m < 1 || m >= ctx.scenario.node_count)
            throw ConfigError("malicious-count sweep: m out of range");
        PointSettings p = default_point(config, static_cast<int>(i));
        p.controlled_nodes.clear();
        for (int j = 0; j < m; ++j) p.controlled_nodes.push_back(j);
        ReportRow row = evaluate_point(ctx, p);
        row.point = static_cast<int>(i);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

ExperimentReport run_method_comparison(const ExperimentConfig& config) {
    PipelineContext ctx = build_context(config);
    ExperimentReport rep = make_report(config, "method-comparison");

    const std::size_t subset = std::min(config.comparison_subset, ctx.test_data.size());
    const std::size_t base_subset = std::min(config.comparison_subset, ctx.train_data.size());

    // Default attack stream, shared by all methods.
    PointSettings p0 = default_point(config, 0);
    AttackerKnowledge knowledge;
    knowledge.controlled_nodes = p0.controlled_nodes;
    knowledge.mode = config.attacker_mode;
    if (knowledge.mode == AttackerMode::Surrogate) knowledge.surrogate = ctx.surrogate;
    AttackConfig attack_cfg;
    attack_cfg.method = p0.attack_method;
    attack_cfg.step_size = p0.attack_step;
    attack_cfg.pgd_steps = p0.pgd_steps;
    attack_cfg.occurrence_ratio = p0.ratio;
    attack_cfg.seed = p0.attack_seed;

    std::vector<SensingVector> stream(ctx.test_data.records.begin(),
                                      ctx.test_data.records.begin() +
                                          static_cast<std::ptrdiff_t>(subset));
    const auto outcomes =
        schedule_attacks(stream, knowledge, ctx.model, attack_cfg, ctx.search, config.threads);
    const Dataset attacked = dataset_from_outcomes(ctx.test_data, outcomes);

    Dataset train_subset;
    train_subset.scenario = ctx.train_data.scenario;
    train_subset.records.assign(ctx.train_data.records.begin(),
                                ctx.train_data.records.begin() +
                                    static_cast<std::ptrdiff_t>(base_subset));
    Dataset clean_subset;
    clean_subset.scenario = ctx.test_data.scenario;
    clean_subset.records.assign(ctx.test_data.records.begin(),
                                ctx.test_data.records.begin() +
                                    static_cast<std::ptrdiff_t>(subset));

    const DdbMethod methods[] = {DdbMethod::LrtBinarySearch, DdbMethod::DeepFool,
                                 DdbMethod::Cw, DdbMethod::Lbfgs};
    int point = 0;
    for (DdbMethod method : methods) {
        ReportRow row;
        row.point = point++;
        row.group_size = config.group_size;
        row.ratio = config.occurrence_ratio;
        row.malicious_count = static_cast<int>(p0.controlled_nodes.size());
        row.alpha = config.alpha;
        row.ddb_method = to_string(method);
        row.attack_method = to_string(config.attack_method);

        ctx.model.reset_eval_counts();
        DdbBatch train_batch = compute_ddb_set(ctx.model, train_subset, method, &ctx.direction,
                                               ctx.search, config.threads);
        const DdbBaseline baseline(train_batch.converged_distances());
        DdbBatch clean_batch = compute_ddb_set(ctx.model, clean_subset, method, &ctx.direction,
                                               ctx.search, config.threads);

        ctx.model.reset_eval_counts();
        const auto t0 = std::chrono::steady_clock::now();
        DdbBatch batch = compute_ddb_set(ctx.model, attacked, method, &ctx.direction, ctx.search,
                                         config.threads);
        const auto t1 = std::chrono::steady_clock::now();
        const EvalCounts counts = ctx.model.eval_counts();
        const IterationStats iters = iteration_stats(batch);
        if (iters.total_iterations > 0)
            row.wall_ms_per_iteration =
                std::chrono::duration<double, std::milli>(t1 - t0).count() /
                static_cast<double>(iters.total_iterations);

        const auto attacked_decisions = stream_detect(baseline, batch.converged_distances(),
                                                      config.group_size, config.alpha);
        const auto clean_decisions = stream_detect(baseline, clean_batch.converged_distances(),
                                                   config.group_size, config.alpha);
        row.detection_rate = flag_rate(attacked_decisions);
        row.false_alarm_rate = flag_rate(clean_decisions);
        row.groups = attacked_decisions.size();
        for (const auto& o : outcomes) {
            row.attacked_slots += o.attacked ? 1 : 0;
            row.attack_successes += o.success ? 1 : 0;
        }
        row.attack_success_rate = row.attacked_slots
                                       ? static_cast<double>(row.attack_successes) /
                                             static_cast<double>(row.attacked_slots)
                                       : 0.0;
        row.mean_iterations = iters.mean;
        row.iterations_variance = iters.variance;
        row.iter_p25 = iters.p25;
        row.iter_p50 = iters.p50;
        row.iter_p75 = iters.p75;
        row.cdf_iter_5 = iters.cdf5;
        row.cdf_iter_15 = iters.cdf15;
        if (iters.total_iterations > 0) {
            row.grad_evals_per_iteration = static_cast<double>(counts.gradients) /
                                           static_cast<double>(iters.total_iterations);
            row.forward_evals_per_iteration = static_cast<double>(counts.forwards) /
                                              static_cast<double>(iters.total_iterations);
        }
        row.nonconverged_train = train_batch.non_converged;
        row.nonconverged_test = batch.non_converged;
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

ExperimentReport run_attack_method_sweep(const ExperimentConfig& config) {
    PipelineContext ctx = build_context(config);
    ExperimentReport rep = make_report(config, "attack-method");
    const AttackMethod methods[] = {AttackMethod::Fgsm, AttackMethod::Pgd,
                                    AttackMethod::DeepFool, AttackMethod::Lbfgs};
    for (std::size_t i = 0; i < 4; ++i) {
        PointSettings p = default_point(config, static_cast<int>(i));
        p.attack_method = methods[i];
        ReportRow row = evaluate_point(ctx, p);
        row.point = static_cast<int>(i);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

ExperimentReport run_location_sweep(const ExperimentConfig& config,
                                    std::vector<std::vector<int>> node_sets) {
    PipelineContext ctx = build_context(config);
    if (node_sets.empty()) {
        // Five disjoint 4-node groups drawn from the master seed.
        std::vector<int> all(static_cast<std::size_t>(ctx.scenario.node_count));
        std::iota(all.begin(), all.end(), 0);
        Rng rng(derive_seed(config.seed, 77));
        std::shuffle(all.begin(), all.end(), rng);
        for (int g = 0; g < 5; ++g)
            node_sets.emplace_back(all.begin() + g * 4, all.begin() + (g + 1) * 4);
    }
    if (node_sets.size() < 2) throw ConfigError("location sweep: need at least two node sets");
    for (std::size_t a = 0; a < node_sets.size(); ++a) {
        if (node_sets[a].empty()) throw ConfigError("location sweep: empty node set");
        for (int j : node_sets[a])
            if (j < 0 || j >= ctx.scenario.node_count)
                throw ConfigError("location sweep: node index out of range");
        for (std::size_t b = a + 1; b < node_sets.size(); ++b)
            for (int j : node_sets[a])
                for (int k : node_sets[b])
                    if (j == k)
                        throw ConfigError(
                            "location sweep: node sets must be pairwise disjoint");
    }

    ExperimentReport rep = make_report(config, "location");
    std::vector<double> success_rates, detection_rates;
    for (std::size_t i = 0; i < node_sets.size(); ++i) {
        PointSettings p = default_point(config, static_cast<int>(i));
        p.controlled_nodes = node_sets[i];
        ReportRow row = evaluate_point(ctx, p);
        row.point = static_cast<int>(i);
        std::string set_str = "set=";
        std::vector<int> sorted = node_sets[i];
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t j = 0; j < sorted.size(); ++j)
            set_str += (j ? "+" : "") + std::to_string(sorted[j]);
        row.extra = set_str;
        success_rates.push_back(row.attack_success_rate);
        detection_rates.push_back(row.detection_rate);
        rep.rows.push_back(std::move(row));
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "spearman=%.6f",
                  spearman_correlation(success_rates, detection_rates));
    rep.notes = rep.notes.empty() ? buf : rep.notes + "; " + buf;
    return rep;
}

ExperimentReport run_alpha_sweep(const ExperimentConfig& config,
                                 const std::vector<double>& alphas) {
    PipelineContext ctx = build_context(config);
    ExperimentReport rep = make_report(config, "alpha");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        PointSettings p = default_point(config, 0);  // same attack stream for all alphas
        p.alpha = alphas[i];
        ReportRow row = evaluate_point(ctx, p);
        row.point = static_cast<int>(i);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

ExperimentReport run_sweep(const std::string& name, const ExperimentConfig& config) {
    if (name == "single") return run_pipeline(config);
    if (name == "group-size") return run_group_size_sweep(config);
    if (name == "occurrence") return run_occurrence_sweep(config);
    if (name == "malicious-count") return run_malicious_count_sweep(config);
    if (name == "method-comparison") return run_method_comparison(config);
    if (name == "attack-method") return run_attack_method_sweep(config);
    if (name == "location") return run_location_sweep(config);
    if (name == "alpha") return run_alpha_sweep(config);
    throw ConfigError("unknown sweep '" + name +
                      "' (single|group-size|occurrence|malicious-count|method-comparison|"
                      "attack-method|location|alpha)");
}

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("spearman: need two equal-length samples of size >= 2");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

}  // namespace specsense
