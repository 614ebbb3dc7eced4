// specsense CLI: dataset generation, fusion-model training, DDB computation,
// adversarial spectrum attacks, K-S drift detection, and the experiment
// sweeps, wired end to end from one config file plus flag overrides.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specsense/attack.hpp"
#include "specsense/classifier.hpp"
#include "specsense/config.hpp"
#include "specsense/data.hpp"
#include "specsense/ddb.hpp"
#include "specsense/errors.hpp"
#include "specsense/experiment.hpp"
#include "specsense/ks.hpp"

namespace fs = std::filesystem;
using namespace specsense;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAssert = 3;

struct GlobalFlags {
    std::string config_path;
    std::string out_dir = ".";
    std::string format = "csv";
    bool assert_mode = false;

    std::optional<std::uint64_t> seed;
    std::optional<double> scale;
    bool full = false;
    std::optional<std::string> ddb_method;
    std::optional<std::string> attack_method;
    std::optional<double> ratio;
    std::optional<std::size_t> group_size;
    std::optional<double> alpha;
    std::optional<int> m;
    std::vector<int> nodes;
    std::optional<unsigned> threads;
};

ExperimentConfig resolve_config(const GlobalFlags& g) {
    ExperimentConfig cfg;
    if (!g.config_path.empty()) cfg = load_config(g.config_path);
    // flag overrides beat config-file values
    if (g.seed) cfg.seed = *g.seed;
    if (g.scale) cfg.scale = *g.scale;
    if (g.full) cfg.full = true;
    if (g.ddb_method) cfg.ddb_method = ddb_method_from_string(*g.ddb_method);
    if (g.attack_method) cfg.attack_method = attack_method_from_string(*g.attack_method);
    if (g.ratio) cfg.occurrence_ratio = *g.ratio;
    if (g.group_size) cfg.group_size = *g.group_size;
    if (g.alpha) cfg.alpha = *g.alpha;
    if (g.m) cfg.malicious_count = *g.m;
    if (!g.nodes.empty()) {
        cfg.controlled_nodes = g.nodes;
        cfg.malicious_count = static_cast<int>(g.nodes.size());
    }
    if (g.threads) cfg.threads = *g.threads;
    cfg.validate();
    return cfg;
}

std::string out_path(const GlobalFlags& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / name).string();
}

ChannelScenario scenario_from(const ExperimentConfig& cfg) {
    if (cfg.explicit_scale_h0 && cfg.explicit_scale_h1)
        return ChannelScenario(static_cast<int>(cfg.explicit_scale_h0->size()),
                               cfg.scenario.samples, *cfg.explicit_scale_h0,
                               *cfg.explicit_scale_h1, cfg.scenario.occupancy_prior);
    return make_scenario(cfg.scenario);
}

std::vector<double> load_ddb_distances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open ddb file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "timeslot,method,distance,iterations,converged")
        throw ParseError("bad ddb csv header in '" + path + "'", 1);
    std::vector<double> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string slot, method, distance, iterations, converged;
        if (!std::getline(ss, slot, ',') || !std::getline(ss, method, ',') ||
            !std::getline(ss, distance, ',') || !std::getline(ss, iterations, ',') ||
            !std::getline(ss, converged))
            throw ParseError("malformed ddb row", line_no);
        if (converged == "1") out.push_back(std::stod(distance));
    }
    return out;
}

// ---------------------------------------------------------------------------
// --assert floors: the trend-level checks run in CI mode after a sweep.

struct AssertionLog {
    bool ok = true;
    void check(bool pass, const std::string& what) {
        std::printf("[assert] %-60s %s\n", what.c_str(), pass ? "PASS" : "FAIL");
        ok = ok && pass;
    }
};

const ReportRow* find_row(const ExperimentReport& rep,
                          const std::function<bool(const ReportRow&)>& pred) {
    for (const auto& r : rep.rows)
        if (pred(r)) return &r;
    return nullptr;
}

bool monotone_with_slack(const std::vector<double>& v, double slack, int allowed_inversions) {
    int inversions = 0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        if (v[i + 1] < v[i] - 1e-12) {
            if (v[i] - v[i + 1] > slack) return false;
            if (++inversions > allowed_inversions) return false;
        }
    }
    return true;
}

int check_assertions(const ExperimentReport& rep) {
    AssertionLog log;
    const double slack = rep.scale < 1.0 ? 0.05 : 0.0;

    if (rep.sweep == "single") {
        log.check(rep.rows.size() == 1 && rep.rows[0].detection_rate >= 0.90 - slack,
                  "detection rate >= 0.90 at defaults");
        log.check(rep.rows.size() == 1 && rep.rows[0].false_alarm_rate <= 0.02,
                  "false alarm <= 0.02 at defaults");
    } else if (rep.sweep == "group-size") {
        bool far_ok = true;
        for (const auto& r : rep.rows) far_ok = far_ok && r.false_alarm_rate <= 0.02;
        log.check(far_ok, "false alarm <= 0.02 at every group size");
        const ReportRow* small = find_row(rep, [](const ReportRow& r) { return r.group_size == 10; });
        const ReportRow* large = find_row(rep, [](const ReportRow& r) { return r.group_size == 400; });
        log.check(small && large && large->detection_rate >= small->detection_rate - 0.02,
                  "detection(400) >= detection(10) - 0.02");
        const ReportRow* fifty = find_row(rep, [](const ReportRow& r) { return r.group_size == 50; });
        log.check(fifty && fifty->detection_rate >= 0.95 - slack,
                  "detection >= 0.95 at group size 50, ratio 1");
    } else if (rep.sweep == "occurrence") {
        std::vector<std::size_t> sizes;
        std::vector<double> ratios;
        for (const auto& r : rep.rows) {
            if (std::find(sizes.begin(), sizes.end(), r.group_size) == sizes.end())
                sizes.push_back(r.group_size);
            if (std::find(ratios.begin(), ratios.end(), r.ratio) == ratios.end())
                ratios.push_back(r.ratio);
        }
        bool rows_ok = true, cols_ok = true;
        for (std::size_t s : sizes) {
            std::vector<double> by_ratio;
            for (double rt : ratios) {
                const ReportRow* row = find_row(rep, [&](const ReportRow& r) {
                    return r.group_size == s && r.ratio == rt;
                });
                if (row) by_ratio.push_back(row->detection_rate);
            }
            rows_ok = rows_ok && monotone_with_slack(by_ratio, 0.02, 1);
        }
        for (double rt : ratios) {
            std::vector<double> by_size;
            for (std::size_t s : sizes) {
                const ReportRow* row = find_row(rep, [&](const ReportRow& r) {
                    return r.group_size == s && r.ratio == rt;
                });
                if (row) by_size.push_back(row->detection_rate);
            }
            cols_ok = cols_ok && monotone_with_slack(by_size, 0.02, 1);
        }
        log.check(rows_ok, "detection monotone in ratio per size (<= one 0.02 inversion)");
        log.check(cols_ok, "detection monotone in size per ratio (<= one 0.02 inversion)");
        const ReportRow* anchor_hi = find_row(rep, [](const ReportRow& r) {
            return r.group_size == 200 && std::abs(r.ratio - 0.3) < 1e-9;
        });
        log.check(anchor_hi && anchor_hi->detection_rate >= 0.80 - slack,
                  "detection >= 0.80 at size 200, ratio 0.3");
        const ReportRow* anchor_lo = find_row(rep, [](const ReportRow& r) {
            return r.group_size == 10 && std::abs(r.ratio - 0.1) < 1e-9;
        });
        log.check(anchor_lo && anchor_lo->detection_rate <= 0.10,
                  "detection <= 0.10 at size 10, ratio 0.1");
        const ReportRow* anchor_200 = find_row(rep, [](const ReportRow& r) {
            return r.group_size == 200 && std::abs(r.ratio - 0.1) < 1e-9;
        });
        // informational: the synthetic scenario is more low-intensity
        // sensitive at size 200 than the reference data
        if (anchor_200)
            std::printf("[assert] %-60s %.4f (informational)\n",
                        "detection at size 200, ratio 0.1", anchor_200->detection_rate);
    } else if (rep.sweep == "malicious-count") {
        std::vector<double> rates;
        for (const auto& r : rep.rows) rates.push_back(r.detection_rate);
        log.check(monotone_with_slack(rates, 0.03, rep.rows.size()),
                  "detection non-decreasing in m (0.03 slack)");
        const ReportRow* m3 = find_row(rep, [](const ReportRow& r) { return r.malicious_count == 3; });
        const ReportRow* m10 = find_row(rep, [](const ReportRow& r) { return r.malicious_count == 10; });
        log.check(m3 && m3->detection_rate >= 0.6 - slack, "detection >= 0.6 at m = 3");
        log.check(m10 && m10->detection_rate >= 0.9 - slack, "detection >= 0.9 at m = 10");
    } else if (rep.sweep == "method-comparison") {
        const ReportRow* lrt = find_row(rep, [](const ReportRow& r) { return r.ddb_method == "lrt"; });
        const ReportRow* df =
            find_row(rep, [](const ReportRow& r) { return r.ddb_method == "deepfool"; });
        log.check(lrt && lrt->grad_evals_per_iteration == 0.0,
                  "binary search uses 0 gradient evaluations per iteration");
        bool others_grad = true;
        for (const auto& r : rep.rows)
            if (r.ddb_method != "lrt") others_grad = others_grad && r.grad_evals_per_iteration >= 1.0;
        log.check(others_grad, "gradient methods use >= 1 gradient eval per iteration");
        log.check(lrt && lrt->cdf_iter_15 >= 0.99, "binary search completes 99% within 15 iterations");
        log.check(lrt && lrt->mean_iterations >= 7.0 && lrt->mean_iterations <= 15.0,
                  "binary search mean iterations within [7, 15]");
        log.check(lrt && df && lrt->iterations_variance < df->iterations_variance,
                  "binary search iteration variance below DeepFool's");
    } else if (rep.sweep == "attack-method") {
        bool all_ok = true;
        for (const auto& r : rep.rows) all_ok = all_ok && r.detection_rate >= 0.7 - slack;
        log.check(all_ok, "detection >= 0.7 for every attack method");
        const ReportRow* fgsm =
            find_row(rep, [](const ReportRow& r) { return r.attack_method == "fgsm"; });
        log.check(fgsm && fgsm->detection_rate >= 0.9 - slack, "detection >= 0.9 under FGSM");
    } else if (rep.sweep == "location") {
        const auto pos = rep.notes.find("spearman=");
        double rho = -1.0;
        if (pos != std::string::npos) rho = std::stod(rep.notes.substr(pos + 9));
        log.check(rho > 0.0, "success/detection rank correlation positive");
    } else if (rep.sweep == "alpha") {
        std::vector<double> dr, far;
        for (const auto& r : rep.rows) {
            dr.push_back(r.detection_rate);
            far.push_back(r.false_alarm_rate);
        }
        log.check(monotone_with_slack(dr, 0.02, 1), "detection non-decreasing in alpha");
        log.check(monotone_with_slack(far, 0.02, 1), "false alarm non-decreasing in alpha");
        const ReportRow* a01 = find_row(rep, [](const ReportRow& r) {
            return std::abs(r.alpha - 0.01) < 1e-12;
        });
        log.check(a01 && a01->detection_rate >= 0.9 - slack && a01->false_alarm_rate <= 0.02,
                  "alpha 0.01: detection >= 0.9, false alarm <= 0.02");
        const ReportRow* a001 = find_row(rep, [](const ReportRow& r) {
            return std::abs(r.alpha - 0.001) < 1e-12;
        });
        log.check(a001 && a001->false_alarm_rate <= 0.005, "alpha 0.001: false alarm <= 0.005");
    }
    return log.ok ? kExitOk : kExitAssert;
}

void write_timings(const ExperimentReport& rep, const std::string& path) {
    bool any = false;
    for (const auto& r : rep.rows) any = any || r.wall_ms_per_iteration > 0.0;
    if (!any) return;
    std::ofstream out(path);
    out << "point,ddb_method,wall_ms_per_iteration\n";
    for (const auto& r : rep.rows)
        if (r.wall_ms_per_iteration > 0.0)
            out << r.point << ',' << r.ddb_method << ',' << r.wall_ms_per_iteration << '\n';
    std::printf("timings written to %s (informational; hardware-dependent)\n", path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative spectrum sensing security workbench"};
    app.require_subcommand(1);

    GlobalFlags g;
    app.add_option("--config", g.config_path, "Config file (sectioned key = value)");
    app.add_option("--seed", g.seed, "Master seed override");
    app.add_option("--scale", g.scale, "Train/test size multiplier");
    app.add_flag("--full", g.full, "Use the full 20000/80000 train/test split");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--format", g.format, "Report format: csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--ddb-method", g.ddb_method, "lrt|deepfool|cw|lbfgs");
    app.add_option("--attack", g.attack_method, "fgsm|pgd|deepfool|lbfgs");
    app.add_option("--ratio", g.ratio, "Attack occurrence ratio");
    app.add_option("--group-size", g.group_size, "K-S test group size");
    app.add_option("--alpha", g.alpha, "K-S significance level");
    app.add_option("--m", g.m, "Number of malicious nodes");
    app.add_option("--nodes", g.nodes, "Explicit controlled node indices");
    app.add_option("--threads", g.threads, "Worker threads (0 = hardware)");
    app.add_flag("--assert", g.assert_mode, "CI mode: verify trend floors, exit 3 on failure");

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a synthetic sensing dataset CSV");
    std::size_t gen_count = 0;
    std::string gen_out = "dataset.csv";
    gen->add_option("--count", gen_count, "Number of timeslots (default: train size)");
    gen->add_option("--out-file", gen_out, "Output CSV path");

    // train
    auto* tr = app.add_subcommand("train", "Train the fusion classifier");
    std::string tr_data, tr_model = "fusion.model";
    tr->add_option("--data", tr_data, "Training dataset CSV (default: generate from config)");
    tr->add_option("--model-out", tr_model, "Model output path");

    // ddb
    auto* dd = app.add_subcommand("ddb", "Compute distance-to-boundary for a dataset");
    std::string dd_model, dd_data, dd_out = "ddb.csv";
    dd->add_option("--model", dd_model, "Fusion model path")->required();
    dd->add_option("--data", dd_data, "Dataset CSV")->required();
    dd->add_option("--out-file", dd_out, "Output CSV path");

    // attack
    auto* at = app.add_subcommand("attack", "Perturb a dataset from compromised nodes");
    std::string at_model, at_data, at_out = "attacked.csv", at_trace = "attack_trace.csv";
    at->add_option("--model", at_model, "Fusion model path")->required();
    at->add_option("--data", at_data, "Dataset CSV")->required();
    at->add_option("--out-file", at_out, "Perturbed dataset CSV");
    at->add_option("--trace", at_trace, "Attack trace CSV");

    // detect
    auto* de = app.add_subcommand("detect", "K-S drift decisions for a DDB stream");
    std::string de_baseline, de_test, de_out = "decisions.csv";
    de->add_option("--baseline", de_baseline, "Training DDB CSV")->required();
    de->add_option("--test", de_test, "Test DDB CSV")->required();
    de->add_option("--out-file", de_out, "Decision log CSV");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Run a named experiment sweep");
    std::string sw_name;
    sw->add_option("name", sw_name,
                   "single|group-size|occurrence|malicious-count|method-comparison|"
                   "attack-method|location|alpha")
        ->required();

    // report
    auto* rp = app.add_subcommand("report", "Convert a JSON report to csv/json");
    std::string rp_in, rp_out;
    rp->add_option("--in", rp_in, "Input report (json)")->required();
    rp->add_option("--out-file", rp_out, "Output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        const ExperimentConfig cfg = resolve_config(g);

        if (*gen) {
            const ChannelScenario scenario = scenario_from(cfg);
            const std::size_t count = gen_count ? gen_count : cfg.effective_train_size();
            const Dataset ds = generate_dataset(scenario, count, cfg.seed);
            save_csv(ds, out_path(g, gen_out));
            std::printf("wrote %zu timeslots x %d nodes to %s\n", ds.size(),
                        scenario.node_count, out_path(g, gen_out).c_str());
        } else if (*tr) {
            Dataset ds;
            if (tr_data.empty()) {
                const ChannelScenario scenario = scenario_from(cfg);
                ds = generate_dataset(scenario, cfg.effective_train_size(), cfg.seed);
            } else {
                ds = load_csv(tr_data);
            }
            TrainInfo info;
            const FusionClassifier model = train(ds, cfg.train, &info);
            model.save(out_path(g, tr_model));
            std::printf("trained on %zu vectors: accuracy %.4f after %d epochs -> %s\n",
                        ds.size(), info.train_accuracy, info.epochs_run,
                        out_path(g, tr_model).c_str());
        } else if (*dd) {
            const FusionClassifier model = FusionClassifier::load(dd_model);
            const Dataset ds = load_csv(dd_data);
            SearchConfig search = cfg.search;
            set_box_from_data(search, ds);
            std::optional<BoundaryDirection> direction;
            if (cfg.ddb_method == DdbMethod::LrtBinarySearch) {
                const auto est = estimate_scale_params(ds, cfg.scenario.samples);
                direction = lrt_direction(est.scale_h0, est.scale_h1, cfg.scenario.samples,
                                          cfg.lrt_threshold);
            }
            const DdbBatch batch =
                compute_ddb_set(model, ds, cfg.ddb_method,
                                direction ? &*direction : nullptr, search, cfg.threads);
            save_ddb_csv(ds, batch, out_path(g, dd_out));
            std::printf("computed %zu DDBs (%zu non-converged%s) -> %s\n", batch.results.size(),
                        batch.non_converged, batch.warning ? ", WARNING >10%" : "",
                        out_path(g, dd_out).c_str());
        } else if (*at) {
            const FusionClassifier model = FusionClassifier::load(at_model);
            const Dataset ds = load_csv(at_data);
            AttackerKnowledge knowledge;
            knowledge.controlled_nodes = cfg.effective_controlled_nodes();
            knowledge.mode = cfg.attacker_mode;
            if (cfg.attacker_mode == AttackerMode::Surrogate) {
                std::vector<std::pair<Eigen::VectorXd, int>> obs;
                const std::size_t n_obs = std::min(cfg.surrogate_observations, ds.size());
                for (std::size_t i = 0; i < n_obs; ++i)
                    obs.emplace_back(ds.records[i].values, model.classify(ds.records[i].values));
                knowledge.surrogate = train_surrogate(obs, cfg.train);
            }
            AttackConfig acfg;
            acfg.method = cfg.attack_method;
            acfg.step_size = cfg.attack_step;
            acfg.pgd_steps = cfg.pgd_steps;
            acfg.occurrence_ratio = cfg.occurrence_ratio;
            acfg.seed = cfg.seed;
            SearchConfig search = cfg.search;
            set_box_from_data(search, ds);
            const auto outcomes =
                schedule_attacks(ds.records, knowledge, model, acfg, search, cfg.threads);
            Dataset attacked;
            attacked.scenario = ds.scenario;
            for (const auto& o : outcomes) attacked.records.push_back(o.perturbed);
            save_csv(attacked, out_path(g, at_out));
            save_attack_csv(outcomes, cfg.attack_method, out_path(g, at_trace));
            std::size_t hits = 0, fired = 0;
            for (const auto& o : outcomes) {
                fired += o.attacked ? 1 : 0;
                hits += o.success ? 1 : 0;
            }
            std::printf("attacked %zu/%zu slots, %zu flips -> %s, trace %s\n", fired, ds.size(),
                        hits, out_path(g, at_out).c_str(), out_path(g, at_trace).c_str());
        } else if (*de) {
            const auto baseline_distances = load_ddb_distances(de_baseline);
            const auto test_distances = load_ddb_distances(de_test);
            const DdbBaseline baseline(baseline_distances);
            const auto decisions =
                stream_detect(baseline, test_distances, cfg.group_size, cfg.alpha);
            save_decisions_csv(decisions, out_path(g, de_out));
            std::size_t flagged = 0;
            for (const auto& d : decisions) flagged += d.flagged ? 1 : 0;
            std::printf("%zu/%zu groups flagged at alpha=%g -> %s\n", flagged, decisions.size(),
                        cfg.alpha, out_path(g, de_out).c_str());
        } else if (*sw) {
            const ExperimentReport rep = run_sweep(sw_name, cfg);
            const std::string ext = g.format == "json" ? ".json" : ".csv";
            const std::string path = out_path(g, "report_" + sw_name + ext);
            emit_report(rep, g.format == "json" ? ReportFormat::Json : ReportFormat::Csv, path);
            std::printf("sweep '%s': %zu rows -> %s\n", sw_name.c_str(), rep.rows.size(),
                        path.c_str());
            write_timings(rep, out_path(g, "timings_" + sw_name + ".csv"));
            if (g.assert_mode) return check_assertions(rep);
        } else if (*rp) {
            const ExperimentReport rep = load_report_json(rp_in);
            emit_report(rep, g.format == "json" ? ReportFormat::Json : ReportFormat::Csv,
                        out_path(g, rp_out));
            std::printf("converted %s -> %s\n", rp_in.c_str(), out_path(g, rp_out).c_str());
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}
