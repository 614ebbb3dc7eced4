#ifndef SPECSENSE_EXPERIMENT_HPP
#define SPECSENSE_EXPERIMENT_HPP

#include <string>
#include <vector>

#include "specsense/attack.hpp"
#include "specsense/classifier.hpp"
#include "specsense/config.hpp"
#include "specsense/data.hpp"
#include "specsense/ddb.hpp"
#include "specsense/ks.hpp"

namespace specsense {

struct ReportRow {
    int point = 0;
    // sweep coordinates (filled where meaningful, defaults otherwise)
    std::size_t group_size = 0;
    double ratio = 0.0;
    int malicious_count = 0;
    double alpha = 0.0;
    std::string ddb_method;
    std::string attack_method;
    std::string extra;  // semicolon-joined key=value pairs (location sets etc.)

    double detection_rate = 0.0;
    double false_alarm_rate = 0.0;
    double attack_success_rate = 0.0;
    std::size_t attacked_slots = 0;
    std::size_t attack_successes = 0;
    std::size_t groups = 0;

    double mean_iterations = 0.0;
    double iterations_variance = 0.0;
    double iter_p25 = 0.0, iter_p50 = 0.0, iter_p75 = 0.0;
    double cdf_iter_5 = 0.0, cdf_iter_15 = 0.0;
    double grad_evals_per_iteration = 0.0;
    double forward_evals_per_iteration = 0.0;
    std::size_t nonconverged_train = 0;
    std::size_t nonconverged_test = 0;

    // Wall clock per iteration, milliseconds. Hardware-dependent, so it is
    // excluded from emit_report (reports stay byte-identical across runs);
    // the CLI writes it to a separate timings file.
    double wall_ms_per_iteration = 0.0;
};

struct ExperimentReport {
    std::string sweep;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string version;
    double scale = 1.0;
    std::string notes;  // e.g. extra slack applied for scaled-down runs
    std::vector<ReportRow> rows;
};

enum class ReportFormat { Csv, Json };

/// Deterministic bytes given the report: stable column order, %.17g floats,
/// metadata embedded (config hash, seed, version, scale).
void emit_report(const ExperimentReport& report, ReportFormat format, const std::string& path);
ExperimentReport load_report_json(const std::string& path);

/// Trained state shared by every point of a sweep: scenario, datasets,
/// fusion model, boundary direction, training baseline, clean-stream DDBs,
/// and the attacker's surrogate. Building it is deterministic given the
/// config.
struct PipelineContext {
    ExperimentConfig config;
    ChannelScenario scenario;
    Dataset train_data;
    Dataset test_data;
    FusionClassifier model;
    TrainInfo train_info;
    ScaleEstimates estimates;
    BoundaryDirection direction;
    SearchConfig search;  // config.search plus the training-data box
    std::vector<double> baseline_distances;
    std::size_t baseline_nonconverged = 0;
    std::vector<double> clean_test_ddbs;  // unattacked stream, same method
    std::size_t clean_nonconverged = 0;
    FusionClassifier surrogate;           // used when mode == Surrogate
    double surrogate_agreement = 0.0;

    DdbBaseline baseline() const { return DdbBaseline(baseline_distances); }
};

PipelineContext build_context(const ExperimentConfig& config);

/// One sweep point: schedule attacks over the shared test stream, compute
/// the attacked stream's DDBs, and group-decide both streams.
struct PointSettings {
    std::size_t group_size;
    double alpha;
    double ratio;
    std::vector<int> controlled_nodes;
    AttackMethod attack_method;
    double attack_step;
    int pgd_steps;
    std::uint64_t attack_seed;
};

ReportRow evaluate_point(const PipelineContext& context, const PointSettings& point);

ExperimentReport run_pipeline(const ExperimentConfig& config);
ExperimentReport run_group_size_sweep(const ExperimentConfig& config,
                                      const std::vector<std::size_t>& sizes = {
                                          5, 10, 20, 25, 50, 80, 100, 200, 400});
ExperimentReport run_occurrence_sweep(const ExperimentConfig& config,
                                      const std::vector<double>& ratios = {},
                                      const std::vector<std::size_t>& sizes = {10, 25, 50, 100,
                                                                               200});
ExperimentReport run_malicious_count_sweep(const ExperimentConfig& config,
                                           const std::vector<int>& m_values = {3, 5, 7, 10});
ExperimentReport run_method_comparison(const ExperimentConfig& config);
ExperimentReport run_attack_method_sweep(const ExperimentConfig& config);
ExperimentReport run_location_sweep(const ExperimentConfig& config,
                                    std::vector<std::vector<int>> node_sets = {});
ExperimentReport run_alpha_sweep(const ExperimentConfig& config,
                                 const std::vector<double>& alphas = {0.001, 0.005, 0.01, 0.05,
                                                                      0.1});

/// Dispatch by sweep name: single | group-size | occurrence |
/// malicious-count | method-comparison | attack-method | location | alpha.
ExperimentReport run_sweep(const std::string& name, const ExperimentConfig& config);

/// Spearman rank correlation with average ranks on ties.
double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace specsense

#endif
