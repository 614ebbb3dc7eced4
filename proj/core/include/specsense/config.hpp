#ifndef SPECSENSE_CONFIG_HPP
#define SPECSENSE_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "specsense/attack.hpp"
#include "specsense/classifier.hpp"
#include "specsense/data.hpp"
#include "specsense/ddb.hpp"

namespace specsense {

/// Everything one end-to-end run needs. Defaults are the desk-scale
/// settings; `full` restores the paper-scale 20000/80000 split and `scale`
/// multiplies both sizes.
struct ExperimentConfig {
    ScenarioParams scenario;
    std::optional<Eigen::VectorXd> explicit_scale_h0;  // override drawn scales
    std::optional<Eigen::VectorXd> explicit_scale_h1;

    std::size_t train_size = 5000;
    std::size_t test_size = 20000;
    bool full = false;     // 20000 train / 80000 test
    double scale = 1.0;    // size multiplier; floors get extra slack when < 1

    TrainConfig train;

    int malicious_count = 7;
    std::vector<int> controlled_nodes;  // explicit override; empty = first m nodes
    AttackMethod attack_method = AttackMethod::Fgsm;
    double attack_step = 1.0;
    int pgd_steps = 10;
    double occurrence_ratio = 1.0;
    AttackerMode attacker_mode = AttackerMode::Surrogate;
    std::size_t surrogate_observations = 5000;
    std::size_t attack_subset = 5000;  // stream length cap for solver-based attackers

    DdbMethod ddb_method = DdbMethod::LrtBinarySearch;
    SearchConfig search;
    double lrt_threshold = 1.0;
    std::size_t comparison_subset = 2000;  // vectors per method in cost comparison

    std::size_t group_size = 25;
    double alpha = 0.01;

    int trials = 1;
    std::uint64_t seed = 42;
    unsigned threads = 0;

    void validate() const;
    std::size_t effective_train_size() const;
    std::size_t effective_test_size() const;
    std::vector<int> effective_controlled_nodes() const;
};

/// Load the key-value/section config file; unknown sections or keys and
/// type violations raise ConfigError naming the offending path
/// ("attack.ratio: expected a number in [0,1]"). Values not present keep
/// their defaults, so a CLI layer can override afterwards.
ExperimentConfig load_config(const std::string& path);
void apply_config_text(ExperimentConfig& config, const std::string& text);

/// Canonical flattened form: every effective setting, one `key=value` per
/// line, fixed order. Hash of this string is embedded in reports.
std::string canonical_config(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace specsense

#endif
