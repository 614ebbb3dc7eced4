#ifndef SPECSENSE_DATA_HPP
#define SPECSENSE_DATA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "specsense/rng.hpp"

namespace specsense {

/// Synthetic radio environment: each node's averaged signal power is
/// Gamma-distributed with shape sample_count and a per-node scale that
/// depends on whether the channel is occupied.
///
/// Label convention: 0 = channel unavailable (primary signal present,
/// scale_h0), 1 = channel available (noise only, scale_h1).
struct ChannelScenario {
    int node_count = 0;
    int sample_count = 0;            // signal samples averaged per timeslot (T)
    Eigen::VectorXd scale_h0;        // per-node Gamma scale under label 0
    Eigen::VectorXd scale_h1;        // per-node Gamma scale under label 1
    double occupancy_prior = 0.5;    // P(label == 0)

    ChannelScenario() = default;
    ChannelScenario(int nodes, int samples, Eigen::VectorXd h0, Eigen::VectorXd h1,
                    double prior);

    /// Throws std::invalid_argument on any violated invariant: positive
    /// sizes, strictly positive scales of length node_count, prior in [0,1],
    /// and at least one node whose two scales differ.
    void validate() const;
};

/// Heterogeneous default scenario: noise-only scales drawn uniformly from
/// [beta1_low, beta1_high] and occupied-channel scales scale_h1 * (1 + snr)
/// with per-node snr uniform in [snr_low, snr_high], all fixed by `seed`.
struct ScenarioParams {
    int nodes = 20;
    int samples = 16;
    double beta1_low = 0.07;
    double beta1_high = 0.13;
    double snr_low = 0.2;
    double snr_high = 0.5;
    double occupancy_prior = 0.5;
    std::uint64_t seed = 1;
};

ChannelScenario make_scenario(const ScenarioParams& params);

/// One timeslot's report: per-node average signal power plus ground truth.
struct SensingVector {
    std::size_t timeslot = 0;
    Eigen::VectorXd values;   // non-negative, length = scenario node count
    int true_label = 0;       // 0 = unavailable, 1 = available
};

struct Dataset {
    std::optional<ChannelScenario> scenario;  // absent for ingested files
    std::vector<SensingVector> records;       // timeslots strictly increasing
    std::optional<std::uint64_t> seed;        // generation seed, absent if ingested

    std::size_t size() const { return records.size(); }
    int node_count() const;
};

/// Draw one sensing vector with the given ground-truth label; each node's
/// value is Gamma(sample_count, scale) with the label's per-node scale.
SensingVector sample_timeslot(const ChannelScenario& scenario, int label, Rng& rng);

/// `count` timeslots with labels Bernoulli(occupancy_prior); pure function
/// of (scenario, count, seed).
Dataset generate_dataset(const ChannelScenario& scenario, std::size_t count,
                         std::uint64_t seed);

/// CSV interchange: header `node_1,...,node_n,label`, one row per timeslot.
/// load_csv throws ParseError naming the offending line on malformed rows,
/// inconsistent column counts, negative powers, or labels outside {0,1}.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& dataset, const std::string& path);

/// Method-of-moments Gamma scale estimates: per node and class,
/// scale = (class sample mean) / T. Throws EstimationError when a label
/// class is absent or a per-node class mean is zero.
struct ScaleEstimates {
    Eigen::VectorXd scale_h0;
    Eigen::VectorXd scale_h1;
};
ScaleEstimates estimate_scale_params(const Dataset& dataset, int sample_count);

}  // namespace specsense

#endif
