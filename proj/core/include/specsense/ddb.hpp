#ifndef SPECSENSE_DDB_HPP
#define SPECSENSE_DDB_HPP

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "specsense/classifier.hpp"
#include "specsense/data.hpp"

namespace specsense {

/// Linear boundary {x : w.x + b = 0} with its unit search direction
/// u = -w / ||w||_2. For the likelihood-ratio boundary of the Gamma channel
/// model, u points from the noise-only (label 1) region toward the occupied
/// (label 0) region.
struct BoundaryDirection {
    Eigen::VectorXd weights;
    double bias = 0.0;
    Eigen::VectorXd unit_direction;

    BoundaryDirection() = default;
    BoundaryDirection(Eigen::VectorXd w, double b);

    /// Point-to-hyperplane distance |w.x + b| / ||w||_2.
    double analytic_distance(const Eigen::VectorXd& x) const;
    /// Signed version; positive on the side w.x + b > 0.
    double signed_margin(const Eigen::VectorXd& x) const;
};

/// Likelihood-ratio boundary from per-node Gamma scale estimates:
/// w_j = 1/scale_h0[j] - 1/scale_h1[j], b = T * sum_j ln(scale_h0[j] /
/// scale_h1[j]) - ln(threshold). Throws DegenerateDirectionError when
/// the two scale vectors coincide (zero normal).
BoundaryDirection lrt_direction(const Eigen::VectorXd& scale_h0,
                                const Eigen::VectorXd& scale_h1, int sample_count,
                                double threshold = 1.0);

enum class DdbMethod { LrtBinarySearch, DeepFool, Lbfgs, Cw };

const char* to_string(DdbMethod method);
DdbMethod ddb_method_from_string(const std::string& name);

struct SearchConfig {
    double initial_step = 5.0;        // first bracketing step length
    double stop_threshold = 0.01;     // bracket width at which bisection stops
    int max_doublings = 40;           // bracketing probes per direction
    int max_iterations = 50;          // DeepFool iteration cap
    double boundary_tolerance = 1e-3; // |margin| considered "on the boundary"
    double confidence = 0.0;          // C&W misclassification confidence (kappa)
    int outer_rounds = 12;            // penalty-constant search rounds (LBFGS, C&W)
    int inner_steps = 200;            // optimizer steps per penalty round
    double initial_penalty = 1.0;     // starting penalty constant C

    // Value box for the penalty methods; set from training data (with
    // headroom) before calling lbfgs_ddb / cw_ddb.
    Eigen::VectorXd box_lo, box_hi;

    // When non-empty, perturbations are restricted to these coordinate
    // indices (attack use). Empty = all coordinates free.
    std::vector<int> coordinate_mask;

    void validate() const;
    bool has_box() const { return box_lo.size() > 0 && box_lo.size() == box_hi.size(); }
};

/// Per-feature [min, max] over the dataset, widened by `headroom` times the
/// feature range on each side.
void set_box_from_data(SearchConfig& config, const Dataset& dataset, double headroom = 0.2);

struct DdbResult {
    double distance = std::numeric_limits<double>::infinity();
    Eigen::VectorXd boundary_point;  // adversarial point for penalty methods
    int iterations = 0;
    DdbMethod method = DdbMethod::LrtBinarySearch;
    bool converged = false;
};

/// Bracket snapshot after one bisection update; lower always classifies 0,
/// upper always classifies 1.
struct BracketState {
    Eigen::VectorXd label0_end;
    Eigen::VectorXd label1_end;
    double width = 0.0;
};
using BisectionObserver = std::function<void(const BracketState&)>;

/// Distance along the fixed direction u: double the step until the label
/// flips, then bisect the bracket down to stop_threshold. Uses forward
/// evaluations only. Returns the flipped-side endpoint as the boundary
/// point; iterations = bracketing probes + bisection steps. If no flip is
/// found within max_doublings in either direction along u, returns
/// converged = false with an infinite distance.
DdbResult binary_search_ddb(const FusionClassifier& model, const Eigen::VectorXd& x,
                            const BoundaryDirection& direction, const SearchConfig& config,
                            const BisectionObserver* observer = nullptr);

/// Iterative linearization: step = -(g / ||grad g||^2) grad g until the
/// label flips or |g| falls under boundary_tolerance. Exact in one step for
/// affine classifiers.
DdbResult deepfool_ddb(const FusionClassifier& model, const Eigen::VectorXd& x,
                       const SearchConfig& config);

/// Box-constrained penalty formulation: minimize C ||delta||_2 +
/// loss(x + delta, target) by projected gradient steps, with a line search
/// over C for the tightest successful perturbation. Iterations are
/// optimizer steps.
DdbResult lbfgs_ddb(const FusionClassifier& model, const Eigen::VectorXd& x, int target_label,
                    const SearchConfig& config);

/// Carlini-Wagner style distance: minimize ||delta||_2 + C * F(x + delta)
/// under a tanh change of variables that keeps iterates inside the box,
/// with an outer binary search over C.
DdbResult cw_ddb(const FusionClassifier& model, const Eigen::VectorXd& x,
                 const SearchConfig& config);

struct DdbBatch {
    std::vector<DdbResult> results;
    std::size_t non_converged = 0;
    bool warning = false;  // more than 10% of the batch failed to converge

    std::vector<double> converged_distances() const;
};

/// One DdbResult per record, in record order regardless of thread count.
/// `direction` is required for (and only consulted by) LrtBinarySearch.
DdbBatch compute_ddb_set(const FusionClassifier& model, const Dataset& dataset,
                         DdbMethod method, const BoundaryDirection* direction,
                         const SearchConfig& config, unsigned threads = 0);

/// DDB set export: `timeslot,method,distance,iterations,converged`.
void save_ddb_csv(const Dataset& dataset, const DdbBatch& batch, const std::string& path);

}  // namespace specsense

#endif
