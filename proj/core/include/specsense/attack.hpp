#ifndef SPECSENSE_ATTACK_HPP
#define SPECSENSE_ATTACK_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "specsense/classifier.hpp"
#include "specsense/data.hpp"
#include "specsense/ddb.hpp"

namespace specsense {

enum class AttackMethod { Fgsm, Pgd, DeepFool, Lbfgs };
enum class AttackerMode { WhiteBox, Surrogate };

const char* to_string(AttackMethod method);
AttackMethod attack_method_from_string(const std::string& name);

/// What the attacker controls and which model it differentiates: the fusion
/// classifier itself (white box) or its own surrogate fit to observed
/// fusion decisions.
struct AttackerKnowledge {
    std::vector<int> controlled_nodes;  // m indices, 1 <= m < n
    AttackerMode mode = AttackerMode::Surrogate;
    std::optional<FusionClassifier> surrogate;

    void validate(int node_count) const;
    const FusionClassifier& attacker_model(const FusionClassifier& fusion) const;
};

struct AttackConfig {
    AttackMethod method = AttackMethod::Fgsm;
    double step_size = 1.0;         // raw power units
    int pgd_steps = 10;
    double occurrence_ratio = 1.0;  // per-timeslot attack probability
    std::uint64_t seed = 0;

    void validate() const;
};

/// Outcome for one timeslot. The perturbation is zero outside the
/// controlled nodes (exact equality) and perturbed values stay
/// non-negative; success means the TRUE fusion decision flipped.
struct AttackOutcome {
    SensingVector perturbed;
    bool attacked = false;
    bool success = false;
    double perturbation_norm = 0.0;
};

/// Fit the attacker's model to observed (sensing vector, fusion decision)
/// pairs. Labels are the fusion center's outputs, not ground truth.
FusionClassifier train_surrogate(
    const std::vector<std::pair<Eigen::VectorXd, int>>& observations,
    const TrainConfig& config = {}, TrainInfo* info = nullptr);

/// Single signed-gradient step of length step_size per controlled
/// coordinate, aimed at flipping the attacker model's decision.
AttackOutcome fgsm_attack(const AttackerKnowledge& knowledge, const FusionClassifier& fusion,
                          const SensingVector& x, double step_size);

/// Iterated unit-gradient steps projected onto the controlled-coordinate
/// subspace and the non-negative orthant; stops early once the attacker
/// model's decision flips.
AttackOutcome pgd_attack(const AttackerKnowledge& knowledge, const FusionClassifier& fusion,
                         const SensingVector& x, double step_size, int pgd_steps);

/// Boundary-seeking attacks reusing the distance solvers with coordinate
/// masking; the located boundary point is overshot by 2% so the label
/// actually flips. `search` must carry box bounds for the lbfgs variant.
AttackOutcome deepfool_attack(const AttackerKnowledge& knowledge,
                              const FusionClassifier& fusion, const SensingVector& x,
                              const SearchConfig& search);
AttackOutcome lbfgs_attack(const AttackerKnowledge& knowledge, const FusionClassifier& fusion,
                           const SensingVector& x, const SearchConfig& search);

/// Bernoulli(occurrence_ratio) per-timeslot attack schedule. Each slot's
/// coin derives from (seed, timeslot), so parallel and serial evaluation
/// agree and ratio 0 reproduces the input stream exactly.
std::vector<AttackOutcome> schedule_attacks(const std::vector<SensingVector>& stream,
                                            const AttackerKnowledge& knowledge,
                                            const FusionClassifier& fusion,
                                            const AttackConfig& config,
                                            const SearchConfig& search, unsigned threads = 0);

/// Attack trace export: `timeslot,attacked,success,perturbation_norm,method`.
void save_attack_csv(const std::vector<AttackOutcome>& outcomes, AttackMethod method,
                     const std::string& path);

/// Full-knowledge oracle attacker used to probe whether a targeted DDB is
/// reachable: solves the minimum-norm change of the controlled coordinates
/// that places the perturbed vector at signed distance target_side *
/// target_distance from the linear boundary, assuming `believed` values for
/// the coordinates it cannot read (defaults to the truth). Evaluation-only:
/// values are not clamped.
struct TargetedDdbResult {
    bool feasible = false;          // controlled coordinates carry zero weight otherwise
    Eigen::VectorXd perturbed;      // true uncontrolled values + chosen controlled values
    double intended_distance = 0.0;
    double achieved_distance = 0.0; // |w.x' + b| / ||w|| with the true values
    double perturbation_norm = 0.0;
};

TargetedDdbResult targeted_ddb_attack(const BoundaryDirection& boundary,
                                      const Eigen::VectorXd& x, double target_distance,
                                      const std::vector<int>& controlled_nodes,
                                      int target_side,
                                      const Eigen::VectorXd* believed = nullptr);

}  // namespace specsense

#endif
