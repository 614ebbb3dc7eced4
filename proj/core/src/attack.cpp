#include "specsense/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "specsense/errors.hpp"
#include "specsense/parallel.hpp"
#include "specsense/rng.hpp"

namespace specsense {

const char* to_string(AttackMethod method) {
    switch (method) {
        case AttackMethod::Fgsm: return "fgsm";
        case AttackMethod::Pgd: return "pgd";
        case AttackMethod::DeepFool: return "deepfool";
        case AttackMethod::Lbfgs: return "lbfgs";
    }
    return "?";
}

AttackMethod attack_method_from_string(const std::string& name) {
    if (name == "fgsm") return AttackMethod::Fgsm;
    if (name == "pgd") return AttackMethod::Pgd;
    if (name == "deepfool") return AttackMethod::DeepFool;
    if (name == "lbfgs") return AttackMethod::Lbfgs;
    throw std::invalid_argument("unknown attack method '" + name + "' (fgsm|pgd|deepfool|lbfgs)");
}

void AttackerKnowledge::validate(int node_count) const {
    if (controlled_nodes.empty())
        throw std::invalid_argument("attacker: needs at least one controlled node");
    if (static_cast<int>(controlled_nodes.size()) >= node_count)
        throw std::invalid_argument("attacker: must control fewer than all nodes");
    std::vector<int> sorted = controlled_nodes;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("attacker: duplicate controlled node index");
    if (sorted.front() < 0 || sorted.back() >= node_count)
        throw std::invalid_argument("attacker: controlled node index out of range");
    if ((mode == AttackerMode::Surrogate) != surrogate.has_value())
        throw std::invalid_argument("attacker: surrogate model present iff mode is surrogate");
}

const FusionClassifier& AttackerKnowledge::attacker_model(const FusionClassifier& fusion) const {
    return mode == AttackerMode::Surrogate ? *surrogate : fusion;
}

void AttackConfig::validate() const {
    if (!(step_size > 0.0)) throw std::invalid_argument("attack config: step_size must be positive");
    if (pgd_steps <= 0) throw std::invalid_argument("attack config: pgd_steps must be positive");
    if (!(occurrence_ratio >= 0.0 && occurrence_ratio <= 1.0))
        throw std::invalid_argument("attack config: occurrence_ratio must be in [0,1]");
}

FusionClassifier train_surrogate(
    const std::vector<std::pair<Eigen::VectorXd, int>>& observations,
    const TrainConfig& config, TrainInfo* info) {
    if (observations.empty()) throw std::invalid_argument("train_surrogate: no observations");
    std::vector<Eigen::VectorXd> xs;
    std::vector<int> ys;
    xs.reserve(observations.size());
    ys.reserve(observations.size());
    for (const auto& [x, y] : observations) {
        xs.push_back(x);
        ys.push_back(y);
    }
    return train_classifier(xs, ys, config, info);
}

namespace {

AttackOutcome passthrough(const SensingVector& x) {
    AttackOutcome out;
    out.perturbed = x;
    return out;
}

/// Assemble the outcome: write the delta into the controlled coordinates
/// only, clamp them at zero, and judge success against the true fusion
/// model.
AttackOutcome finish(const FusionClassifier& fusion, const SensingVector& x,
                     const Eigen::VectorXd& candidate, const std::vector<int>& controlled) {
    AttackOutcome out;
    out.attacked = true;
    out.perturbed = x;
    for (int j : controlled) out.perturbed.values[j] = std::max(0.0, candidate[j]);
    out.perturbation_norm = (out.perturbed.values - x.values).norm();
    out.success = fusion.classify(out.perturbed.values) != fusion.classify(x.values);
    return out;
}

/// Direction in input space that lowers the attacker model's current
/// winning margin, restricted to the controlled coordinates.
Eigen::VectorXd flip_direction(const FusionClassifier& attacker, const Eigen::VectorXd& at,
                               double original_margin, const std::vector<int>& controlled) {
    const double s = original_margin > 0.0 ? 1.0 : -1.0;
    Eigen::VectorXd grad = attacker.margin_gradient(at);
    Eigen::VectorXd masked = Eigen::VectorXd::Zero(grad.size());
    for (int j : controlled) masked[j] = -s * grad[j];
    return masked;
}

}  // namespace

namespace {

/// Controlling nothing leaves the report untouched: the attack "fires" but
/// cannot change any value.
AttackOutcome inert_attack(const SensingVector& x) {
    AttackOutcome out;
    out.perturbed = x;
    out.attacked = true;
    return out;
}

}  // namespace

AttackOutcome fgsm_attack(const AttackerKnowledge& knowledge, const FusionClassifier& fusion,
                          const SensingVector& x, double step_size) {
    if (knowledge.controlled_nodes.empty()) return inert_attack(x);
    knowledge.validate(static_cast<int>(x.values.size()));
    if (!(step_size > 0.0)) throw std::invalid_argument("fgsm_attack: step_size must be positive");
    const FusionClassifier& attacker = knowledge.attacker_model(fusion);

    const double margin = attacker.score_margin(x.values);
    const Eigen::VectorXd dir = flip_direction(attacker, x.values, margin,
                                               knowledge.controlled_nodes);
    Eigen::VectorXd candidate = x.values;
    for (int j : knowledge.controlled_nodes) {
        const double s = dir[j] > 0.0 ? 1.0 : (dir[j] < 0.0 ? -1.0 : 0.0);
        candidate[j] += step_size * s;
    }
    return finish(fusion, x, candidate, knowledge.controlled_nodes);
}

AttackOutcome pgd_attack(const AttackerKnowledge& knowledge, const FusionClassifier& fusion,
                         const SensingVector& x, double step_size, int pgd_steps) {
    if (knowledge.controlled_nodes.empty()) return inert_attack(x);
    knowledge.validate(static_cast<int>(x.values.size()));
    if (!(step_size > 0.0) || pgd_steps <= 0)
        throw std::invalid_argument("pgd_attack: positive step size and step count required");
    const FusionClassifier& attacker = knowledge.attacker_model(fusion);

    const double margin0 = attacker.score_margin(x.values);
    const int label0 = margin0 > 0.0 ? 1 : 0;
    Eigen::VectorXd current = x.values;
    for (int step = 0; step < pgd_steps; ++step) {
        Eigen::VectorXd dir = flip_direction(attacker, current, margin0,
                                             knowledge.controlled_nodes);
        const double norm = dir.norm();
        if (norm < 1e-30) break;
        dir /= norm;
        for (int j : knowledge.controlled_nodes)
            current[j] = std::max(0.0, current[j] + step_size * dir[j]);
        const double m = attacker.score_margin(current);
        if ((m > 0.0 ? 1 : 0) != label0) break;
    }
    return finish(fusion, x, current, knowledge.controlled_nodes);
}

namespace {

constexpr double kOvershoot = 1.02;  // push just past the located boundary point

AttackOutcome boundary_seeking_attack(const AttackerKnowledge& knowledge,
                                      const FusionClassifier& fusion, const SensingVector& x,
                                      const SearchConfig& search, AttackMethod method) {
    if (knowledge.controlled_nodes.empty()) return inert_attack(x);
    knowledge.validate(static_cast<int>(x.values.size()));
    const FusionClassifier& attacker = knowledge.attacker_model(fusion);

    SearchConfig masked = search;
    masked.coordinate_mask = knowledge.controlled_nodes;

    DdbResult r;
    if (method == AttackMethod::DeepFool) {
        r = deepfool_ddb(attacker, x.values, masked);
    } else {
        const int target = 1 - attacker.classify(x.values);
        r = lbfgs_ddb(attacker, x.values, target, masked);
    }
    if (!r.converged) {
        AttackOutcome out = passthrough(x);
        out.attacked = true;
        return out;
    }
    const Eigen::VectorXd candidate = x.values + kOvershoot * (r.boundary_point - x.values);
    return finish(fusion, x, candidate, knowledge.controlled_nodes);
}

}  // namespace

AttackOutcome deepfool_attack(const AttackerKnowledge& knowledge,
                              const FusionClassifier& fusion, const SensingVector& x,
                              const SearchConfig& search) {
    return boundary_seeking_attack(knowledge, fusion, x, search, AttackMethod::DeepFool);
}

AttackOutcome lbfgs_attack(const AttackerKnowledge& knowledge, const FusionClassifier& fusion,
                           const SensingVector& x, const SearchConfig& search) {
    return boundary_seeking_attack(knowledge, fusion, x, search, AttackMethod::Lbfgs);
}

std::vector<AttackOutcome> schedule_attacks(const std::vector<SensingVector>& stream,
                                            const AttackerKnowledge& knowledge,
                                            const FusionClassifier& fusion,
                                            const AttackConfig& config,
                                            const SearchConfig& search, unsigned threads) {
    config.validate();
    if (!stream.empty()) knowledge.validate(static_cast<int>(stream.front().values.size()));

    std::vector<AttackOutcome> out(stream.size());
    parallel_for(
        stream.size(),
        [&](std::size_t i) {
            Rng rng(derive_seed(config.seed, stream[i].timeslot));
            std::bernoulli_distribution fire(config.occurrence_ratio);
            if (!fire(rng)) {
                out[i] = passthrough(stream[i]);
                return;
            }
            switch (config.method) {
                case AttackMethod::Fgsm:
                    out[i] = fgsm_attack(knowledge, fusion, stream[i], config.step_size);
                    break;
                case AttackMethod::Pgd:
                    out[i] = pgd_attack(knowledge, fusion, stream[i], config.step_size,
                                        config.pgd_steps);
                    break;
                case AttackMethod::DeepFool:
                    out[i] = deepfool_attack(knowledge, fusion, stream[i], search);
                    break;
                case AttackMethod::Lbfgs:
                    out[i] = lbfgs_attack(knowledge, fusion, stream[i], search);
                    break;
            }
        },
        threads);
    return out;
}

void save_attack_csv(const std::vector<AttackOutcome>& outcomes, AttackMethod method,
                     const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write attack trace '" + path + "'");
    out << "timeslot,attacked,success,perturbation_norm,method\n";
    char buf[40];
    for (const auto& o : outcomes) {
        std::snprintf(buf, sizeof buf, "%.17g", o.perturbation_norm);
        out << o.perturbed.timeslot << ',' << (o.attacked ? 1 : 0) << ',' << (o.success ? 1 : 0)
            << ',' << buf << ',' << to_string(method) << '\n';
    }
}

TargetedDdbResult targeted_ddb_attack(const BoundaryDirection& boundary,
                                      const Eigen::VectorXd& x, double target_distance,
                                      const std::vector<int>& controlled_nodes,
                                      int target_side, const Eigen::VectorXd* believed) {
    if (target_distance < 0.0)
        throw std::invalid_argument("targeted_ddb_attack: target distance must be >= 0");
    if (target_side != 1 && target_side != -1)
        throw std::invalid_argument("targeted_ddb_attack: target side must be +1 or -1");
    if (boundary.weights.size() != x.size())
        throw std::invalid_argument("targeted_ddb_attack: dimension mismatch");
    if (controlled_nodes.empty())
        throw std::invalid_argument("targeted_ddb_attack: no controlled nodes");
    for (int j : controlled_nodes)
        if (j < 0 || j >= x.size())
            throw std::invalid_argument("targeted_ddb_attack: node index out of range");
    const Eigen::VectorXd& assumed = believed ? *believed : x;
    if (assumed.size() != x.size())
        throw std::invalid_argument("targeted_ddb_attack: believed vector dimension mismatch");

    TargetedDdbResult res;
    res.intended_distance = target_distance;
    res.perturbed = x;

    const Eigen::VectorXd& w = boundary.weights;
    double w_ctrl_sq = 0.0;
    for (int j : controlled_nodes) w_ctrl_sq += w[j] * w[j];
    if (w_ctrl_sq == 0.0) {
        res.feasible = false;
        res.achieved_distance = boundary.analytic_distance(x);
        return res;
    }

    // Required controlled-coordinate dot product: the attacker budgets the
    // uncontrolled contribution from its believed values, then spreads the
    // residual over the controlled block with the minimum-norm update.
    double assumed_rest = boundary.bias;
    double ctrl_now = 0.0;
    std::vector<char> is_ctrl(x.size(), 0);
    for (int j : controlled_nodes) is_ctrl[j] = 1;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (is_ctrl[j])
            ctrl_now += w[j] * x[j];  // the attacker reads its own nodes
        else
            assumed_rest += w[j] * assumed[j];
    }
    const double required =
        target_side * target_distance * w.norm() - assumed_rest;
    const double shift = (required - ctrl_now) / w_ctrl_sq;
    for (int j : controlled_nodes) res.perturbed[j] = x[j] + shift * w[j];

    res.feasible = true;
    res.perturbation_norm = std::abs(shift) * std::sqrt(w_ctrl_sq);
    res.achieved_distance = boundary.analytic_distance(res.perturbed);
    return res;
}

}  // namespace specsense
