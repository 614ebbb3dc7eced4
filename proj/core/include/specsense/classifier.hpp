#ifndef SPECSENSE_CLASSIFIER_HPP
#define SPECSENSE_CLASSIFIER_HPP

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "specsense/data.hpp"

namespace specsense {

struct PredictionScores {
    double score_0 = 0.0;  // class 0: channel unavailable
    double score_1 = 0.0;  // class 1: channel available
};

struct TrainConfig {
    int epochs = 40;
    int batch_size = 32;
    double learning_rate = 0.05;
    double weight_decay = 1e-3;  // L2 penalty; keeps the net out of deep tanh saturation
    std::vector<int> hidden_sizes = {32, 32};
    std::uint64_t weight_seed = 7;
    double early_stop_accuracy = 1.0;  // stop once epoch train accuracy reaches this

    void validate() const;
};

struct TrainInfo {
    double train_accuracy = 0.0;
    int epochs_run = 0;
    double final_loss = 0.0;
};

/// Forward/gradient evaluation counters. Gradient passes are counted per
/// backward sweep through the network (a margin gradient is one sweep, a
/// pair of per-score gradients is two).
struct EvalCounts {
    std::uint64_t forwards = 0;
    std::uint64_t gradients = 0;
};

/// Fusion-center scorer: an MLP with tanh hidden layers and two linear
/// output scores, plus a per-feature affine input normalization baked in at
/// training time. All public entry points take and return RAW input units;
/// gradients are chain-ruled back through the normalization.
///
/// Instances are immutable after construction; scoring and gradient calls
/// are reentrant (the evaluation counters are atomic).
class FusionClassifier {
public:
    FusionClassifier() = default;
    FusionClassifier(std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases,
                     Eigen::VectorXd norm_mean, Eigen::VectorXd norm_std);
    FusionClassifier(const FusionClassifier& other);
    FusionClassifier& operator=(const FusionClassifier& other);
    FusionClassifier(FusionClassifier&&) noexcept = default;
    FusionClassifier& operator=(FusionClassifier&&) noexcept = default;

    /// Single linear layer scoring f_c(x) = w_c.x + b_c, identity
    /// normalization. `w` is 2 x n, `b` has length 2.
    static FusionClassifier affine(const Eigen::MatrixXd& w, const Eigen::VectorXd& b);

    int input_dim() const { return layer_sizes_.empty() ? 0 : layer_sizes_.front(); }
    const std::vector<int>& layer_sizes() const { return layer_sizes_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
    const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
    const Eigen::VectorXd& norm_mean() const { return norm_mean_; }
    const Eigen::VectorXd& norm_std() const { return norm_std_; }

    PredictionScores predict_scores(const Eigen::VectorXd& x) const;

    /// Larger score wins; exact ties resolve to 0 (channel unavailable).
    int classify(const Eigen::VectorXd& x) const;

    /// g(x) = f_1(x) - f_0(x); the decision boundary is its zero set and
    /// classify(x) == 1 iff g(x) > 0.
    double score_margin(const Eigen::VectorXd& x) const;

    /// Reverse-mode d g / d x in raw input units.
    Eigen::VectorXd margin_gradient(const Eigen::VectorXd& x) const;

    struct ScoreGradients {
        Eigen::VectorXd grad_0;
        Eigen::VectorXd grad_1;
    };
    ScoreGradients score_gradients(const Eigen::VectorXd& x) const;

    EvalCounts eval_counts() const;
    void reset_eval_counts() const;

    /// Versioned text format with hex floats; load(save(m)) reproduces
    /// scores bit-exactly.
    void save(const std::string& path) const;
    static FusionClassifier load(const std::string& path);

private:
    friend FusionClassifier train_classifier(const std::vector<Eigen::VectorXd>&,
                                             const std::vector<int>&, const TrainConfig&,
                                             TrainInfo*);

    void check_dim(const Eigen::VectorXd& x) const;
    Eigen::Vector2d logits(const Eigen::VectorXd& raw) const;
    Eigen::VectorXd input_gradient_of(const Eigen::VectorXd& raw,
                                      const Eigen::Vector2d& seed) const;

    std::vector<int> layer_sizes_;           // input, hidden..., 2
    std::vector<Eigen::MatrixXd> weights_;   // out x in per layer
    std::vector<Eigen::VectorXd> biases_;
    Eigen::VectorXd norm_mean_;
    Eigen::VectorXd norm_std_;               // strictly positive

    mutable std::atomic<std::uint64_t> forwards_{0};
    mutable std::atomic<std::uint64_t> gradients_{0};
};

/// Mini-batch gradient-descent training on softmax cross-entropy,
/// deterministic given (dataset, config). Throws TrainingError with the
/// epoch index if the loss turns non-finite.
FusionClassifier train(const Dataset& dataset, const TrainConfig& config,
                       TrainInfo* info = nullptr);

/// Same trainer on an explicit (vector, label) list; used by the attacker's
/// surrogate, whose labels come from observed fusion decisions rather than
/// ground truth.
FusionClassifier train_classifier(const std::vector<Eigen::VectorXd>& inputs,
                                  const std::vector<int>& labels, const TrainConfig& config,
                                  TrainInfo* info = nullptr);

}  // namespace specsense

#endif
