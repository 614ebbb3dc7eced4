#include "specsense/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "specsense/errors.hpp"
#include "specsense/rng.hpp"

namespace specsense {

void TrainConfig::validate() const {
    if (epochs <= 0) throw std::invalid_argument("train config: epochs must be positive");
    if (batch_size <= 0) throw std::invalid_argument("train config: batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("train config: learning_rate must be positive and finite");
    if (weight_decay < 0.0 || !std::isfinite(weight_decay))
        throw std::invalid_argument("train config: weight_decay must be non-negative and finite");
    for (int h : hidden_sizes)
        if (h <= 0) throw std::invalid_argument("train config: hidden sizes must be positive");
    if (!(early_stop_accuracy > 0.0))
        throw std::invalid_argument("train config: early_stop_accuracy must be positive");
}

FusionClassifier::FusionClassifier(std::vector<Eigen::MatrixXd> weights,
                                   std::vector<Eigen::VectorXd> biases,
                                   Eigen::VectorXd norm_mean, Eigen::VectorXd norm_std)
    : weights_(std::move(weights)),
      biases_(std::move(biases)),
      norm_mean_(std::move(norm_mean)),
      norm_std_(std::move(norm_std)) {
    if (weights_.empty() || weights_.size() != biases_.size())
        throw std::invalid_argument("classifier: need matching weight/bias layers");
    layer_sizes_.push_back(static_cast<int>(weights_.front().cols()));
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        if (weights_[l].rows() != biases_[l].size())
            throw std::invalid_argument("classifier: bias length mismatch");
        if (l > 0 && weights_[l].cols() != weights_[l - 1].rows())
            throw std::invalid_argument("classifier: layer size mismatch");
        if (!weights_[l].allFinite() || !biases_[l].allFinite())
            throw std::invalid_argument("classifier: non-finite parameters");
        layer_sizes_.push_back(static_cast<int>(weights_[l].rows()));
    }
    if (layer_sizes_.back() != 2)
        throw std::invalid_argument("classifier: final layer must output 2 scores");
    if (norm_mean_.size() != layer_sizes_.front() || norm_std_.size() != layer_sizes_.front())
        throw std::invalid_argument("classifier: normalization length mismatch");
    if (!norm_mean_.allFinite() || !norm_std_.allFinite() || (norm_std_.array() <= 0.0).any())
        throw std::invalid_argument("classifier: normalization stats must be finite, std > 0");
}

FusionClassifier::FusionClassifier(const FusionClassifier& other)
    : layer_sizes_(other.layer_sizes_),
      weights_(other.weights_),
      biases_(other.biases_),
      norm_mean_(other.norm_mean_),
      norm_std_(other.norm_std_),
      forwards_(other.forwards_.load()),
      gradients_(other.gradients_.load()) {}

FusionClassifier& FusionClassifier::operator=(const FusionClassifier& other) {
    if (this != &other) {
        layer_sizes_ = other.layer_sizes_;
        weights_ = other.weights_;
        biases_ = other.biases_;
        norm_mean_ = other.norm_mean_;
        norm_std_ = other.norm_std_;
        forwards_ = other.forwards_.load();
        gradients_ = other.gradients_.load();
    }
    return *this;
}

FusionClassifier FusionClassifier::affine(const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
    if (w.rows() != 2 || b.size() != 2)
        throw std::invalid_argument("affine classifier: expected 2 x n weights and 2 biases");
    return FusionClassifier({w}, {b}, Eigen::VectorXd::Zero(w.cols()),
                            Eigen::VectorXd::Ones(w.cols()));
}

void FusionClassifier::check_dim(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim())
        throw std::invalid_argument("classifier: input has dimension " +
                                    std::to_string(x.size()) + ", expected " +
                                    std::to_string(input_dim()));
}

Eigen::Vector2d FusionClassifier::logits(const Eigen::VectorXd& raw) const {
    forwards_.fetch_add(1, std::memory_order_relaxed);
    Eigen::VectorXd a = (raw - norm_mean_).cwiseQuotient(norm_std_);
    const std::size_t last = weights_.size() - 1;
    for (std::size_t l = 0; l < last; ++l)
        a = ((weights_[l] * a + biases_[l]).array().tanh()).matrix();
    Eigen::VectorXd out = weights_[last] * a + biases_[last];
    return Eigen::Vector2d(out[0], out[1]);
}

Eigen::VectorXd FusionClassifier::input_gradient_of(const Eigen::VectorXd& raw,
                                                    const Eigen::Vector2d& seed) const {
    gradients_.fetch_add(1, std::memory_order_relaxed);
    const std::size_t layers = weights_.size();
    std::vector<Eigen::VectorXd> pre(layers);
    Eigen::VectorXd a = (raw - norm_mean_).cwiseQuotient(norm_std_);
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        pre[l] = weights_[l] * a + biases_[l];
        a = pre[l].array().tanh().matrix();
    }
    Eigen::VectorXd delta = seed;  // gradient at the linear output layer
    for (std::size_t l = layers; l-- > 1;) {
        Eigen::VectorXd back = weights_[l].transpose() * delta;
        delta = back.cwiseProduct(
            (1.0 - pre[l - 1].array().tanh().square()).matrix());
    }
    Eigen::VectorXd grad_norm = weights_.front().transpose() * delta;
    return grad_norm.cwiseQuotient(norm_std_);
}

PredictionScores FusionClassifier::predict_scores(const Eigen::VectorXd& x) const {
    check_dim(x);
    const Eigen::Vector2d z = logits(x);
    if (!z.allFinite()) throw std::runtime_error("classifier: non-finite prediction scores");
    return PredictionScores{z[0], z[1]};
}

int FusionClassifier::classify(const Eigen::VectorXd& x) const {
    const PredictionScores s = predict_scores(x);
    return s.score_1 > s.score_0 ? 1 : 0;
}

double FusionClassifier::score_margin(const Eigen::VectorXd& x) const {
    const PredictionScores s = predict_scores(x);
    return s.score_1 - s.score_0;
}

Eigen::VectorXd FusionClassifier::margin_gradient(const Eigen::VectorXd& x) const {
    check_dim(x);
    return input_gradient_of(x, Eigen::Vector2d(-1.0, 1.0));
}

FusionClassifier::ScoreGradients FusionClassifier::score_gradients(const Eigen::VectorXd& x) const {
    check_dim(x);
    ScoreGradients g;
    g.grad_0 = input_gradient_of(x, Eigen::Vector2d(1.0, 0.0));
    g.grad_1 = input_gradient_of(x, Eigen::Vector2d(0.0, 1.0));
    return g;
}

EvalCounts FusionClassifier::eval_counts() const {
    return EvalCounts{forwards_.load(), gradients_.load()};
}

void FusionClassifier::reset_eval_counts() const {
    forwards_.store(0);
    gradients_.store(0);
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Batch {
    Eigen::MatrixXd inputs;   // n x batch (normalized)
    std::vector<int> labels;
};

double xavier_bound(int fan_in, int fan_out) {
    return std::sqrt(6.0 / (fan_in + fan_out));
}

}  // namespace

FusionClassifier train_classifier(const std::vector<Eigen::VectorXd>& inputs,
                                  const std::vector<int>& labels, const TrainConfig& config,
                                  TrainInfo* info) {
    config.validate();
    if (inputs.empty() || inputs.size() != labels.size())
        throw std::invalid_argument("train: need a non-empty input/label list of equal length");
    bool has0 = false, has1 = false;
    for (int y : labels) (y == 0 ? has0 : has1) = true;
    if (!has0 || !has1) throw std::invalid_argument("train: both labels must be present");

    const int n = static_cast<int>(inputs.front().size());
    const std::size_t count = inputs.size();

    // Per-feature standardization from the training data. Constant features
    // get unit std so they pass through unchanged.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (const auto& x : inputs) mean += x;
    mean /= static_cast<double>(count);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(n);
    for (const auto& x : inputs) var += (x - mean).cwiseAbs2();
    var /= static_cast<double>(count);
    Eigen::VectorXd std_dev = var.cwiseSqrt();
    for (int j = 0; j < n; ++j)
        if (!(std_dev[j] > 1e-12)) std_dev[j] = 1.0;

    std::vector<int> sizes;
    sizes.push_back(n);
    for (int h : config.hidden_sizes) sizes.push_back(h);
    sizes.push_back(2);
    const std::size_t layers = sizes.size() - 1;

    Rng rng(mix_seed(config.weight_seed));
    std::vector<Eigen::MatrixXd> w(layers);
    std::vector<Eigen::VectorXd> b(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        const double r = xavier_bound(sizes[l], sizes[l + 1]);
        std::uniform_real_distribution<double> u(-r, r);
        w[l].resize(sizes[l + 1], sizes[l]);
        for (Eigen::Index i = 0; i < w[l].size(); ++i) w[l].data()[i] = u(rng);
        b[l] = Eigen::VectorXd::Zero(sizes[l + 1]);
    }

    Eigen::MatrixXd z(n, count);
    for (std::size_t i = 0; i < count; ++i)
        z.col(static_cast<Eigen::Index>(i)) = (inputs[i] - mean).cwiseQuotient(std_dev);

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);

    std::vector<Eigen::MatrixXd> act(layers + 1);  // act[0] = batch input
    std::vector<Eigen::MatrixXd> pre(layers);
    double last_loss = 0.0;
    double accuracy = 0.0;
    int epochs_run = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t correct = 0;

        for (std::size_t start = 0; start < count; start += config.batch_size) {
            const std::size_t bs = std::min<std::size_t>(config.batch_size, count - start);
            act[0].resize(n, bs);
            for (std::size_t k = 0; k < bs; ++k)
                act[0].col(static_cast<Eigen::Index>(k)) =
                    z.col(static_cast<Eigen::Index>(order[start + k]));

            for (std::size_t l = 0; l < layers; ++l) {
                pre[l] = (w[l] * act[l]).colwise() + b[l];
                act[l + 1] = (l + 1 < layers) ? pre[l].array().tanh().matrix() : pre[l];
            }

            // softmax cross-entropy over the two output scores
            Eigen::MatrixXd delta = act[layers];  // 2 x bs
            for (std::size_t k = 0; k < bs; ++k) {
                const int y = labels[order[start + k]];
                const Eigen::Index kk = static_cast<Eigen::Index>(k);
                const double m = delta.col(kk).maxCoeff();
                const double e0 = std::exp(delta(0, kk) - m), e1 = std::exp(delta(1, kk) - m);
                const double zsum = e0 + e1;
                const double p0 = e0 / zsum, p1 = e1 / zsum;
                // cross-entropy in log space; a hard-wrong score overflows to
                // +inf and trips the divergence check below
                const double win = y == 0 ? delta(0, kk) - delta(1, kk)
                                          : delta(1, kk) - delta(0, kk);
                epoch_loss += std::log1p(std::exp(-win));
                const int pred = act[layers](1, kk) > act[layers](0, kk) ? 1 : 0;
                if (pred == y) ++correct;
                delta(0, kk) = p0 - (y == 0 ? 1.0 : 0.0);
                delta(1, kk) = p1 - (y == 1 ? 1.0 : 0.0);
            }
            delta /= static_cast<double>(bs);

            for (std::size_t l = layers; l-- > 0;) {
                const Eigen::MatrixXd grad_w = delta * act[l].transpose();
                const Eigen::VectorXd grad_b = delta.rowwise().sum();
                if (l > 0) {
                    Eigen::MatrixXd back = w[l].transpose() * delta;
                    delta = back.cwiseProduct(
                        (1.0 - pre[l - 1].array().tanh().square()).matrix());
                }
                w[l] -= config.learning_rate * (grad_w + config.weight_decay * w[l]);
                b[l] -= config.learning_rate * grad_b;
            }
        }

        last_loss = epoch_loss / static_cast<double>(count);
        accuracy = static_cast<double>(correct) / static_cast<double>(count);
        epochs_run = epoch + 1;
        if (!std::isfinite(last_loss)) throw TrainingError("training loss diverged", epoch);
        if (accuracy >= config.early_stop_accuracy) break;
    }

    if (info) {
        info->train_accuracy = accuracy;
        info->epochs_run = epochs_run;
        info->final_loss = last_loss;
    }
    return FusionClassifier(std::move(w), std::move(b), std::move(mean), std::move(std_dev));
}

FusionClassifier train(const Dataset& dataset, const TrainConfig& config, TrainInfo* info) {
    std::vector<Eigen::VectorXd> xs;
    std::vector<int> ys;
    xs.reserve(dataset.size());
    ys.reserve(dataset.size());
    for (const auto& rec : dataset.records) {
        xs.push_back(rec.values);
        ys.push_back(rec.true_label);
    }
    return train_classifier(xs, ys, config, info);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kModelMagic = "specsense-model";
constexpr const char* kModelVersion = "v1";

void write_vector(std::ofstream& out, const char* tag, const Eigen::VectorXd& v) {
    out << tag << ' ' << v.size();
    char buf[40];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%a", v[i]);
        out << ' ' << buf;
    }
    out << '\n';
}

double parse_hex_double(const std::string& tok, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
        throw ParseError("malformed model float '" + tok + "'", line_no);
    return v;
}

}  // namespace

void FusionClassifier::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
    out << kModelMagic << ' ' << kModelVersion << '\n';
    out << "activation tanh\n";
    out << "sizes";
    for (int s : layer_sizes_) out << ' ' << s;
    out << '\n';
    write_vector(out, "norm_mean", norm_mean_);
    write_vector(out, "norm_std", norm_std_);
    char buf[40];
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out << "layer " << l << ' ' << weights_[l].rows() << ' ' << weights_[l].cols() << '\n';
        for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%a", weights_[l](r, c));
                out << buf << (c + 1 < weights_[l].cols() ? ' ' : '\n');
            }
        }
        write_vector(out, "bias", biases_[l]);
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

FusionClassifier FusionClassifier::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file '" + path + "'");
    std::size_t line_no = 0;
    auto next_line = [&](const char* what) {
        std::string line;
        if (!std::getline(in, line)) throw ParseError(std::string("model file truncated, expected ") + what, line_no);
        ++line_no;
        return line;
    };

    {
        std::istringstream head(next_line("header"));
        std::string magic, version;
        head >> magic >> version;
        if (magic != kModelMagic) throw ParseError("not a specsense model file", line_no);
        if (version != kModelVersion)
            throw ParseError("unsupported model version '" + version + "'", line_no);
    }
    {
        std::istringstream act(next_line("activation"));
        std::string key, name;
        act >> key >> name;
        if (key != "activation" || name != "tanh")
            throw ParseError("unsupported activation", line_no);
    }

    std::vector<int> sizes;
    {
        std::istringstream ss(next_line("sizes"));
        std::string key;
        ss >> key;
        if (key != "sizes") throw ParseError("expected sizes line", line_no);
        int v;
        while (ss >> v) sizes.push_back(v);
        if (sizes.size() < 2) throw ParseError("model needs at least two layer sizes", line_no);
    }

    auto read_vector = [&](const char* tag) {
        std::istringstream ss(next_line(tag));
        std::string key;
        Eigen::Index len;
        ss >> key >> len;
        if (key != tag) throw ParseError(std::string("expected ") + tag + " line", line_no);
        Eigen::VectorXd v(len);
        std::string tok;
        for (Eigen::Index i = 0; i < len; ++i) {
            if (!(ss >> tok)) throw ParseError(std::string("short ") + tag + " line", line_no);
            v[i] = parse_hex_double(tok, line_no);
        }
        return v;
    };

    const Eigen::VectorXd mean = read_vector("norm_mean");
    const Eigen::VectorXd stdv = read_vector("norm_std");

    std::vector<Eigen::MatrixXd> ws;
    std::vector<Eigen::VectorXd> bs;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        std::istringstream hd(next_line("layer header"));
        std::string key;
        std::size_t idx;
        Eigen::Index rows, cols;
        hd >> key >> idx >> rows >> cols;
        if (key != "layer" || idx != l) throw ParseError("expected layer header", line_no);
        Eigen::MatrixXd w(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            std::istringstream row(next_line("weight row"));
            std::string tok;
            for (Eigen::Index c = 0; c < cols; ++c) {
                if (!(row >> tok)) throw ParseError("short weight row", line_no);
                w(r, c) = parse_hex_double(tok, line_no);
            }
        }
        ws.push_back(std::move(w));
        bs.push_back(read_vector("bias"));
    }
    return FusionClassifier(std::move(ws), std::move(bs), mean, stdv);
}

}  // namespace specsense
