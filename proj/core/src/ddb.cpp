#include "specsense/ddb.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "specsense/errors.hpp"
#include "specsense/parallel.hpp"

namespace specsense {

BoundaryDirection::BoundaryDirection(Eigen::VectorXd w, double b)
    : weights(std::move(w)), bias(b) {
    if (weights.size() == 0 || !weights.allFinite() || !std::isfinite(bias))
        throw std::invalid_argument("boundary direction: weights/bias must be finite");
    const double norm = weights.norm();
    if (norm == 0.0)
        throw DegenerateDirectionError("boundary direction: zero weight vector");
    unit_direction = -weights / norm;
}

double BoundaryDirection::analytic_distance(const Eigen::VectorXd& x) const {
    return std::abs(signed_margin(x));
}

double BoundaryDirection::signed_margin(const Eigen::VectorXd& x) const {
    return (weights.dot(x) + bias) / weights.norm();
}

BoundaryDirection lrt_direction(const Eigen::VectorXd& scale_h0,
                                const Eigen::VectorXd& scale_h1, int sample_count,
                                double threshold) {
    if (scale_h0.size() != scale_h1.size() || scale_h0.size() == 0)
        throw std::invalid_argument("lrt_direction: scale vectors must have equal nonzero length");
    if ((scale_h0.array() <= 0.0).any() || (scale_h1.array() <= 0.0).any())
        throw std::invalid_argument("lrt_direction: scales must be strictly positive");
    if (sample_count <= 0) throw std::invalid_argument("lrt_direction: T must be positive");
    if (!(threshold > 0.0)) throw std::invalid_argument("lrt_direction: threshold must be positive");

    Eigen::VectorXd w = scale_h0.cwiseInverse() - scale_h1.cwiseInverse();
    if (w.isZero(0.0))
        throw DegenerateDirectionError(
            "lrt_direction: identical scale parameters under both hypotheses");
    const double b =
        sample_count * (scale_h0.array() / scale_h1.array()).log().sum() - std::log(threshold);
    return BoundaryDirection(std::move(w), b);
}

const char* to_string(DdbMethod method) {
    switch (method) {
        case DdbMethod::LrtBinarySearch: return "lrt";
        case DdbMethod::DeepFool: return "deepfool";
        case DdbMethod::Lbfgs: return "lbfgs";
        case DdbMethod::Cw: return "cw";
    }
    return "?";
}

DdbMethod ddb_method_from_string(const std::string& name) {
    if (name == "lrt") return DdbMethod::LrtBinarySearch;
    if (name == "deepfool") return DdbMethod::DeepFool;
    if (name == "lbfgs") return DdbMethod::Lbfgs;
    if (name == "cw") return DdbMethod::Cw;
    throw std::invalid_argument("unknown ddb method '" + name + "' (lrt|deepfool|lbfgs|cw)");
}

void SearchConfig::validate() const {
    if (!(initial_step > 0.0)) throw std::invalid_argument("search config: initial_step must be positive");
    if (!(stop_threshold > 0.0))
        throw std::invalid_argument("search config: stop_threshold must be positive");
    if (stop_threshold >= initial_step)
        throw std::invalid_argument("search config: stop_threshold must be below initial_step");
    if (max_doublings <= 0 || max_iterations <= 0 || outer_rounds <= 0 || inner_steps <= 0)
        throw std::invalid_argument("search config: iteration budgets must be positive");
    if (!(boundary_tolerance > 0.0))
        throw std::invalid_argument("search config: boundary_tolerance must be positive");
    if (confidence < 0.0) throw std::invalid_argument("search config: confidence must be >= 0");
    if (!(initial_penalty > 0.0))
        throw std::invalid_argument("search config: initial_penalty must be positive");
}

void set_box_from_data(SearchConfig& config, const Dataset& dataset, double headroom) {
    if (dataset.records.empty()) throw std::invalid_argument("set_box_from_data: empty dataset");
    const int n = dataset.node_count();
    Eigen::VectorXd lo = dataset.records.front().values;
    Eigen::VectorXd hi = lo;
    for (const auto& rec : dataset.records) {
        lo = lo.cwiseMin(rec.values);
        hi = hi.cwiseMax(rec.values);
    }
    const Eigen::VectorXd pad = (hi - lo).cwiseMax(1e-9) * headroom;
    config.box_lo = lo - pad;
    config.box_hi = hi + pad;
    (void)n;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd apply_mask(const Eigen::VectorXd& v, const std::vector<int>& mask) {
    if (mask.empty()) return v;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (int j : mask) out[j] = v[j];
    return out;
}

void check_mask(const std::vector<int>& mask, Eigen::Index n) {
    for (int j : mask)
        if (j < 0 || j >= n)
            throw std::invalid_argument("search config: mask index out of range");
}

DdbResult fail_result(DdbMethod method, const Eigen::VectorXd& x, int iterations) {
    DdbResult r;
    r.method = method;
    r.distance = kInf;
    r.boundary_point = x;
    r.iterations = iterations;
    r.converged = false;
    return r;
}

/// Minimal Adam state; the solvers here are small enough that a hand-rolled
/// update keeps the dependencies flat.
struct Adam {
    double lr;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Eigen::VectorXd m, v;
    int t = 0;

    explicit Adam(Eigen::Index n, double lr_) : lr(lr_) {
        m = Eigen::VectorXd::Zero(n);
        v = Eigen::VectorXd::Zero(n);
    }
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
        ++t;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, t), c2 = 1.0 - std::pow(beta2, t);
        params -= (lr / c1) * m.cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
    }
};

/// Local distance scale |g| / ||grad g||; exact for affine models, a decent
/// step-size reference otherwise.
double linearized_distance(const FusionClassifier& model, const Eigen::VectorXd& x) {
    const double g = model.score_margin(x);
    const double gn = model.margin_gradient(x).norm();
    if (gn < 1e-30) return 1.0;
    return std::abs(g) / gn;
}

}  // namespace

DdbResult binary_search_ddb(const FusionClassifier& model, const Eigen::VectorXd& x,
                            const BoundaryDirection& direction, const SearchConfig& config,
                            const BisectionObserver* observer) {
    config.validate();
    if (direction.unit_direction.size() != x.size())
        throw std::invalid_argument("binary_search_ddb: direction dimension mismatch");

    const int y0 = model.classify(x);
    int iterations = 0;

    // u points toward the label-0 side of the linear boundary, so walk +u
    // from label 1 and -u from label 0. If the supplied direction uses the
    // opposite sign convention the first sweep finds no flip and the
    // opposite sign is probed before giving up.
    Eigen::VectorXd flipped;
    bool found = false;
    for (const double orientation : {y0 == 1 ? 1.0 : -1.0, y0 == 1 ? -1.0 : 1.0}) {
        const Eigen::VectorXd step_dir = orientation * direction.unit_direction;
        double eps = config.initial_step;
        for (int k = 0; k < config.max_doublings; ++k) {
            Eigen::VectorXd probe = x + eps * step_dir;
            ++iterations;
            if (model.classify(probe) != y0) {
                flipped = std::move(probe);
                found = true;
                break;
            }
            eps *= 2.0;
        }
        if (found) break;
    }
    if (!found) return fail_result(DdbMethod::LrtBinarySearch, x, iterations);

    // Bisect [x, flipped]; near keeps the original label, far the flipped one.
    Eigen::VectorXd near_end = x, far_end = flipped;
    while ((far_end - near_end).norm() > config.stop_threshold) {
        Eigen::VectorXd mid = 0.5 * (near_end + far_end);
        ++iterations;
        if (model.classify(mid) == y0)
            near_end = std::move(mid);
        else
            far_end = std::move(mid);
        if (observer) {
            BracketState state;
            state.label0_end = (y0 == 0) ? near_end : far_end;
            state.label1_end = (y0 == 0) ? far_end : near_end;
            state.width = (far_end - near_end).norm();
            (*observer)(state);
        }
    }

    DdbResult r;
    r.method = DdbMethod::LrtBinarySearch;
    r.boundary_point = far_end;
    r.distance = (far_end - x).norm();
    r.iterations = iterations;
    r.converged = true;
    return r;
}

DdbResult deepfool_ddb(const FusionClassifier& model, const Eigen::VectorXd& x,
                       const SearchConfig& config) {
    config.validate();
    check_mask(config.coordinate_mask, x.size());
    const int y0 = model.classify(x);

    Eigen::VectorXd xk = x;
    double g = model.score_margin(xk);
    int iterations = 0;

    auto done = [&]() {
        DdbResult r;
        r.method = DdbMethod::DeepFool;
        r.boundary_point = xk;
        r.distance = (xk - x).norm();
        r.iterations = iterations;
        r.converged = true;
        return r;
    };
    if (std::abs(g) <= config.boundary_tolerance) return done();

    while (iterations < config.max_iterations) {
        Eigen::VectorXd grad = apply_mask(model.margin_gradient(xk), config.coordinate_mask);
        const double gn2 = grad.squaredNorm();
        if (gn2 < 1e-24) return fail_result(DdbMethod::DeepFool, xk, iterations);

        // Newton step onto the local linearization. Where tanh saturates the
        // gradient shrinks faster than the margin and the raw step badly
        // overshoots, so cap its length and backtrack until |g| decreases.
        Eigen::VectorXd step = -(g / gn2) * grad;
        const double len = step.norm();
        if (len > config.initial_step) step *= config.initial_step / len;
        double g_next = model.score_margin(xk + step);
        for (int halvings = 0; std::abs(g_next) >= std::abs(g) && halvings < 24; ++halvings) {
            step *= 0.5;
            g_next = model.score_margin(xk + step);
        }
        if (std::abs(g_next) >= std::abs(g))
            return fail_result(DdbMethod::DeepFool, xk, iterations);
        xk += step;
        g = g_next;
        ++iterations;
        if (std::abs(g) <= config.boundary_tolerance) return done();
    }
    return fail_result(DdbMethod::DeepFool, xk, iterations);
}

namespace {

struct PenaltyOutcome {
    bool success = false;
    double norm = kInf;
    Eigen::VectorXd point;
};

/// Shared outer loop: binary-search the penalty constant toward the
/// tightest perturbation that still flips the label. `attempt` runs one
/// inner optimization at a fixed C and reports the best success it saw.
template <typename Attempt>
DdbResult penalty_line_search(DdbMethod method, const Eigen::VectorXd& x,
                              const SearchConfig& config, bool success_means_raise_c,
                              Attempt&& attempt) {
    double c = config.initial_penalty;
    double lo = 0.0, hi = kInf;
    PenaltyOutcome best;
    int total_steps = 0;

    for (int round = 0; round < config.outer_rounds; ++round) {
        PenaltyOutcome out = attempt(c, total_steps);
        const bool move_up = success_means_raise_c ? out.success : !out.success;
        if (out.success && out.norm < best.norm) best = out;
        if (move_up) {
            lo = c;
            c = std::isinf(hi) ? c * 10.0 : 0.5 * (c + hi);
        } else {
            hi = c;
            c = (lo > 0.0) ? 0.5 * (lo + c) : c * 0.1;
        }
    }

    if (!best.success) return fail_result(method, x, total_steps);
    DdbResult r;
    r.method = method;
    r.boundary_point = best.point;
    r.distance = best.norm;
    r.iterations = total_steps;
    r.converged = true;
    return r;
}

}  // namespace

DdbResult lbfgs_ddb(const FusionClassifier& model, const Eigen::VectorXd& x, int target_label,
                    const SearchConfig& config) {
    config.validate();
    if (!config.has_box())
        throw std::invalid_argument("lbfgs_ddb: box bounds required (set_box_from_data)");
    if (target_label != 0 && target_label != 1)
        throw std::invalid_argument("lbfgs_ddb: target label must be 0 or 1");
    if (target_label == model.classify(x))
        throw std::invalid_argument("lbfgs_ddb: target label must differ from current label");
    check_mask(config.coordinate_mask, x.size());

    const double sign = (target_label == 1) ? 1.0 : -1.0;  // target margin = sign * g
    const double lr = std::max(1e-9, 0.05 * linearized_distance(model, x));

    // The largest penalty constant that still flips the label yields the
    // tightest perturbation, so success raises C.
    auto attempt = [&](double c, int& total_steps) {
        PenaltyOutcome out;
        Eigen::VectorXd delta = Eigen::VectorXd::Zero(x.size());
        Adam adam(x.size(), lr);
        for (int step = 0; step < config.inner_steps; ++step) {
            const Eigen::VectorXd p = (x + delta).cwiseMax(config.box_lo).cwiseMin(config.box_hi);
            delta = p - x;
            const double margin = sign * model.score_margin(p);
            // logistic loss toward the target label plus C * ||delta||_2
            const double sig = 1.0 / (1.0 + std::exp(margin));
            Eigen::VectorXd grad = -sig * sign * model.margin_gradient(p);
            const double dn = delta.norm();
            if (dn > 1e-12) grad += (c / dn) * delta;
            grad = apply_mask(grad, config.coordinate_mask);
            adam.step(delta, grad);
            ++total_steps;

            const Eigen::VectorXd cand =
                (x + delta).cwiseMax(config.box_lo).cwiseMin(config.box_hi);
            if (model.classify(cand) == target_label) {
                const double norm = (cand - x).norm();
                if (norm < out.norm) {
                    out.success = true;
                    out.norm = norm;
                    out.point = cand;
                }
            }
        }
        return out;
    };
    return penalty_line_search(DdbMethod::Lbfgs, x, config, /*success_means_raise_c=*/true,
                               attempt);
}

DdbResult cw_ddb(const FusionClassifier& model, const Eigen::VectorXd& x,
                 const SearchConfig& config) {
    config.validate();
    if (!config.has_box())
        throw std::invalid_argument("cw_ddb: box bounds required (set_box_from_data)");
    check_mask(config.coordinate_mask, x.size());

    const int y0 = model.classify(x);
    const double sign = (y0 == 0) ? 1.0 : -1.0;  // target margin = sign * g
    const Eigen::VectorXd half_span = 0.5 * (config.box_hi - config.box_lo);
    const Eigen::VectorXd center = 0.5 * (config.box_hi + config.box_lo);

    // tanh reparameterization: p(rho) stays strictly inside the box.
    Eigen::VectorXd t0 = (x - center).cwiseQuotient(half_span);
    t0 = t0.cwiseMax(-1.0 + 1e-9).cwiseMin(1.0 - 1e-9);
    const Eigen::VectorXd rho0 = t0.unaryExpr([](double v) { return std::atanh(v); });

    // Adam runs in rho units; dp/drho ~ half_span near the center, so divide
    // the intended p-space step by the span to keep it box-width invariant.
    const double lr = std::max(1e-9, 0.05 * linearized_distance(model, x) /
                                         std::max(1.0, half_span.maxCoeff()));
    const double kappa = config.confidence;

    auto attempt = [&](double c, int& total_steps) {
        PenaltyOutcome out;
        Eigen::VectorXd rho = rho0;
        Adam adam(x.size(), lr);
        for (int step = 0; step < config.inner_steps; ++step) {
            const Eigen::VectorXd tanh_rho = rho.array().tanh().matrix();
            const Eigen::VectorXd p = center + half_span.cwiseProduct(tanh_rho);
            const double target_margin = sign * model.score_margin(p);

            // F = max(score_orig - score_target, -kappa); the model gradient
            // is evaluated every step (as an autograd pass would) and zeroed
            // where F sits on its floor
            Eigen::VectorXd grad_p = Eigen::VectorXd::Zero(x.size());
            const Eigen::VectorXd d = p - x;
            const double dn = d.norm();
            if (dn > 1e-12) grad_p = d / dn;
            const Eigen::VectorXd model_grad = model.margin_gradient(p);
            if (-target_margin > -kappa) grad_p -= c * sign * model_grad;

            const Eigen::VectorXd dp_drho =
                half_span.cwiseProduct((1.0 - tanh_rho.array().square()).matrix());
            Eigen::VectorXd grad_rho = apply_mask(grad_p.cwiseProduct(dp_drho),
                                                  config.coordinate_mask);
            adam.step(rho, grad_rho);
            ++total_steps;

            if (target_margin >= kappa && (target_margin > 0.0 || kappa > 0.0)) {
                Eigen::VectorXd cand = p;
                if (!config.coordinate_mask.empty()) {
                    // outside the mask the point must match x exactly
                    Eigen::VectorXd fixed = x;
                    for (int j : config.coordinate_mask) fixed[j] = p[j];
                    cand = std::move(fixed);
                }
                const double norm = (cand - x).norm();
                if (norm < out.norm) {
                    out.success = true;
                    out.norm = norm;
                    out.point = cand;
                }
            }
        }
        return out;
    };
    // Larger C weights the misclassification term more, so failure raises C.
    return penalty_line_search(DdbMethod::Cw, x, config, /*success_means_raise_c=*/false,
                               attempt);
}

std::vector<double> DdbBatch::converged_distances() const {
    std::vector<double> out;
    out.reserve(results.size());
    for (const auto& r : results)
        if (r.converged && std::isfinite(r.distance)) out.push_back(r.distance);
    return out;
}

DdbBatch compute_ddb_set(const FusionClassifier& model, const Dataset& dataset,
                         DdbMethod method, const BoundaryDirection* direction,
                         const SearchConfig& config, unsigned threads) {
    config.validate();
    if (method == DdbMethod::LrtBinarySearch && direction == nullptr)
        throw std::invalid_argument("compute_ddb_set: LRT binary search needs a direction");

    DdbBatch batch;
    batch.results.resize(dataset.size());
    parallel_for(
        dataset.size(),
        [&](std::size_t i) {
            const Eigen::VectorXd& x = dataset.records[i].values;
            switch (method) {
                case DdbMethod::LrtBinarySearch:
                    batch.results[i] = binary_search_ddb(model, x, *direction, config);
                    break;
                case DdbMethod::DeepFool:
                    batch.results[i] = deepfool_ddb(model, x, config);
                    break;
                case DdbMethod::Lbfgs:
                    batch.results[i] = lbfgs_ddb(model, x, 1 - model.classify(x), config);
                    break;
                case DdbMethod::Cw:
                    batch.results[i] = cw_ddb(model, x, config);
                    break;
            }
        },
        threads);

    for (const auto& r : batch.results)
        if (!r.converged) ++batch.non_converged;
    batch.warning = batch.non_converged * 10 > batch.results.size();
    return batch;
}

void save_ddb_csv(const Dataset& dataset, const DdbBatch& batch, const std::string& path) {
    if (dataset.size() != batch.results.size())
        throw std::invalid_argument("save_ddb_csv: dataset/batch size mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write ddb file '" + path + "'");
    out << "timeslot,method,distance,iterations,converged\n";
    char buf[40];
    for (std::size_t i = 0; i < batch.results.size(); ++i) {
        const auto& r = batch.results[i];
        std::snprintf(buf, sizeof buf, "%.17g", r.distance);
        out << dataset.records[i].timeslot << ',' << to_string(r.method) << ',' << buf << ','
            << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
    }
}

}  // namespace specsense
