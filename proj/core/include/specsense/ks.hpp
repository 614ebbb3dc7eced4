#ifndef SPECSENSE_KS_HPP
#define SPECSENSE_KS_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace specsense {

/// Sorted training-time DDB sample; the reference distribution every test
/// group is compared against. Immutable after construction.
class DdbBaseline {
public:
    explicit DdbBaseline(std::vector<double> distances);

    const std::vector<double>& distances() const { return distances_; }
    std::size_t size() const { return distances_.size(); }

private:
    std::vector<double> distances_;
};

inline DdbBaseline build_baseline(std::vector<double> train_ddbs) {
    return DdbBaseline(std::move(train_ddbs));
}

/// Exact two-sample Kolmogorov-Smirnov statistic: the sup-norm distance of
/// the two empirical CDFs, evaluated over all pooled sample points.
double ks_statistic(const DdbBaseline& baseline, std::vector<double> test_group);

/// Asymptotic two-sided tail 2 exp(-2 d^2 a1 a2 / (a1 + a2)), clamped into
/// [0, 1] (the raw expression exceeds 1 for small d).
double p_value(double d_ks, std::size_t a1, std::size_t a2);

struct KsDecision {
    double d_ks = 0.0;
    double p = 1.0;
    bool flagged = false;  // p < alpha
    std::size_t group_size = 0;
    double alpha = 0.0;
};

KsDecision detect(const DdbBaseline& baseline, const std::vector<double>& test_group,
                  double alpha);

/// Splits the stream into consecutive non-overlapping groups of
/// `group_size` and decides each; a trailing partial group is withheld.
std::vector<KsDecision> stream_detect(const DdbBaseline& baseline,
                                      const std::vector<double>& ddb_stream,
                                      std::size_t group_size, double alpha);

/// Decision log export: `group_index,d_ks,p_value,flagged`.
void save_decisions_csv(const std::vector<KsDecision>& decisions, const std::string& path);

}  // namespace specsense

#endif
