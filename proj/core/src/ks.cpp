#include "specsense/ks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace specsense {

DdbBaseline::DdbBaseline(std::vector<double> distances) : distances_(std::move(distances)) {
    if (distances_.size() < 2)
        throw std::invalid_argument("baseline: need at least 2 distances");
    for (double d : distances_)
        if (!std::isfinite(d)) throw std::invalid_argument("baseline: non-finite distance");
    std::sort(distances_.begin(), distances_.end());
}

double ks_statistic(const DdbBaseline& baseline, std::vector<double> test_group) {
    if (test_group.empty()) throw std::invalid_argument("ks_statistic: empty test group");
    for (double d : test_group)
        if (!std::isfinite(d)) throw std::invalid_argument("ks_statistic: non-finite distance");
    std::sort(test_group.begin(), test_group.end());

    const std::vector<double>& a = baseline.distances();
    const std::vector<double>& b = test_group;
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());

    // Sweep the pooled points; consuming every tie of a value before
    // comparing evaluates both step functions right-continuously there. The
    // left-limit differences are the values recorded at the previous pooled
    // point, so this visits every candidate for the supremum.
    std::size_t i = 0, j = 0;
    double d_ks = 0.0;
    while (i < a.size() || j < b.size()) {
        double v;
        if (i < a.size() && j < b.size())
            v = std::min(a[i], b[j]);
        else
            v = (i < a.size()) ? a[i] : b[j];
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d_ks = std::max(d_ks, std::abs(static_cast<double>(i) / na -
                                       static_cast<double>(j) / nb));
    }
    return d_ks;
}

double p_value(double d_ks, std::size_t a1, std::size_t a2) {
    if (a1 == 0 || a2 == 0) throw std::invalid_argument("p_value: sample sizes must be positive");
    const double n1 = static_cast<double>(a1), n2 = static_cast<double>(a2);
    const double raw = 2.0 * std::exp(-2.0 * d_ks * d_ks * (n1 * n2) / (n1 + n2));
    return std::min(1.0, std::max(0.0, raw));
}

KsDecision detect(const DdbBaseline& baseline, const std::vector<double>& test_group,
                  double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("detect: alpha must be in [0,1]");
    KsDecision d;
    d.group_size = test_group.size();
    d.alpha = alpha;
    d.d_ks = ks_statistic(baseline, test_group);
    d.p = p_value(d.d_ks, baseline.size(), test_group.size());
    d.flagged = d.p < alpha;
    return d;
}

std::vector<KsDecision> stream_detect(const DdbBaseline& baseline,
                                      const std::vector<double>& ddb_stream,
                                      std::size_t group_size, double alpha) {
    if (group_size == 0) throw std::invalid_argument("stream_detect: group_size must be >= 1");
    std::vector<KsDecision> out;
    out.reserve(ddb_stream.size() / group_size);
    for (std::size_t start = 0; start + group_size <= ddb_stream.size(); start += group_size) {
        std::vector<double> group(ddb_stream.begin() + start,
                                  ddb_stream.begin() + start + group_size);
        out.push_back(detect(baseline, group, alpha));
    }
    return out;
}

void save_decisions_csv(const std::vector<KsDecision>& decisions, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write decision log '" + path + "'");
    out << "group_index,d_ks,p_value,flagged\n";
    char buf[40];
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        out << i << ',';
        std::snprintf(buf, sizeof buf, "%.17g", decisions[i].d_ks);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", decisions[i].p);
        out << buf << ',' << (decisions[i].flagged ? 1 : 0) << '\n';
    }
}

}  // namespace specsense
