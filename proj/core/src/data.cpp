#include "specsense/data.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "specsense/errors.hpp"

namespace specsense {

ChannelScenario::ChannelScenario(int nodes, int samples, Eigen::VectorXd h0,
                                 Eigen::VectorXd h1, double prior)
    : node_count(nodes),
      sample_count(samples),
      scale_h0(std::move(h0)),
      scale_h1(std::move(h1)),
      occupancy_prior(prior) {
    validate();
}

void ChannelScenario::validate() const {
    if (node_count <= 0) throw std::invalid_argument("scenario: node_count must be positive");
    if (sample_count <= 0) throw std::invalid_argument("scenario: sample_count must be positive");
    if (scale_h0.size() != node_count || scale_h1.size() != node_count)
        throw std::invalid_argument("scenario: scale vectors must have length node_count");
    if ((scale_h0.array() <= 0.0).any() || (scale_h1.array() <= 0.0).any())
        throw std::invalid_argument("scenario: all scale entries must be strictly positive");
    if (!(occupancy_prior >= 0.0 && occupancy_prior <= 1.0))
        throw std::invalid_argument("scenario: occupancy_prior must be in [0,1]");
    if ((scale_h0.array() == scale_h1.array()).all())
        throw std::invalid_argument(
            "scenario: scale_h0 and scale_h1 identical; classes are indistinguishable");
}

ChannelScenario make_scenario(const ScenarioParams& p) {
    if (p.beta1_low <= 0.0 || p.beta1_high < p.beta1_low)
        throw std::invalid_argument("scenario: invalid beta1 range");
    if (p.snr_low <= 0.0 || p.snr_high < p.snr_low)
        throw std::invalid_argument("scenario: invalid snr range");
    Rng rng(mix_seed(p.seed));
    std::uniform_real_distribution<double> beta1(p.beta1_low, p.beta1_high);
    std::uniform_real_distribution<double> snr(p.snr_low, p.snr_high);
    Eigen::VectorXd h1(p.nodes), h0(p.nodes);
    for (int j = 0; j < p.nodes; ++j) {
        h1[j] = beta1(rng);
        h0[j] = h1[j] * (1.0 + snr(rng));
    }
    return ChannelScenario(p.nodes, p.samples, std::move(h0), std::move(h1),
                           p.occupancy_prior);
}

int Dataset::node_count() const {
    if (scenario) return scenario->node_count;
    if (!records.empty()) return static_cast<int>(records.front().values.size());
    return 0;
}

SensingVector sample_timeslot(const ChannelScenario& scenario, int label, Rng& rng) {
    if (label != 0 && label != 1) throw std::invalid_argument("sample_timeslot: label must be 0 or 1");
    const Eigen::VectorXd& scales = (label == 0) ? scenario.scale_h0 : scenario.scale_h1;
    SensingVector v;
    v.true_label = label;
    v.values.resize(scenario.node_count);
    const double shape = static_cast<double>(scenario.sample_count);
    for (int j = 0; j < scenario.node_count; ++j) {
        std::gamma_distribution<double> gamma(shape, scales[j]);
        v.values[j] = gamma(rng);
    }
    return v;
}

Dataset generate_dataset(const ChannelScenario& scenario, std::size_t count,
                         std::uint64_t seed) {
    scenario.validate();
    if (count == 0) throw std::invalid_argument("generate_dataset: count must be >= 1");
    Dataset ds;
    ds.scenario = scenario;
    ds.seed = seed;
    ds.records.reserve(count);
    Rng rng(mix_seed(seed));
    std::bernoulli_distribution unavailable(scenario.occupancy_prior);
    for (std::size_t i = 0; i < count; ++i) {
        const int label = unavailable(rng) ? 0 : 1;
        SensingVector v = sample_timeslot(scenario, label, rng);
        v.timeslot = i;
        ds.records.push_back(std::move(v));
    }
    return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double(const std::string& s, std::size_t line_no, const char* what) {
    const std::string t = trim(s);
    if (t.empty()) throw ParseError(std::string("empty ") + what + " field", line_no);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v))
        throw ParseError(std::string("malformed ") + what + " value '" + t + "'", line_no);
    return v;
}

}  // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty dataset file '" + path + "'", 1);
    auto header = split_csv_line(line);
    if (header.size() < 2 || trim(header.back()) != "label")
        throw ParseError("header must be node_1,...,node_n,label", 1);
    const std::size_t n = header.size() - 1;
    for (std::size_t j = 0; j < n; ++j) {
        if (trim(header[j]) != "node_" + std::to_string(j + 1))
            throw ParseError("unexpected header column '" + trim(header[j]) + "'", 1);
    }

    Dataset ds;
    std::size_t line_no = 1;
    std::size_t slot = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != n + 1)
            throw ParseError("expected " + std::to_string(n + 1) + " columns, got " +
                                 std::to_string(fields.size()),
                             line_no);
        SensingVector v;
        v.timeslot = slot++;
        v.values.resize(static_cast<Eigen::Index>(n));
        for (std::size_t j = 0; j < n; ++j) {
            const double x = parse_double(fields[j], line_no, "power");
            if (x < 0.0) throw ParseError("negative power value", line_no);
            v.values[static_cast<Eigen::Index>(j)] = x;
        }
        const double lbl = parse_double(fields[n], line_no, "label");
        if (lbl != 0.0 && lbl != 1.0) throw ParseError("label must be 0 or 1", line_no);
        v.true_label = static_cast<int>(lbl);
        ds.records.push_back(std::move(v));
    }
    if (ds.records.empty()) throw ParseError("dataset file has no data rows", line_no);
    return ds;
}

void save_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file '" + path + "'");
    const int n = dataset.node_count();
    for (int j = 1; j <= n; ++j) out << "node_" << j << ',';
    out << "label\n";
    char buf[40];
    for (const auto& rec : dataset.records) {
        for (int j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", rec.values[j]);
            out << buf << ',';
        }
        out << rec.true_label << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

ScaleEstimates estimate_scale_params(const Dataset& dataset, int sample_count) {
    if (sample_count <= 0) throw std::invalid_argument("estimate_scale_params: T must be positive");
    if (dataset.records.empty()) throw EstimationError("estimate_scale_params: empty dataset");
    const int n = dataset.node_count();
    Eigen::VectorXd sum0 = Eigen::VectorXd::Zero(n), sum1 = Eigen::VectorXd::Zero(n);
    std::size_t count0 = 0, count1 = 0;
    for (const auto& rec : dataset.records) {
        if (rec.values.size() != n)
            throw EstimationError("estimate_scale_params: inconsistent record width");
        if (rec.true_label == 0) {
            sum0 += rec.values;
            ++count0;
        } else {
            sum1 += rec.values;
            ++count1;
        }
    }
    if (count0 == 0 || count1 == 0)
        throw EstimationError("estimate_scale_params: a label class is absent");
    ScaleEstimates est;
    est.scale_h0 = sum0 / (static_cast<double>(count0) * sample_count);
    est.scale_h1 = sum1 / (static_cast<double>(count1) * sample_count);
    if ((est.scale_h0.array() <= 0.0).any() || (est.scale_h1.array() <= 0.0).any())
        throw EstimationError("estimate_scale_params: degenerate zero class mean");
    return est;
}

}  // namespace specsense
