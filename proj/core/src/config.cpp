#include "specsense/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "specsense/errors.hpp"

namespace specsense {

void ExperimentConfig::validate() const {
    if (effective_train_size() == 0 || effective_test_size() == 0)
        throw ConfigError("sizes: train and test sizes must be positive after scaling");
    if (!(scale > 0.0)) throw ConfigError("run.scale: must be positive");
    if (trials < 1) throw ConfigError("run.trials: must be >= 1");
    if (group_size == 0) throw ConfigError("detect.group_size: must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("detect.alpha: must be in [0,1]");
    if (malicious_count < 1 || malicious_count >= scenario.nodes)
        throw ConfigError("attack.m: must satisfy 1 <= m < nodes");
    if (!(attack_step > 0.0)) throw ConfigError("attack.step_size: must be positive");
    if (pgd_steps < 1) throw ConfigError("attack.pgd_steps: must be >= 1");
    if (!(occurrence_ratio >= 0.0 && occurrence_ratio <= 1.0))
        throw ConfigError("attack.ratio: must be in [0,1]");
    if (!(lrt_threshold > 0.0)) throw ConfigError("ddb.gamma: must be positive");
    for (int j : controlled_nodes)
        if (j < 0 || j >= scenario.nodes)
            throw ConfigError("attack.nodes: index out of range");
    try {
        train.validate();
        search.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::size_t ExperimentConfig::effective_train_size() const {
    const std::size_t base = full ? 20000 : train_size;
    return static_cast<std::size_t>(std::llround(static_cast<double>(base) * scale));
}

std::size_t ExperimentConfig::effective_test_size() const {
    const std::size_t base = full ? 80000 : test_size;
    return static_cast<std::size_t>(std::llround(static_cast<double>(base) * scale));
}

std::vector<int> ExperimentConfig::effective_controlled_nodes() const {
    if (!controlled_nodes.empty()) return controlled_nodes;
    std::vector<int> first(static_cast<std::size_t>(malicious_count));
    for (int j = 0; j < malicious_count; ++j) first[static_cast<std::size_t>(j)] = j;
    return first;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct KeyContext {
    std::string path;  // "section.key"

    [[noreturn]] void fail(const std::string& why) const { throw ConfigError(path + ": " + why); }

    double number(const std::string& v) const {
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x))
            fail("expected a number, got '" + v + "'");
        return x;
    }
    double positive(const std::string& v) const {
        const double x = number(v);
        if (!(x > 0.0)) fail("expected a positive number");
        return x;
    }
    double unit_interval(const std::string& v) const {
        const double x = number(v);
        if (!(x >= 0.0 && x <= 1.0)) fail("expected a number in [0,1]");
        return x;
    }
    long long integer(const std::string& v) const {
        const double x = number(v);
        if (x != std::floor(x)) fail("expected an integer");
        return static_cast<long long>(x);
    }
    int positive_int(const std::string& v) const {
        const long long x = integer(v);
        if (x < 1) fail("expected a positive integer");
        return static_cast<int>(x);
    }
    std::uint64_t seed(const std::string& v) const {
        const long long x = integer(v);
        if (x < 0) fail("expected a non-negative integer");
        return static_cast<std::uint64_t>(x);
    }
    std::vector<double> number_list(const std::string& v) const {
        std::vector<double> out;
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(number(trim(tok)));
        if (out.empty()) fail("expected a comma-separated list");
        return out;
    }
    std::vector<int> int_list(const std::string& v) const {
        std::vector<int> out;
        for (double x : number_list(v)) {
            if (x != std::floor(x)) fail("expected integers");
            out.push_back(static_cast<int>(x));
        }
        return out;
    }
};

}  // namespace

void apply_config_text(ExperimentConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            static const char* known[] = {"scenario", "sizes", "train",  "attack",
                                          "ddb",      "detect", "run"};
            if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
                    return section == k;
                }) == std::end(known))
                throw ConfigError("unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError("key '" + key + "' outside any section");
        KeyContext kc{section + "." + key};

        if (section == "scenario") {
            if (key == "nodes") cfg.scenario.nodes = kc.positive_int(value);
            else if (key == "samples") cfg.scenario.samples = kc.positive_int(value);
            else if (key == "beta1_low") cfg.scenario.beta1_low = kc.positive(value);
            else if (key == "beta1_high") cfg.scenario.beta1_high = kc.positive(value);
            else if (key == "snr_low") cfg.scenario.snr_low = kc.positive(value);
            else if (key == "snr_high") cfg.scenario.snr_high = kc.positive(value);
            else if (key == "occupancy_prior") cfg.scenario.occupancy_prior = kc.unit_interval(value);
            else if (key == "seed") cfg.scenario.seed = kc.seed(value);
            else if (key == "scale_h0") {
                auto v = kc.number_list(value);
                cfg.explicit_scale_h0 =
                    Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
            } else if (key == "scale_h1") {
                auto v = kc.number_list(value);
                cfg.explicit_scale_h1 =
                    Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
            } else kc.fail("unknown key");
        } else if (section == "sizes") {
            if (key == "train") cfg.train_size = static_cast<std::size_t>(kc.positive_int(value));
            else if (key == "test") cfg.test_size = static_cast<std::size_t>(kc.positive_int(value));
            else kc.fail("unknown key");
        } else if (section == "train") {
            if (key == "epochs") cfg.train.epochs = kc.positive_int(value);
            else if (key == "batch") cfg.train.batch_size = kc.positive_int(value);
            else if (key == "learning_rate") cfg.train.learning_rate = kc.positive(value);
            else if (key == "hidden") cfg.train.hidden_sizes = kc.int_list(value);
            else if (key == "weight_seed") cfg.train.weight_seed = kc.seed(value);
            else if (key == "early_stop_accuracy") cfg.train.early_stop_accuracy = kc.unit_interval(value);
            else kc.fail("unknown key");
        } else if (section == "attack") {
            if (key == "method") {
                try { cfg.attack_method = attack_method_from_string(value); }
                catch (const std::invalid_argument& e) { kc.fail(e.what()); }
            }
            else if (key == "m") cfg.malicious_count = kc.positive_int(value);
            else if (key == "nodes") cfg.controlled_nodes = kc.int_list(value);
            else if (key == "step_size") cfg.attack_step = kc.positive(value);
            else if (key == "pgd_steps") cfg.pgd_steps = kc.positive_int(value);
            else if (key == "ratio") cfg.occurrence_ratio = kc.unit_interval(value);
            else if (key == "mode") {
                if (value == "surrogate") cfg.attacker_mode = AttackerMode::Surrogate;
                else if (value == "whitebox") cfg.attacker_mode = AttackerMode::WhiteBox;
                else kc.fail("expected surrogate|whitebox");
            }
            else if (key == "observations") cfg.surrogate_observations = static_cast<std::size_t>(kc.positive_int(value));
            else if (key == "subset") cfg.attack_subset = static_cast<std::size_t>(kc.positive_int(value));
            else kc.fail("unknown key");
        } else if (section == "ddb") {
            if (key == "method") {
                try { cfg.ddb_method = ddb_method_from_string(value); }
                catch (const std::invalid_argument& e) { kc.fail(e.what()); }
            }
            else if (key == "initial_step") cfg.search.initial_step = kc.positive(value);
            else if (key == "stop_threshold") cfg.search.stop_threshold = kc.positive(value);
            else if (key == "boundary_tolerance") cfg.search.boundary_tolerance = kc.positive(value);
            else if (key == "max_doublings") cfg.search.max_doublings = kc.positive_int(value);
            else if (key == "max_iterations") cfg.search.max_iterations = kc.positive_int(value);
            else if (key == "confidence") cfg.search.confidence = kc.number(value);
            else if (key == "outer_rounds") cfg.search.outer_rounds = kc.positive_int(value);
            else if (key == "inner_steps") cfg.search.inner_steps = kc.positive_int(value);
            else if (key == "initial_penalty") cfg.search.initial_penalty = kc.positive(value);
            else if (key == "gamma") cfg.lrt_threshold = kc.positive(value);
            else if (key == "comparison_subset") cfg.comparison_subset = static_cast<std::size_t>(kc.positive_int(value));
            else kc.fail("unknown key");
        } else if (section == "detect") {
            if (key == "group_size") cfg.group_size = static_cast<std::size_t>(kc.positive_int(value));
            else if (key == "alpha") cfg.alpha = kc.unit_interval(value);
            else kc.fail("unknown key");
        } else if (section == "run") {
            if (key == "seed") cfg.seed = kc.seed(value);
            else if (key == "trials") cfg.trials = kc.positive_int(value);
            else if (key == "threads") cfg.threads = static_cast<unsigned>(kc.integer(value) < 0 ? 0 : kc.integer(value));
            else if (key == "scale") cfg.scale = kc.positive(value);
            else if (key == "full") cfg.full = kc.integer(value) != 0;
            else kc.fail("unknown key");
        }
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg;
    apply_config_text(cfg, buf.str());
    cfg.validate();
    return cfg;
}

std::string canonical_config(const ExperimentConfig& c) {
    std::ostringstream out;
    char buf[40];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "scenario.nodes=" << c.scenario.nodes << '\n'
        << "scenario.samples=" << c.scenario.samples << '\n'
        << "scenario.beta1_low=" << num(c.scenario.beta1_low) << '\n'
        << "scenario.beta1_high=" << num(c.scenario.beta1_high) << '\n'
        << "scenario.snr_low=" << num(c.scenario.snr_low) << '\n'
        << "scenario.snr_high=" << num(c.scenario.snr_high) << '\n'
        << "scenario.occupancy_prior=" << num(c.scenario.occupancy_prior) << '\n'
        << "scenario.seed=" << c.scenario.seed << '\n';
    auto vec = [&](const char* key, const std::optional<Eigen::VectorXd>& v) {
        out << key << '=';
        if (v)
            for (Eigen::Index i = 0; i < v->size(); ++i)
                out << (i ? "," : "") << num((*v)[i]);
        out << '\n';
    };
    vec("scenario.scale_h0", c.explicit_scale_h0);
    vec("scenario.scale_h1", c.explicit_scale_h1);
    out << "sizes.train=" << c.effective_train_size() << '\n'
        << "sizes.test=" << c.effective_test_size() << '\n'
        << "train.epochs=" << c.train.epochs << '\n'
        << "train.batch=" << c.train.batch_size << '\n'
        << "train.learning_rate=" << num(c.train.learning_rate) << '\n'
        << "train.hidden=";
    for (std::size_t i = 0; i < c.train.hidden_sizes.size(); ++i)
        out << (i ? "," : "") << c.train.hidden_sizes[i];
    out << '\n'
        << "train.weight_seed=" << c.train.weight_seed << '\n'
        << "train.early_stop_accuracy=" << num(c.train.early_stop_accuracy) << '\n'
        << "attack.method=" << to_string(c.attack_method) << '\n'
        << "attack.m=" << c.malicious_count << '\n'
        << "attack.nodes=";
    const auto nodes = c.effective_controlled_nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) out << (i ? "," : "") << nodes[i];
    out << '\n'
        << "attack.step_size=" << num(c.attack_step) << '\n'
        << "attack.pgd_steps=" << c.pgd_steps << '\n'
        << "attack.ratio=" << num(c.occurrence_ratio) << '\n'
        << "attack.mode=" << (c.attacker_mode == AttackerMode::Surrogate ? "surrogate" : "whitebox")
        << '\n'
        << "attack.observations=" << c.surrogate_observations << '\n'
        << "attack.subset=" << c.attack_subset << '\n'
        << "ddb.method=" << to_string(c.ddb_method) << '\n'
        << "ddb.initial_step=" << num(c.search.initial_step) << '\n'
        << "ddb.stop_threshold=" << num(c.search.stop_threshold) << '\n'
        << "ddb.boundary_tolerance=" << num(c.search.boundary_tolerance) << '\n'
        << "ddb.max_doublings=" << c.search.max_doublings << '\n'
        << "ddb.max_iterations=" << c.search.max_iterations << '\n'
        << "ddb.confidence=" << num(c.search.confidence) << '\n'
        << "ddb.outer_rounds=" << c.search.outer_rounds << '\n'
        << "ddb.inner_steps=" << c.search.inner_steps << '\n'
        << "ddb.initial_penalty=" << num(c.search.initial_penalty) << '\n'
        << "ddb.gamma=" << num(c.lrt_threshold) << '\n'
        << "ddb.comparison_subset=" << c.comparison_subset << '\n'
        << "detect.group_size=" << c.group_size << '\n'
        << "detect.alpha=" << num(c.alpha) << '\n'
        << "run.seed=" << c.seed << '\n'
        << "run.trials=" << c.trials << '\n'
        << "run.scale=" << num(c.scale) << '\n'
        << "run.full=" << (c.full ? 1 : 0) << '\n';
    return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& c) {
    const std::string s = canonical_config(c);
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace specsense
