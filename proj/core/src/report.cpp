#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "specsense/errors.hpp"
#include "specsense/experiment.hpp"

namespace specsense {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

constexpr const char* kCsvHeader =
    "point,group_size,ratio,m,alpha,ddb_method,attack_method,extra,"
    "detection_rate,false_alarm_rate,attack_success_rate,attacked_slots,attack_successes,"
    "groups,mean_iterations,iterations_variance,iter_p25,iter_p50,iter_p75,"
    "cdf_iter_5,cdf_iter_15,grad_evals_per_iteration,forward_evals_per_iteration,"
    "nonconverged_train,nonconverged_test";

void emit_csv(const ExperimentReport& rep, std::ostream& out) {
    out << "# specsense-report v1\n";
    out << "# sweep=" << rep.sweep << '\n';
    out << "# seed=" << rep.seed << '\n';
    out << "# config_hash=" << rep.config_hash << '\n';
    out << "# version=" << rep.version << '\n';
    out << "# scale=" << fmt(rep.scale) << '\n';
    if (!rep.notes.empty()) out << "# notes=" << rep.notes << '\n';
    out << kCsvHeader << '\n';
    for (const auto& r : rep.rows) {
        out << r.point << ',' << r.group_size << ',' << fmt(r.ratio) << ',' << r.malicious_count
            << ',' << fmt(r.alpha) << ',' << r.ddb_method << ',' << r.attack_method << ','
            << r.extra << ',' << fmt(r.detection_rate) << ',' << fmt(r.false_alarm_rate) << ','
            << fmt(r.attack_success_rate) << ',' << r.attacked_slots << ','
            << r.attack_successes << ',' << r.groups << ',' << fmt(r.mean_iterations) << ','
            << fmt(r.iterations_variance) << ',' << fmt(r.iter_p25) << ',' << fmt(r.iter_p50)
            << ',' << fmt(r.iter_p75) << ',' << fmt(r.cdf_iter_5) << ',' << fmt(r.cdf_iter_15)
            << ',' << fmt(r.grad_evals_per_iteration) << ','
            << fmt(r.forward_evals_per_iteration) << ',' << r.nonconverged_train << ','
            << r.nonconverged_test << '\n';
    }
}

nlohmann::json row_to_json(const ReportRow& r) {
    return nlohmann::json{{"point", r.point},
                          {"group_size", r.group_size},
                          {"ratio", r.ratio},
                          {"m", r.malicious_count},
                          {"alpha", r.alpha},
                          {"ddb_method", r.ddb_method},
                          {"attack_method", r.attack_method},
                          {"extra", r.extra},
                          {"detection_rate", r.detection_rate},
                          {"false_alarm_rate", r.false_alarm_rate},
                          {"attack_success_rate", r.attack_success_rate},
                          {"attacked_slots", r.attacked_slots},
                          {"attack_successes", r.attack_successes},
                          {"groups", r.groups},
                          {"mean_iterations", r.mean_iterations},
                          {"iterations_variance", r.iterations_variance},
                          {"iter_p25", r.iter_p25},
                          {"iter_p50", r.iter_p50},
                          {"iter_p75", r.iter_p75},
                          {"cdf_iter_5", r.cdf_iter_5},
                          {"cdf_iter_15", r.cdf_iter_15},
                          {"grad_evals_per_iteration", r.grad_evals_per_iteration},
                          {"forward_evals_per_iteration", r.forward_evals_per_iteration},
                          {"nonconverged_train", r.nonconverged_train},
                          {"nonconverged_test", r.nonconverged_test}};
}

ReportRow row_from_json(const nlohmann::json& j) {
    ReportRow r;
    r.point = j.at("point").get<int>();
    r.group_size = j.at("group_size").get<std::size_t>();
    r.ratio = j.at("ratio").get<double>();
    r.malicious_count = j.at("m").get<int>();
    r.alpha = j.at("alpha").get<double>();
    r.ddb_method = j.at("ddb_method").get<std::string>();
    r.attack_method = j.at("attack_method").get<std::string>();
    r.extra = j.at("extra").get<std::string>();
    r.detection_rate = j.at("detection_rate").get<double>();
    r.false_alarm_rate = j.at("false_alarm_rate").get<double>();
    r.attack_success_rate = j.at("attack_success_rate").get<double>();
    r.attacked_slots = j.at("attacked_slots").get<std::size_t>();
    r.attack_successes = j.at("attack_successes").get<std::size_t>();
    r.groups = j.at("groups").get<std::size_t>();
    r.mean_iterations = j.at("mean_iterations").get<double>();
    r.iterations_variance = j.at("iterations_variance").get<double>();
    r.iter_p25 = j.at("iter_p25").get<double>();
    r.iter_p50 = j.at("iter_p50").get<double>();
    r.iter_p75 = j.at("iter_p75").get<double>();
    r.cdf_iter_5 = j.at("cdf_iter_5").get<double>();
    r.cdf_iter_15 = j.at("cdf_iter_15").get<double>();
    r.grad_evals_per_iteration = j.at("grad_evals_per_iteration").get<double>();
    r.forward_evals_per_iteration = j.at("forward_evals_per_iteration").get<double>();
    r.nonconverged_train = j.at("nonconverged_train").get<std::size_t>();
    r.nonconverged_test = j.at("nonconverged_test").get<std::size_t>();
    return r;
}

}  // namespace

void emit_report(const ExperimentReport& rep, ReportFormat format, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report '" + path + "'");
    if (format == ReportFormat::Csv) {
        emit_csv(rep, out);
    } else {
        nlohmann::json j;
        j["metadata"] = {{"format", "specsense-report v1"},
                         {"sweep", rep.sweep},
                         {"seed", rep.seed},
                         {"config_hash", rep.config_hash},
                         {"version", rep.version},
                         {"scale", rep.scale},
                         {"notes", rep.notes}};
        auto& rows = j["rows"] = nlohmann::json::array();
        for (const auto& r : rep.rows) rows.push_back(row_to_json(r));
        out << j.dump(2) << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

ExperimentReport load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open report '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("report parse failure: ") + e.what());
    }
    ExperimentReport rep;
    try {
        const auto& meta = j.at("metadata");
        rep.sweep = meta.at("sweep").get<std::string>();
        rep.seed = meta.at("seed").get<std::uint64_t>();
        rep.config_hash = meta.at("config_hash").get<std::uint64_t>();
        rep.version = meta.at("version").get<std::string>();
        rep.scale = meta.at("scale").get<double>();
        rep.notes = meta.at("notes").get<std::string>();
        for (const auto& row : j.at("rows")) rep.rows.push_back(row_from_json(row));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report schema violation: ") + e.what());
    }
    return rep;
}

}  // namespace specsense
