#pragma once

#include <iomanip>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "carnotlab/curvature.hpp"
#include "carnotlab/inequalities.hpp"
#include "carnotlab/stats.hpp"

namespace carnotlab {

// JSON report emission. No timestamps and insertion-ordered keys, so a run is
// byte-identical given (config, version). Schema is versioned.
inline constexpr int kReportSchema = 1;

inline nlohmann::ordered_json estimate_to_json(const McEstimate& e) {
    return {{"value", e.value}, {"ci", e.ci_half_width}, {"n", e.n_samples}, {"seed", e.seed}};
}

inline nlohmann::ordered_json report_to_json(const InequalityReport& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name();
    j["check"] = r.check;
    j["function"] = r.function;
    j["lhs"] = estimate_to_json(r.lhs);
    j["rhs"] = estimate_to_json(r.rhs);
    j["deficit"] = r.deficit;
    j["verdict"] = verdict_name(r.verdict);
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.params) params[k] = v;
    j["params"] = params;
    return j;
}

inline nlohmann::ordered_json reports_to_json(std::span<const InequalityReport> reports) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["reports"] = nlohmann::ordered_json::array();
    for (const auto& r : reports) j["reports"].push_back(report_to_json(r));
    return j;
}

// CSV row for a standalone estimate: estimator,params,value,ci,n,seed.
inline std::string estimate_csv_row(const std::string& estimator, const std::string& params,
                                    const McEstimate& e) {
    std::ostringstream out;
    out << estimator << ',' << params << ',' << std::setprecision(17) << e.value << ','
        << e.ci_half_width << ',' << e.n_samples << ',' << e.seed;
    return out.str();
}

inline std::string curvature_csv_header() {
    return "f_name,x,y,z,nu,gamma2_mix,gamma_elli,margin";
}

inline std::string curvature_csv_row(const std::string& f_name, const FormValue& v,
                                     double margin) {
    std::ostringstream out;
    out << f_name << ',' << std::setprecision(17) << v.point.x << ',' << v.point.y << ','
        << v.point.z << ',' << v.nu << ',' << v.gamma2_mix << ',' << v.gamma_elli << ','
        << margin;
    return out.str();
}

// Fixed-width table of reports for terminal reading.
inline std::string render_table(std::span<const InequalityReport> reports) {
    std::ostringstream out;
    out << std::left << std::setw(34) << "name" << std::right << std::setw(14) << "lhs"
        << std::setw(14) << "rhs" << std::setw(14) << "deficit" << std::setw(10) << "ci(l+r)"
        << "  verdict\n";
    for (const auto& r : reports) {
        out << std::left << std::setw(34) << r.name() << std::right << std::fixed
            << std::setprecision(6) << std::setw(14) << r.lhs.value << std::setw(14)
            << r.rhs.value << std::setw(14) << r.deficit << std::setw(10)
            << (r.lhs.ci_half_width + r.rhs.ci_half_width) << "  " << verdict_name(r.verdict)
            << '\n';
        out.unsetf(std::ios::fixed);
    }
    return out.str();
}

// Parse one JSON report document back into report structs (used by the
// merge/table subcommand). Only the fields the table needs are required.
inline std::vector<InequalityReport> reports_from_json(const nlohmann::json& j) {
    if (!j.contains("reports") || !j["reports"].is_array())
        throw std::invalid_argument("reports_from_json: missing 'reports' array");
    std::vector<InequalityReport> out;
    for (const auto& item : j["reports"]) {
        InequalityReport r;
        r.check = item.at("check").get<std::string>();
        r.function = item.at("function").get<std::string>();
        r.lhs.value = item.at("lhs").at("value").get<double>();
        r.lhs.ci_half_width = item.at("lhs").at("ci").get<double>();
        r.lhs.n_samples = item.at("lhs").at("n").get<std::size_t>();
        r.lhs.seed = item.at("lhs").at("seed").get<std::uint64_t>();
        r.rhs.value = item.at("rhs").at("value").get<double>();
        r.rhs.ci_half_width = item.at("rhs").at("ci").get<double>();
        r.rhs.n_samples = item.at("rhs").at("n").get<std::size_t>();
        r.rhs.seed = item.at("rhs").at("seed").get<std::uint64_t>();
        r.deficit = item.at("deficit").get<double>();
        const std::string v = item.at("verdict").get<std::string>();
        r.verdict = v == "holds"      ? Verdict::holds
                    : v == "violated" ? Verdict::violated
                                      : Verdict::inconclusive;
        if (item.contains("params"))
            for (const auto& [k, val] : item["params"].items())
                r.params[k] = val.get<double>();
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace carnotlab
