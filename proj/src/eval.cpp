#include "graphevo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "graphevo/serialize.hpp"

namespace graphevo {

std::vector<EvalAggregate> EvalReport::aggregates() const {
    std::vector<std::string> variant_order;
    for (const EvalRow& r : rows) {
        if (std::find(variant_order.begin(), variant_order.end(), r.variant) == variant_order.end()) {
            variant_order.push_back(r.variant);
        }
    }

    std::vector<EvalAggregate> out;
    for (const std::string& variant : variant_order) {
        std::map<std::size_t, std::vector<double>> by_timepoint;
        for (const EvalRow& r : rows) {
            if (r.variant == variant) by_timepoint[r.timepoint].push_back(r.mae);
        }
        for (const auto& [timepoint, values] : by_timepoint) {
            EvalAggregate a;
            a.variant = variant;
            a.timepoint = timepoint;
            double sum = 0.0;
            for (double v : values) sum += v;
            a.mean = sum / static_cast<double>(values.size());
            double sq = 0.0;
            for (double v : values) sq += (v - a.mean) * (v - a.mean);
            a.std_dev = std::sqrt(sq / static_cast<double>(values.size()));
            a.best = *std::min_element(values.begin(), values.end());
            out.push_back(std::move(a));
        }
    }
    return out;
}

std::vector<double> evaluate_fold(CascadeTrainer& cascade,
                                  const std::vector<LongitudinalSample>& test_samples) {
    if (test_samples.empty()) throw DataError("evaluation set is empty");
    const std::size_t m = cascade.stages();
    std::vector<double> sums(m, 0.0);
    for (const LongitudinalSample& s : test_samples) {
        s.check();
        if (s.graphs.size() < m + 1) {
            throw DataError("subject " + s.subject_id + " has " + std::to_string(s.graphs.size()) +
                            " timepoints, evaluation needs " + std::to_string(m + 1));
        }
        std::vector<ConnectivityMatrix> preds = cascade.predict(s.graphs[0]);
        for (std::size_t i = 0; i < m; ++i) sums[i] += mae(preds[i], s.graphs[i + 1]);
    }
    for (double& v : sums) v /= static_cast<double>(test_samples.size());
    return sums;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "variant,timepoint,fold,mae\n";
    for (const EvalRow& r : report.rows) {
        out << r.variant << ',' << r.timepoint << ',' << r.fold << ',' << format_double(r.mae) << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

EvalReport read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || (line != "variant,timepoint,fold,mae" &&
                                    line != "variant,timepoint,fold,mae\r")) {
        throw DataError(path.string() + ": missing report header");
    }
    EvalReport report;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        std::istringstream cells(line);
        EvalRow r;
        std::string field;
        try {
            if (!std::getline(cells, r.variant, ',')) throw DataError("missing variant");
            if (!std::getline(cells, field, ',')) throw DataError("missing timepoint");
            r.timepoint = static_cast<std::size_t>(parse_double(field));
            if (!std::getline(cells, field, ',')) throw DataError("missing fold");
            r.fold = static_cast<std::size_t>(parse_double(field));
            if (!std::getline(cells, field, ',')) throw DataError("missing mae");
            r.mae = parse_double(field);
        } catch (const DataError& e) {
            throw DataError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
        report.rows.push_back(std::move(r));
    }
    return report;
}

void write_report_json(const std::filesystem::path& path, const EvalReport& report) {
    nlohmann::json doc;
    doc["config_hash"] = report.config_hash;
    doc["seed"] = report.seed;
    doc["rows"] = nlohmann::json::array();
    for (const EvalRow& r : report.rows) {
        doc["rows"].push_back(
            {{"variant", r.variant}, {"timepoint", r.timepoint}, {"fold", r.fold}, {"mae", r.mae}});
    }
    doc["aggregates"] = nlohmann::json::array();
    for (const EvalAggregate& a : report.aggregates()) {
        doc["aggregates"].push_back({{"variant", a.variant},
                                     {"timepoint", a.timepoint},
                                     {"mean", a.mean},
                                     {"std", a.std_dev},
                                     {"best", a.best}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(1) << '\n';
    if (!out) throw DataError("write failed for " + path.string());
}

std::string render_report_table(const EvalReport& report) {
    std::vector<EvalAggregate> aggs = report.aggregates();
    if (aggs.empty()) {
        std::cerr << "warning: report holds no results, emitting the header only\n";
    }

    std::vector<std::size_t> timepoints;
    std::vector<std::string> variants;
    for (const EvalAggregate& a : aggs) {
        if (std::find(timepoints.begin(), timepoints.end(), a.timepoint) == timepoints.end()) {
            timepoints.push_back(a.timepoint);
        }
        if (std::find(variants.begin(), variants.end(), a.variant) == variants.end()) {
            variants.push_back(a.variant);
        }
    }
    std::sort(timepoints.begin(), timepoints.end());

    std::size_t name_width = std::string("variant").size();
    for (const std::string& v : variants) name_width = std::max(name_width, v.size());

    std::ostringstream out;
    auto pad = [&out](const std::string& text, std::size_t width) {
        out << text;
        for (std::size_t i = text.size(); i < width + 2; ++i) out << ' ';
    };
    pad("variant", name_width);
    const std::size_t metric_width = std::string("0.00000 +/- 0.00000").size();
    for (std::size_t t : timepoints) {
        pad("t" + std::to_string(t) + " mean +/- std", metric_width);
        pad("t" + std::to_string(t) + " best", 7);
    }
    out << '\n';

    char buf[48];
    for (const std::string& v : variants) {
        pad(v, name_width);
        for (std::size_t t : timepoints) {
            auto it = std::find_if(aggs.begin(), aggs.end(), [&](const EvalAggregate& a) {
                return a.variant == v && a.timepoint == t;
            });
            if (it == aggs.end()) {
                pad("-", metric_width);
                pad("-", 7);
                continue;
            }
            std::snprintf(buf, sizeof(buf), "%.5f +/- %.5f", it->mean, it->std_dev);
            pad(buf, metric_width);
            std::snprintf(buf, sizeof(buf), "%.5f", it->best);
            pad(buf, 7);
        }
        out << '\n';
    }
    return out.str();
}

} // namespace graphevo
