#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "feel/config.hpp"

namespace feel {

// Per-round global metrics of one finished run, read back from
// round_metrics.csv.
struct RunMetrics {
    std::vector<double> global_acc;              // per round
    std::vector<std::vector<double>> recall;     // per round, per class
    std::optional<int> source_label;             // from summary.json, if attacked
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace detail

inline RunMetrics read_run_metrics(const std::string& run_dir) {
    namespace fs = std::filesystem;
    const fs::path dir(run_dir);
    std::ifstream in(dir / "round_metrics.csv");
    if (!in) throw IoError("cannot open " + (dir / "round_metrics.csv").string());

    RunMetrics rm;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("aggregate: empty metrics file in " + run_dir);
    const auto header = detail::split_csv_line(line);
    int recall_cols = 0;
    for (const auto& h : header)
        if (h.rfind("recall_", 0) == 0) ++recall_cols;
    if (header.size() < 4 || header[0] != "round" || header[1] != "global_acc" || recall_cols == 0)
        throw ValidationError("aggregate: unrecognized metrics schema in " + run_dir);

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw ValidationError("aggregate: ragged metrics row in " + run_dir);
        rm.global_acc.push_back(std::stod(cells[1]));
        std::vector<double> rec(static_cast<std::size_t>(recall_cols));
        for (int c = 0; c < recall_cols; ++c)
            rec[static_cast<std::size_t>(c)] = std::stod(cells[static_cast<std::size_t>(2 + c)]);
        rm.recall.push_back(std::move(rec));
    }

    std::ifstream sj(dir / "summary.json");
    if (sj) {
        try {
            nlohmann::json j = nlohmann::json::parse(sj);
            if (j.contains("source_label") && !j["source_label"].is_null())
                rm.source_label = j["source_label"].get<int>();
        } catch (const nlohmann::json::exception&) {
            // summary is optional for aggregation; the CSV carries the data
        }
    }
    return rm;
}

// Per-round mean and sample standard deviation across runs.
struct AggregateResult {
    int n_runs = 0;
    int source_label = -1;
    std::vector<double> acc_mean, acc_std;
    std::vector<double> recall_mean, recall_std; // source-class recall
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    // degenerate case first: identical runs must aggregate exactly
    bool all_equal = true;
    for (double x : xs) all_equal = all_equal && x == xs.front();
    if (all_equal) return {xs.front(), 0.0};
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

} // namespace detail

// Average the per-round metrics of several runs of the same setting.
// Run layouts must match (same round count, same class count).
inline AggregateResult aggregate_runs(const std::vector<std::string>& run_dirs,
                                      std::optional<int> source_label_override = {}) {
    if (run_dirs.empty()) throw ValidationError("aggregate: no run directories given");
    std::vector<RunMetrics> runs;
    for (const auto& d : run_dirs) runs.push_back(read_run_metrics(d));

    const std::size_t rounds = runs.front().global_acc.size();
    const std::size_t classes = runs.front().recall.empty() ? 0 : runs.front().recall[0].size();
    for (const auto& r : runs) {
        if (r.global_acc.size() != rounds)
            throw ValidationError("aggregate: run dirs have mismatched round counts");
        if (!r.recall.empty() && r.recall[0].size() != classes)
            throw ValidationError("aggregate: run dirs have mismatched recall columns");
    }

    AggregateResult agg;
    agg.n_runs = static_cast<int>(runs.size());
    if (source_label_override) {
        agg.source_label = *source_label_override;
    } else {
        for (const auto& r : runs) {
            if (!r.source_label) continue;
            if (agg.source_label == -1) agg.source_label = *r.source_label;
            else if (agg.source_label != *r.source_label)
                throw ValidationError("aggregate: run dirs disagree on the source label");
        }
        if (agg.source_label == -1) agg.source_label = 0;
    }
    if (classes <= static_cast<std::size_t>(agg.source_label))
        throw ValidationError("aggregate: source label out of range of recall columns");

    for (std::size_t t = 0; t < rounds; ++t) {
        std::vector<double> accs, recs;
        for (const auto& r : runs) {
            accs.push_back(r.global_acc[t]);
            recs.push_back(r.recall[t][static_cast<std::size_t>(agg.source_label)]);
        }
        auto [am, as] = detail::mean_std(accs);
        auto [rm, rs] = detail::mean_std(recs);
        agg.acc_mean.push_back(am);
        agg.acc_std.push_back(as);
        agg.recall_mean.push_back(rm);
        agg.recall_std.push_back(rs);
    }
    return agg;
}

inline void write_aggregate_csv(const AggregateResult& agg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "round,global_acc_mean,global_acc_std,source_recall_mean,source_recall_std,n_runs\n";
    char buf[32];
    for (std::size_t t = 0; t < agg.acc_mean.size(); ++t) {
        out << (t + 1);
        for (double v : {agg.acc_mean[t], agg.acc_std[t], agg.recall_mean[t], agg.recall_std[t]}) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << ',' << agg.n_runs << '\n';
    }
}

} // namespace feel
