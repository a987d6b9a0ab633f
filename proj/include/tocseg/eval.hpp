#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tocseg/core.hpp"
#include "tocseg/error.hpp"
#include "tocseg/metrics.hpp"
#include "tocseg/rng.hpp"

namespace tocseg {

// ---------------------------------------------------------------------------
// Per-document scoring
// ---------------------------------------------------------------------------

struct ScoreRecord {
    std::string doc_id;
    std::string metric;                // "f1", "b", "b_hier", "b_level", ...
    std::optional<int> level_ref;
    std::optional<int> level_hyp;
    double value = 0.0;                // always in [0,1]
};

struct MetricParams {
    int n_t = 2;
    int f1_tolerance = 0;
    bool include_auxiliary = false;    // adds pk / window_diff records
};

// Linear metrics compare the finest reference level against the finest
// hypothesis level; b_hier and the full level matrix cover the rest.
inline std::vector<ScoreRecord> score_document(const std::string& doc_id,
                                               const HierSegmentation& ref,
                                               const HierSegmentation& hyp,
                                               const MetricParams& params = {}) {
    if (ref.n != hyp.n)
        throw Error(Errc::LengthMismatch, "doc '" + doc_id + "': ref n=" + std::to_string(ref.n) +
                                              " vs hyp n=" + std::to_string(hyp.n));
    const BoundarySet& ref_fine = ref.levels.back();
    const BoundarySet& hyp_fine = hyp.levels.back();
    int lr = ref.depth();
    int lh = hyp.depth();

    std::vector<ScoreRecord> records;
    records.push_back(
        {doc_id, "f1", lr, lh, boundary_f1(ref_fine, hyp_fine, params.f1_tolerance).f1});
    records.push_back({doc_id, "b", lr, lh, boundary_similarity(ref_fine, hyp_fine, params.n_t)});
    records.push_back({doc_id, "b_hier", std::nullopt, std::nullopt, b_hier(ref, hyp, params.n_t)});

    auto matrix = level_score_matrix(ref, hyp, [&](const BoundarySet& a, const BoundarySet& b) {
        return boundary_similarity(a, b, params.n_t);
    });
    for (int l = 0; l < matrix.rows(); ++l)
        for (int k = 0; k < matrix.cols(); ++k)
            records.push_back({doc_id, "b_level", l + 1, k + 1, matrix.values[l][k]});

    if (params.include_auxiliary) {
        records.push_back({doc_id, "pk", lr, lh, pk_metric(ref_fine, hyp_fine)});
        records.push_back({doc_id, "window_diff", lr, lh, window_diff(ref_fine, hyp_fine)});
    }
    return records;
}

inline nlohmann::json score_record_to_json(const ScoreRecord& r) {
    nlohmann::json j;
    j["doc_id"] = r.doc_id;
    j["metric"] = r.metric;
    j["level_ref"] = r.level_ref ? nlohmann::json(*r.level_ref) : nlohmann::json(nullptr);
    j["level_hyp"] = r.level_hyp ? nlohmann::json(*r.level_hyp) : nlohmann::json(nullptr);
    j["value"] = r.value;
    return j;
}

inline ScoreRecord score_record_from_json(const nlohmann::json& j) {
    ScoreRecord r;
    r.doc_id = j.at("doc_id").get<std::string>();
    r.metric = j.at("metric").get<std::string>();
    if (j.contains("level_ref") && !j["level_ref"].is_null())
        r.level_ref = j["level_ref"].get<int>();
    if (j.contains("level_hyp") && !j["level_hyp"].is_null())
        r.level_hyp = j["level_hyp"].get<int>();
    r.value = j.at("value").get<double>();
    return r;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};

namespace detail {

inline MeanStd mean_and_population_stddev(const std::vector<double>& xs) {
    bool constant = true;
    for (double x : xs)
        if (x != xs.front()) constant = false;
    if (constant) return {xs.front(), 0.0};   // no accumulation residue on constant input
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size();
    return {mean, std::sqrt(var)};
}

} // namespace detail

// Resamples |values| documents with replacement per iteration using the
// counter-based generator, so results are identical across platforms and
// thread counts. Callers pass values ordered by sorted doc_id. Returns the
// mean and population stddev of the iteration means.
inline MeanStd bootstrap(const std::vector<double>& values, int iterations = 100,
                         std::uint64_t seed = 0) {
    if (values.empty())
        throw Error(Errc::EmptyInput, "bootstrap needs at least one value");
    if (iterations < 1)
        throw Error(Errc::EmptyInput, "bootstrap needs at least one iteration");
    std::size_t m = values.size();
    std::vector<double> iteration_means;
    iteration_means.reserve(iterations);
    for (int it = 0; it < iterations; ++it) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            sum += values[counter_draw(seed, static_cast<std::uint64_t>(it), j) % m];
        iteration_means.push_back(sum / double(m));
    }
    return detail::mean_and_population_stddev(iteration_means);
}

// Leave-one-speaker-out reduction: per-fold mean first, then mean and
// population stddev across folds.
inline MeanStd loso_aggregate(const std::vector<std::vector<double>>& fold_scores) {
    if (fold_scores.size() < 2)
        throw Error(Errc::TooFewFolds, "need >= 2 folds, got " +
                                           std::to_string(fold_scores.size()));
    std::vector<double> fold_means;
    fold_means.reserve(fold_scores.size());
    for (const auto& fold : fold_scores) {
        if (fold.empty())
            throw Error(Errc::EmptyInput, "a fold has no scores");
        double sum = 0.0;
        for (double v : fold) sum += v;
        fold_means.push_back(sum / double(fold.size()));
    }
    return detail::mean_and_population_stddev(fold_means);
}

// ---------------------------------------------------------------------------
// Export formatting
// ---------------------------------------------------------------------------

// Scores are kept in [0,1] internally and scaled x100 with half-up rounding
// to 2 decimals exactly once, at export.
inline std::string format_scaled_score(double value01) {
    double scaled = value01 * 100.0;
    bool negative = scaled < 0;
    long long cents = static_cast<long long>(std::floor(std::abs(scaled) * 100.0 + 0.5));
    std::string digits = std::to_string(cents / 100);
    std::string frac = std::to_string(cents % 100);
    if (frac.size() < 2) frac.insert(frac.begin(), '0');
    return (negative ? "-" : "") + digits + "." + frac;
}

// Average of per-document level matrices. Documents whose hypothesis has
// fewer levels than the widest matrix repeat their deepest hypothesis level;
// documents with fewer reference levels contribute only to the rows they
// have.
inline LevelScoreMatrix average_level_matrices(const std::vector<LevelScoreMatrix>& matrices) {
    if (matrices.empty())
        throw Error(Errc::EmptyInput, "no level matrices to average");
    int rows = 0, cols = 0;
    for (const auto& m : matrices) {
        if (m.rows() < 1 || m.cols() < 1)
            throw Error(Errc::DimensionConflict, "a per-document matrix is empty");
        rows = std::max(rows, m.rows());
        cols = std::max(cols, m.cols());
    }
    LevelScoreMatrix out;
    out.values.assign(rows, std::vector<double>(cols, 0.0));
    std::vector<std::vector<int>> counts(rows, std::vector<int>(cols, 0));
    for (const auto& m : matrices) {
        for (int l = 0; l < m.rows(); ++l) {
            for (int k = 0; k < cols; ++k) {
                double v = m.values[l][std::min(k, m.cols() - 1)];
                out.values[l][k] += v;
                counts[l][k] += 1;
            }
        }
    }
    for (int l = 0; l < rows; ++l)
        for (int k = 0; k < cols; ++k)
            if (counts[l][k] > 0) out.values[l][k] /= counts[l][k];
    return out;
}

// CSV heatmap: reference levels as rows, hypothesis levels as columns,
// values x100 with 2 decimals.
inline std::string export_heatmap(const LevelScoreMatrix& averaged) {
    if (averaged.rows() < 1 || averaged.cols() < 1)
        throw Error(Errc::DimensionConflict, "heatmap needs a non-empty matrix");
    std::string out = "ref_level";
    for (int k = 1; k <= averaged.cols(); ++k) out += ",hyp_" + std::to_string(k);
    out += '\n';
    for (int l = 0; l < averaged.rows(); ++l) {
        out += std::to_string(l + 1);
        for (int k = 0; k < averaged.cols(); ++k)
            out += "," + format_scaled_score(averaged.values[l][k]);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Aggregate report
// ---------------------------------------------------------------------------

struct AggregateReport {
    std::string method;
    std::string tuning;     // "zero-shot" or "fine-tuned"
    std::string dataset;
    std::string protocol;   // "bootstrap" or "loso"
    // metric name -> aggregated mean/stddev over documents
    std::map<std::string, MeanStd> metrics;
};

inline std::string report_to_markdown(const AggregateReport& r) {
    auto cell = [&](const char* name) {
        auto it = r.metrics.find(name);
        if (it == r.metrics.end()) return std::string("-");
        return format_scaled_score(it->second.mean) + " \xc2\xb1 " +
               format_scaled_score(it->second.stddev);
    };
    std::string md;
    md += "| Method | Tuning | F1 | B | B_hier |\n";
    md += "|---|---|---|---|---|\n";
    md += "| " + r.method + " | " + r.tuning + " | " + cell("f1") + " | " + cell("b") + " | " +
          cell("b_hier") + " |\n";
    return md;
}

inline nlohmann::json report_to_json(const AggregateReport& r) {
    nlohmann::json j;
    j["method"] = r.method;
    j["tuning"] = r.tuning;
    j["dataset"] = r.dataset;
    j["protocol"] = r.protocol;
    j["metrics"] = nlohmann::json::object();
    for (const auto& [name, ms] : r.metrics) {
        j["metrics"][name] = {{"mean", format_scaled_score(ms.mean)},
                              {"stddev", format_scaled_score(ms.stddev)}};
    }
    return j;
}

} // namespace tocseg
