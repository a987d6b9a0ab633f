#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tocseg/core.hpp"
#include "tocseg/error.hpp"

namespace tocseg {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ThresholdPolicy {
    enum class Kind { MeanMinusHalfStddev, Fixed };
    Kind kind = Kind::MeanMinusHalfStddev;
    double fixed_value = 0.0;

    static ThresholdPolicy relative() { return {}; }
    static ThresholdPolicy fixed(double v) { return {Kind::Fixed, v}; }
};

struct TilingConfig {
    int window_k = 5;            // sentences per side of a gap
    int smoothing_passes = 1;    // width-3 moving average passes
    ThresholdPolicy threshold;
};

// ---------------------------------------------------------------------------
// Sentence vector providers
// ---------------------------------------------------------------------------

// Contract: one vector per input sentence, all with the same dimension.
class SentenceVectorProvider {
public:
    virtual ~SentenceVectorProvider() = default;
    virtual std::vector<std::vector<double>> vectors(const std::vector<std::string>& sentences) = 0;
};

// Lowercased token-count vectors over a shared per-call vocabulary. Tokens
// shorter than 2 codepoints are dropped. Non-ASCII bytes are kept verbatim so
// multilingual text tokenizes stably.
inline std::vector<std::vector<double>> lexical_vectors(const std::vector<std::string>& sentences) {
    if (sentences.empty())
        throw Error(Errc::EmptyInput, "no sentences");

    auto tokenize = [](const std::string& text) {
        std::vector<std::string> tokens;
        std::string cur;
        std::size_t codepoints = 0;
        auto flush = [&]() {
            if (codepoints >= 2) tokens.push_back(cur);
            cur.clear();
            codepoints = 0;
        };
        for (unsigned char c : text) {
            if (std::isalnum(c) || c >= 0x80) {
                cur += static_cast<char>(std::tolower(c));
                if ((c & 0xc0) != 0x80) ++codepoints;   // not a UTF-8 continuation byte
            } else {
                flush();
            }
        }
        flush();
        return tokens;
    };

    std::vector<std::vector<std::string>> tokenized;
    tokenized.reserve(sentences.size());
    std::map<std::string, int> vocab;
    for (const auto& s : sentences) {
        tokenized.push_back(tokenize(s));
        for (const auto& t : tokenized.back()) vocab.emplace(t, 0);
    }
    int dim = 0;
    for (auto& [tok, id] : vocab) id = dim++;
    if (dim == 0) dim = 1;   // all-stopword input still needs a fixed dimension

    std::vector<std::vector<double>> out(sentences.size(), std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < tokenized.size(); ++i)
        for (const auto& t : tokenized[i]) out[i][vocab[t]] += 1.0;
    return out;
}

class LexicalVectorProvider : public SentenceVectorProvider {
public:
    std::vector<std::vector<double>> vectors(const std::vector<std::string>& sentences) override {
        return lexical_vectors(sentences);
    }
};

namespace detail {

inline std::vector<std::vector<double>> parse_provider_response(const std::string& body,
                                                                std::size_t expected) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ProviderFailed, std::string("bad provider response: ") + e.what());
    }
    if (!j.contains("vectors") || !j["vectors"].is_array())
        throw Error(Errc::ProviderFailed, "provider response lacks 'vectors'");
    std::vector<std::vector<double>> out;
    for (const auto& row : j["vectors"]) out.push_back(row.get<std::vector<double>>());
    if (out.size() != expected)
        throw Error(Errc::ProviderFailed, "provider returned " + std::to_string(out.size()) +
                                              " vectors for " + std::to_string(expected) +
                                              " sentences");
    for (const auto& row : out)
        if (row.size() != out.front().size() || row.empty())
            throw Error(Errc::ProviderFailed, "provider vectors have inconsistent dimensions");
    return out;
}

} // namespace detail

// Runs `command < request.json > response.json` through the shell. Protocol:
// request {"sentences": [...]}, response {"vectors": [[...], ...]}.
class SubprocessVectorProvider : public SentenceVectorProvider {
public:
    explicit SubprocessVectorProvider(std::string command) : command_(std::move(command)) {}

    std::vector<std::vector<double>> vectors(const std::vector<std::string>& sentences) override {
        namespace fs = std::filesystem;
        fs::path dir = fs::temp_directory_path();
        auto tag = std::to_string(::getpid()) + "_" + std::to_string(++counter_);
        fs::path req = dir / ("tocseg_vec_req_" + tag + ".json");
        fs::path resp = dir / ("tocseg_vec_resp_" + tag + ".json");
        {
            std::ofstream out(req);
            out << nlohmann::json{{"sentences", sentences}}.dump();
        }
        std::string cmd = command_ + " < " + req.string() + " > " + resp.string();
        int rc = std::system(cmd.c_str());
        std::string body;
        {
            std::ifstream in(resp);
            std::stringstream ss;
            ss << in.rdbuf();
            body = ss.str();
        }
        std::error_code ec;
        fs::remove(req, ec);
        fs::remove(resp, ec);
        if (rc != 0)
            throw Error(Errc::ProviderFailed,
                        "provider command exited with status " + std::to_string(rc));
        return detail::parse_provider_response(body, sentences.size());
    }

private:
    std::string command_;
    unsigned long counter_ = 0;
};

// ---------------------------------------------------------------------------
// TextTiling
// ---------------------------------------------------------------------------

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// score at gap i (1-based, between sentence i and i+1) = cosine of the mean
// vectors of the window_k sentences on either side.
inline std::vector<double> gap_scores(const std::vector<std::vector<double>>& vectors,
                                      int window_k) {
    int n = static_cast<int>(vectors.size());
    if (n < 2)
        throw Error(Errc::EmptyInput, "need at least 2 sentences");
    if (window_k < 1)
        throw Error(Errc::InvalidWindow, "window_k must be >= 1");
    std::size_t dim = vectors.front().size();

    auto mean_of = [&](int lo, int hi) {   // 1-based inclusive
        std::vector<double> m(dim, 0.0);
        for (int s = lo; s <= hi; ++s)
            for (std::size_t d = 0; d < dim; ++d) m[d] += vectors[s - 1][d];
        double count = hi - lo + 1;
        for (auto& v : m) v /= count;
        return m;
    };

    std::vector<double> scores(n - 1);
    for (int i = 1; i <= n - 1; ++i) {
        auto left = mean_of(std::max(1, i - window_k + 1), i);
        auto right = mean_of(i + 1, std::min(n, i + window_k));
        scores[i - 1] = cosine(left, right);
    }
    return scores;
}

namespace detail {

inline std::vector<double> smooth_once(const std::vector<double>& s) {
    std::size_t m = s.size();
    if (m < 2) return s;
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double sum = s[i];
        int cnt = 1;
        if (i > 0) {
            sum += s[i - 1];
            ++cnt;
        }
        if (i + 1 < m) {
            sum += s[i + 1];
            ++cnt;
        }
        out[i] = sum / cnt;
    }
    return out;
}

// true when s[j] is at least as high as both in-range neighbours
inline bool is_local_max(const std::vector<double>& s, std::size_t j) {
    if (j > 0 && s[j - 1] > s[j]) return false;
    if (j + 1 < s.size() && s[j + 1] > s[j]) return false;
    return true;
}

} // namespace detail

// depth(i) = (peak_left - s_i) + (peak_right - s_i) where each peak is the
// nearest strictly-higher local maximum scanning outward; a side with no such
// peak contributes 0.
inline std::vector<double> depth_scores(const std::vector<double>& gap_scores_in,
                                        int smoothing_passes = 1) {
    std::vector<double> s = gap_scores_in;
    for (int p = 0; p < smoothing_passes; ++p) s = detail::smooth_once(s);

    std::vector<double> depth(s.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        double left = s[i], right = s[i];
        for (std::size_t j = i; j-- > 0;) {
            if (s[j] > s[i] && detail::is_local_max(s, j)) {
                left = s[j];
                break;
            }
        }
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            if (s[j] > s[i] && detail::is_local_max(s, j)) {
                right = s[j];
                break;
            }
        }
        depth[i] = (left - s[i]) + (right - s[i]);
    }
    return depth;
}

// Boundaries at gaps whose depth exceeds the threshold; runs of adjacent
// selected gaps collapse to the deepest one (leftmost on ties).
inline BoundarySet texttile(const Transcript& t, SentenceVectorProvider& provider,
                            const TilingConfig& cfg = {}) {
    int n = t.n();
    if (n < 2) return BoundarySet{n, {}};

    std::vector<std::string> texts;
    texts.reserve(t.sentences.size());
    for (const auto& s : t.sentences) texts.push_back(s.text);

    std::vector<std::vector<double>> vecs;
    try {
        vecs = provider.vectors(texts);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(Errc::ProviderFailed, std::string("vector provider failed for doc '") +
                                              t.doc_id + "': " + e.what());
    }
    if (vecs.size() != texts.size())
        throw Error(Errc::ProviderFailed, "provider returned wrong vector count for doc '" +
                                              t.doc_id + "'");

    auto gaps = gap_scores(vecs, cfg.window_k);
    auto depth = depth_scores(gaps, cfg.smoothing_passes);

    double threshold;
    if (cfg.threshold.kind == ThresholdPolicy::Kind::Fixed) {
        threshold = cfg.threshold.fixed_value;
    } else {
        double mean = 0.0;
        for (double d : depth) mean += d;
        mean /= depth.size();
        double var = 0.0;
        for (double d : depth) var += (d - mean) * (d - mean);
        var /= depth.size();
        threshold = mean - std::sqrt(var) / 2.0;
    }

    // Within each run of adjacent selected gaps, keep the local depth maxima
    // (leftmost position of a plateau). Shallower neighbours collapse into
    // the nearest deeper gap.
    std::vector<int> positions;
    std::size_t i = 0;
    while (i < depth.size()) {
        if (depth[i] <= threshold) {
            ++i;
            continue;
        }
        std::size_t run_end = i;
        while (run_end + 1 < depth.size() && depth[run_end + 1] > threshold) ++run_end;
        for (std::size_t x = i; x <= run_end; ++x) {
            if (x > i && depth[x - 1] >= depth[x]) continue;
            std::size_t y = x;
            while (y + 1 <= run_end && depth[y + 1] == depth[x]) ++y;
            if (y + 1 <= run_end && depth[y + 1] > depth[x]) continue;
            positions.push_back(static_cast<int>(x) + 1);
        }
        i = run_end + 1;
    }
    return BoundarySet{n, std::move(positions)};
}

} // namespace tocseg
