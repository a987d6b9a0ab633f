#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tocseg/core.hpp"
#include "tocseg/error.hpp"
#include "tocseg/toc_format.hpp"

namespace tocseg {

// ---------------------------------------------------------------------------
// Prompt configuration
// ---------------------------------------------------------------------------

enum class Strategy { Toc, SegmentList };

inline const char* strategy_name(Strategy s) {
    return s == Strategy::Toc ? "toc" : "segment-list";
}

inline Strategy strategy_from_name(const std::string& name) {
    if (name == "toc") return Strategy::Toc;
    if (name == "segment-list" || name == "segment_list") return Strategy::SegmentList;
    throw Error(Errc::ConfigError, "unknown strategy '" + name + "'");
}

struct PromptConfig {
    Strategy strategy = Strategy::Toc;
    bool include_pauses = false;
    std::optional<std::string> language_hint;
    std::size_t max_input_chars = 400000;
    double temperature = 0.0;
    int max_retries = 2;
    // system prompt wording is a versioned text asset, not a compiled string
    std::string prompt_dir = "assets/prompts";
    std::string prompt_version = "v1";
    std::string system_prompt_override;   // when set, skips the asset lookup
};

struct ChatMessage {
    std::string role;   // "system", "user", "assistant"
    std::string content;
};

namespace detail {

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::ConfigError, "cannot read prompt asset " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

} // namespace detail

inline std::string prompt_asset_path(const PromptConfig& cfg, const std::string& name) {
    return cfg.prompt_dir + "/" + name + "_" + cfg.prompt_version + ".txt";
}

inline std::string load_system_prompt(const PromptConfig& cfg) {
    if (!cfg.system_prompt_override.empty()) return cfg.system_prompt_override;
    std::string name = cfg.strategy == Strategy::Toc ? "toc" : "segment_list";
    return detail::read_text_file(prompt_asset_path(cfg, name));
}

inline std::string load_retry_prompt(const PromptConfig& cfg, const std::string& diagnostic) {
    std::string text = detail::read_text_file(prompt_asset_path(cfg, "retry"));
    return detail::replace_all(std::move(text), "{diagnostic}", diagnostic);
}

// ---------------------------------------------------------------------------
// Prompt building
// ---------------------------------------------------------------------------

// User message: one line per sentence, `<i>: <text>`, or with pauses enabled
// `<i> (pause=<d.dd>s): <text>` where the pause is the silence before
// sentence i. Sentence 1 never carries a pause annotation; every other line
// does, including 0.00s gaps.
inline std::vector<ChatMessage> build_prompt(const Transcript& t,
                                             const std::vector<double>& pauses,
                                             const PromptConfig& cfg) {
    if (cfg.include_pauses && pauses.size() + 1 != t.sentences.size())
        throw Error(Errc::LengthMismatch,
                    "need n-1 pauses, got " + std::to_string(pauses.size()) + " for n=" +
                        std::to_string(t.sentences.size()));

    std::string system = load_system_prompt(cfg);
    if (cfg.language_hint) {
        system += "\nThe transcript language is " + *cfg.language_hint +
                  "; write topic titles in that language.\n";
    }

    std::string user;
    char buf[32];
    for (std::size_t i = 0; i < t.sentences.size(); ++i) {
        const Sentence& s = t.sentences[i];
        user += std::to_string(s.index);
        if (cfg.include_pauses && i > 0) {
            std::snprintf(buf, sizeof(buf), "%.2f", pauses[i - 1]);
            user += " (pause=";
            user += buf;
            user += "s)";
        }
        user += ": ";
        user += s.text;
        user += '\n';
    }

    if (system.size() + user.size() > cfg.max_input_chars)
        throw Error(Errc::BudgetExceeded,
                    "prompt is " + std::to_string(system.size() + user.size()) +
                        " chars, budget " + std::to_string(cfg.max_input_chars));

    return {{"system", std::move(system)}, {"user", std::move(user)}};
}

// ---------------------------------------------------------------------------
// Chat clients and the run log
// ---------------------------------------------------------------------------

struct ChatResult {
    std::string text;
    double latency_ms = 0.0;
    std::optional<int> prompt_tokens;
    std::optional<int> completion_tokens;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResult send(const std::vector<ChatMessage>& messages, double temperature) = 0;
    virtual std::string describe() const = 0;
};

// Scripted test/offline double: replies in order, then repeats the last one.
class StubChatClient : public ChatClient {
public:
    explicit StubChatClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}

    ChatResult send(const std::vector<ChatMessage>&, double) override {
        if (replies_.empty())
            throw Error(Errc::NetworkError, "stub has no replies");
        std::size_t i = std::min(next_++, replies_.size() - 1);
        return ChatResult{replies_[i], 0.0, std::nullopt, std::nullopt};
    }

    std::string describe() const override { return "stub"; }

    std::size_t calls() const { return next_; }

private:
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
};

// Collects JSONL events. Events are buffered and flushed sorted by
// (doc_id, sequence) so logs are byte-stable under document-level
// parallelism; wall-clock fields are confined to the log.
class RunLog {
public:
    void add(const std::string& doc_id, nlohmann::json event) {
        std::lock_guard<std::mutex> lock(mu_);
        event["doc_id"] = doc_id;
        events_.emplace_back(doc_id, seq_per_doc_[doc_id]++, std::move(event));
    }

    std::string to_jsonl() const {
        std::lock_guard<std::mutex> lock(mu_);
        auto sorted = events_;
        std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) <
                   std::tie(std::get<0>(b), std::get<1>(b));
        });
        std::string out;
        for (const auto& [doc, seq, ev] : sorted) {
            out += ev.dump();
            out += '\n';
        }
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error(Errc::IoError, "cannot write run log " + path);
        out << to_jsonl();
    }

private:
    using Entry = std::tuple<std::string, int, nlohmann::json>;
    mutable std::mutex mu_;
    std::vector<Entry> events_;
    std::map<std::string, int> seq_per_doc_;
};

// Sends the messages and records request/response metadata to the run log.
inline std::string complete(ChatClient& client, const std::vector<ChatMessage>& messages,
                            double temperature, RunLog* log = nullptr,
                            const std::string& doc_id = "") {
    ChatResult r = client.send(messages, temperature);
    if (log) {
        nlohmann::json ev;
        ev["event"] = "completion";
        ev["client"] = client.describe();
        ev["messages"] = messages.size();
        ev["latency_ms"] = r.latency_ms;
        if (r.prompt_tokens) ev["prompt_tokens"] = *r.prompt_tokens;
        if (r.completion_tokens) ev["completion_tokens"] = *r.completion_tokens;
        ev["response_chars"] = r.text.size();
        log->add(doc_id, std::move(ev));
    }
    return r.text;
}

// ---------------------------------------------------------------------------
// Generation pipelines
// ---------------------------------------------------------------------------

struct TocGenResult {
    Toc toc;
    ParseDiagnostics diagnostics;
    int attempts = 0;
};

// ToC generation with a bounded repair/retry loop: parse failures re-prompt
// with a correction message quoting the first diagnostic, up to
// cfg.max_retries extra attempts.
inline TocGenResult run_toc_generation(const Transcript& t, const std::vector<double>& pauses,
                                       ChatClient& client, const PromptConfig& cfg,
                                       RunLog* log = nullptr) {
    if (cfg.strategy != Strategy::Toc)
        throw Error(Errc::ConfigError, "run_toc_generation requires the toc strategy");

    std::vector<ChatMessage> messages = build_prompt(t, pauses, cfg);
    std::vector<std::string> failures;

    for (int attempt = 1; attempt <= cfg.max_retries + 1; ++attempt) {
        std::string text = complete(client, messages, cfg.temperature, log, t.doc_id);
        try {
            auto [toc, diag] = parse_toc(text, t.n());
            if (log) {
                nlohmann::json ev;
                ev["event"] = "parsed";
                ev["attempt"] = attempt;
                ev["dropped_lines"] = diag.dropped_lines.size();
                ev["repairs"] = diag.repairs;
                log->add(t.doc_id, std::move(ev));
            }
            return TocGenResult{std::move(toc), std::move(diag), attempt};
        } catch (const Error& e) {
            if (e.code() != Errc::Unparseable && e.code() != Errc::AllEntriesInvalid) throw;
            failures.push_back(e.what());
            if (log) {
                nlohmann::json ev;
                ev["event"] = "parse_failure";
                ev["attempt"] = attempt;
                ev["error"] = e.what();
                log->add(t.doc_id, std::move(ev));
            }
            if (attempt <= cfg.max_retries) {
                messages.push_back({"assistant", text});
                messages.push_back({"user", load_retry_prompt(cfg, failures.back())});
            }
        }
    }

    std::string all;
    for (const auto& f : failures) {
        if (!all.empty()) all += "; ";
        all += f;
    }
    throw Error(Errc::GenerationFailed, "doc '" + t.doc_id + "' after " +
                                            std::to_string(cfg.max_retries + 1) +
                                            " attempts: " + all);
}

struct SegmentListResult {
    BoundarySet boundaries;
    std::vector<std::string> repairs;
    int attempts = 1;
};

namespace detail {

inline nlohmann::json extract_json_array(const std::string& text) {
    auto try_parse = [](const std::string& s) -> std::optional<nlohmann::json> {
        nlohmann::json j = nlohmann::json::parse(s, nullptr, false);
        if (j.is_discarded() || !j.is_array()) return std::nullopt;
        return j;
    };
    if (auto j = try_parse(std::string(trim(text)))) return *j;
    std::size_t lo = text.find('[');
    std::size_t hi = text.rfind(']');
    if (lo == std::string::npos || hi == std::string::npos || hi <= lo)
        throw Error(Errc::GenerationFailed, "response contains no index list");
    if (auto j = try_parse(text.substr(lo, hi - lo + 1))) return *j;
    throw Error(Errc::GenerationFailed, "response index list is not valid JSON");
}

} // namespace detail

// SegmentLLM-style zero-shot flow: the model replies with a list of sentence
// index lists, one list per topic. Gaps and overlaps are repaired by
// splitting at each list's first index only.
inline SegmentListResult run_segment_list(const Transcript& t, ChatClient& client,
                                          const PromptConfig& cfg, RunLog* log = nullptr) {
    if (cfg.strategy != Strategy::SegmentList)
        throw Error(Errc::ConfigError, "run_segment_list requires the segment-list strategy");

    PromptConfig pc = cfg;
    pc.include_pauses = false;   // this strategy prompts with bare indexed lines
    std::vector<ChatMessage> messages = build_prompt(t, {}, pc);
    std::string text = complete(client, messages, cfg.temperature, log, t.doc_id);

    nlohmann::json lists = detail::extract_json_array(text);
    if (lists.empty())
        throw Error(Errc::EmptyOutput, "model returned an empty list of segments");

    SegmentListResult result;
    int n = t.n();
    std::vector<int> positions;
    int expected_next = 1;
    for (const auto& list : lists) {
        if (!list.is_array() || list.empty()) {
            result.repairs.push_back("skipped a non-list or empty segment entry");
            continue;
        }
        std::vector<long long> indices;
        try {
            indices = list.get<std::vector<long long>>();
        } catch (const nlohmann::json::exception&) {
            result.repairs.push_back("skipped a segment with non-integer indices");
            continue;
        }
        long long first = indices.front();
        if (first < 1) {
            result.repairs.push_back("clamped segment start " + std::to_string(first) + " to 1");
            first = 1;
        }
        if (first > n) {
            result.repairs.push_back("dropped segment starting beyond sentence " +
                                     std::to_string(n));
            continue;
        }
        if (first != expected_next)
            result.repairs.push_back("segment starting at " + std::to_string(first) +
                                     " does not continue from " + std::to_string(expected_next) +
                                     "; split at segment starts only");
        bool contiguous = true;
        for (std::size_t i = 1; i < indices.size(); ++i)
            if (indices[i] != indices[i - 1] + 1) contiguous = false;
        if (!contiguous)
            result.repairs.push_back("segment starting at " + std::to_string(first) +
                                     " lists non-contiguous indices");
        if (first > 1) positions.push_back(static_cast<int>(first) - 1);
        expected_next = static_cast<int>(std::min<long long>(indices.back(), n)) + 1;
    }
    if (expected_next != n + 1)
        result.repairs.push_back("segments do not cover all " + std::to_string(n) + " sentences");

    result.boundaries = make_boundary_set(n, std::move(positions));
    if (log) {
        nlohmann::json ev;
        ev["event"] = "segment_list";
        ev["boundaries"] = result.boundaries.positions;
        ev["repairs"] = result.repairs;
        log->add(t.doc_id, std::move(ev));
    }
    return result;
}

} // namespace tocseg
