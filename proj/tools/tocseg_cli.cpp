// tocseg: hierarchical topic segmentation toolkit.
// Subcommands: ingest, prompt, generate, baseline, score, report.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tocseg/http.hpp"
#include "tocseg/tocseg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tocseg;

namespace {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct TilingProviderConfig {
    std::string kind = "lexical";   // lexical | subprocess | http
    std::string command;
    std::string url;
};

struct ChatConfig {
    std::string kind = "http";   // http | stub
    std::string endpoint;
    std::string model;
    std::string credential_env = "TOCSEG_API_KEY";
    double timeout_s = 120.0;
    std::string stub_dir;
};

struct RunConfig {
    fs::path config_dir;   // directory of the config file, for relative paths
    std::string manifest;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    std::string method = "toc-llm";
    std::string tuning = "zero-shot";
    std::string dataset;
    PromptConfig prompt;
    ChatConfig chat;
    TilingConfig tiling;
    TilingProviderConfig tiling_provider;
    MetricParams metrics;
    int bootstrap_iterations = 100;
    int jobs = 1;
    bool force = false;

    json raw;   // canonical source for the config hash
};

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigError, path + ": " + e.what());
    }

    RunConfig cfg;
    cfg.config_dir = fs::absolute(fs::path(path)).parent_path();
    cfg.raw = j;
    cfg.manifest = j.value("manifest", "");
    cfg.output_dir = j.value("output_dir", "out");
    cfg.seed = j.value("seed", 0ULL);
    cfg.method = j.value("method", "toc-llm");
    cfg.tuning = j.value("tuning", "zero-shot");
    cfg.dataset = j.value("dataset", "");

    if (j.contains("prompt")) {
        const json& p = j["prompt"];
        cfg.prompt.strategy = strategy_from_name(p.value("strategy", "toc"));
        cfg.prompt.include_pauses = p.value("include_pauses", false);
        if (p.contains("language_hint") && !p["language_hint"].is_null())
            cfg.prompt.language_hint = p["language_hint"].get<std::string>();
        cfg.prompt.max_input_chars = p.value("max_input_chars", std::size_t(400000));
        cfg.prompt.temperature = p.value("temperature", 0.0);
        cfg.prompt.max_retries = p.value("max_retries", 2);
        cfg.prompt.prompt_dir = p.value("prompt_dir", "assets/prompts");
        cfg.prompt.prompt_version = p.value("prompt_version", "v1");
    }
    cfg.prompt.prompt_dir = resolve(cfg.config_dir, cfg.prompt.prompt_dir).string();

    if (j.contains("chat")) {
        const json& c = j["chat"];
        cfg.chat.kind = c.value("kind", "http");
        cfg.chat.endpoint = c.value("endpoint", "");
        cfg.chat.model = c.value("model", "");
        cfg.chat.credential_env = c.value("credential_env", "TOCSEG_API_KEY");
        cfg.chat.timeout_s = c.value("timeout_s", 120.0);
        cfg.chat.stub_dir = c.value("stub_dir", "");
    }

    if (j.contains("tiling")) {
        const json& t = j["tiling"];
        cfg.tiling.window_k = t.value("window_k", 5);
        cfg.tiling.smoothing_passes = t.value("smoothing_passes", 1);
        if (t.contains("threshold") && t["threshold"].is_number())
            cfg.tiling.threshold = ThresholdPolicy::fixed(t["threshold"].get<double>());
        if (t.contains("provider")) {
            if (t["provider"].is_string()) {
                cfg.tiling_provider.kind = t["provider"].get<std::string>();
            } else {
                cfg.tiling_provider.kind = t["provider"].value("kind", "lexical");
                cfg.tiling_provider.command = t["provider"].value("command", "");
                cfg.tiling_provider.url = t["provider"].value("url", "");
            }
        }
    }

    if (j.contains("metrics")) {
        const json& m = j["metrics"];
        cfg.metrics.n_t = m.value("n_t", 2);
        cfg.metrics.f1_tolerance = m.value("f1_tolerance", 0);
        cfg.metrics.include_auxiliary = m.value("include_auxiliary", false);
    }
    cfg.bootstrap_iterations = j.value("bootstrap_iterations", 100);
    return cfg;
}

std::uint64_t fnv1a64(const std::string& data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Hash over the canonical config plus the prompt assets it references, so a
// wording change invalidates cached generations.
std::string config_hash(const RunConfig& cfg) {
    json canon = cfg.raw;
    canon["seed"] = cfg.seed;
    std::string acc = canon.dump();
    for (const char* name : {"toc", "segment_list", "retry"}) {
        std::ifstream in(cfg.prompt.prompt_dir + "/" + std::string(name) + "_" +
                         cfg.prompt.prompt_version + ".txt");
        if (in) {
            std::stringstream ss;
            ss << in.rdbuf();
            acc += ss.str();
        }
    }
    return hex16(fnv1a64(acc));
}

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, path.string() + ": " + e.what());
    }
    return j;
}

// Runs fn(i) over [0, count) on `jobs` workers; per-item stdout is buffered
// and printed in item order. Returns per-item error strings (empty = ok).
std::vector<std::string> parallel_docs(int jobs, std::size_t count,
                                       const std::function<std::string(std::size_t)>& fn) {
    std::vector<std::string> errors(count);
    std::vector<std::string> output(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            try {
                output[i] = fn(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
    std::vector<std::thread> threads;
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    for (std::size_t i = 0; i < count; ++i)
        if (!output[i].empty()) std::cout << output[i];
    return errors;
}

int report_doc_errors(const std::vector<std::string>& errors,
                      const std::vector<CorpusDocument>& docs, const char* verb) {
    int failed = 0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i].empty()) continue;
        ++failed;
        std::cerr << "[" << docs[i].doc_id << "] " << verb << " failed: " << errors[i] << "\n";
    }
    if (failed)
        std::cerr << failed << "/" << errors.size() << " documents failed\n";
    return failed ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Reference loading (raw annotation files -> HierSegmentation)
// ---------------------------------------------------------------------------

struct LoadedReference {
    HierSegmentation seg;
    std::optional<Toc> toc;   // set when the source had outline form
};

LoadedReference load_reference(const fs::path& path, const Transcript& t,
                               std::vector<std::string>* diagnostics) {
    std::string ext = path.extension().string();
    if (ext == ".txt" || ext == ".toc") {
        auto [toc, diag] = parse_toc(read_file(path), t.n());
        if (diagnostics)
            for (const auto& r : diag.repairs) diagnostics->push_back("reference repair: " + r);
        return {toc_to_hierseg(toc, t.n()), std::move(toc)};
    }
    json j = read_json(path);
    // interval annotations: a list of {label, start_time, end_time}
    bool intervals = (j.is_array() && !j.empty() && j.front().contains("start_time")) ||
                     j.contains("intervals");
    if (intervals)
        return {intervals_to_hierseg(intervals_from_json(j), t, diagnostics), std::nullopt};
    // pre-normalized segmentation
    if (j.contains("levels")) {
        auto hs = hierseg_from_json(j);
        if (hs.n != t.n())
            throw Error(Errc::LengthMismatch, "reference n=" + std::to_string(hs.n) +
                                                  " vs transcript n=" + std::to_string(t.n()));
        return {std::move(hs), std::nullopt};
    }
    // hierarchical outline: recursive {title, start_index, children[]}
    Toc toc = toc_from_json(j);
    return {toc_to_hierseg(toc, t.n()), std::move(toc)};
}

// ---------------------------------------------------------------------------
// Normalized corpus access
// ---------------------------------------------------------------------------

struct NormalizedCorpus {
    fs::path dir;
    CorpusIndex index;
};

NormalizedCorpus open_corpus(const RunConfig& cfg) {
    NormalizedCorpus c;
    c.dir = resolve(cfg.config_dir, cfg.output_dir) / "corpus";
    fs::path index_path = c.dir / "index.json";
    if (!fs::exists(index_path))
        throw Error(Errc::IoError,
                    "no ingested corpus at " + c.dir.string() + "; run `tocseg ingest` first");
    c.index = corpus_index_from_json(read_json(index_path));
    return c;
}

Transcript corpus_transcript(const NormalizedCorpus& c, const CorpusDocument& doc) {
    Transcript t = load_transcript((c.dir / doc.transcript_path).string());
    if (t.doc_id.empty()) t.doc_id = doc.doc_id;
    if (!t.speaker_id && doc.speaker_id) t.speaker_id = doc.speaker_id;
    return t;
}

std::string protocol_for(const CorpusIndex& index) {
    if (!index.protocol.empty()) return index.protocol;
    for (const auto& d : index.documents)
        if (!d.speaker_id) return "bootstrap";
    return index.documents.empty() ? "bootstrap" : "loso";
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& cfg) {
    fs::path manifest_path = resolve(cfg.config_dir, cfg.manifest);
    CorpusIndex manifest = load_corpus_index(manifest_path.string());
    fs::path manifest_dir = manifest_path.parent_path();
    fs::path out_dir = resolve(cfg.config_dir, cfg.output_dir) / "corpus";
    fs::create_directories(out_dir);

    auto errors = parallel_docs(cfg.jobs, manifest.documents.size(), [&](std::size_t i) {
        const CorpusDocument& doc = manifest.documents[i];
        std::ostringstream out;
        Transcript t = load_transcript(resolve(manifest_dir, doc.transcript_path).string());
        if (t.doc_id.empty()) t.doc_id = doc.doc_id;
        if (t.doc_id != doc.doc_id)
            throw Error(Errc::InvariantViolation, "transcript doc_id '" + t.doc_id +
                                                      "' does not match manifest '" + doc.doc_id +
                                                      "'");
        if (doc.speaker_id) t.speaker_id = doc.speaker_id;

        std::vector<std::string> diagnostics;
        LoadedReference ref =
            load_reference(resolve(manifest_dir, doc.reference_path), t, &diagnostics);

        write_file(out_dir / (doc.doc_id + ".jsonl"), transcript_to_jsonl(t));
        write_file(out_dir / (doc.doc_id + ".ref.json"), hierseg_to_json(ref.seg).dump(2) + "\n");
        if (ref.toc)
            write_file(out_dir / (doc.doc_id + ".toc.json"),
                       toc_to_json(*ref.toc).dump(2) + "\n");

        out << "[" << doc.doc_id << "] ok: " << t.n() << " sentences, " << ref.seg.depth()
            << " reference level(s)\n";
        for (const auto& d : diagnostics) out << "[" << doc.doc_id << "] " << d << "\n";
        return out.str();
    });

    // index lists every successfully ingested document
    json index;
    index["corpus"] = manifest.name.empty() ? cfg.dataset : manifest.name;
    index["protocol"] = manifest.protocol;
    index["documents"] = json::array();
    for (std::size_t i = 0; i < manifest.documents.size(); ++i) {
        if (!errors[i].empty()) continue;
        const CorpusDocument& doc = manifest.documents[i];
        json d;
        d["doc_id"] = doc.doc_id;
        if (doc.speaker_id) d["speaker"] = *doc.speaker_id;
        d["transcript"] = doc.doc_id + ".jsonl";
        d["reference"] = doc.doc_id + ".ref.json";
        index["documents"].push_back(std::move(d));
    }
    write_file(out_dir / "index.json", index.dump(2) + "\n");

    return report_doc_errors(errors, manifest.documents, "ingest");
}

// ---------------------------------------------------------------------------
// prompt (preview only)
// ---------------------------------------------------------------------------

int cmd_prompt(const RunConfig& cfg, const std::string& doc_filter) {
    NormalizedCorpus corpus = open_corpus(cfg);
    if (corpus.index.documents.empty()) throw Error(Errc::EmptyInput, "corpus has no documents");

    const CorpusDocument* doc = &corpus.index.documents.front();
    if (!doc_filter.empty()) {
        doc = nullptr;
        for (const auto& d : corpus.index.documents)
            if (d.doc_id == doc_filter) doc = &d;
        if (!doc)
            throw Error(Errc::MissingHypothesis, "no document '" + doc_filter + "' in corpus");
    }

    Transcript t = corpus_transcript(corpus, *doc);
    auto pauses = compute_pauses(t);
    auto messages = build_prompt(t, pauses, cfg.prompt);
    for (const auto& m : messages)
        std::cout << "--- " << m.role << " ---\n" << m.content << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

std::unique_ptr<ChatClient> make_chat_client(const RunConfig& cfg, const std::string& doc_id) {
    if (cfg.chat.kind == "stub") {
        fs::path reply = resolve(cfg.config_dir, cfg.chat.stub_dir) / (doc_id + ".txt");
        return std::make_unique<StubChatClient>(std::vector<std::string>{read_file(reply)});
    }
    if (cfg.chat.kind != "http")
        throw Error(Errc::ConfigError, "unknown chat client kind '" + cfg.chat.kind + "'");
    ChatEndpoint ep;
    ep.url = cfg.chat.endpoint;
    ep.model = cfg.chat.model;
    ep.credential_env = cfg.chat.credential_env;
    ep.timeout_s = cfg.chat.timeout_s;
    return std::make_unique<HttpChatClient>(ep);
}

int cmd_generate(const RunConfig& cfg) {
    NormalizedCorpus corpus = open_corpus(cfg);
    fs::path hyp_dir = resolve(cfg.config_dir, cfg.output_dir) / "hyp" / cfg.method;
    fs::create_directories(hyp_dir);
    const std::string hash = config_hash(cfg);
    RunLog log;

    auto errors = parallel_docs(cfg.jobs, corpus.index.documents.size(), [&](std::size_t i) {
        const CorpusDocument& doc = corpus.index.documents[i];
        std::ostringstream out;
        bool segment_list = cfg.prompt.strategy == Strategy::SegmentList;
        fs::path artifact = hyp_dir / (doc.doc_id + (segment_list ? ".boundaries.json"
                                                                  : ".toc.txt"));
        fs::path meta_path = hyp_dir / (doc.doc_id + ".meta.json");

        if (!cfg.force && fs::exists(artifact) && fs::exists(meta_path)) {
            json meta = read_json(meta_path);
            if (meta.value("config_hash", "") == hash) {
                log.add(doc.doc_id, {{"event", "cache_hit"}, {"config_hash", hash}});
                out << "[" << doc.doc_id << "] cached\n";
                return out.str();
            }
        }

        Transcript t = corpus_transcript(corpus, doc);
        auto client = make_chat_client(cfg, doc.doc_id);
        json meta;
        meta["config_hash"] = hash;
        meta["seed"] = cfg.seed;
        meta["strategy"] = strategy_name(cfg.prompt.strategy);

        if (segment_list) {
            auto result = run_segment_list(t, *client, cfg.prompt, &log);
            json artifact_json;
            artifact_json["n"] = result.boundaries.n;
            artifact_json["positions"] = result.boundaries.positions;
            write_file(artifact, artifact_json.dump(2) + "\n");
            meta["attempts"] = result.attempts;
            meta["repairs"] = result.repairs;
        } else {
            auto pauses = compute_pauses(t);
            auto result = run_toc_generation(t, pauses, *client, cfg.prompt, &log);
            write_file(artifact, serialize_toc(result.toc));
            meta["attempts"] = result.attempts;
            meta["repairs"] = result.diagnostics.repairs;
            meta["dropped_lines"] = result.diagnostics.dropped_lines.size();
        }
        write_file(meta_path, meta.dump(2) + "\n");
        out << "[" << doc.doc_id << "] generated\n";
        return out.str();
    });

    log.write((hyp_dir / "run_log.jsonl").string());
    return report_doc_errors(errors, corpus.index.documents, "generate");
}

// ---------------------------------------------------------------------------
// baseline (TextTiling)
// ---------------------------------------------------------------------------

std::unique_ptr<SentenceVectorProvider> make_vector_provider(const RunConfig& cfg) {
    const auto& p = cfg.tiling_provider;
    if (p.kind == "lexical") return std::make_unique<LexicalVectorProvider>();
    if (p.kind == "subprocess") return std::make_unique<SubprocessVectorProvider>(p.command);
    if (p.kind == "http") return std::make_unique<HttpVectorProvider>(p.url);
    throw Error(Errc::ConfigError, "unknown vector provider kind '" + p.kind + "'");
}

int cmd_baseline(const RunConfig& cfg) {
    NormalizedCorpus corpus = open_corpus(cfg);
    std::string method = cfg.method == "toc-llm" ? "texttiling" : cfg.method;
    fs::path hyp_dir = resolve(cfg.config_dir, cfg.output_dir) / "hyp" / method;
    fs::create_directories(hyp_dir);
    const std::string hash = config_hash(cfg);

    auto errors = parallel_docs(cfg.jobs, corpus.index.documents.size(), [&](std::size_t i) {
        const CorpusDocument& doc = corpus.index.documents[i];
        Transcript t = corpus_transcript(corpus, doc);
        auto provider = make_vector_provider(cfg);
        BoundarySet boundaries = texttile(t, *provider, cfg.tiling);
        json artifact;
        artifact["n"] = boundaries.n;
        artifact["positions"] = boundaries.positions;
        write_file(hyp_dir / (doc.doc_id + ".boundaries.json"), artifact.dump(2) + "\n");
        json meta;
        meta["config_hash"] = hash;
        meta["seed"] = cfg.seed;
        meta["strategy"] = "texttiling";
        write_file(hyp_dir / (doc.doc_id + ".meta.json"), meta.dump(2) + "\n");
        std::ostringstream out;
        out << "[" << doc.doc_id << "] " << boundaries.positions.size() << " boundaries\n";
        return out.str();
    });
    return report_doc_errors(errors, corpus.index.documents, "baseline");
}

// ---------------------------------------------------------------------------
// score + report
// ---------------------------------------------------------------------------

HierSegmentation load_hypothesis(const fs::path& hyp_dir, const CorpusDocument& doc,
                                 const Transcript& t) {
    fs::path toc_path = hyp_dir / (doc.doc_id + ".toc.txt");
    if (fs::exists(toc_path)) {
        auto [toc, diag] = parse_toc(read_file(toc_path), t.n());
        return toc_to_hierseg(toc, t.n());
    }
    fs::path boundaries_path = hyp_dir / (doc.doc_id + ".boundaries.json");
    if (fs::exists(boundaries_path)) {
        json j = read_json(boundaries_path);
        BoundarySet bs = make_boundary_set(j.at("n").get<int>(),
                                           j.at("positions").get<std::vector<int>>());
        if (bs.n != t.n())
            throw Error(Errc::LengthMismatch, "hypothesis n=" + std::to_string(bs.n) +
                                                  " vs transcript n=" + std::to_string(t.n()));
        return HierSegmentation{bs.n, {bs}};
    }
    throw Error(Errc::MissingHypothesis,
                "no hypothesis for '" + doc.doc_id + "' under " + hyp_dir.string());
}

// Aggregates one metric over per-document records, honoring the protocol.
MeanStd aggregate_metric(const std::string& protocol, const CorpusIndex& index,
                         const std::map<std::string, double>& value_by_doc,
                         const RunConfig& cfg) {
    if (protocol == "loso") {
        std::map<std::string, std::vector<double>> folds;   // speaker -> values
        for (const auto& doc : index.documents) {
            auto it = value_by_doc.find(doc.doc_id);
            if (it == value_by_doc.end()) continue;
            if (!doc.speaker_id)
                throw Error(Errc::MissingSpeakerId,
                            "loso protocol but '" + doc.doc_id + "' has no speaker");
            folds[*doc.speaker_id].push_back(it->second);
        }
        std::vector<std::vector<double>> fold_values;
        for (auto& [speaker, values] : folds) fold_values.push_back(std::move(values));
        return loso_aggregate(fold_values);
    }
    // bootstrap: values ordered by sorted doc_id (map iteration is sorted)
    std::vector<double> values;
    for (const auto& [doc_id, value] : value_by_doc) values.push_back(value);
    return bootstrap(values, cfg.bootstrap_iterations, cfg.seed);
}

void render_reports(const RunConfig& cfg, const CorpusIndex& index,
                    const std::vector<ScoreRecord>& records, const fs::path& report_dir) {
    const std::string hash = config_hash(cfg);
    const std::string protocol = protocol_for(index);

    // headline metrics
    std::map<std::string, std::map<std::string, double>> by_metric;   // metric -> doc -> value
    for (const auto& r : records)
        if (r.metric != "b_level") by_metric[r.metric][r.doc_id] = r.value;

    AggregateReport report;
    report.method = cfg.method;
    report.tuning = cfg.tuning;
    report.dataset = cfg.dataset.empty() ? index.name : cfg.dataset;
    report.protocol = protocol;
    for (const auto& [metric, values] : by_metric)
        report.metrics[metric] = aggregate_metric(protocol, index, values, cfg);

    // level heatmap from b_level cells
    std::map<std::string, std::map<std::pair<int, int>, double>> cells_by_doc;
    for (const auto& r : records)
        if (r.metric == "b_level")
            cells_by_doc[r.doc_id][{*r.level_ref, *r.level_hyp}] = r.value;
    std::vector<LevelScoreMatrix> matrices;
    for (const auto& [doc_id, cells] : cells_by_doc) {
        int rows = 0, cols = 0;
        for (const auto& [lk, v] : cells) {
            rows = std::max(rows, lk.first);
            cols = std::max(cols, lk.second);
        }
        LevelScoreMatrix m;
        m.values.assign(rows, std::vector<double>(cols, 0.0));
        for (const auto& [lk, v] : cells) m.values[lk.first - 1][lk.second - 1] = v;
        matrices.push_back(std::move(m));
    }

    std::string meta_comment = "config=" + hash + " seed=" + std::to_string(cfg.seed);

    std::string md = "<!-- " + meta_comment + " -->\n";
    md += "# Segmentation report: " + report.dataset + " (" + protocol + ")\n\n";
    md += report_to_markdown(report);
    write_file(report_dir / "report.md", md);

    json rj = report_to_json(report);
    rj["_meta"] = {{"config_hash", hash}, {"seed", cfg.seed}};
    write_file(report_dir / "report.json", rj.dump(2) + "\n");

    if (!matrices.empty()) {
        std::string csv = "# " + meta_comment + "\n";
        csv += export_heatmap(average_level_matrices(matrices));
        write_file(report_dir / "heatmap.csv", csv);
    }

    std::cout << "report: " << (report_dir / "report.md").string() << "\n";
    for (const auto& [metric, ms] : report.metrics)
        std::cout << "  " << metric << ": " << format_scaled_score(ms.mean) << " +/- "
                  << format_scaled_score(ms.stddev) << "\n";
}

int cmd_score(const RunConfig& cfg) {
    NormalizedCorpus corpus = open_corpus(cfg);
    fs::path out_root = resolve(cfg.config_dir, cfg.output_dir);
    fs::path hyp_dir = out_root / "hyp" / cfg.method;
    fs::path report_dir = out_root / "reports" / cfg.method;
    fs::create_directories(report_dir);

    std::vector<std::vector<ScoreRecord>> per_doc(corpus.index.documents.size());
    auto errors = parallel_docs(cfg.jobs, corpus.index.documents.size(), [&](std::size_t i) {
        const CorpusDocument& doc = corpus.index.documents[i];
        Transcript t = corpus_transcript(corpus, doc);
        HierSegmentation ref = hierseg_from_json(read_json(corpus.dir / doc.reference_path));
        HierSegmentation hyp = load_hypothesis(hyp_dir, doc, t);
        per_doc[i] = score_document(doc.doc_id, ref, hyp, cfg.metrics);
        std::ostringstream out;
        out << "[" << doc.doc_id << "] scored\n";
        return out.str();
    });

    std::vector<ScoreRecord> records;
    for (const auto& batch : per_doc)
        records.insert(records.end(), batch.begin(), batch.end());

    std::string jsonl =
        json{{"_meta", {{"config_hash", config_hash(cfg)}, {"seed", cfg.seed}}}}.dump() + "\n";
    for (const auto& r : records) jsonl += score_record_to_json(r).dump() + "\n";
    write_file(report_dir / "records.jsonl", jsonl);

    int rc = report_doc_errors(errors, corpus.index.documents, "score");
    if (!records.empty()) render_reports(cfg, corpus.index, records, report_dir);
    return rc;
}

int cmd_report(const RunConfig& cfg) {
    NormalizedCorpus corpus = open_corpus(cfg);
    fs::path report_dir = resolve(cfg.config_dir, cfg.output_dir) / "reports" / cfg.method;
    fs::path records_path = report_dir / "records.jsonl";
    if (!fs::exists(records_path))
        throw Error(Errc::IoError,
                    "no records at " + records_path.string() + "; run `tocseg score` first");

    std::vector<ScoreRecord> records;
    std::istringstream in(read_file(records_path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.contains("_meta")) continue;
        records.push_back(score_record_from_json(j));
    }
    if (records.empty()) throw Error(Errc::EmptyInput, "records.jsonl has no score records");
    render_reports(cfg, corpus.index, records, report_dir);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical topic segmentation toolkit for speech transcripts"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_flag;
    std::optional<int> jobs_flag;
    std::optional<std::string> strategy_flag;
    bool force = false;
    bool with_pauses = false;
    std::string doc_filter;

    app.add_option("--config", config_path, "Run configuration JSON")->required();
    app.add_option("--seed", seed_flag, "Override the configured seed");
    app.add_option("--jobs", jobs_flag, "Document-level parallelism");
    app.add_option("--strategy", strategy_flag, "Prompt strategy: toc | segment-list");
    app.add_flag("--force", force, "Regenerate even when a cached result matches");
    app.add_flag("--with-pauses", with_pauses, "Annotate prompt lines with pause durations");

    auto* ingest = app.add_subcommand("ingest", "Validate and normalize a corpus manifest");
    auto* prompt = app.add_subcommand("prompt", "Preview the prompt for one document");
    prompt->add_option("--doc", doc_filter, "Document id (default: first in corpus)");
    auto* generate = app.add_subcommand("generate", "Run the LLM flow over the corpus");
    auto* baseline = app.add_subcommand("baseline", "Run the TextTiling baseline");
    auto* score = app.add_subcommand("score", "Score hypotheses against references");
    auto* report = app.add_subcommand("report", "Re-render reports from existing records");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_run_config(config_path);
        if (seed_flag) cfg.seed = *seed_flag;
        if (jobs_flag) cfg.jobs = std::max(1, *jobs_flag);
        if (strategy_flag) cfg.prompt.strategy = strategy_from_name(*strategy_flag);
        if (with_pauses) cfg.prompt.include_pauses = true;
        cfg.force = force;

        if (ingest->parsed()) return cmd_ingest(cfg);
        if (prompt->parsed()) return cmd_prompt(cfg, doc_filter);
        if (generate->parsed()) return cmd_generate(cfg);
        if (baseline->parsed()) return cmd_baseline(cfg);
        if (score->parsed()) return cmd_score(cfg);
        if (report->parsed()) return cmd_report(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
