#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <thread>

#include "tocseg/http.hpp"
#include "tocseg/ingest.hpp"
#include "tocseg/llm.hpp"
#include "test_support.hpp"

using namespace tocseg;

namespace {

PromptConfig asset_config() {
    PromptConfig cfg;
    cfg.prompt_dir = TOCSEG_SOURCE_DIR "/assets/prompts";
    return cfg;
}

Transcript pause_fixture() {
    // 43 sentences; the gap before sentence 42 is exactly 0.62s
    Transcript t;
    t.doc_id = "pause-fixture";
    double cursor = 0.0;
    for (int i = 1; i <= 43; ++i) {
        double start = i == 42 ? cursor + 0.62 : cursor;
        double end = start + 2.0;
        std::string text = i == 42 ? "Now let's continue with..." : "sentence " + std::to_string(i);
        t.sentences.push_back(Sentence{i, text, start, end});
        cursor = end;
    }
    return t;
}

std::vector<std::string> user_lines(const std::vector<ChatMessage>& messages) {
    REQUIRE(messages.size() == 2);
    REQUIRE(messages[0].role == "system");
    REQUIRE(messages[1].role == "user");
    std::vector<std::string> lines;
    std::string cur;
    for (char c : messages[1].content) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

} // namespace

TEST_CASE("build_prompt renders the documented pause line shape") {
    Transcript t = pause_fixture();
    auto pauses = compute_pauses(t);
    PromptConfig cfg = asset_config();
    cfg.include_pauses = true;
    auto messages = build_prompt(t, pauses, cfg);
    auto lines = user_lines(messages);
    REQUIRE(lines.size() == 43);   // one line per sentence, nothing else
    CHECK(lines[41] == "42 (pause=0.62s): Now let's continue with...");
    // sentence 1 carries no annotation even with pauses on
    CHECK(lines[0].rfind("1: ", 0) == 0);
    // zero-length gaps still render as 0.00
    CHECK(lines[1].find("(pause=0.00s)") != std::string::npos);
    // indices lead every line in strictly increasing order
    for (std::size_t i = 0; i < lines.size(); ++i)
        CHECK(std::stoul(lines[i]) == i + 1);
}

TEST_CASE("build_prompt without pauses uses plain numbering") {
    Transcript t = pause_fixture();
    PromptConfig cfg = asset_config();
    auto lines = user_lines(build_prompt(t, {}, cfg));
    REQUIRE(lines.size() == 43);
    CHECK(lines[41] == "42: Now let's continue with...");
}

TEST_CASE("build_prompt enforces the character budget") {
    Transcript t = pause_fixture();
    PromptConfig cfg = asset_config();
    cfg.max_input_chars = 50;
    CHECK_THROWS_MATCHES(build_prompt(t, {}, cfg), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::BudgetExceeded;
                         }));
}

TEST_CASE("build_prompt validates pause vector length") {
    Transcript t = pause_fixture();
    PromptConfig cfg = asset_config();
    cfg.include_pauses = true;
    CHECK_THROWS_AS(build_prompt(t, {0.5, 0.5}, cfg), Error);
}

TEST_CASE("language hint lands in the system message") {
    Transcript t = pause_fixture();
    PromptConfig cfg = asset_config();
    cfg.language_hint = "Portuguese";
    auto messages = build_prompt(t, {}, cfg);
    CHECK(messages[0].content.find("Portuguese") != std::string::npos);
}

TEST_CASE("segment-list system prompt asks for index lists") {
    PromptConfig cfg = asset_config();
    cfg.strategy = Strategy::SegmentList;
    CHECK(load_system_prompt(cfg).find("sentence") != std::string::npos);
    CHECK(load_system_prompt(cfg).find("list") != std::string::npos);
}

TEST_CASE("run_toc_generation: clean response parses on the first attempt") {
    Transcript t = pause_fixture();
    StubChatClient stub({"1 Opening [1]\n2 Main topic [20]\n2.1 Detail [30]\n"});
    auto result = run_toc_generation(t, {}, stub, asset_config());
    CHECK(result.attempts == 1);
    CHECK(result.diagnostics.empty());
    REQUIRE(result.toc.entries.size() == 3);
    CHECK(validate_hierseg(toc_to_hierseg(result.toc, t.n())).empty());
}

TEST_CASE("run_toc_generation: prose first, valid on retry") {
    Transcript t = pause_fixture();
    StubChatClient stub({"I'm sorry, I cannot find any topics.",
                         "1 Opening [1]\n2 Wrap-up [40]\n"});
    RunLog log;
    auto result = run_toc_generation(t, {}, stub, asset_config(), &log);
    CHECK(result.attempts == 2);
    CHECK(stub.calls() == 2);
    REQUIRE(result.toc.entries.size() == 2);
    CHECK(log.to_jsonl().find("parse_failure") != std::string::npos);
}

TEST_CASE("run_toc_generation: exhausted retries raise generation-failed") {
    Transcript t = pause_fixture();
    StubChatClient stub({"nothing useful", "still nothing", "nope", "nope again"});
    PromptConfig cfg = asset_config();
    cfg.max_retries = 2;
    CHECK_THROWS_MATCHES(run_toc_generation(t, {}, stub, cfg), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::GenerationFailed;
                         }));
    CHECK(stub.calls() == 3);   // 1 + max_retries
}

TEST_CASE("pipeline output is reproducible with a deterministic stub") {
    Transcript t = pause_fixture();
    PromptConfig cfg = asset_config();
    std::string first, second;
    for (std::string* out : {&first, &second}) {
        StubChatClient stub({"1 Opening [1]\n2 Topic [7]\n2.1 Sub [9]\n"});
        auto result = run_toc_generation(t, {}, stub, cfg);
        *out = serialize_toc(result.toc);
    }
    CHECK(first == second);
}

TEST_CASE("run_segment_list derives boundaries from list starts") {
    Transcript t;
    t.doc_id = "short";
    for (int i = 1; i <= 5; ++i)
        t.sentences.push_back(Sentence{i, "s" + std::to_string(i), double(i), double(i) + 0.5});
    PromptConfig cfg = asset_config();
    cfg.strategy = Strategy::SegmentList;

    SECTION("well-formed lists") {
        StubChatClient stub({"[[1,2,3],[4,5]]"});
        auto result = run_segment_list(t, stub, cfg);
        CHECK(result.boundaries.positions == std::vector<int>{3});
        CHECK(result.repairs.empty());
    }
    SECTION("single list covering everything") {
        StubChatClient stub({"[[1,2,3,4,5]]"});
        auto result = run_segment_list(t, stub, cfg);
        CHECK(result.boundaries.positions.empty());
    }
    SECTION("overlapping lists split at starts only") {
        StubChatClient stub({"[[1,2,3],[3,4,5]]"});
        auto result = run_segment_list(t, stub, cfg);
        CHECK(result.boundaries.positions == std::vector<int>{2});
        CHECK_FALSE(result.repairs.empty());
    }
    SECTION("fenced json with prose") {
        StubChatClient stub({"Here you go:\n```json\n[[1, 2], [3, 4, 5]]\n```\nEnjoy."});
        auto result = run_segment_list(t, stub, cfg);
        CHECK(result.boundaries.positions == std::vector<int>{2});
    }
    SECTION("empty output") {
        StubChatClient stub({"[]"});
        CHECK_THROWS_MATCHES(run_segment_list(t, stub, cfg), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::EmptyOutput;
                             }));
    }
    SECTION("no list at all") {
        StubChatClient stub({"I could not segment this transcript."});
        CHECK_THROWS_MATCHES(run_segment_list(t, stub, cfg), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::GenerationFailed;
                             }));
    }
}

TEST_CASE("retry prompt quotes the first parse diagnostic") {
    // records the conversation so the correction turn can be inspected
    class RecordingClient : public ChatClient {
    public:
        std::vector<std::vector<ChatMessage>> calls;
        ChatResult send(const std::vector<ChatMessage>& messages, double) override {
            calls.push_back(messages);
            return {calls.size() == 1 ? "no table here" : "1 Fixed [1]\n", 0.0, std::nullopt,
                    std::nullopt};
        }
        std::string describe() const override { return "recording"; }
    };

    Transcript t = pause_fixture();
    RecordingClient client;
    auto result = run_toc_generation(t, {}, client, asset_config());
    CHECK(result.attempts == 2);
    REQUIRE(client.calls.size() == 2);
    const auto& second = client.calls[1];
    REQUIRE(second.size() == 4);   // system, user, assistant echo, correction
    CHECK(second[2].role == "assistant");
    CHECK(second[2].content == "no table here");
    CHECK(second[3].role == "user");
    CHECK(second[3].content.find("unparseable") != std::string::npos);
}

TEST_CASE("http vector provider speaks the json protocol") {
    httplib::Server server;
    server.Post("/vectors", [](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json vectors = nlohmann::json::array();
        for (const auto& s : body["sentences"])
            vectors.push_back({double(s.get<std::string>().size()), 1.0});
        res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpVectorProvider provider("http://127.0.0.1:" + std::to_string(port) + "/vectors");
    auto vecs = provider.vectors({"ab", "abcd"});
    REQUIRE(vecs.size() == 2);
    CHECK(vecs[0] == std::vector<double>{2.0, 1.0});

    HttpVectorProvider unreachable("http://127.0.0.1:9/vectors");
    CHECK_THROWS_MATCHES(unreachable.vectors({"x"}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::ProviderFailed;
                         }));

    server.stop();
    server_thread.join();
}

TEST_CASE("http chat client against a local endpoint") {
    httplib::Server server;
    std::string last_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        last_auth = req.get_header_value("Authorization");
        auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.contains("messages"));
        nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "1 Hello [1]\n"}}}}}},
            {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 5}}}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/unauthorized", [](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
    });
    server.Post("/throttled", [](const httplib::Request&, httplib::Response& res) {
        res.status = 429;
    });
    server.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(400));
        res.set_content("{}", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    std::string base = "http://127.0.0.1:" + std::to_string(port);
    ::setenv("TOCSEG_TEST_KEY", "sk-fixture", 1);

    SECTION("success with auth header and usage metadata") {
        ChatEndpoint ep;
        ep.url = base + "/v1/chat/completions";
        ep.model = "test-model";
        ep.credential_env = "TOCSEG_TEST_KEY";
        HttpChatClient client(ep);
        RunLog log;
        std::string text = complete(client, {{"system", "s"}, {"user", "u"}}, 0.0, &log, "doc");
        CHECK(text == "1 Hello [1]\n");
        CHECK(last_auth == "Bearer sk-fixture");
        CHECK(log.to_jsonl().find("prompt_tokens") != std::string::npos);
    }
    SECTION("missing credential env is an auth error") {
        ChatEndpoint ep;
        ep.url = base + "/v1/chat/completions";
        ep.model = "m";
        ep.credential_env = "TOCSEG_UNSET_KEY_12345";
        HttpChatClient client(ep);
        CHECK_THROWS_MATCHES(client.send({{"user", "u"}}, 0.0), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::AuthError;
                             }));
    }
    SECTION("401 maps to auth-error") {
        ChatEndpoint ep;
        ep.url = base + "/unauthorized";
        ep.model = "m";
        ep.credential_env = "";
        HttpChatClient client(ep);
        CHECK_THROWS_MATCHES(client.send({{"user", "u"}}, 0.0), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::AuthError;
                             }));
    }
    SECTION("a stalled response maps to timeout") {
        ChatEndpoint ep;
        ep.url = base + "/slow";
        ep.model = "m";
        ep.credential_env = "";
        ep.transport_retries = 0;
        ep.timeout_s = 0.05;
        HttpChatClient client(ep);
        CHECK_THROWS_MATCHES(client.send({{"user", "u"}}, 0.0), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::Timeout;
                             }));
    }
    SECTION("429 maps to rate-limited after transport retries") {
        ChatEndpoint ep;
        ep.url = base + "/throttled";
        ep.model = "m";
        ep.credential_env = "";
        ep.transport_retries = 1;
        ep.retry_backoff_ms = 1;
        HttpChatClient client(ep);
        CHECK_THROWS_MATCHES(client.send({{"user", "u"}}, 0.0), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::RateLimited;
                             }));
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("unreachable endpoint is a network error") {
    ChatEndpoint ep;
    ep.url = "http://127.0.0.1:9/closed";   // discard port, nothing listens
    ep.model = "m";
    ep.credential_env = "";
    ep.transport_retries = 0;
    ep.timeout_s = 2.0;
    HttpChatClient client(ep);
    CHECK_THROWS_MATCHES(client.send({{"user", "u"}}, 0.0), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::NetworkError ||
                                    e.code() == Errc::Timeout;
                         }));
}
