#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "tocseg/error.hpp"
#include "tocseg/llm.hpp"
#include "tocseg/texttiling.hpp"

namespace tocseg {

namespace detail {

// "http://host:1234/v1/chat" -> {"http://host:1234", "/v1/chat"}
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(Errc::ConfigError, "endpoint URL needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace detail

// ---------------------------------------------------------------------------
// OpenAI-compatible chat-completion client
// ---------------------------------------------------------------------------

struct ChatEndpoint {
    std::string url;                                // full completion URL
    std::string model;
    std::string credential_env = "TOCSEG_API_KEY";  // "" = no auth header
    double timeout_s = 120.0;
    int transport_retries = 2;                      // for network/timeout/429
    int retry_backoff_ms = 250;
};

class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ChatEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

    ChatResult send(const std::vector<ChatMessage>& messages, double temperature) override {
        std::string auth;
        if (!endpoint_.credential_env.empty()) {
            const char* key = std::getenv(endpoint_.credential_env.c_str());
            if (!key)
                throw Error(Errc::AuthError,
                            "credential environment variable " + endpoint_.credential_env +
                                " is not set");
            auth = std::string("Bearer ") + key;
        }

        nlohmann::json body;
        body["model"] = endpoint_.model;
        body["temperature"] = temperature;
        body["messages"] = nlohmann::json::array();
        for (const auto& m : messages)
            body["messages"].push_back({{"role", m.role}, {"content", m.content}});
        const std::string payload = body.dump();

        int attempts = endpoint_.transport_retries + 1;
        for (int attempt = 1;; ++attempt) {
            try {
                return send_once(payload, auth);
            } catch (const Error& e) {
                bool retryable = e.code() == Errc::NetworkError || e.code() == Errc::Timeout ||
                                 e.code() == Errc::RateLimited;
                if (!retryable || attempt >= attempts) throw;
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(endpoint_.retry_backoff_ms * attempt));
            }
        }
    }

    std::string describe() const override { return endpoint_.model + "@" + endpoint_.url; }

private:
    ChatResult send_once(const std::string& payload, const std::string& auth) {
        auto [base, path] = detail::split_url(endpoint_.url);
        httplib::Client cli(base);
        cli.set_connection_timeout(std::chrono::milliseconds(
            static_cast<long>(endpoint_.timeout_s * 1000)));
        cli.set_read_timeout(std::chrono::milliseconds(
            static_cast<long>(endpoint_.timeout_s * 1000)));
        httplib::Headers headers;
        if (!auth.empty()) headers.emplace("Authorization", auth);

        auto t0 = std::chrono::steady_clock::now();
        auto res = cli.Post(path, headers, payload, "application/json");
        auto t1 = std::chrono::steady_clock::now();

        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                err == httplib::Error::Write)
                throw Error(Errc::Timeout, "request to " + endpoint_.url + " timed out");
            throw Error(Errc::NetworkError,
                        "cannot reach " + endpoint_.url + ": " + httplib::to_string(err));
        }
        if (res->status == 401 || res->status == 403)
            throw Error(Errc::AuthError, "endpoint returned HTTP " + std::to_string(res->status));
        if (res->status == 429)
            throw Error(Errc::RateLimited, "endpoint returned HTTP 429");
        if (res->status < 200 || res->status >= 300)
            throw Error(Errc::NetworkError, "endpoint returned HTTP " + std::to_string(res->status));

        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty() ||
            !j["choices"][0].contains("message"))
            throw Error(Errc::ParseError, "chat response is not an OpenAI-shaped completion");

        ChatResult r;
        r.text = j["choices"][0]["message"].value("content", "");
        r.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (j.contains("usage")) {
            const auto& u = j["usage"];
            if (u.contains("prompt_tokens")) r.prompt_tokens = u["prompt_tokens"].get<int>();
            if (u.contains("completion_tokens"))
                r.completion_tokens = u["completion_tokens"].get<int>();
        }
        return r;
    }

    ChatEndpoint endpoint_;
};

// ---------------------------------------------------------------------------
// HTTP sentence-vector provider
// ---------------------------------------------------------------------------
// POST {"sentences": [...]} -> {"vectors": [[...], ...]}

class HttpVectorProvider : public SentenceVectorProvider {
public:
    explicit HttpVectorProvider(std::string url, double timeout_s = 120.0)
        : url_(std::move(url)), timeout_s_(timeout_s) {}

    std::vector<std::vector<double>> vectors(const std::vector<std::string>& sentences) override {
        auto [base, path] = detail::split_url(url_);
        httplib::Client cli(base);
        cli.set_read_timeout(std::chrono::milliseconds(static_cast<long>(timeout_s_ * 1000)));
        auto res = cli.Post(path, nlohmann::json{{"sentences", sentences}}.dump(),
                            "application/json");
        if (!res)
            throw Error(Errc::ProviderFailed,
                        "cannot reach vector provider " + url_ + ": " +
                            httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error(Errc::ProviderFailed,
                        "vector provider returned HTTP " + std::to_string(res->status));
        return detail::parse_provider_response(res->body, sentences.size());
    }

private:
    std::string url_;
    double timeout_s_;
};

} // namespace tocseg
