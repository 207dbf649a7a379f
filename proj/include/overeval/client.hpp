#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "overeval/digest.hpp"
#include "overeval/errors.hpp"
#include "overeval/prompts.hpp"

namespace overeval {

struct GenerationParams {
    std::string model_id;
    std::string endpoint;  // e.g. http://127.0.0.1:8000/v1
    double temperature = 0.0;
    int max_tokens = 16384;
    std::string api_key_env;  // env var holding the bearer token, if any
};

enum class ResponseSource { Network, Cache };

struct ModelResponse {
    std::string raw_text;
    std::string thinking_text;
    std::string answer_text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    bool has_usage = false;
    bool truncated = false;
    ResponseSource source = ResponseSource::Network;
    std::string request_digest;
};

/// Splits a completion into thinking and answer per the <think> tag
/// convention. No tags: everything is answer. Unclosed tag: everything
/// after it is thinking. The answer side is trimmed at the tag boundary;
/// nothing else is altered.
inline std::pair<std::string, std::string> split_thinking(const std::string& raw_text) {
    static constexpr std::string_view kOpen = "<think>";
    static constexpr std::string_view kClose = "</think>";
    std::size_t lead = raw_text.find_first_not_of(" \t\r\n");
    if (lead == std::string::npos || raw_text.compare(lead, kOpen.size(), kOpen) != 0)
        return {"", raw_text};
    std::size_t body = lead + kOpen.size();
    std::size_t close = raw_text.find(kClose, body);
    if (close == std::string::npos) return {raw_text.substr(body), ""};
    std::string thinking = raw_text.substr(body, close - body);
    std::string answer = raw_text.substr(close + kClose.size());
    std::size_t b = answer.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        answer.clear();
    else
        answer = answer.substr(b, answer.find_last_not_of(" \t\r\n") - b + 1);
    return {thinking, answer};
}

inline long whitespace_token_count(const std::string& text) {
    long n = 0;
    bool in_token = false;
    for (char c : text) {
        bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!ws && !in_token) ++n;
        in_token = !ws;
    }
    return n;
}

/// Reported completion tokens when the endpoint sent usage, otherwise a
/// whitespace token count over the raw text (callers flag that as
/// approximate via has_usage).
inline long response_length(const ModelResponse& resp) {
    return resp.has_usage ? resp.completion_tokens : whitespace_token_count(resp.raw_text);
}

namespace detail {

inline nlohmann::json messages_to_json(const std::vector<ChatMessage>& messages) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : messages)
        arr.push_back({{"role", m.role == Role::System ? "system" : "user"},
                       {"content", m.content}});
    return arr;
}

}  // namespace detail

/// Digest of the request body fields. Excludes the endpoint, so the same
/// logical request matches a fixture regardless of where the stub listens.
inline std::string body_digest(const std::string& model_id,
                               const std::vector<ChatMessage>& messages, double temperature,
                               int max_tokens) {
    nlohmann::json j = {{"max_tokens", max_tokens},
                        {"messages", detail::messages_to_json(messages)},
                        {"model", model_id},
                        {"temperature", temperature}};
    return sha256_hex(j.dump());
}

/// Cache key: body digest plus the endpoint, so distinct servers never
/// share cache entries.
inline std::string request_digest(const std::vector<ChatMessage>& messages,
                                  const GenerationParams& params) {
    nlohmann::json j = {{"endpoint", params.endpoint},
                        {"max_tokens", params.max_tokens},
                        {"messages", detail::messages_to_json(messages)},
                        {"model", params.model_id},
                        {"temperature", params.temperature}};
    return sha256_hex(j.dump());
}

/// Disk cache: one file per request digest holding the verbatim response
/// body. Writes go through a temp file and rename, so concurrent writers
/// of the same key (identical bytes by construction) cannot tear a read.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    std::optional<std::string> get(const std::string& digest) const {
        std::ifstream in(entry_path(digest), std::ios::binary);
        if (!in) return std::nullopt;
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }

    void put(const std::string& digest, const std::string& body) const {
        auto tmp = dir_ / (digest + ".tmp" + std::to_string(::getpid()) + "." +
                           std::to_string(counter_.fetch_add(1)));
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw IoError("cannot write cache entry: " + tmp.string());
            out << body;
        }
        std::filesystem::rename(tmp, entry_path(digest));
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path entry_path(const std::string& digest) const {
        return dir_ / (digest + ".json");
    }
    std::filesystem::path dir_;
    mutable std::atomic<unsigned long> counter_{0};
};

struct ClientOptions {
    int max_attempts = 5;
    std::chrono::milliseconds initial_backoff{1000};
    double backoff_multiplier = 2.0;
    std::chrono::milliseconds max_backoff{30000};
    int max_in_flight = 8;
    std::chrono::seconds read_timeout{300};
    std::chrono::seconds connect_timeout{10};
};

struct ClientStats {
    long network_calls = 0;
    long cache_hits = 0;
    long retries = 0;
    int peak_in_flight = 0;
};

/// Chat-completions client with a persistent response cache. Thread-safe;
/// the in-flight limiter is global across all callers of one instance.
class InferenceClient {
public:
    InferenceClient(ResponseCache cache, ClientOptions opts = {})
        : cache_(std::move(cache)), opts_(opts) {}

    /// Cache hit: stored bytes, no network. Miss: HTTP POST with bounded
    /// exponential-backoff retries on 429/5xx/transport failure, then the
    /// verbatim body is cached.
    ModelResponse complete(const std::vector<ChatMessage>& messages,
                           const GenerationParams& params) {
        if (messages.empty()) throw ValidationError("messages must be nonempty");
        const std::string digest = request_digest(messages, params);
        if (auto body = cache_.get(digest)) {
            {
                std::lock_guard lk(stats_mu_);
                ++stats_.cache_hits;
            }
            return parse_body(*body, digest, ResponseSource::Cache);
        }
        const std::string body = fetch(messages, params);
        ModelResponse resp = parse_body(body, digest, ResponseSource::Network);
        cache_.put(digest, body);
        return resp;
    }

    ClientStats stats() const {
        std::lock_guard lk(stats_mu_);
        return stats_;
    }

    const ResponseCache& cache() const { return cache_; }

private:
    struct InFlightGuard {
        explicit InFlightGuard(InferenceClient& c) : client(c) {
            std::unique_lock lk(c.flight_mu_);
            c.flight_cv_.wait(lk, [&] { return c.in_flight_ < c.opts_.max_in_flight; });
            ++c.in_flight_;
            std::lock_guard slk(c.stats_mu_);
            c.stats_.peak_in_flight = std::max(c.stats_.peak_in_flight, c.in_flight_);
        }
        ~InFlightGuard() {
            {
                std::lock_guard lk(client.flight_mu_);
                --client.in_flight_;
            }
            client.flight_cv_.notify_one();
        }
        InferenceClient& client;
    };

    static bool retriable_status(int status) {
        return status == 429 || (status >= 500 && status < 600);
    }

    std::chrono::milliseconds backoff_delay(int attempt) const {
        double ms = static_cast<double>(opts_.initial_backoff.count());
        for (int i = 0; i < attempt; ++i) ms *= opts_.backoff_multiplier;
        ms = std::min(ms, static_cast<double>(opts_.max_backoff.count()));
        thread_local std::mt19937 rng{std::random_device{}()};
        std::uniform_real_distribution<double> jitter(0.5, 1.0);
        return std::chrono::milliseconds(static_cast<long>(ms * jitter(rng)));
    }

    // Splits "http(s)://host:port/base" into origin and base path.
    static std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
        auto scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw ConfigError("endpoint must start with http:// or https://: " + endpoint);
        auto path_start = endpoint.find('/', scheme_end + 3);
        if (path_start == std::string::npos) return {endpoint, ""};
        std::string base = endpoint.substr(path_start);
        while (!base.empty() && base.back() == '/') base.pop_back();
        return {endpoint.substr(0, path_start), base};
    }

    std::string fetch(const std::vector<ChatMessage>& messages, const GenerationParams& params) {
        auto [origin, base_path] = split_endpoint(params.endpoint);
        nlohmann::json req = {{"max_tokens", params.max_tokens},
                              {"messages", detail::messages_to_json(messages)},
                              {"model", params.model_id},
                              {"temperature", params.temperature}};
        const std::string payload = req.dump();
        const std::string path = base_path + "/chat/completions";

        httplib::Headers headers;
        if (!params.api_key_env.empty()) {
            const char* key = std::getenv(params.api_key_env.c_str());
            if (key != nullptr && *key != '\0')
                headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        int last_status = 0;
        std::string last_error;
        for (int attempt = 0; attempt < opts_.max_attempts; ++attempt) {
            if (attempt > 0) {
                {
                    std::lock_guard lk(stats_mu_);
                    ++stats_.retries;
                }
                std::this_thread::sleep_for(backoff_delay(attempt - 1));
            }
            InFlightGuard guard(*this);
            {
                std::lock_guard lk(stats_mu_);
                ++stats_.network_calls;
            }
            httplib::Client cli(origin);
            cli.set_connection_timeout(opts_.connect_timeout);
            cli.set_read_timeout(opts_.read_timeout);
            auto res = cli.Post(path, headers, payload, "application/json");
            if (!res) {
                last_status = 0;
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 200 && res->status < 300) return res->body;
            last_status = res->status;
            last_error = res->body;
            if (!retriable_status(res->status))
                throw TransportError("endpoint returned HTTP " + std::to_string(res->status) +
                                         ": " + last_error,
                                     res->status);
        }
        throw TransportError("request failed after " + std::to_string(opts_.max_attempts) +
                                 " attempts (last status " + std::to_string(last_status) +
                                 "): " + last_error,
                             last_status);
    }

    ModelResponse parse_body(const std::string& body, const std::string& digest,
                             ResponseSource source) const {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("malformed completion body: ") + e.what());
        }
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            throw ProtocolError("completion body has no choices");
        const auto& choice = j["choices"][0];
        if (!choice.contains("message") || !choice["message"].contains("content") ||
            !choice["message"]["content"].is_string())
            throw ProtocolError("completion choice has no message content");

        ModelResponse resp;
        resp.raw_text = choice["message"]["content"].get<std::string>();
        std::tie(resp.thinking_text, resp.answer_text) = split_thinking(resp.raw_text);
        resp.request_digest = digest;
        resp.source = source;
        resp.truncated = choice.value("finish_reason", std::string("stop")) == "length";
        if (j.contains("usage") && j["usage"].is_object()) {
            const auto& u = j["usage"];
            if (u.contains("completion_tokens") && u["completion_tokens"].is_number()) {
                resp.completion_tokens = u["completion_tokens"].get<long>();
                resp.prompt_tokens = u.value("prompt_tokens", 0L);
                resp.has_usage = true;
            }
        }
        return resp;
    }

    ResponseCache cache_;
    ClientOptions opts_;
    mutable std::mutex stats_mu_;
    ClientStats stats_;
    std::mutex flight_mu_;
    std::condition_variable flight_cv_;
    int in_flight_ = 0;
};

}  // namespace overeval
