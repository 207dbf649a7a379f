#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "overeval/client.hpp"
#include "overeval/errors.hpp"

namespace overeval {

/// One canned completion. Matched either by the request body digest or by
/// a substring of the last user message; a digest match always wins over
/// substring matches.
struct Fixture {
    std::string name;  // relative path inside the fixture dir
    std::optional<std::string> match_digest;
    std::optional<std::string> match_substring;
    std::string content;
    std::optional<long> prompt_tokens;
    std::optional<long> completion_tokens;
    std::vector<int> failure_script;  // HTTP statuses to emit before succeeding
    int delay_ms = 0;
};

inline Fixture parse_fixture_json(const nlohmann::json& j, const std::string& name) {
    Fixture f;
    f.name = name;
    if (!j.contains("match") || !j["match"].is_object())
        throw ParseError("fixture " + name + " missing 'match' object");
    const auto& m = j["match"];
    if (m.contains("digest")) f.match_digest = m["digest"].get<std::string>();
    if (m.contains("substring")) f.match_substring = m["substring"].get<std::string>();
    if (!f.match_digest && !f.match_substring)
        throw ParseError("fixture " + name + " needs match.digest or match.substring");
    if (!j.contains("content") || !j["content"].is_string())
        throw ParseError("fixture " + name + " missing string 'content'");
    f.content = j["content"].get<std::string>();
    if (j.contains("usage")) {
        f.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
        f.completion_tokens = j["usage"].value("completion_tokens", 0L);
    }
    if (j.contains("failure_script"))
        for (const auto& s : j["failure_script"]) f.failure_script.push_back(s.get<int>());
    f.delay_ms = j.value("delay_ms", 0);
    return f;
}

inline std::vector<Fixture> load_fixtures(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir)) throw IoError("fixture dir not found: " + dir.string());
    std::vector<Fixture> fixtures;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(buf.str());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("fixture " + path.string() + ": " + e.what());
        }
        fixtures.push_back(
            parse_fixture_json(j, std::filesystem::relative(path, dir).string()));
    }
    return fixtures;
}

/// Deterministic mock chat-completions endpoint replaying fixtures.
/// POST <anything>/chat/completions serves the matched fixture in the
/// standard completion shape; GET /__stats exposes exact hit counters.
class StubServer {
public:
    explicit StubServer(std::vector<Fixture> fixtures) : fixtures_(std::move(fixtures)) {
        for (std::size_t i = 0; i < fixtures_.size(); ++i) {
            const Fixture& f = fixtures_[i];
            if (f.match_digest && !by_digest_.emplace(*f.match_digest, i).second)
                throw ValidationError("duplicate fixture digest: " + *f.match_digest);
            if (!f.failure_script.empty())
                pending_failures_[i] = std::deque<int>(f.failure_script.begin(),
                                                       f.failure_script.end());
        }
        svr_.Post(".*chat/completions.*",
                  [this](const httplib::Request& req, httplib::Response& res) {
                      handle_completion(req, res);
                  });
        svr_.Get("/__stats", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(stats_json().dump(2), "application/json");
        });
    }

    static StubServer from_dir(const std::filesystem::path& dir) {
        return StubServer(load_fixtures(dir));
    }

    /// Binds and serves on a background thread. port 0 picks a free port;
    /// the bound port is returned either way.
    int start(const std::string& host = "127.0.0.1", int port = 0) {
        if (port == 0) {
            port_ = svr_.bind_to_any_port(host);
        } else {
            if (!svr_.bind_to_port(host, port))
                throw IoError("stub cannot bind " + host + ":" + std::to_string(port));
            port_ = port;
        }
        thread_ = std::thread([this] { svr_.listen_after_bind(); });
        svr_.wait_until_ready();
        return port_;
    }

    void stop() {
        if (thread_.joinable()) {
            svr_.stop();
            thread_.join();
        }
    }

    ~StubServer() { stop(); }

    int port() const { return port_; }

    nlohmann::json stats_json() const {
        std::lock_guard lk(mu_);
        nlohmann::json per = nlohmann::json::object();
        long total = 0;
        for (const auto& [idx, hits] : hits_) {
            per[fixtures_[idx].name] = hits;
            total += hits;
        }
        nlohmann::json j;
        j["per_fixture"] = per;
        j["total_hits"] = total;
        j["unmatched"] = unmatched_;
        j["ambiguous"] = ambiguous_;
        return j;
    }

private:
    void handle_completion(const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
            res.status = 400;
            res.set_content(std::string("{\"error\":\"bad json\"}"), "application/json");
            return;
        }
        std::string model = body.value("model", std::string("unknown"));
        std::vector<ChatMessage> messages;
        std::string last_user;
        if (body.contains("messages") && body["messages"].is_array()) {
            for (const auto& m : body["messages"]) {
                ChatMessage cm;
                cm.role = m.value("role", std::string("user")) == "system" ? Role::System
                                                                           : Role::User;
                cm.content = m.value("content", std::string());
                if (cm.role == Role::User) last_user = cm.content;
                messages.push_back(std::move(cm));
            }
        }
        const std::string digest = body_digest(model, messages, body.value("temperature", 0.0),
                                               body.value("max_tokens", 0));

        long idx = -1;
        {
            std::lock_guard lk(mu_);
            auto it = by_digest_.find(digest);
            if (it != by_digest_.end()) {
                idx = static_cast<long>(it->second);
            } else {
                std::vector<std::size_t> matches;
                for (std::size_t i = 0; i < fixtures_.size(); ++i)
                    if (fixtures_[i].match_substring &&
                        last_user.find(*fixtures_[i].match_substring) != std::string::npos)
                        matches.push_back(i);
                if (matches.size() > 1) {
                    ++ambiguous_;
                    nlohmann::json err;
                    err["error"] = "ambiguous substring match";
                    err["fixtures"] = nlohmann::json::array();
                    for (auto i : matches) err["fixtures"].push_back(fixtures_[i].name);
                    res.status = 500;
                    res.set_content(err.dump(), "application/json");
                    return;
                }
                if (matches.empty()) {
                    ++unmatched_;
                    nlohmann::json err;
                    err["error"] = "no fixture matches request";
                    err["request_digest"] = digest;
                    err["last_user_message"] = last_user;
                    res.status = 404;
                    res.set_content(err.dump(), "application/json");
                    return;
                }
                idx = static_cast<long>(matches[0]);
            }
            ++hits_[static_cast<std::size_t>(idx)];
            auto fit = pending_failures_.find(static_cast<std::size_t>(idx));
            if (fit != pending_failures_.end() && !fit->second.empty()) {
                int status = fit->second.front();
                fit->second.pop_front();
                res.status = status;
                res.set_content("{\"error\":{\"message\":\"scripted failure\"}}",
                                "application/json");
                return;
            }
        }

        const Fixture& f = fixtures_[static_cast<std::size_t>(idx)];
        if (f.delay_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(f.delay_ms));
        nlohmann::json out;
        out["id"] = "stub-" + f.name;
        out["object"] = "chat.completion";
        out["created"] = 0;
        out["model"] = model;
        out["choices"] = nlohmann::json::array(
            {nlohmann::json{{"index", 0},
                            {"message", {{"role", "assistant"}, {"content", f.content}}},
                            {"finish_reason", "stop"}}});
        if (f.completion_tokens) {
            out["usage"] = {{"prompt_tokens", f.prompt_tokens.value_or(0)},
                            {"completion_tokens", *f.completion_tokens},
                            {"total_tokens",
                             f.prompt_tokens.value_or(0) + *f.completion_tokens}};
        }
        res.status = 200;
        res.set_content(out.dump(), "application/json");
    }

    std::vector<Fixture> fixtures_;
    std::map<std::string, std::size_t> by_digest_;
    httplib::Server svr_;
    std::thread thread_;
    int port_ = 0;
    mutable std::mutex mu_;
    std::map<std::size_t, long> hits_;
    std::map<std::size_t, std::deque<int>> pending_failures_;
    long unmatched_ = 0;
    long ambiguous_ = 0;
};

}  // namespace overeval
