#pragma once
// LLM judge abstraction: a chat-completions HTTP client with retry/backoff
// and a scriptable mock for tests. Built-in prompts always run at
// temperature 0.

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "agentguard/core.hpp"

namespace agentguard {

struct JudgeRequest {
    std::string system_prompt;
    std::string user_prompt;
    int max_output_tokens = 512;
    double temperature = 0.0;
};

struct JudgeResponse {
    std::string text;
    int latency_ms = 0;
    std::string model_id;
};

class JudgeUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AuthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual JudgeResponse complete(const JudgeRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// MockJudge: canned replies consumed in order, or pattern -> reply rules
// matched by substring against the rendered prompts. Records a transcript.
// ---------------------------------------------------------------------------

class MockJudge : public JudgeClient {
public:
    struct Rule {
        std::string pattern;  // substring over system+user prompt
        std::string reply;
    };

    static constexpr const char* kExhausted = "MOCK_EXHAUSTED";

    explicit MockJudge(std::vector<std::string> replies) : replies_(std::move(replies)) {}

    static std::shared_ptr<MockJudge> scripted(std::vector<std::string> replies) {
        return std::make_shared<MockJudge>(std::move(replies));
    }

    static std::shared_ptr<MockJudge> with_rules(std::vector<Rule> rules) {
        auto j = std::make_shared<MockJudge>(std::vector<std::string>{});
        j->rules_ = std::move(rules);
        j->rule_mode_ = true;
        return j;
    }

    JudgeResponse complete(const JudgeRequest& request) override {
        std::lock_guard<std::mutex> lock(mu_);
        transcript_.push_back(request);
        std::string reply = kExhausted;
        if (rule_mode_) {
            std::string haystack = request.system_prompt + "\n" + request.user_prompt;
            for (const auto& rule : rules_) {
                if (rule.pattern.empty() || haystack.find(rule.pattern) != std::string::npos) {
                    reply = rule.reply;
                    break;
                }
            }
        } else if (next_ < replies_.size()) {
            reply = replies_[next_++];
        }
        return JudgeResponse{reply, 0, "mock"};
    }

    const std::vector<JudgeRequest>& transcript() const { return transcript_; }
    size_t call_count() const { return transcript_.size(); }

private:
    mutable std::mutex mu_;
    std::vector<std::string> replies_;
    std::vector<Rule> rules_;
    bool rule_mode_ = false;
    size_t next_ = 0;
    std::vector<JudgeRequest> transcript_;
};

// ---------------------------------------------------------------------------
// HttpJudgeClient: one wire convention (chat-completions JSON over HTTP).
// Credentials come from the environment, never from config files.
// ---------------------------------------------------------------------------

struct JudgeOptions {
    std::string url;      // e.g. http://localhost:8000/v1/chat/completions
    std::string model;
    std::string api_key;  // optional
    int max_attempts = 3;
    int backoff_base_ms = 250;
    int backoff_factor = 2;
    int timeout_s = 60;
    int max_inflight = 4;
    size_t prompt_byte_budget = 16384;
};

inline JudgeOptions judge_options_from_env() {
    JudgeOptions opts;
    if (const char* v = std::getenv("AGENTGUARD_JUDGE_URL")) opts.url = v;
    if (const char* v = std::getenv("AGENTGUARD_JUDGE_MODEL")) opts.model = v;
    if (const char* v = std::getenv("AGENTGUARD_JUDGE_API_KEY")) opts.api_key = v;
    return opts;
}

struct HttpResult {
    bool transport_ok = false;
    int status = 0;
    std::string body;
    std::string error;
};

// Transport is injectable so retry and concurrency behavior are testable
// without a live server. The default transport lives in judge_http.hpp to
// keep this header free of the HTTP client dependency.
using JudgeTransport = std::function<HttpResult(const JudgeOptions&, const json& request_body)>;

class HttpJudgeClient : public JudgeClient {
public:
    explicit HttpJudgeClient(JudgeOptions opts, JudgeTransport transport)
        : opts_(std::move(opts)), transport_(std::move(transport)) {
        if (opts_.url.empty()) throw ConfigError("judge endpoint URL not configured");
        if (opts_.max_inflight < 1) opts_.max_inflight = 1;
    }

    JudgeResponse complete(const JudgeRequest& request) override {
        InflightSlot slot(*this);
        json body{{"model", opts_.model},
                  {"messages",
                   json::array({json{{"role", "system"}, {"content", request.system_prompt}},
                                json{{"role", "user"}, {"content", request.user_prompt}}})},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_output_tokens}};

        auto t0 = std::chrono::steady_clock::now();
        std::string last_error;
        for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
            HttpResult res = transport_(opts_, body);
            if (res.transport_ok) {
                if (res.status == 401 || res.status == 403)
                    throw AuthError("judge endpoint rejected credentials (HTTP " +
                                    std::to_string(res.status) + ")");
                if (res.status == 200) {
                    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                       std::chrono::steady_clock::now() - t0)
                                       .count();
                    return parse_completion(res.body, static_cast<int>(elapsed));
                }
                bool retriable = res.status == 429 || res.status >= 500;
                last_error = "HTTP " + std::to_string(res.status);
                if (!retriable)
                    throw JudgeUnavailable("judge endpoint returned " + last_error);
            } else {
                last_error = res.error.empty() ? "transport error" : res.error;
            }
            if (attempt < opts_.max_attempts) {
                int delay = opts_.backoff_base_ms;
                for (int i = 1; i < attempt; ++i) delay *= opts_.backoff_factor;
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
        }
        throw JudgeUnavailable("judge unreachable after " + std::to_string(opts_.max_attempts) +
                               " attempts: " + last_error);
    }

    const JudgeOptions& options() const { return opts_; }
    int inflight_peak() const {
        std::lock_guard<std::mutex> lock(mu_);
        return peak_;
    }

private:
    // Counting gate capping concurrent HTTP requests at max_inflight.
    class InflightSlot {
    public:
        explicit InflightSlot(HttpJudgeClient& c) : c_(c) {
            std::unique_lock<std::mutex> lock(c_.mu_);
            c_.cv_.wait(lock, [&] { return c_.inflight_ < c_.opts_.max_inflight; });
            ++c_.inflight_;
            if (c_.inflight_ > c_.peak_) c_.peak_ = c_.inflight_;
        }
        ~InflightSlot() {
            {
                std::lock_guard<std::mutex> lock(c_.mu_);
                --c_.inflight_;
            }
            c_.cv_.notify_one();
        }

    private:
        HttpJudgeClient& c_;
    };

    JudgeResponse parse_completion(const std::string& body, int latency_ms) const {
        json parsed = json::parse(body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
            parsed["choices"].empty())
            throw JudgeUnavailable("judge endpoint returned an unparseable completion");
        const json& choice = parsed["choices"][0];
        std::string text;
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string())
            text = choice["message"]["content"].get<std::string>();
        JudgeResponse out;
        out.text = text;
        out.latency_ms = latency_ms;
        out.model_id = parsed.value("model", opts_.model);
        return out;
    }

    JudgeOptions opts_;
    JudgeTransport transport_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    int inflight_ = 0;
    int peak_ = 0;
};

}  // namespace agentguard
