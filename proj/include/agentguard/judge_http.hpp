#pragma once
// Default HTTP transport for HttpJudgeClient, split out so that headers not
// needing a real HTTP client avoid the httplib dependency.

#include <httplib.h>

#include "agentguard/judge.hpp"

namespace agentguard {

// Splits "scheme://host[:port][/path]" into base and path. A URL without a
// path gets the chat-completions default.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    size_t authority_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', authority_start);
    if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline JudgeTransport make_http_transport() {
    return [](const JudgeOptions& opts, const json& body) -> HttpResult {
        auto [base, path] = split_url(opts.url);
        httplib::Client cli(base);
        cli.set_connection_timeout(opts.timeout_s, 0);
        cli.set_read_timeout(opts.timeout_s, 0);
        httplib::Headers headers;
        if (!opts.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts.api_key);
        auto res = cli.Post(path, headers, body.dump(), "application/json");
        if (!res) return {false, 0, "", httplib::to_string(res.error())};
        return {true, res->status, res->body, ""};
    };
}

inline std::shared_ptr<HttpJudgeClient> make_http_judge(const JudgeOptions& opts) {
    return std::make_shared<HttpJudgeClient>(opts, make_http_transport());
}

}  // namespace agentguard
