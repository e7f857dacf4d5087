#pragma once
// Intercepting JSON-RPC proxy between an agent and upstream tool servers.
// Pre-tool validation runs before anything reaches an upstream; rejected
// calls produce successful JSON-RPC results carrying {rejected:true, ...} so
// the agent's LLM actually sees the critique (protocol errors get swallowed
// by many agent loops). Post-tool review can advise a bounded number of
// retries on silent errors.
//
// Speaks newline-delimited JSON-RPC 2.0 on stdio and HTTP POST /rpc.

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "agentguard/components.hpp"
#include "agentguard/config.hpp"
#include "agentguard/core.hpp"
#include "agentguard/silent_review.hpp"
#include "agentguard/sparc.hpp"

namespace agentguard::gateway {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Errors and upstream abstraction
// ---------------------------------------------------------------------------

class BindError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RpcError : std::runtime_error {
    RpcError(int code, const std::string& message, json data = json())
        : std::runtime_error(message), code(code), data(std::move(data)) {}
    int code;
    json data;
};

class UpstreamError : public std::runtime_error {
public:
    UpstreamError(const std::string& what, bool timeout)
        : std::runtime_error(what), timeout_(timeout) {}
    bool timeout() const { return timeout_; }

private:
    bool timeout_;
};

// In-process JSON-RPC endpoint, used by the test harness's mock upstream.
class RpcServer {
public:
    virtual ~RpcServer() = default;
    virtual json handle(const json& request) = 0;
};

class Upstream {
public:
    virtual ~Upstream() = default;
    virtual std::string describe() const = 0;
    // Returns the JSON-RPC `result`; protocol errors surface as RpcError,
    // transport problems as UpstreamError.
    virtual json request(const std::string& method, const json& params, int timeout_ms) = 0;
};

class InProcessUpstream : public Upstream {
public:
    explicit InProcessUpstream(std::shared_ptr<RpcServer> server) : server_(std::move(server)) {}

    std::string describe() const override { return "inprocess"; }

    json request(const std::string& method, const json& params, int) override {
        json req{{"jsonrpc", "2.0"}, {"id", next_id_++}, {"method", method}, {"params", params}};
        json res = server_->handle(req);
        if (res.contains("error"))
            throw RpcError(res["error"].value("code", -32000), res["error"].value("message", ""),
                           res["error"].value("data", json()));
        return res.value("result", json());
    }

private:
    std::shared_ptr<RpcServer> server_;
    std::atomic<int> next_id_{1};
};

// ---------------------------------------------------------------------------
// Routing and configuration
// ---------------------------------------------------------------------------

struct UpstreamDescriptor {
    enum class Kind { Http, Stdio, InProcess };
    Kind kind = Kind::Http;
    std::string url;                    // http
    std::vector<std::string> command;   // stdio child process
};

struct RouteConfig {
    std::string pattern;  // glob over tool names; first match in order wins
    UpstreamDescriptor upstream;
    std::vector<std::string> pre_tool;
    std::vector<std::string> post_tool;
};

struct GatewayConfig {
    std::vector<RouteConfig> routes;
    bool listen_stdio = false;
    std::optional<std::pair<std::string, int>> listen_http;  // host, port
    int max_retries = 2;
    bool auto_repair = true;
    int call_timeout_ms = 30000;
    int session_idle_minutes = 30;
    std::string log_file;
};

inline GatewayConfig gateway_config_from_json(const json& section) {
    config_detail::check_keys(section,
                              {"routes", "listen", "max_retries", "auto_repair", "call_timeout_ms",
                               "session_idle_minutes", "log_file"},
                              "gateway");
    GatewayConfig cfg;
    if (!section.contains("routes") || !section["routes"].is_array() || section["routes"].empty())
        throw ConfigError("gateway/routes must be a non-empty array");
    for (size_t i = 0; i < section["routes"].size(); ++i) {
        const json& r = section["routes"][i];
        std::string at = "gateway/routes/" + std::to_string(i);
        config_detail::check_keys(r, {"pattern", "upstream", "pre_tool", "post_tool"}, at);
        RouteConfig route;
        route.pattern = config_detail::get_or<std::string>(r, "pattern", "*");
        if (!r.contains("upstream")) throw ConfigError(at + "/upstream is required");
        const json& u = r["upstream"];
        config_detail::check_keys(u, {"type", "url", "command"}, at + "/upstream");
        std::string type = config_detail::get_or<std::string>(u, "type", "");
        if (type == "http") {
            route.upstream.kind = UpstreamDescriptor::Kind::Http;
            route.upstream.url = config_detail::get_or<std::string>(u, "url", "");
            if (route.upstream.url.empty()) throw ConfigError(at + "/upstream/url is required");
        } else if (type == "stdio") {
            route.upstream.kind = UpstreamDescriptor::Kind::Stdio;
            route.upstream.command =
                config_detail::get_or<std::vector<std::string>>(u, "command", {});
            if (route.upstream.command.empty())
                throw ConfigError(at + "/upstream/command is required");
        } else {
            throw ConfigError(at + "/upstream/type must be 'http' or 'stdio'");
        }
        route.pre_tool = config_detail::get_or<std::vector<std::string>>(r, "pre_tool", {});
        route.post_tool = config_detail::get_or<std::vector<std::string>>(r, "post_tool", {});
        for (const auto& ids : {route.pre_tool, route.post_tool})
            for (const auto& id : ids)
                if (id != "sparc" && id != "silent_review" && id != "jsonq")
                    throw ConfigError(at + ": unknown component id '" + id + "'");
        cfg.routes.push_back(std::move(route));
    }
    if (section.contains("listen")) {
        const json& l = section["listen"];
        config_detail::check_keys(l, {"stdio", "http"}, "gateway/listen");
        cfg.listen_stdio = config_detail::get_or<bool>(l, "stdio", false);
        if (l.contains("http")) {
            config_detail::check_keys(l["http"], {"host", "port"}, "gateway/listen/http");
            cfg.listen_http = {config_detail::get_or<std::string>(l["http"], "host", "127.0.0.1"),
                               config_detail::get_or<int>(l["http"], "port", 8711)};
        }
    }
    cfg.max_retries = config_detail::get_or<int>(section, "max_retries", cfg.max_retries);
    cfg.auto_repair = config_detail::get_or<bool>(section, "auto_repair", cfg.auto_repair);
    cfg.call_timeout_ms =
        config_detail::get_or<int>(section, "call_timeout_ms", cfg.call_timeout_ms);
    cfg.session_idle_minutes =
        config_detail::get_or<int>(section, "session_idle_minutes", cfg.session_idle_minutes);
    cfg.log_file = config_detail::get_or<std::string>(section, "log_file", "");
    return cfg;
}

// ---------------------------------------------------------------------------
// Session state
// ---------------------------------------------------------------------------

struct SessionState {
    std::string session_id;
    std::vector<Message> history;  // append-only
    std::unordered_map<std::string, int> retry_counts;
    std::chrono::steady_clock::time_point last_seen = std::chrono::steady_clock::now();
    std::mutex mu;  // calls within a session run in arrival order
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

class Gateway {
public:
    Gateway(AppConfig app, GatewayConfig cfg, std::shared_ptr<JudgeClient> judge = nullptr)
        : app_(std::move(app)), cfg_(std::move(cfg)), judge_(std::move(judge)) {
        if (!cfg_.log_file.empty()) {
            log_stream_.open(cfg_.log_file, std::ios::app);
            if (!log_stream_) throw ConfigError("cannot open log file '" + cfg_.log_file + "'");
        }
    }

    // Testing hook: routes whose descriptor kind is InProcess use this server.
    void set_inprocess_server(std::shared_ptr<RpcServer> server) {
        inprocess_server_ = std::move(server);
    }

    // Builds upstream clients and aggregates tools/list into the registry.
    // Unreachable upstreams warn and stay routable; their tools are simply
    // unknown until a restart.
    void start() {
        upstreams_.clear();
        registry_.clear();
        raw_specs_ = json::array();
        for (const auto& route : cfg_.routes) {
            upstreams_.push_back(make_upstream(route.upstream));
        }
        for (size_t i = 0; i < cfg_.routes.size(); ++i) {
            try {
                json result = upstreams_[i]->request("tools/list", json::object(),
                                                     cfg_.call_timeout_ms);
                if (!result.contains("tools") || !result["tools"].is_array()) continue;
                for (const auto& entry : result["tools"]) {
                    std::string name = entry.value("name", "");
                    if (name.empty() || registry_.count(name)) continue;
                    ToolSpec spec;
                    spec.name = name;
                    spec.description = entry.value("description", "");
                    if (entry.contains("parameters"))
                        spec.parameters = parse_schema(entry["parameters"]);
                    if (entry.contains("response_schema") && !entry["response_schema"].is_null())
                        spec.response_schema = parse_schema(entry["response_schema"]);
                    registry_.emplace(name, std::move(spec));
                    raw_specs_.push_back(entry);  // specs pass through verbatim
                }
            } catch (const std::exception& e) {
                warn("upstream '" + upstreams_[i]->describe() + "' not reachable at startup: " +
                     e.what());
            }
        }
        started_ = true;
    }

    const ToolRegistry& registry() const { return registry_; }

    // Full JSON-RPC round: envelope in, envelope out.
    json handle_rpc(const std::string& session_id, const json& request) {
        json id = request.is_object() ? request.value("id", json()) : json();
        try {
            if (!request.is_object() || request.value("jsonrpc", "") != "2.0" ||
                !request.contains("method") || !request["method"].is_string())
                throw RpcError(-32600, "invalid JSON-RPC request");
            std::string method = request["method"].get<std::string>();
            json params = request.value("params", json::object());

            InflightGuard guard(*this);
            if (method == "initialize") return envelope(id, handle_initialize());
            if (method == "tools/list") return envelope(id, json{{"tools", raw_specs_}});
            if (method == "tools/call") {
                auto session = get_session(session_id);
                std::lock_guard<std::mutex> order(session->mu);
                return envelope(id, handle_tools_call(*session, params));
            }
            throw RpcError(-32601, "unknown method: " + method);
        } catch (const RpcError& e) {
            return error_envelope(id, e.code, e.what(), e.data);
        } catch (const UpstreamError& e) {
            return error_envelope(id, e.timeout() ? -32001 : -32002, e.what(),
                                  json{{"retriable", true}});
        } catch (const std::exception& e) {
            return error_envelope(id, -32603, std::string("internal error: ") + e.what());
        }
    }

    // One request line in, one response line out. The whole stream is a
    // single session.
    void serve_stdio(std::istream& in, std::ostream& out, const std::string& session_id = "stdio") {
        std::string line;
        while (!stopping_ && std::getline(in, line)) {
            if (text::trim(line).empty()) continue;
            json request = json::parse(line, nullptr, false);
            json response;
            if (request.is_discarded()) {
                response = error_envelope(json(), -32700, "parse error: invalid JSON");
            } else {
                response = handle_rpc(session_id, request);
            }
            out << response.dump() << "\n";
            out.flush();
        }
    }

    // Declared in gateway_http.hpp (pulls in the HTTP server dependency).
    void serve_http();
    void stop_http();

    // Graceful shutdown: refuse new work, then drain in-flight calls.
    void shutdown() {
        stopping_ = true;
        stop_http();
        std::unique_lock<std::mutex> lock(inflight_mu_);
        inflight_cv_.wait(lock, [&] { return inflight_ == 0; });
    }

    const GatewayConfig& config() const { return cfg_; }

    std::shared_ptr<SessionState> get_session(const std::string& session_id) {
        std::lock_guard<std::mutex> lock(sessions_mu_);
        auto now = std::chrono::steady_clock::now();
        // lazy idle eviction
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            auto idle = std::chrono::duration_cast<std::chrono::minutes>(now - it->second->last_seen);
            if (idle.count() >= cfg_.session_idle_minutes && it->first != session_id)
                it = sessions_.erase(it);
            else
                ++it;
        }
        auto& slot = sessions_[session_id];
        if (!slot) {
            slot = std::make_shared<SessionState>();
            slot->session_id = session_id;
        }
        slot->last_seen = now;
        return slot;
    }

private:
    friend class InflightGuard;
    class InflightGuard {
    public:
        explicit InflightGuard(Gateway& g) : g_(g) {
            std::lock_guard<std::mutex> lock(g_.inflight_mu_);
            ++g_.inflight_;
        }
        ~InflightGuard() {
            {
                std::lock_guard<std::mutex> lock(g_.inflight_mu_);
                --g_.inflight_;
            }
            g_.inflight_cv_.notify_all();
        }

    private:
        Gateway& g_;
    };

    json handle_initialize() const {
        return json{{"protocolVersion", "2025-01-01"},
                    {"serverInfo", {{"name", "agentguard-gateway"}, {"version", "0.1.0"}}},
                    {"capabilities", {{"tools", {{"listChanged", false}}}}}};
    }

    static json envelope(const json& id, json result) {
        return json{{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}};
    }

    static json error_envelope(const json& id, int code, const std::string& message,
                               const json& data = json()) {
        json err{{"code", code}, {"message", message}};
        if (!data.is_null()) err["data"] = data;
        return json{{"jsonrpc", "2.0"}, {"id", id}, {"error", err}};
    }

    const RouteConfig* find_route(const std::string& tool_name, size_t* index = nullptr) const {
        for (size_t i = 0; i < cfg_.routes.size(); ++i) {
            if (text::glob_match(cfg_.routes[i].pattern, tool_name)) {
                if (index) *index = i;
                return &cfg_.routes[i];
            }
        }
        return nullptr;
    }

    static bool has_component(const std::vector<std::string>& ids, const char* id) {
        for (const auto& s : ids)
            if (s == id) return true;
        return false;
    }

    std::string retry_key(const ToolCall& call) const {
        if (!call.id.empty()) return call.id;
        return call.tool_name + "#" +
               std::to_string(std::hash<std::string>{}(call.arguments.dump()));
    }

    json handle_tools_call(SessionState& session, const json& params) {
        if (!params.is_object() || !params.contains("name") || !params["name"].is_string())
            throw RpcError(-32602, "tools/call params need a string 'name'");
        ToolCall call;
        call.tool_name = params["name"].get<std::string>();
        call.id = params.value("call_id", "");
        if (call.id.empty()) call.id = "call-" + std::to_string(++call_counter_);
        if (params.contains("arguments")) {
            if (!params["arguments"].is_object())
                throw RpcError(-32602, "tools/call 'arguments' must be a JSON object");
            call.arguments = params["arguments"];
        }

        size_t route_idx = 0;
        const RouteConfig* route = find_route(call.tool_name, &route_idx);
        if (!route) throw RpcError(-32601, "no route for tool '" + call.tool_name + "'");

        // Agent-provided conversation context, when the framework forwards it.
        std::vector<Message> provided_context;
        if (params.contains("messages")) {
            if (!params["messages"].is_array())
                throw RpcError(-32602, "tools/call 'messages' must be an array");
            for (const auto& m : params["messages"]) {
                try {
                    provided_context.push_back(message_from_json(m));
                } catch (const std::exception& e) {
                    throw RpcError(-32602, std::string("bad message in 'messages': ") + e.what());
                }
            }
        }

        auto t0 = std::chrono::steady_clock::now();
        auto elapsed_ms = [&t0] {
            return static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::steady_clock::now() - t0)
                                        .count());
        };

        Message assistant;
        assistant.role = Role::Assistant;
        assistant.tool_calls.push_back(call);
        session.history.push_back(assistant);

        const std::vector<Message>& context =
            provided_context.empty() ? session.history : provided_context;

        json metadata = json::object();

        if (has_component(route->pre_tool, "sparc")) {
            ValidationReport report =
                sparc_validate(call, registry_, context, judge_.get(), app_.sparc);
            if (!report.valid) {
                json issues = json::array();
                for (const auto& i : report.issues) issues.push_back(to_json(i));
                log_call(session.session_id, call.tool_name, "rejected_validation", issues,
                         json(), elapsed_ms());
                json content{{"rejected", true},
                             {"reason", "validation"},
                             {"issues", issues},
                             {"feedback", component_detail::render_issues(report.issues)}};
                return json{{"content", content}, {"metadata", metadata}};
            }
            if (report.repaired_arguments && cfg_.auto_repair) {
                metadata["repaired"] = true;
                metadata["original_arguments"] = call.arguments;
                call.arguments = *report.repaired_arguments;
            }
        }

        json upstream_result =
            upstreams_[route_idx]->request("tools/call",
                                           json{{"name", call.tool_name},
                                                {"arguments", call.arguments}},
                                           cfg_.call_timeout_ms);

        ToolResponse response = response_from_result(upstream_result, call.id);

        Message tool_msg;
        tool_msg.role = Role::Tool;
        tool_msg.tool_call_id = call.id;
        tool_msg.content = response.body_text();
        session.history.push_back(tool_msg);

        if (has_component(route->post_tool, "silent_review")) {
            ReviewInput input;
            input.messages = context;
            input.tool_response = response;
            auto spec_it = registry_.find(call.tool_name);
            if (spec_it != registry_.end()) input.tool_spec = spec_it->second;

            ReviewResult review = (app_.review.backend == "judge" && judge_)
                                      ? review_with_judge(input, *judge_, app_.review)
                                      : review_heuristic(input, app_.review);

            std::string key = retry_key(call);
            if (review.outcome == ReviewOutcome::NotAccomplished &&
                session.retry_counts[key] < cfg_.max_retries) {
                int used = ++session.retry_counts[key];
                log_call(session.session_id, call.tool_name, "rejected_silent_error",
                         json::array(), review.to_json(), elapsed_ms());
                json content{{"rejected", true},
                             {"reason", "silent_error"},
                             {"review", review.to_json()},
                             {"advice", "Silent error detected, retry the tool!"},
                             {"retries_remaining", cfg_.max_retries - used}};
                return json{{"content", content}, {"metadata", metadata}};
            }
            metadata["review"] = review.to_json();
        }

        if (has_component(route->post_tool, "jsonq") && judge_ && response.is_json) {
            std::string question;
            for (auto it = context.rbegin(); it != context.rend(); ++it) {
                if (it->role == Role::User) { question = it->content; break; }
            }
            if (!question.empty()) {
                auto spec_it = registry_.find(call.tool_name);
                const SchemaNode* schema =
                    spec_it != registry_.end() && spec_it->second.response_schema
                        ? &*spec_it->second.response_schema
                        : nullptr;
                try {
                    jsonq::ExtractionResult ex =
                        jsonq::extract(response, question, schema, *judge_, app_.jsonq);
                    metadata["extraction"] = json{{"value", ex.value},
                                                  {"query", ex.program.source_text},
                                                  {"attempts", ex.attempts},
                                                  {"bytes_in", ex.bytes_in},
                                                  {"bytes_out", ex.bytes_out}};
                } catch (const jsonq::ExtractionFailed& e) {
                    metadata["extraction_error"] = e.what();
                }
            }
        }

        log_call(session.session_id, call.tool_name, "forwarded", json::array(),
                 metadata.value("review", json()), elapsed_ms());
        return json{{"content", upstream_result}, {"metadata", metadata}};
    }

    static ToolResponse response_from_result(const json& result, const std::string& call_id) {
        ToolResponse r;
        r.tool_call_id = call_id;
        if (result.is_object() && result.contains("body")) {
            if (result.contains("status_code") && result["status_code"].is_number_integer())
                r.status_code = result["status_code"].get<int>();
            const json& body = result["body"];
            if (body.is_string()) {
                // Raw text payload; anything structured arrives as real JSON.
                r.is_json = false;
                r.body = body;
            } else {
                r.is_json = true;
                r.body = body;
            }
        } else {
            r.is_json = true;
            r.body = result;
        }
        return r;
    }

    void log_call(const std::string& session, const std::string& tool, const std::string& verdict,
                  const json& issues, const json& review, int latency_ms) {
        json line{{"session", session}, {"tool", tool},          {"verdict", verdict},
                  {"issues", issues},   {"review", review},      {"latency_ms", latency_ms},
                  {"ts_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count()}};
        std::lock_guard<std::mutex> lock(log_mu_);
        if (log_stream_.is_open()) {
            log_stream_ << line.dump() << "\n";
            log_stream_.flush();
        }
        last_log_line_ = std::move(line);
    }

    std::unique_ptr<Upstream> make_upstream(const UpstreamDescriptor& desc);

public:
    // Observability for tests and the CLI.
    json last_log_line() const {
        std::lock_guard<std::mutex> lock(log_mu_);
        return last_log_line_;
    }

private:
    AppConfig app_;
    GatewayConfig cfg_;
    std::shared_ptr<JudgeClient> judge_;
    std::shared_ptr<RpcServer> inprocess_server_;

    std::vector<std::unique_ptr<Upstream>> upstreams_;
    ToolRegistry registry_;
    json raw_specs_ = json::array();
    bool started_ = false;

    std::mutex sessions_mu_;
    std::unordered_map<std::string, std::shared_ptr<SessionState>> sessions_;

    std::atomic<bool> stopping_{false};
    std::mutex inflight_mu_;
    std::condition_variable inflight_cv_;
    int inflight_ = 0;

    mutable std::mutex log_mu_;
    std::ofstream log_stream_;
    json last_log_line_;

    std::atomic<uint64_t> call_counter_{0};

    void* http_server_ = nullptr;  // set while serve_http runs
    std::mutex http_mu_;
};

}  // namespace agentguard::gateway
