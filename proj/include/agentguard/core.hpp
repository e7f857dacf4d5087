#pragma once
// Trajectory data model, lifecycle component contract, and the JSONL
// trajectory format. Everything here is immutable after construction and
// safe to share across threads.

#include <json.hpp>

#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentguard/schema.hpp"

namespace agentguard {

enum class Role { User, Assistant, Tool, System };

inline const char* to_string(Role r) {
    switch (r) {
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::Tool: return "tool";
        case Role::System: return "system";
    }
    return "?";
}

inline std::optional<Role> role_from_string(const std::string& s) {
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    if (s == "tool") return Role::Tool;
    if (s == "system") return Role::System;
    return std::nullopt;
}

struct ToolCall {
    std::string id;
    std::string tool_name;
    json arguments = json::object();  // always a JSON object, possibly empty
};

struct Message {
    Role role = Role::User;
    std::string content;
    std::vector<ToolCall> tool_calls;          // assistant only
    std::optional<std::string> tool_call_id;   // tool role only
    std::optional<std::string> timestamp;      // ISO-8601, informational only
};

struct ToolResponse {
    std::string tool_call_id;
    std::optional<int> status_code;  // HTTP semantics when present
    json body;                       // parsed JSON, or a JSON string holding raw text
    bool is_json = true;

    // Body rendered as text, whatever its representation.
    std::string body_text() const {
        if (!is_json || body.is_string()) return body.is_string() ? body.get<std::string>() : body.dump();
        return body.dump();
    }
};

struct ToolSpec {
    std::string name;
    std::string description;
    SchemaNode parameters;  // kind must be object
    std::optional<SchemaNode> response_schema;
};

using ToolRegistry = std::map<std::string, ToolSpec>;

enum class AgentPhase { Buildtime, Runtime };

enum class LifecycleStage { BuildTime, PreLlm, PostLlm, PreTool, PostTool, PreResponse };

inline const char* to_string(LifecycleStage s) {
    switch (s) {
        case LifecycleStage::BuildTime: return "BUILD_TIME";
        case LifecycleStage::PreLlm: return "PRE_LLM";
        case LifecycleStage::PostLlm: return "POST_LLM";
        case LifecycleStage::PreTool: return "PRE_TOOL";
        case LifecycleStage::PostTool: return "POST_TOOL";
        case LifecycleStage::PreResponse: return "PRE_RESPONSE";
    }
    return "?";
}

enum class Outcome { Pass, Fail, Transformed };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Pass: return "PASS";
        case Outcome::Fail: return "FAIL";
        case Outcome::Transformed: return "TRANSFORMED";
    }
    return "?";
}

// Uniform component verdict. FAIL always carries agent-facing feedback;
// TRANSFORMED means "proceed, but with the rewritten payload".
struct ComponentResult {
    Outcome outcome = Outcome::Pass;
    json payload = json::object();
    std::string feedback;

    json to_json() const {
        json j{{"outcome", to_string(outcome)}, {"payload", payload}};
        if (!feedback.empty()) j["feedback"] = feedback;
        return j;
    }
};

class UnsupportedPhaseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedInputError : public std::runtime_error {
public:
    MalformedInputError(const std::string& path, const std::string& what)
        : std::runtime_error(what + " (at " + path + ")"), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Lifecycle component contract: one declared stage, processes RUNTIME input.
class Component {
public:
    virtual ~Component() = default;
    virtual std::string id() const = 0;
    virtual LifecycleStage stage() const = 0;
    virtual ComponentResult process(const json& input, AgentPhase phase) = 0;
};

// ---------------------------------------------------------------------------
// Message / ToolCall JSON forms. Field names are the wire format.
// ---------------------------------------------------------------------------

inline json to_json(const ToolCall& c) {
    return json{{"id", c.id}, {"tool_name", c.tool_name}, {"arguments", c.arguments}};
}

inline ToolCall tool_call_from_json(const json& j) {
    if (!j.is_object()) throw std::runtime_error("tool call must be an object");
    ToolCall c;
    c.id = j.value("id", "");
    if (!j.contains("tool_name") || !j["tool_name"].is_string())
        throw std::runtime_error("tool call missing string 'tool_name'");
    c.tool_name = j["tool_name"].get<std::string>();
    if (j.contains("arguments")) {
        if (!j["arguments"].is_object())
            throw std::runtime_error("tool call 'arguments' must be a JSON object");
        c.arguments = j["arguments"];
    }
    return c;
}

inline json to_json(const Message& m) {
    json j{{"role", to_string(m.role)}, {"content", m.content}};
    if (!m.tool_calls.empty()) {
        json calls = json::array();
        for (const auto& c : m.tool_calls) calls.push_back(to_json(c));
        j["tool_calls"] = calls;
    }
    if (m.tool_call_id) j["tool_call_id"] = *m.tool_call_id;
    if (m.timestamp) j["timestamp"] = *m.timestamp;
    return j;
}

inline Message message_from_json(const json& j) {
    if (!j.is_object()) throw std::runtime_error("message must be a JSON object");
    if (!j.contains("role") || !j["role"].is_string())
        throw std::runtime_error("message missing string 'role'");
    auto role = role_from_string(j["role"].get<std::string>());
    if (!role) throw std::runtime_error("unknown role '" + j["role"].get<std::string>() + "'");
    Message m;
    m.role = *role;
    if (j.contains("content")) {
        if (!j["content"].is_string()) throw std::runtime_error("'content' must be a string");
        m.content = j["content"].get<std::string>();
    }
    if (j.contains("tool_calls")) {
        if (!j["tool_calls"].is_array()) throw std::runtime_error("'tool_calls' must be an array");
        for (const auto& c : j["tool_calls"]) m.tool_calls.push_back(tool_call_from_json(c));
    }
    if (j.contains("tool_call_id")) {
        if (!j["tool_call_id"].is_string())
            throw std::runtime_error("'tool_call_id' must be a string");
        m.tool_call_id = j["tool_call_id"].get<std::string>();
    }
    if (j.contains("timestamp")) {
        if (!j["timestamp"].is_string()) throw std::runtime_error("'timestamp' must be a string");
        m.timestamp = j["timestamp"].get<std::string>();
    }
    if (!m.tool_calls.empty() && m.role != Role::Assistant)
        throw std::runtime_error("tool_calls are only valid on assistant messages");
    if (m.tool_call_id.has_value() != (m.role == Role::Tool))
        throw std::runtime_error("tool_call_id must be present exactly on tool messages");
    return m;
}

inline json to_json(const ToolResponse& r) {
    json j{{"tool_call_id", r.tool_call_id}, {"body", r.body}, {"is_json", r.is_json}};
    if (r.status_code) j["status_code"] = *r.status_code;
    return j;
}

inline ToolResponse tool_response_from_json(const json& j) {
    if (!j.is_object()) throw std::runtime_error("tool response must be a JSON object");
    ToolResponse r;
    r.tool_call_id = j.value("tool_call_id", "");
    if (j.contains("status_code")) {
        if (!j["status_code"].is_number_integer())
            throw std::runtime_error("'status_code' must be an integer");
        r.status_code = j["status_code"].get<int>();
    }
    if (j.contains("body")) r.body = j["body"];
    r.is_json = j.value("is_json", true);
    if (!r.is_json && !r.body.is_string())
        throw std::runtime_error("non-JSON body must be carried as a string");
    return r;
}

// Builds a ToolResponse from raw bytes, classifying them as JSON or text.
inline ToolResponse make_tool_response(const std::string& tool_call_id, std::optional<int> status,
                                       const std::string& raw_body) {
    ToolResponse r;
    r.tool_call_id = tool_call_id;
    r.status_code = status;
    json parsed = json::parse(raw_body, nullptr, false);
    if (parsed.is_discarded()) {
        r.is_json = false;
        r.body = raw_body;
    } else {
        r.is_json = true;
        r.body = parsed;
    }
    return r;
}

// ---------------------------------------------------------------------------
// JSONL trajectories
// ---------------------------------------------------------------------------

struct LineDiagnostic {
    int line = 0;  // 1-based
    std::string error;
};

struct ParsedTrajectory {
    std::vector<Message> messages;
    std::vector<LineDiagnostic> diagnostics;
};

class TrajectoryParseError : public std::runtime_error {
public:
    explicit TrajectoryParseError(std::vector<LineDiagnostic> diags)
        : std::runtime_error("no trajectory line parsed (" + std::to_string(diags.size()) +
                             " bad lines)"),
          diagnostics_(std::move(diags)) {}
    const std::vector<LineDiagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<LineDiagnostic> diagnostics_;
};

// Parses newline-delimited messages. Invalid lines become diagnostics and the
// valid ones are still returned; throws only when lines were present and none
// parsed. Blank lines are skipped.
inline ParsedTrajectory parse_trajectory(std::istream& in) {
    ParsedTrajectory out;
    std::string line;
    int line_no = 0;
    int content_lines = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        ++content_lines;
        try {
            json j = json::parse(line);
            out.messages.push_back(message_from_json(j));
        } catch (const std::exception& e) {
            out.diagnostics.push_back({line_no, e.what()});
        }
    }
    if (content_lines > 0 && out.messages.empty()) throw TrajectoryParseError(out.diagnostics);
    return out;
}

inline ParsedTrajectory parse_trajectory_text(const std::string& text_in) {
    std::istringstream in(text_in);
    return parse_trajectory(in);
}

inline std::string serialize_trajectory(const std::vector<Message>& messages) {
    std::string out;
    for (const auto& m : messages) {
        out += to_json(m).dump();
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tool-spec registry file: JSON object mapping tool name -> spec.
// ---------------------------------------------------------------------------

inline ToolRegistry parse_tool_registry(const json& doc, std::vector<std::string>* warnings = nullptr) {
    if (!doc.is_object()) throw SchemaParseError("tool registry must be a JSON object");
    ToolRegistry reg;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const json& entry = it.value();
        if (!entry.is_object())
            throw SchemaParseError("registry entry '" + it.key() + "' must be an object");
        ToolSpec spec;
        spec.name = it.key();
        spec.description = entry.value("description", "");
        if (!entry.contains("parameters"))
            throw SchemaParseError("registry entry '" + it.key() + "' missing 'parameters'");
        spec.parameters = parse_schema(entry["parameters"], warnings);
        if (spec.parameters.kind != SchemaKind::Object)
            throw SchemaParseError("parameters of '" + it.key() + "' must be an object schema");
        if (entry.contains("response_schema") && !entry["response_schema"].is_null())
            spec.response_schema = parse_schema(entry["response_schema"], warnings);
        reg.emplace(it.key(), std::move(spec));
    }
    return reg;
}

inline json to_json(const ToolSpec& spec) {
    json j{{"description", spec.description}, {"parameters", schema_to_document(spec.parameters)}};
    if (spec.response_schema) j["response_schema"] = schema_to_document(*spec.response_schema);
    return j;
}

// Warning sink. Replaceable so embedders can route library warnings.
inline void default_warn(const std::string& msg) { std::fputs(("[agentguard] warning: " + msg + "\n").c_str(), stderr); }

inline void (*&warn_hook())(const std::string&) {
    static void (*hook)(const std::string&) = &default_warn;
    return hook;
}

inline void warn(const std::string& msg) { warn_hook()(msg); }

}  // namespace agentguard
