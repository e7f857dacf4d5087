#pragma once
// Lifecycle components behind the uniform process(input, phase) contract.
// All three are runtime-only; BUILDTIME input raises UnsupportedPhase.

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

#include "agentguard/core.hpp"
#include "agentguard/jsonq.hpp"
#include "agentguard/silent_review.hpp"
#include "agentguard/sparc.hpp"

namespace agentguard {

namespace component_detail {

inline void require_runtime(AgentPhase phase, const std::string& id) {
    if (phase != AgentPhase::Runtime)
        throw UnsupportedPhaseError("component '" + id + "' only supports the RUNTIME phase");
}

inline const json& require_field(const json& input, const char* key, const std::string& at) {
    if (!input.is_object() || !input.contains(key))
        throw MalformedInputError(at, std::string("missing required input field '") + key + "'");
    return input.at(key);
}

inline std::vector<Message> messages_from(const json& input, const char* key) {
    const json& arr = require_field(input, key, std::string("/") + key);
    if (!arr.is_array())
        throw MalformedInputError(std::string("/") + key, "must be an array of messages");
    std::vector<Message> out;
    for (size_t i = 0; i < arr.size(); ++i) {
        try {
            out.push_back(message_from_json(arr[i]));
        } catch (const std::exception& e) {
            throw MalformedInputError("/" + std::string(key) + "/" + std::to_string(i), e.what());
        }
    }
    return out;
}

inline std::string render_issues(const std::vector<ValidationIssue>& issues) {
    std::string out = "Tool call rejected.";
    for (const auto& i : issues) {
        out += "\n- [" + std::string(to_string(i.category)) + "]";
        if (!i.path.empty()) out += " at " + i.path;
        out += ": " + i.evidence + " Suggestion: " + i.suggestion;
    }
    return out;
}

}  // namespace component_detail

// Pre-tool validator. Input: {"call": ToolCall, "history": [Message...]}.
class SparcComponent : public Component {
public:
    SparcComponent(ToolRegistry registry, std::shared_ptr<JudgeClient> judge, SparcConfig config)
        : registry_(std::move(registry)), judge_(std::move(judge)), config_(config) {}

    std::string id() const override { return "sparc"; }
    LifecycleStage stage() const override { return LifecycleStage::PreTool; }

    ComponentResult process(const json& input, AgentPhase phase) override {
        component_detail::require_runtime(phase, id());
        ToolCall call;
        try {
            call = tool_call_from_json(component_detail::require_field(input, "call", "/call"));
        } catch (const MalformedInputError&) {
            throw;
        } catch (const std::exception& e) {
            throw MalformedInputError("/call", e.what());
        }
        std::vector<Message> history;
        if (input.contains("history")) history = component_detail::messages_from(input, "history");

        ValidationReport report =
            sparc_validate(call, registry_, history, judge_.get(), config_);

        ComponentResult result;
        result.payload = report.to_json();
        if (!report.valid) {
            result.outcome = Outcome::Fail;
            result.feedback = component_detail::render_issues(report.issues);
        } else if (report.repaired_arguments) {
            result.outcome = Outcome::Transformed;
        } else {
            result.outcome = Outcome::Pass;
        }
        return result;
    }

    const ToolRegistry& registry() const { return registry_; }

private:
    ToolRegistry registry_;
    std::shared_ptr<JudgeClient> judge_;
    SparcConfig config_;
};

// Post-tool silent-error review.
// Input: {"messages": [...], "tool_response": {...}, "tool_spec"?: {...}}.
class SilentReviewComponent : public Component {
public:
    explicit SilentReviewComponent(ReviewConfig config = {},
                                   std::shared_ptr<JudgeClient> judge = nullptr)
        : config_(std::move(config)), judge_(std::move(judge)) {}

    std::string id() const override { return "silent_review"; }
    LifecycleStage stage() const override { return LifecycleStage::PostTool; }

    ComponentResult process(const json& input, AgentPhase phase) override {
        component_detail::require_runtime(phase, id());
        ReviewInput review_input;
        review_input.messages = component_detail::messages_from(input, "messages");
        try {
            review_input.tool_response = tool_response_from_json(
                component_detail::require_field(input, "tool_response", "/tool_response"));
        } catch (const MalformedInputError&) {
            throw;
        } catch (const std::exception& e) {
            throw MalformedInputError("/tool_response", e.what());
        }

        bool has_user = false;
        for (const auto& m : review_input.messages)
            if (m.role == Role::User) { has_user = true; break; }
        if (!has_user)
            throw MalformedInputError("/messages", "review input needs at least one user message");

        // The reviewed response must belong to a call in the trajectory.
        if (!review_input.tool_response.tool_call_id.empty()) {
            bool found = false;
            for (const auto& m : review_input.messages)
                for (const auto& c : m.tool_calls)
                    if (c.id == review_input.tool_response.tool_call_id) found = true;
            if (!found)
                throw MalformedInputError("/tool_response/tool_call_id",
                                          "does not reference any tool call in messages");
        }

        ReviewResult review = (config_.backend == "judge" && judge_)
                                  ? review_with_judge(review_input, *judge_, config_)
                                  : review_heuristic(review_input, config_);

        ComponentResult result;
        result.payload = review.to_json();
        if (review.outcome == ReviewOutcome::NotAccomplished) {
            result.outcome = Outcome::Fail;
            result.feedback = "Silent error detected, retry the tool! (" + review.rationale + ")";
        } else {
            result.outcome = Outcome::Pass;
        }
        return result;
    }

private:
    ReviewConfig config_;
    std::shared_ptr<JudgeClient> judge_;
};

// Post-tool JSON processor. Input: {"tool_response": {...}, "question": text,
// "response_schema"?: schema document}.
class JsonProcessorComponent : public Component {
public:
    JsonProcessorComponent(std::shared_ptr<JudgeClient> judge, jsonq::ExtractConfig config = {})
        : judge_(std::move(judge)), config_(config) {}

    std::string id() const override { return "jsonq"; }
    LifecycleStage stage() const override { return LifecycleStage::PostTool; }

    ComponentResult process(const json& input, AgentPhase phase) override {
        component_detail::require_runtime(phase, id());
        ToolResponse response;
        try {
            response = tool_response_from_json(
                component_detail::require_field(input, "tool_response", "/tool_response"));
        } catch (const MalformedInputError&) {
            throw;
        } catch (const std::exception& e) {
            throw MalformedInputError("/tool_response", e.what());
        }
        const json& q = component_detail::require_field(input, "question", "/question");
        if (!q.is_string()) throw MalformedInputError("/question", "must be a string");

        std::optional<SchemaNode> schema;
        if (input.contains("response_schema") && !input["response_schema"].is_null())
            schema = parse_schema(input["response_schema"]);

        ComponentResult result;
        try {
            jsonq::ExtractionResult extraction = jsonq::extract(
                response, q.get<std::string>(), schema ? &*schema : nullptr, *judge_, config_);
            result.outcome = Outcome::Transformed;
            result.payload = json{{"value", extraction.value},
                                  {"query", extraction.program.source_text},
                                  {"attempts", extraction.attempts},
                                  {"bytes_in", extraction.bytes_in},
                                  {"bytes_out", extraction.bytes_out}};
        } catch (const jsonq::ExtractionFailed& e) {
            json transcript = json::array();
            for (const auto& a : e.attempts())
                transcript.push_back(json{{"query", a.query_text}, {"error", a.error}});
            result.outcome = Outcome::Fail;
            result.feedback = e.what();
            result.payload = json{{"attempts", transcript}};
        }
        return result;
    }

private:
    std::shared_ptr<JudgeClient> judge_;
    jsonq::ExtractConfig config_;
};

}  // namespace agentguard
