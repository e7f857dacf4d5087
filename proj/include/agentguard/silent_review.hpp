#pragma once
// Post-tool silent-error review. A response that is transport-successful can
// still be a failure ("Service under maintenance", "No results found"); this
// classifier labels responses ACCOMPLISHED / PARTIALLY_ACCOMPLISHED /
// NOT_ACCOMPLISHED with a deterministic rule cascade, optionally upgraded by
// an LLM judge that falls back to the rules when unavailable.

#include <json.hpp>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "agentguard/core.hpp"
#include "agentguard/judge.hpp"
#include "agentguard/text.hpp"

namespace agentguard {

enum class ReviewOutcome { Accomplished, PartiallyAccomplished, NotAccomplished };

inline const char* to_string(ReviewOutcome o) {
    switch (o) {
        case ReviewOutcome::Accomplished: return "ACCOMPLISHED";
        case ReviewOutcome::PartiallyAccomplished: return "PARTIALLY_ACCOMPLISHED";
        case ReviewOutcome::NotAccomplished: return "NOT_ACCOMPLISHED";
    }
    return "?";
}

struct ReviewInput {
    std::vector<Message> messages;  // must contain at least one user message
    ToolResponse tool_response;
    std::optional<ToolSpec> tool_spec;
};

struct ReviewResult {
    ReviewOutcome outcome = ReviewOutcome::Accomplished;
    std::string rationale;
    std::string matched_rule;  // heuristic backend only

    json to_json() const {
        json j{{"outcome", to_string(outcome)}, {"rationale", rationale}};
        if (!matched_rule.empty()) j["matched_rule"] = matched_rule;
        return j;
    }
};

struct ReviewConfig {
    std::vector<std::string> failure_lexicon = default_failure_lexicon();
    std::vector<std::string> partial_lexicon = default_partial_lexicon();
    size_t body_byte_budget = 8192;
    std::string backend = "heuristic";  // heuristic | judge

    static std::vector<std::string> default_failure_lexicon() {
        return {"service under maintenance",
                "no results found",
                "not found",
                "unavailable",
                "rate limit",
                "unauthorized",
                "forbidden",
                "internal error",
                "try again later"};
    }

    static std::vector<std::string> default_partial_lexicon() {
        return {"truncated", "partial results", "more results available"};
    }
};

namespace review_detail {

inline std::string fold(const std::string& s) {
    return text::collapse_ws(text::fold_accents_lower(s));
}

// Lexicon matching looks at string leaves and raw text only, never JSON keys.
inline std::optional<std::string> find_phrase(const json& body, bool is_json,
                                              const std::vector<std::string>& lexicon) {
    auto scan_text = [&](const std::string& s) -> std::optional<std::string> {
        std::string folded = fold(s);
        for (const auto& phrase : lexicon) {
            if (folded.find(fold(phrase)) != std::string::npos) return phrase;
        }
        return std::nullopt;
    };

    if (!is_json || body.is_string()) {
        return scan_text(body.is_string() ? body.get<std::string>() : body.dump());
    }
    // walk string leaves
    std::vector<const json*> stack{&body};
    while (!stack.empty()) {
        const json* v = stack.back();
        stack.pop_back();
        if (v->is_string()) {
            if (auto hit = scan_text(v->get<std::string>())) return hit;
        } else if (v->is_object() || v->is_array()) {
            for (const auto& child : *v) stack.push_back(&child);
        }
    }
    return std::nullopt;
}

inline bool body_is_empty(const ToolResponse& r) {
    if (!r.is_json || r.body.is_string()) {
        std::string s = r.body.is_string() ? r.body.get<std::string>() : r.body.dump();
        return text::trim(s).empty();
    }
    if (r.body.is_null()) return true;  // a null body carries nothing
    if (r.body.is_object() || r.body.is_array()) return r.body.empty();
    return false;
}

inline bool error_key_has_content(const json& body) {
    if (!body.is_object()) return false;
    for (const char* key : {"error", "errors"}) {
        if (!body.contains(key)) continue;
        const json& v = body[key];
        if (v.is_null()) continue;
        if (v.is_string() && text::trim(v.get<std::string>()).empty()) continue;
        if ((v.is_object() || v.is_array()) && v.empty()) continue;
        return true;
    }
    return false;
}

}  // namespace review_detail

// Rule cascade, first match wins:
//   R0  hard HTTP failure (status >= 400)
//   R1  empty body ({} / [] / null / blank text)
//   R2  failure-lexicon phrase in body text or a JSON string leaf
//   R3  top-level error/errors key with non-null content
//   R4  partial-result marker (body is non-empty past R1)
//   R5  accomplished
// R2 outranks R4: an explicit failure phrase beats partial markers.
inline ReviewResult review_heuristic(const ReviewInput& input, const ReviewConfig& config = {}) {
    const ToolResponse& r = input.tool_response;

    if (r.status_code && *r.status_code >= 400) {
        return {ReviewOutcome::NotAccomplished,
                "HTTP status " + std::to_string(*r.status_code) + " is an explicit failure", "R0"};
    }
    if (review_detail::body_is_empty(r)) {
        return {ReviewOutcome::NotAccomplished, "response body is empty", "R1"};
    }
    if (auto phrase = review_detail::find_phrase(r.body, r.is_json, config.failure_lexicon)) {
        return {ReviewOutcome::NotAccomplished, "failure phrase matched: '" + *phrase + "'", "R2"};
    }
    if (r.is_json && review_detail::error_key_has_content(r.body)) {
        return {ReviewOutcome::NotAccomplished, "response carries a top-level error payload", "R3"};
    }
    if (auto phrase = review_detail::find_phrase(r.body, r.is_json, config.partial_lexicon)) {
        return {ReviewOutcome::PartiallyAccomplished,
                "partial-result marker matched: '" + *phrase + "'", "R4"};
    }
    return {ReviewOutcome::Accomplished, "no failure indicators detected", "R5"};
}

namespace review_detail {

inline std::optional<ReviewResult> parse_judge_review(const std::string& reply) {
    std::string upper = text::to_lower(reply);
    struct Label {
        const char* needle;
        ReviewOutcome outcome;
    };
    // NOT/PARTIALLY checked first: plain "accomplished" is a substring of both.
    static const Label labels[] = {
        {"not_accomplished", ReviewOutcome::NotAccomplished},
        {"not accomplished", ReviewOutcome::NotAccomplished},
        {"partially_accomplished", ReviewOutcome::PartiallyAccomplished},
        {"partially accomplished", ReviewOutcome::PartiallyAccomplished},
        {"accomplished", ReviewOutcome::Accomplished},
    };
    for (const Label& label : labels) {
        size_t pos = upper.find(label.needle);
        if (pos == std::string::npos) continue;
        std::string rationale = text::trim(reply.substr(pos + std::strlen(label.needle)));
        if (!rationale.empty() && rationale.front() == ':') rationale = text::trim(rationale.substr(1));
        if (rationale.empty()) rationale = "judge verdict";
        return ReviewResult{label.outcome, rationale, ""};
    }
    return std::nullopt;
}

}  // namespace review_detail

// Judge-backed review. Unparseable or unreachable judges fall back to the
// heuristic cascade; review never blocks the pipeline.
inline ReviewResult review_with_judge(const ReviewInput& input, JudgeClient& judge,
                                      const ReviewConfig& config = {}) {
    std::string user_query;
    for (auto it = input.messages.rbegin(); it != input.messages.rend(); ++it) {
        if (it->role == Role::User) {
            user_query = it->content;
            break;
        }
    }
    std::string body_text = input.tool_response.body_text();
    if (body_text.size() > config.body_byte_budget)
        body_text = text::truncate_utf8(body_text, config.body_byte_budget) + "\n...[truncated]";

    JudgeRequest req;
    req.system_prompt =
        "You review whether a tool response actually accomplished the user's request. A response "
        "can be a failure even with a successful status (maintenance pages, empty results). Reply "
        "with exactly one label: ACCOMPLISHED, PARTIALLY_ACCOMPLISHED, or NOT_ACCOMPLISHED, "
        "followed by ': ' and a one-sentence rationale.";
    std::string user = "User request: " + user_query + "\n";
    if (input.tool_spec) user += "Tool: " + input.tool_spec->name + " - " + input.tool_spec->description + "\n";
    if (input.tool_response.status_code)
        user += "HTTP status: " + std::to_string(*input.tool_response.status_code) + "\n";
    user += "Tool response body:\n" + body_text;
    req.user_prompt = user;
    req.temperature = 0.0;

    try {
        JudgeResponse res = judge.complete(req);
        if (auto parsed = review_detail::parse_judge_review(res.text)) return *parsed;
        warn("judge review reply had no recognizable label; using heuristic result");
    } catch (const JudgeUnavailable& e) {
        warn(std::string("judge unavailable for review, using heuristic result: ") + e.what());
    }
    return review_heuristic(input, config);
}

}  // namespace agentguard
