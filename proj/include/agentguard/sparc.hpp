#pragma once
// Pre-tool validation: syntactic checks against the tool registry,
// transformation repairs (dates, currency, enum casing, numeric strings),
// and semantic checks via an LLM judge with a deterministic grounding
// fallback. Tiers run syntactic -> transformation -> semantic; any
// syntactic issue stops the pipeline before a judge is consulted.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agentguard/core.hpp"
#include "agentguard/judge.hpp"
#include "agentguard/text.hpp"

namespace agentguard {

enum class IssueTier { Syntactic, Semantic, Transformation };

enum class IssueCategory {
    NonexistentTool,
    UnknownArgument,
    MissingRequired,
    TypeMismatch,
    SchemaViolation,
    WrongFunctionSelection,
    UngroundedParameter,
    HallucinatedValue,
    ValueFormatMisaligned,
    UnmetPrerequisite,
    UnconvertibleFormat,
    AmbiguousConversion,
};

inline const char* to_string(IssueTier t) {
    switch (t) {
        case IssueTier::Syntactic: return "SYNTACTIC";
        case IssueTier::Semantic: return "SEMANTIC";
        case IssueTier::Transformation: return "TRANSFORMATION";
    }
    return "?";
}

inline const char* to_string(IssueCategory c) {
    switch (c) {
        case IssueCategory::NonexistentTool: return "NONEXISTENT_TOOL";
        case IssueCategory::UnknownArgument: return "UNKNOWN_ARGUMENT";
        case IssueCategory::MissingRequired: return "MISSING_REQUIRED";
        case IssueCategory::TypeMismatch: return "TYPE_MISMATCH";
        case IssueCategory::SchemaViolation: return "SCHEMA_VIOLATION";
        case IssueCategory::WrongFunctionSelection: return "WRONG_FUNCTION_SELECTION";
        case IssueCategory::UngroundedParameter: return "UNGROUNDED_PARAMETER";
        case IssueCategory::HallucinatedValue: return "HALLUCINATED_VALUE";
        case IssueCategory::ValueFormatMisaligned: return "VALUE_FORMAT_MISALIGNED";
        case IssueCategory::UnmetPrerequisite: return "UNMET_PREREQUISITE";
        case IssueCategory::UnconvertibleFormat: return "UNCONVERTIBLE_FORMAT";
        case IssueCategory::AmbiguousConversion: return "AMBIGUOUS_CONVERSION";
    }
    return "?";
}

// The reflection artifact fed back to the agent: every issue carries evidence
// and a concrete, non-empty correction suggestion.
struct ValidationIssue {
    IssueTier tier;
    IssueCategory category;
    std::string path;  // JSON pointer into arguments; empty for call-level issues
    std::string evidence;
    std::string suggestion;
};

inline json to_json(const ValidationIssue& i) {
    return json{{"tier", to_string(i.tier)},
                {"category", to_string(i.category)},
                {"path", i.path},
                {"evidence", i.evidence},
                {"suggestion", i.suggestion}};
}

struct RepairNote {
    std::string path;
    json from;
    json to;
    std::string rule;
};

struct ValidationReport {
    bool valid = true;
    std::vector<ValidationIssue> issues;
    std::optional<json> repaired_arguments;
    bool judge_consulted = false;
    std::vector<RepairNote> repair_notes;

    json to_json() const {
        json issues_json = json::array();
        for (const auto& i : issues) issues_json.push_back(agentguard::to_json(i));
        json j{{"valid", valid}, {"issues", issues_json}, {"judge_consulted", judge_consulted}};
        if (repaired_arguments) j["repaired_arguments"] = *repaired_arguments;
        if (!repair_notes.empty()) {
            json notes = json::array();
            for (const auto& n : repair_notes)
                notes.push_back(json{{"path", n.path}, {"from", n.from}, {"to", n.to}, {"rule", n.rule}});
            j["repairs"] = notes;
        }
        return j;
    }
};

struct SparcConfig {
    enum class FailMode { Open, Closed };
    FailMode fail_mode = FailMode::Open;
    bool semantic_enabled = true;
    std::string date_target = "iso8601";  // the only supported target
    size_t prompt_byte_budget = 16384;
};

namespace sparc_detail {

inline std::string nearest_name(const std::string& name, const std::vector<std::string>& candidates) {
    std::string best;
    size_t best_dist = std::numeric_limits<size_t>::max();
    for (const auto& c : candidates) {
        size_t d = text::levenshtein(name, c);
        if (d < best_dist) {
            best_dist = d;
            best = c;
        }
    }
    return best;
}

// Resolves a JSON-pointer path to the schema node governing that location.
inline const SchemaNode* resolve_schema(const SchemaNode& root, const std::string& pointer) {
    const SchemaNode* node = &root;
    if (pointer.empty()) return node;
    size_t pos = 1;  // skip leading '/'
    while (pos <= pointer.size()) {
        size_t next = pointer.find('/', pos);
        std::string token = pointer.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        // unescape RFC 6901
        std::string key;
        for (size_t i = 0; i < token.size(); ++i) {
            if (token[i] == '~' && i + 1 < token.size()) {
                key.push_back(token[i + 1] == '0' ? '~' : '/');
                ++i;
            } else {
                key.push_back(token[i]);
            }
        }
        if (node->kind == SchemaKind::Object) {
            auto it = node->properties.find(key);
            if (it == node->properties.end()) return nullptr;
            node = &it->second;
        } else if (node->kind == SchemaKind::Array) {
            if (!node->items) return nullptr;
            node = node->items.get();
        } else {
            return nullptr;
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return node;
}

// ---- date conversion -------------------------------------------------------

struct DateConversion {
    enum class Status { AlreadyIso, Converted, Ambiguous, Unconvertible };
    Status status = Status::Unconvertible;
    std::string iso;
    std::string rule;
};

inline int month_from_name(const std::string& word) {
    static const char* names[] = {"january", "february", "march",     "april",   "may",
                                  "june",    "july",     "august",    "september", "october",
                                  "november", "december"};
    std::string w = text::to_lower(word);
    for (int i = 0; i < 12; ++i) {
        std::string full = names[i];
        if (w == full || (w.size() == 3 && full.compare(0, 3, w) == 0)) return i + 1;
    }
    return 0;
}

inline std::string format_iso(int y, int m, int d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

inline DateConversion convert_date(const std::string& raw) {
    std::string s = text::trim(raw);
    if (detail::is_iso_date(s)) return {DateConversion::Status::AlreadyIso, s, "iso8601"};

    // "Month D, YYYY" (full or 3-letter month, comma optional)
    {
        size_t i = 0;
        std::string word;
        while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) word.push_back(s[i++]);
        int month = word.empty() ? 0 : month_from_name(word);
        if (month) {
            while (i < s.size() && s[i] == ' ') ++i;
            size_t day_start = i;
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            if (i > day_start && i - day_start <= 2) {
                int day = std::stoi(s.substr(day_start, i - day_start));
                if (i < s.size() && s[i] == ',') ++i;
                while (i < s.size() && s[i] == ' ') ++i;
                if (i + 4 == s.size() && detail::all_digits(s.substr(i, 4))) {
                    int year = std::stoi(s.substr(i, 4));
                    if (detail::valid_calendar_date(year, month, day))
                        return {DateConversion::Status::Converted, format_iso(year, month, day),
                                "month-name"};
                }
            }
        }
    }

    // Slash forms. Split into 3 numeric fields first.
    {
        int fields[3] = {0, 0, 0};
        size_t lens[3] = {0, 0, 0};
        size_t i = 0;
        int nf = 0;
        bool shape_ok = true;
        while (i < s.size() && nf < 3) {
            size_t start = i;
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            if (i == start) { shape_ok = false; break; }
            fields[nf] = std::stoi(s.substr(start, i - start));
            lens[nf] = i - start;
            ++nf;
            if (nf < 3) {
                if (i < s.size() && s[i] == '/') ++i;
                else { shape_ok = false; break; }
            }
        }
        if (shape_ok && nf == 3 && i == s.size()) {
            if (lens[0] == 4 && lens[1] <= 2 && lens[2] <= 2) {
                // YYYY/MM/DD
                if (detail::valid_calendar_date(fields[0], fields[1], fields[2]))
                    return {DateConversion::Status::Converted,
                            format_iso(fields[0], fields[1], fields[2]), "ymd-slash"};
                return {DateConversion::Status::Unconvertible, "", ""};
            }
            if (lens[0] <= 2 && lens[1] <= 2 && lens[2] == 4) {
                // NN/NN/YYYY: day/month and month/day readings
                int a = fields[0], b = fields[1], y = fields[2];
                if (a <= 12 && b <= 12)
                    return {DateConversion::Status::Ambiguous, "", "day-month-slash"};
                bool as_dmy = detail::valid_calendar_date(y, b, a);
                bool as_mdy = detail::valid_calendar_date(y, a, b);
                if (as_dmy && !as_mdy)
                    return {DateConversion::Status::Converted, format_iso(y, b, a),
                            "slash-disambiguated-dmy"};
                if (as_mdy && !as_dmy)
                    return {DateConversion::Status::Converted, format_iso(y, a, b),
                            "slash-disambiguated-mdy"};
                return {DateConversion::Status::Unconvertible, "", ""};
            }
        }
    }

    return {DateConversion::Status::Unconvertible, "", ""};
}

// ---- currency / numeric strings --------------------------------------------

inline std::optional<double> parse_currency(const std::string& raw) {
    std::string s = text::trim(raw);
    static const char* symbols[] = {"$", "\xE2\x82\xAC" /* € */, "\xC2\xA3" /* £ */,
                                    "\xC2\xA5" /* ¥ */};
    bool negative = false;
    if (!s.empty() && s.front() == '-') { negative = true; s.erase(0, 1); }
    for (const char* sym : symbols) {
        size_t n = std::strlen(sym);
        if (s.compare(0, n, sym) == 0) { s.erase(0, n); break; }
        if (s.size() >= n && s.compare(s.size() - n, n, sym) == 0) { s.erase(s.size() - n); break; }
    }
    s = text::trim(s);
    if (!s.empty() && s.front() == '-') { negative = !negative; s.erase(0, 1); }
    std::string digits;
    digits.reserve(s.size());
    for (char c : s) {
        if (c == ',' || c == ' ') continue;  // thousands separators
        digits.push_back(c);
    }
    if (!detail::is_plain_decimal(digits)) return std::nullopt;
    double v = std::stod(digits);
    return negative ? -v : v;
}

inline std::optional<double> parse_plain_number(const std::string& raw) {
    std::string s = text::trim(raw);
    if (!detail::is_plain_decimal(s)) return std::nullopt;
    return std::stod(s);
}

// Unique case-insensitive enum match; empty when none or not unique.
inline std::optional<std::string> enum_ci_match(const std::string& value,
                                                const std::vector<json>& enum_values) {
    std::string lower = text::to_lower(value);
    std::optional<std::string> found;
    int hits = 0;
    for (const auto& e : enum_values) {
        if (!e.is_string()) continue;
        if (text::to_lower(e.get<std::string>()) == lower) {
            ++hits;
            found = e.get<std::string>();
        }
    }
    if (hits == 1) return found;
    return std::nullopt;
}

// True when the transformation tier has a rule for this (value, node) pair,
// so the syntactic tier should leave it alone.
inline bool transform_can_handle(const json& value, const SchemaNode& node,
                                 ViolationCategory category) {
    switch (category) {
        case ViolationCategory::FormatMismatch:
            return true;  // all format handling lives in the transformation tier
        case ViolationCategory::TypeMismatch:
            if ((node.kind == SchemaKind::Number || node.kind == SchemaKind::Integer) &&
                value.is_string()) {
                const auto& s = value.get_ref<const std::string&>();
                std::optional<double> parsed = node.format == SchemaFormat::Currency
                                                   ? parse_currency(s)
                                                   : parse_plain_number(s);
                if (!parsed) return false;
                return node.kind == SchemaKind::Number || *parsed == std::floor(*parsed);
            }
            return false;
        case ViolationCategory::EnumMismatch:
            return value.is_string() &&
                   enum_ci_match(value.get<std::string>(), node.enum_values).has_value();
        default:
            return false;
    }
}

inline std::string schema_kind_at(const SchemaNode& root, const std::string& pointer) {
    const SchemaNode* node = resolve_schema(root, pointer);
    return node ? to_string(node->kind) : "value";
}

}  // namespace sparc_detail

// ---------------------------------------------------------------------------
// Syntactic tier
// ---------------------------------------------------------------------------

inline std::vector<ValidationIssue> validate_syntactic(const ToolCall& call,
                                                       const ToolRegistry& registry) {
    std::vector<ValidationIssue> issues;

    auto spec_it = registry.find(call.tool_name);
    if (spec_it == registry.end()) {
        std::vector<std::string> names;
        names.reserve(registry.size());
        for (const auto& [name, _] : registry) names.push_back(name);
        std::string nearest = sparc_detail::nearest_name(call.tool_name, names);
        std::string suggestion = nearest.empty()
                                     ? "Register the tool before calling it."
                                     : "Did you mean '" + nearest + "'?";
        issues.push_back({IssueTier::Syntactic, IssueCategory::NonexistentTool, "",
                          "tool '" + call.tool_name + "' is not in the registry", suggestion});
        return issues;
    }

    const ToolSpec& spec = spec_it->second;
    for (const SchemaViolation& v : validate(call.arguments, spec.parameters)) {
        const SchemaNode* node = sparc_detail::resolve_schema(spec.parameters, v.path);
        if (node && sparc_detail::transform_can_handle(
                        call.arguments.contains(json::json_pointer(v.path))
                            ? call.arguments.at(json::json_pointer(v.path))
                            : json(),
                        *node, v.category)) {
            continue;  // the transformation tier repairs this one
        }
        switch (v.category) {
            case ViolationCategory::MissingRequired: {
                std::string field = v.path.substr(v.path.rfind('/') + 1);
                issues.push_back({IssueTier::Syntactic, IssueCategory::MissingRequired, v.path,
                                  "tool spec requires '" + field + "' (" + v.expected + ")",
                                  "Add the required argument '" + field + "' of kind " +
                                      sparc_detail::schema_kind_at(spec.parameters, v.path) + "."});
                break;
            }
            case ViolationCategory::UnknownArgument: {
                std::string field = v.path.substr(v.path.rfind('/') + 1);
                std::vector<std::string> declared;
                const SchemaNode* parent = sparc_detail::resolve_schema(
                    spec.parameters, v.path.substr(0, v.path.rfind('/')));
                if (parent)
                    for (const auto& [name, _] : parent->properties) declared.push_back(name);
                std::string nearest = sparc_detail::nearest_name(field, declared);
                std::string suggestion =
                    nearest.empty() ? "Remove the argument '" + field + "'."
                                    : "Remove it, or did you mean '" + nearest + "'?";
                issues.push_back({IssueTier::Syntactic, IssueCategory::UnknownArgument, v.path,
                                  "'" + field + "' is not declared in the tool parameters",
                                  suggestion});
                break;
            }
            case ViolationCategory::TypeMismatch:
                issues.push_back({IssueTier::Syntactic, IssueCategory::TypeMismatch, v.path,
                                  "expected " + v.expected + ", got " + v.actual,
                                  "Change the value at '" + v.path + "' to kind " + v.expected + "."});
                break;
            case ViolationCategory::EnumMismatch:
            case ViolationCategory::FormatMismatch:
                issues.push_back({IssueTier::Syntactic, IssueCategory::SchemaViolation, v.path,
                                  "expected " + v.expected + ", got " + v.actual,
                                  "Use " + v.expected + "."});
                break;
        }
    }
    return issues;
}

// ---------------------------------------------------------------------------
// Transformation tier
// ---------------------------------------------------------------------------

struct TransformResult {
    std::vector<ValidationIssue> issues;
    std::optional<json> repaired;  // full arguments object with repairs applied
    std::vector<RepairNote> notes;
};

namespace sparc_detail {

inline void transform_walk(const json& value, const SchemaNode& node, const std::string& path,
                           json& repaired, bool& any_repair, TransformResult& out) {
    auto record_repair = [&](const json& to, const std::string& rule) {
        repaired.at(json::json_pointer(path)) = to;
        any_repair = true;
        out.notes.push_back({path, value, to, rule});
    };

    if (value.is_string()) {
        const std::string& s = value.get_ref<const std::string&>();
        if (node.format == SchemaFormat::Date) {
            DateConversion conv = convert_date(s);
            switch (conv.status) {
                case DateConversion::Status::AlreadyIso:
                    break;
                case DateConversion::Status::Converted:
                    record_repair(json(conv.iso), "date:" + conv.rule);
                    break;
                case DateConversion::Status::Ambiguous:
                    out.issues.push_back(
                        {IssueTier::Transformation, IssueCategory::AmbiguousConversion, path,
                         "'" + s + "' reads as both day/month and month/day",
                         "Restate the date unambiguously, e.g. ISO-8601 (YYYY-MM-DD)."});
                    break;
                case DateConversion::Status::Unconvertible:
                    out.issues.push_back(
                        {IssueTier::Transformation, IssueCategory::UnconvertibleFormat, path,
                         "'" + s + "' is not a recognizable date",
                         "Provide the date as ISO-8601 (YYYY-MM-DD)."});
                    break;
            }
            return;
        }
        if (node.kind == SchemaKind::Number || node.kind == SchemaKind::Integer) {
            std::optional<double> parsed = node.format == SchemaFormat::Currency
                                               ? parse_currency(s)
                                               : parse_plain_number(s);
            if (parsed && (node.kind == SchemaKind::Number || *parsed == std::floor(*parsed))) {
                json repaired_value = node.kind == SchemaKind::Integer
                                          ? json(static_cast<int64_t>(*parsed))
                                          : json(*parsed);
                record_repair(repaired_value,
                              node.format == SchemaFormat::Currency ? "currency" : "numeric-string");
            } else {
                out.issues.push_back(
                    {IssueTier::Transformation, IssueCategory::UnconvertibleFormat, path,
                     "'" + s + "' cannot be parsed as " + std::string(to_string(node.kind)),
                     "Provide a plain " + std::string(to_string(node.kind)) + " value."});
            }
            return;
        }
        if (!node.enum_values.empty()) {
            bool exact = false;
            for (const auto& e : node.enum_values)
                if (e == value) { exact = true; break; }
            if (!exact) {
                auto canonical = enum_ci_match(s, node.enum_values);
                if (canonical) {
                    record_repair(json(*canonical), "enum-case");
                } else {
                    out.issues.push_back(
                        {IssueTier::Transformation, IssueCategory::UnconvertibleFormat, path,
                         "'" + s + "' is not " + detail::enum_list_text(node.enum_values),
                         "Use " + detail::enum_list_text(node.enum_values) + "."});
                }
            }
            return;
        }
        return;
    }

    if (value.is_object() && node.kind == SchemaKind::Object) {
        for (auto it = value.begin(); it != value.end(); ++it) {
            auto prop = node.properties.find(it.key());
            if (prop == node.properties.end()) continue;  // unknown keys are syntactic business
            transform_walk(it.value(), prop->second, path + "/" + text::pointer_escape(it.key()),
                           repaired, any_repair, out);
        }
        return;
    }

    if (value.is_array() && node.kind == SchemaKind::Array && node.items) {
        for (size_t i = 0; i < value.size(); ++i)
            transform_walk(value[i], *node.items, path + "/" + std::to_string(i), repaired,
                           any_repair, out);
        return;
    }
}

}  // namespace sparc_detail

// Repairs are returned, never applied in place. Ambiguous conversions are
// flagged and never guessed.
inline TransformResult validate_transform(const ToolCall& call, const ToolSpec& spec) {
    TransformResult out;
    json repaired = call.arguments;
    bool any_repair = false;
    sparc_detail::transform_walk(call.arguments, spec.parameters, "", repaired, any_repair, out);
    if (any_repair) out.repaired = std::move(repaired);
    return out;
}

// ---------------------------------------------------------------------------
// Semantic tier
// ---------------------------------------------------------------------------

namespace sparc_detail {

// Numeric tokens in the conversation, commas stripped so "1,234.50" counts.
inline std::vector<double> numeric_tokens(const std::string& s) {
    std::vector<double> out;
    size_t i = 0;
    while (i < s.size()) {
        if (std::isdigit(static_cast<unsigned char>(s[i]))) {
            std::string token;
            bool seen_dot = false;
            while (i < s.size()) {
                char c = s[i];
                if (std::isdigit(static_cast<unsigned char>(c))) token.push_back(c);
                else if (c == ',') { /* thousands separator */ }
                else if (c == '.' && !seen_dot && i + 1 < s.size() &&
                         std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
                    token.push_back('.');
                    seen_dot = true;
                } else break;
                ++i;
            }
            if (!token.empty()) out.push_back(std::stod(token));
        } else {
            ++i;
        }
    }
    return out;
}

struct GroundingContext {
    std::string folded_text;       // casefolded, whitespace-collapsed user+tool content
    std::vector<double> numbers;   // numeric tokens extracted from the same content

    static GroundingContext from_history(const std::vector<Message>& history) {
        std::string joined;
        for (const auto& m : history) {
            if (m.role != Role::User && m.role != Role::Tool) continue;
            joined += m.content;
            joined += '\n';
        }
        GroundingContext ctx;
        ctx.folded_text = text::collapse_ws(text::to_lower(joined));
        ctx.numbers = numeric_tokens(joined);
        return ctx;
    }

    bool grounds_string(const std::string& v) const {
        std::string needle = text::collapse_ws(text::to_lower(v));
        if (needle.empty()) return true;
        return folded_text.find(needle) != std::string::npos;
    }

    bool grounds_number(double v) const {
        for (double n : numbers)
            if (n == v) return true;
        return false;
    }
};

inline void grounding_walk(const json& value, const SchemaNode* node, const std::string& path,
                           const GroundingContext& ctx, std::vector<ValidationIssue>& issues) {
    if (value.is_string()) {
        const std::string& s = value.get_ref<const std::string&>();
        if (node && !node->enum_values.empty()) {
            for (const auto& e : node->enum_values)
                if (e == value) return;  // spec-sanctioned value, grounded by the schema
            if (enum_ci_match(s, node->enum_values)) return;
        }
        if (!ctx.grounds_string(s)) {
            issues.push_back({IssueTier::Semantic, IssueCategory::HallucinatedValue, path,
                              "value '" + s + "' does not appear in the conversation",
                              "Use a value stated in the conversation, or ask the user for it."});
        }
        return;
    }
    if (value.is_number()) {
        if (node && !node->enum_values.empty()) {
            for (const auto& e : node->enum_values)
                if (e == value) return;
        }
        if (!ctx.grounds_number(value.get<double>())) {
            issues.push_back({IssueTier::Semantic, IssueCategory::HallucinatedValue, path,
                              "value " + value.dump() + " does not appear in the conversation",
                              "Use a value stated in the conversation, or ask the user for it."});
        }
        return;
    }
    if (value.is_object()) {
        for (auto it = value.begin(); it != value.end(); ++it) {
            const SchemaNode* child = nullptr;
            if (node && node->kind == SchemaKind::Object) {
                auto prop = node->properties.find(it.key());
                if (prop != node->properties.end()) child = &prop->second;
            }
            grounding_walk(it.value(), child, path + "/" + text::pointer_escape(it.key()), ctx,
                           issues);
        }
        return;
    }
    if (value.is_array()) {
        const SchemaNode* child = node && node->kind == SchemaKind::Array ? node->items.get() : nullptr;
        for (size_t i = 0; i < value.size(); ++i)
            grounding_walk(value[i], child, path + "/" + std::to_string(i), ctx, issues);
    }
    // booleans and nulls carry no groundable content
}

struct JudgeDimension {
    const char* name;
    IssueCategory category;
    const char* question;
};

inline const std::vector<JudgeDimension>& judge_dimensions() {
    static const std::vector<JudgeDimension> dims = {
        {"function_selection", IssueCategory::WrongFunctionSelection,
         "Is this tool the appropriate choice for the user's request, given the other tools the "
         "conversation mentions?"},
        {"parameter_grounding", IssueCategory::UngroundedParameter,
         "Is every argument value traceable to the conversation or the tool specification?"},
        {"hallucinated_values", IssueCategory::HallucinatedValue,
         "Does any argument value look invented rather than taken from the conversation?"},
        {"value_format_alignment", IssueCategory::ValueFormatMisaligned,
         "Does every argument value match the format the tool specification describes?"},
        {"unmet_prerequisites", IssueCategory::UnmetPrerequisite,
         "Per the tool description, must any other tool call precede this one, and if so has it "
         "happened in the conversation?"},
    };
    return dims;
}

inline std::string render_history(const std::vector<Message>& history, size_t byte_budget) {
    std::string out;
    // Most recent messages matter most; render from the tail until the budget fills.
    std::vector<std::string> lines;
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
        std::string line = std::string(to_string(it->role)) + ": " + it->content;
        if (out.size() + line.size() + 1 > byte_budget) break;
        lines.push_back(line);
        out += line;
        out += '\n';
    }
    std::string ordered;
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        ordered += *it;
        ordered += '\n';
    }
    return ordered;
}

// Judge replies are constrained to "PASS" or "FAIL" plus path/evidence/
// suggestion lines. Anything else counts as a pass with a logged warning.
inline std::optional<ValidationIssue> parse_judge_verdict(const std::string& reply,
                                                          const JudgeDimension& dim) {
    std::string t = text::trim(reply);
    std::string upper_head = text::to_lower(t.substr(0, 4));
    if (upper_head == "pass" || t.empty()) return std::nullopt;
    if (upper_head != "fail") {
        warn("judge reply for dimension '" + std::string(dim.name) +
             "' was not PASS/FAIL; treating as pass");
        return std::nullopt;
    }
    ValidationIssue issue{IssueTier::Semantic, dim.category, "", "", ""};
    std::istringstream in(t);
    std::string line;
    std::getline(in, line);  // the FAIL line
    while (std::getline(in, line)) {
        std::string lower = text::to_lower(line);
        auto value_after = [&](size_t prefix_len) { return text::trim(line.substr(prefix_len)); };
        if (lower.rfind("path:", 0) == 0) issue.path = value_after(5);
        else if (lower.rfind("evidence:", 0) == 0) issue.evidence = value_after(9);
        else if (lower.rfind("suggestion:", 0) == 0) issue.suggestion = value_after(11);
    }
    if (issue.evidence.empty())
        issue.evidence = "judge flagged " + std::string(dim.name);
    if (issue.suggestion.empty())
        issue.suggestion = "Revise the tool call to address the " + std::string(dim.name) + " concern.";
    return issue;
}

}  // namespace sparc_detail

// With a judge: one call per check dimension, sequential so issue order is
// deterministic. Without one: the grounding fallback, which only ever emits
// HALLUCINATED_VALUE (the judge-only categories need a judge).
inline std::vector<ValidationIssue> validate_semantic(const ToolCall& call, const ToolSpec& spec,
                                                      const std::vector<Message>& history,
                                                      JudgeClient* judge,
                                                      size_t prompt_byte_budget = 16384) {
    std::vector<ValidationIssue> issues;

    if (!judge) {
        auto ctx = sparc_detail::GroundingContext::from_history(history);
        sparc_detail::grounding_walk(call.arguments, &spec.parameters, "", ctx, issues);
        return issues;
    }

    std::string spec_text = "tool: " + spec.name + "\ndescription: " + spec.description +
                            "\nparameters: " + schema_to_document(spec.parameters).dump();
    std::string call_text = "tool_name: " + call.tool_name +
                            "\narguments: " + call.arguments.dump();
    // Budget the pieces so the rendered prompt stays bounded for any input.
    size_t slice = prompt_byte_budget / 3;
    spec_text = text::truncate_utf8(spec_text, slice);
    call_text = text::truncate_utf8(call_text, slice);
    std::string history_text = sparc_detail::render_history(history, slice);

    for (const auto& dim : sparc_detail::judge_dimensions()) {
        JudgeRequest req;
        req.system_prompt =
            "You validate one dimension of a candidate tool call before it executes. Dimension: " +
            std::string(dim.name) + ". " + dim.question +
            " Reply exactly 'PASS' if acceptable. Otherwise reply 'FAIL' on the first line, then "
            "'path: <json pointer into arguments>', 'evidence: <what in the context triggered "
            "this>', 'suggestion: <concrete correction>'.";
        req.user_prompt = "Conversation:\n" + history_text + "\nTool specification:\n" + spec_text +
                          "\nCandidate call:\n" + call_text;
        req.temperature = 0.0;
        JudgeResponse res = judge->complete(req);
        if (auto issue = sparc_detail::parse_judge_verdict(res.text, dim)) issues.push_back(*issue);
    }
    return issues;
}

// ---------------------------------------------------------------------------
// Orchestrator
// ---------------------------------------------------------------------------

inline ValidationReport sparc_validate(const ToolCall& call, const ToolRegistry& registry,
                                       const std::vector<Message>& history, JudgeClient* judge,
                                       const SparcConfig& config = {}) {
    ValidationReport report;

    std::vector<ValidationIssue> syntactic = validate_syntactic(call, registry);
    if (!syntactic.empty()) {
        report.valid = false;
        report.issues = std::move(syntactic);
        return report;  // judge is never consulted on a syntactically invalid call
    }

    const ToolSpec& spec = registry.at(call.tool_name);

    TransformResult transform = validate_transform(call, spec);
    for (auto& issue : transform.issues) report.issues.push_back(std::move(issue));
    report.repair_notes = std::move(transform.notes);

    ToolCall effective = call;
    if (transform.repaired) effective.arguments = *transform.repaired;

    if (config.semantic_enabled) {
        try {
            if (judge) report.judge_consulted = true;
            std::vector<ValidationIssue> semantic = validate_semantic(
                effective, spec, history, judge, config.prompt_byte_budget);
            for (auto& issue : semantic) report.issues.push_back(std::move(issue));
        } catch (const JudgeUnavailable& e) {
            if (config.fail_mode == SparcConfig::FailMode::Closed) throw;
            warn(std::string("judge unavailable, failing open: ") + e.what());
        }
    }

    // Repairs only surface when the repaired arguments actually conform.
    if (transform.repaired && validate(*transform.repaired, spec.parameters).empty())
        report.repaired_arguments = std::move(transform.repaired);

    report.valid = report.issues.empty();
    return report;
}

}  // namespace agentguard
