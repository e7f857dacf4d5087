#pragma once
// Self-contained JSON-Schema subset engine.
//
// Supported keywords: type, properties, required, items, enum, format,
// description. Anything else is ignored with a recorded warning. Object
// validation is closed-world: keys not declared in `properties` are
// violations.

#include <json.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentguard/text.hpp"

namespace agentguard {

using json = nlohmann::json;

enum class SchemaKind { Object, Array, String, Number, Integer, Boolean, Null, Any };
enum class SchemaFormat { None, Date, DateTime, Currency };

inline const char* to_string(SchemaKind k) {
    switch (k) {
        case SchemaKind::Object: return "object";
        case SchemaKind::Array: return "array";
        case SchemaKind::String: return "string";
        case SchemaKind::Number: return "number";
        case SchemaKind::Integer: return "integer";
        case SchemaKind::Boolean: return "boolean";
        case SchemaKind::Null: return "null";
        case SchemaKind::Any: return "any";
    }
    return "?";
}

inline const char* to_string(SchemaFormat f) {
    switch (f) {
        case SchemaFormat::None: return "none";
        case SchemaFormat::Date: return "date";
        case SchemaFormat::DateTime: return "date-time";
        case SchemaFormat::Currency: return "currency";
    }
    return "?";
}

struct SchemaNode {
    SchemaKind kind = SchemaKind::Any;
    std::map<std::string, SchemaNode> properties;  // object only
    std::vector<std::string> required;             // object only
    std::shared_ptr<const SchemaNode> items;       // array only; null means any element
    std::vector<json> enum_values;
    SchemaFormat format = SchemaFormat::None;
    std::string description;
};

enum class ViolationCategory {
    MissingRequired,
    UnknownArgument,
    TypeMismatch,
    EnumMismatch,
    FormatMismatch,
};

inline const char* to_string(ViolationCategory c) {
    switch (c) {
        case ViolationCategory::MissingRequired: return "MISSING_REQUIRED";
        case ViolationCategory::UnknownArgument: return "UNKNOWN_ARGUMENT";
        case ViolationCategory::TypeMismatch: return "TYPE_MISMATCH";
        case ViolationCategory::EnumMismatch: return "ENUM_MISMATCH";
        case ViolationCategory::FormatMismatch: return "FORMAT_MISMATCH";
    }
    return "?";
}

struct SchemaViolation {
    std::string path;  // JSON pointer into the validated value
    ViolationCategory category;
    std::string expected;
    std::string actual;
};

class SchemaParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool is_leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int y, int m) {
    static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m < 1 || m > 12) return 0;
    if (m == 2 && is_leap_year(y)) return 29;
    return d[m - 1];
}

inline bool valid_calendar_date(int y, int m, int d) {
    return m >= 1 && m <= 12 && d >= 1 && d <= days_in_month(y, m);
}

inline bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

// YYYY-MM-DD with a valid calendar date.
inline bool is_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    if (!all_digits(s.substr(0, 4)) || !all_digits(s.substr(5, 2)) || !all_digits(s.substr(8, 2)))
        return false;
    int y = std::stoi(std::string(s.substr(0, 4)));
    int m = std::stoi(std::string(s.substr(5, 2)));
    int d = std::stoi(std::string(s.substr(8, 2)));
    return valid_calendar_date(y, m, d);
}

// ISO date, 'T' or space, HH:MM:SS, optional fraction and zone offset.
inline bool is_iso_datetime(std::string_view s) {
    if (s.size() < 19) return false;
    if (!is_iso_date(s.substr(0, 10))) return false;
    if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') return false;
    if (!all_digits(s.substr(11, 2)) || s[13] != ':' || !all_digits(s.substr(14, 2)) ||
        s[16] != ':' || !all_digits(s.substr(17, 2)))
        return false;
    int hh = std::stoi(std::string(s.substr(11, 2)));
    int mm = std::stoi(std::string(s.substr(14, 2)));
    int ss = std::stoi(std::string(s.substr(17, 2)));
    if (hh > 23 || mm > 59 || ss > 60) return false;
    size_t i = 19;
    if (i < s.size() && s[i] == '.') {
        ++i;
        size_t start = i;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
        if (i == start) return false;
    }
    if (i == s.size()) return true;
    if (s[i] == 'Z' || s[i] == 'z') return i + 1 == s.size();
    if (s[i] == '+' || s[i] == '-') {
        std::string_view rest = s.substr(i + 1);
        if (rest.size() == 5 && rest[2] == ':')
            return all_digits(rest.substr(0, 2)) && all_digits(rest.substr(3, 2));
        if (rest.size() == 4) return all_digits(rest);
    }
    return false;
}

// A plain decimal amount, e.g. "1234.50" or "-3".
inline bool is_plain_decimal(std::string_view s) {
    size_t i = 0;
    if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
    size_t int_start = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i == int_start) return false;
    if (i == s.size()) return true;
    if (s[i] != '.') return false;
    ++i;
    size_t frac_start = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    return i == s.size() && i > frac_start;
}

inline bool value_matches_format(const std::string& s, SchemaFormat f) {
    switch (f) {
        case SchemaFormat::Date: return is_iso_date(s);
        case SchemaFormat::DateTime: return is_iso_datetime(s);
        case SchemaFormat::Currency: return is_plain_decimal(s);
        case SchemaFormat::None: return true;
    }
    return true;
}

inline bool is_integral_number(const json& v) {
    if (v.is_number_integer() || v.is_number_unsigned()) return true;
    if (v.is_number_float()) {
        double d = v.get<double>();
        return std::isfinite(d) && d == std::floor(d);
    }
    return false;
}

inline bool matches_kind(const json& v, SchemaKind k) {
    switch (k) {
        case SchemaKind::Object: return v.is_object();
        case SchemaKind::Array: return v.is_array();
        case SchemaKind::String: return v.is_string();
        case SchemaKind::Number: return v.is_number();
        case SchemaKind::Integer: return v.is_number() && is_integral_number(v);
        case SchemaKind::Boolean: return v.is_boolean();
        case SchemaKind::Null: return v.is_null();
        case SchemaKind::Any: return true;
    }
    return false;
}

inline std::string kind_of(const json& v) {
    switch (v.type()) {
        case json::value_t::object: return "object";
        case json::value_t::array: return "array";
        case json::value_t::string: return "string";
        case json::value_t::boolean: return "boolean";
        case json::value_t::number_integer:
        case json::value_t::number_unsigned: return "integer";
        case json::value_t::number_float: return "number";
        case json::value_t::null: return "null";
        default: return "unknown";
    }
}

inline std::string preview(const json& v, size_t max_bytes = 40) {
    std::string s = v.dump();
    if (s.size() > max_bytes) s = text::truncate_utf8(s, max_bytes) + "...";
    return s;
}

inline std::string enum_list_text(const std::vector<json>& values) {
    std::string out = "one of [";
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += values[i].dump();
    }
    out += "]";
    return out;
}

inline void validate_node(const json& value, const SchemaNode& node, const std::string& path,
                          std::vector<SchemaViolation>& out) {
    if (!matches_kind(value, node.kind)) {
        out.push_back({path, ViolationCategory::TypeMismatch, to_string(node.kind),
                       kind_of(value) + " (" + preview(value) + ")"});
        return;  // nothing below a type mismatch is meaningful
    }
    if (!node.enum_values.empty()) {
        bool hit = false;
        for (const auto& e : node.enum_values) {
            if (e == value) { hit = true; break; }  // numeric equality across int/float
        }
        if (!hit) {
            out.push_back({path, ViolationCategory::EnumMismatch, enum_list_text(node.enum_values),
                           preview(value)});
            return;
        }
    }
    if (node.format != SchemaFormat::None && value.is_string()) {
        const auto& s = value.get_ref<const std::string&>();
        if (!value_matches_format(s, node.format)) {
            out.push_back({path, ViolationCategory::FormatMismatch,
                           std::string("format ") + to_string(node.format), preview(value)});
        }
    }
    if (node.kind == SchemaKind::Object) {
        for (const auto& req : node.required) {
            if (!value.contains(req)) {
                out.push_back({path + "/" + text::pointer_escape(req),
                               ViolationCategory::MissingRequired,
                               "required property '" + req + "'", "absent"});
            }
        }
        for (auto it = value.begin(); it != value.end(); ++it) {
            auto prop = node.properties.find(it.key());
            std::string child_path = path + "/" + text::pointer_escape(it.key());
            if (prop == node.properties.end()) {
                out.push_back({child_path, ViolationCategory::UnknownArgument,
                               "a declared property", "'" + it.key() + "'"});
            } else {
                validate_node(it.value(), prop->second, child_path, out);
            }
        }
    } else if (node.kind == SchemaKind::Array && node.items) {
        for (size_t i = 0; i < value.size(); ++i) {
            validate_node(value[i], *node.items, path + "/" + std::to_string(i), out);
        }
    }
}

inline SchemaKind kind_from_string(const std::string& s, const std::string& at) {
    if (s == "object") return SchemaKind::Object;
    if (s == "array") return SchemaKind::Array;
    if (s == "string") return SchemaKind::String;
    if (s == "number") return SchemaKind::Number;
    if (s == "integer") return SchemaKind::Integer;
    if (s == "boolean") return SchemaKind::Boolean;
    if (s == "null") return SchemaKind::Null;
    if (s == "any") return SchemaKind::Any;
    throw SchemaParseError("unsupported type '" + s + "' at " + (at.empty() ? "/" : at));
}

inline SchemaKind scalar_kind_of(const json& v) {
    if (v.is_string()) return SchemaKind::String;
    if (v.is_boolean()) return SchemaKind::Boolean;
    if (v.is_null()) return SchemaKind::Null;
    if (v.is_number()) return is_integral_number(v) ? SchemaKind::Integer : SchemaKind::Number;
    return SchemaKind::Any;
}

inline SchemaNode parse_node(const json& doc, const std::string& at,
                             std::vector<std::string>* warnings) {
    if (!doc.is_object())
        throw SchemaParseError("schema node must be a JSON object at " + (at.empty() ? "/" : at));

    SchemaNode node;

    if (doc.contains("type")) {
        if (!doc["type"].is_string())
            throw SchemaParseError("'type' must be a string at " + (at.empty() ? "/" : at));
        node.kind = kind_from_string(doc["type"].get<std::string>(), at);
    } else if (doc.contains("properties") || doc.contains("required")) {
        node.kind = SchemaKind::Object;
    } else if (doc.contains("items")) {
        node.kind = SchemaKind::Array;
    } else if (doc.contains("enum") && doc["enum"].is_array() && !doc["enum"].empty()) {
        node.kind = scalar_kind_of(doc["enum"][0]);
    } else {
        throw SchemaParseError("missing 'type' and not inferable at " + (at.empty() ? "/" : at));
    }

    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string& key = it.key();
        if (key == "type" || key == "properties" || key == "required" || key == "items" ||
            key == "enum" || key == "format" || key == "description")
            continue;
        if (warnings)
            warnings->push_back("ignored unsupported keyword '" + key + "' at " +
                                (at.empty() ? "/" : at));
    }

    if (doc.contains("description") && doc["description"].is_string())
        node.description = doc["description"].get<std::string>();

    if (doc.contains("format")) {
        if (!doc["format"].is_string())
            throw SchemaParseError("'format' must be a string at " + (at.empty() ? "/" : at));
        std::string f = doc["format"].get<std::string>();
        if (f == "date") node.format = SchemaFormat::Date;
        else if (f == "date-time") node.format = SchemaFormat::DateTime;
        else if (f == "currency") node.format = SchemaFormat::Currency;
        else if (f == "none") node.format = SchemaFormat::None;
        else if (warnings)
            warnings->push_back("ignored unknown format '" + f + "' at " + (at.empty() ? "/" : at));
    }

    if (doc.contains("properties")) {
        if (!doc["properties"].is_object())
            throw SchemaParseError("'properties' must be an object at " + (at.empty() ? "/" : at));
        for (auto it = doc["properties"].begin(); it != doc["properties"].end(); ++it) {
            node.properties.emplace(
                it.key(),
                parse_node(it.value(), at + "/properties/" + text::pointer_escape(it.key()),
                           warnings));
        }
    }

    if (doc.contains("required")) {
        if (!doc["required"].is_array())
            throw SchemaParseError("'required' must be an array at " + (at.empty() ? "/" : at));
        for (const auto& r : doc["required"]) {
            if (!r.is_string())
                throw SchemaParseError("'required' entries must be strings at " +
                                       (at.empty() ? "/" : at));
            std::string name = r.get<std::string>();
            if (!node.properties.count(name))
                throw SchemaParseError("required property '" + name +
                                       "' is not declared in properties at " +
                                       (at.empty() ? "/" : at));
            node.required.push_back(name);
        }
    }

    if (doc.contains("items")) {
        node.items = std::make_shared<const SchemaNode>(
            parse_node(doc["items"], at + "/items", warnings));
    }

    if (doc.contains("enum")) {
        if (!doc["enum"].is_array() || doc["enum"].empty())
            throw SchemaParseError("'enum' must be a non-empty array at " +
                                   (at.empty() ? "/" : at));
        if (node.kind == SchemaKind::Object || node.kind == SchemaKind::Array)
            throw SchemaParseError("'enum' is only supported on scalar kinds at " +
                                   (at.empty() ? "/" : at));
        for (const auto& e : doc["enum"]) {
            if (!matches_kind(e, node.kind))
                throw SchemaParseError("enum value " + e.dump() + " does not match kind '" +
                                       to_string(node.kind) + "' at " + (at.empty() ? "/" : at));
            node.enum_values.push_back(e);
        }
    }

    return node;
}

}  // namespace detail

// Parses a schema document in the supported subset. Unsupported keywords are
// collected into `warnings` when provided; structural defects throw.
inline SchemaNode parse_schema(const json& document, std::vector<std::string>* warnings = nullptr) {
    return detail::parse_node(document, "", warnings);
}

// Validates `value` against `node`. Violations are data, never exceptions;
// an empty result means the value conforms. Results are sorted by path.
inline std::vector<SchemaViolation> validate(const json& value, const SchemaNode& node) {
    std::vector<SchemaViolation> out;
    detail::validate_node(value, node, "", out);
    std::stable_sort(out.begin(), out.end(),
                     [](const SchemaViolation& a, const SchemaViolation& b) { return a.path < b.path; });
    return out;
}

inline json to_json(const SchemaViolation& v) {
    return json{{"path", v.path},
                {"category", to_string(v.category)},
                {"expected", v.expected},
                {"actual", v.actual}};
}

// Renders a node back into its document form (supported keywords only).
inline json schema_to_document(const SchemaNode& node) {
    json doc{{"type", to_string(node.kind)}};
    if (!node.properties.empty() || node.kind == SchemaKind::Object) {
        json props = json::object();
        for (const auto& [name, child] : node.properties) props[name] = schema_to_document(child);
        if (node.kind == SchemaKind::Object) doc["properties"] = props;
    }
    if (!node.required.empty()) doc["required"] = node.required;
    if (node.items) doc["items"] = schema_to_document(*node.items);
    if (!node.enum_values.empty()) doc["enum"] = node.enum_values;
    if (node.format != SchemaFormat::None) doc["format"] = to_string(node.format);
    if (!node.description.empty()) doc["description"] = node.description;
    return doc;
}

}  // namespace agentguard
