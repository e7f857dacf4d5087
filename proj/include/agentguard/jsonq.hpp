#pragma once
// Restricted JSON query language: parser, sandboxed stream interpreter, and
// the generate-parse-execute-retry loop that turns a natural-language
// question plus a tool response into a small extracted value.
//
// The grammar admits no loops or recursion, so every program terminates; the
// interpreter reads nothing outside the document and never mutates it.
//
//   program    = step , { "|" , step }
//   step       = select | project | aggregate | path
//   path       = "." ident { "." ident | "[" integer "]" | "[]" }
//   select     = "select" "(" path comparator literal ")"
//   project    = "{" ident ":" path { "," ident ":" path } "}"
//   aggregate  = "count" | "sum" | "min" | "max" | "first" | "last" | "unique"
//   comparator = "==" | "!=" | "<=" | "<" | ">=" | ">"

#include <json.hpp>

#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "agentguard/core.hpp"
#include "agentguard/judge.hpp"
#include "agentguard/text.hpp"

namespace agentguard::jsonq {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

struct PathSeg {
    enum class Kind { Field, Index, Iterate };
    Kind kind = Kind::Field;
    std::string name;   // Field
    int64_t index = 0;  // Index; negative counts from the end
};

using QueryPath = std::vector<PathSeg>;

enum class Comparator { Eq, Ne, Lt, Le, Gt, Ge };

enum class AggOp { Count, Sum, Min, Max, First, Last, Unique };

inline const char* to_string(AggOp op) {
    switch (op) {
        case AggOp::Count: return "count";
        case AggOp::Sum: return "sum";
        case AggOp::Min: return "min";
        case AggOp::Max: return "max";
        case AggOp::First: return "first";
        case AggOp::Last: return "last";
        case AggOp::Unique: return "unique";
    }
    return "?";
}

struct QueryStep {
    enum class Kind { Path, Select, Project, Aggregate };
    Kind kind = Kind::Path;
    QueryPath path;                                          // Path
    QueryPath select_path;                                   // Select
    Comparator comparator = Comparator::Eq;                  // Select
    json literal;                                            // Select
    std::vector<std::pair<std::string, QueryPath>> fields;   // Project
    AggOp agg = AggOp::Count;                                // Aggregate
};

struct QueryProgram {
    std::vector<QueryStep> steps;
    std::string source_text;
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class QueryParseError : public std::runtime_error {
public:
    QueryParseError(size_t offset, std::vector<std::string> expected, const std::string& found)
        : std::runtime_error(render(offset, expected, found)),
          offset_(offset),
          expected_(std::move(expected)) {}

    size_t offset() const { return offset_; }
    const std::vector<std::string>& expected() const { return expected_; }

private:
    static std::string render(size_t offset, const std::vector<std::string>& expected,
                              const std::string& found) {
        std::string msg = "parse error at byte " + std::to_string(offset) + ": expected ";
        for (size_t i = 0; i < expected.size(); ++i) {
            if (i) msg += " or ";
            msg += expected[i];
        }
        msg += ", found " + found;
        return msg;
    }

    size_t offset_;
    std::vector<std::string> expected_;
};

class ExecError : public std::runtime_error {
public:
    enum class Kind { MissingField, Type, Limit };

    ExecError(Kind kind, const std::string& message, json details = json::object())
        : std::runtime_error(message), kind_(kind), details_(std::move(details)) {}

    Kind kind() const { return kind_; }
    const json& details() const { return details_; }

private:
    Kind kind_;
    json details_;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace parser_detail {

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    QueryProgram parse() {
        QueryProgram prog;
        prog.source_text = std::string(src_);
        skip_ws();
        prog.steps.push_back(parse_step());
        skip_ws();
        while (!eof() && peek() == '|') {
            ++pos_;
            skip_ws();
            prog.steps.push_back(parse_step());
            skip_ws();
        }
        if (!eof()) fail({"'|'", "end of query"});
        return prog;
    }

private:
    [[noreturn]] void fail(std::vector<std::string> expected) {
        std::string found = eof() ? "end of input" : "'" + std::string(1, peek()) + "'";
        throw QueryParseError(pos_, std::move(expected), found);
    }

    bool eof() const { return pos_ >= src_.size(); }
    char peek() const { return src_[pos_]; }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
    }

    void expect(char c, const char* what) {
        if (eof() || peek() != c) fail({what});
        ++pos_;
    }

    static bool ident_start(char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
    }
    static bool ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    }

    std::string parse_ident() {
        if (eof() || !ident_start(peek())) fail({"identifier"});
        size_t start = pos_;
        while (!eof() && ident_char(peek())) ++pos_;
        return std::string(src_.substr(start, pos_ - start));
    }

    std::optional<std::string> peek_word() const {
        if (pos_ >= src_.size() || !ident_start(src_[pos_])) return std::nullopt;
        size_t end = pos_;
        while (end < src_.size() && ident_char(src_[end])) ++end;
        return std::string(src_.substr(pos_, end - pos_));
    }

    QueryStep parse_step() {
        if (eof()) fail({"'.'", "'{'", "'select'", "aggregate name"});
        if (peek() == '.') {
            QueryStep step;
            step.kind = QueryStep::Kind::Path;
            step.path = parse_path();
            return step;
        }
        if (peek() == '{') return parse_project();
        auto word = peek_word();
        if (word) {
            if (*word == "select") return parse_select();
            static const std::pair<const char*, AggOp> aggs[] = {
                {"count", AggOp::Count}, {"sum", AggOp::Sum},   {"min", AggOp::Min},
                {"max", AggOp::Max},     {"first", AggOp::First}, {"last", AggOp::Last},
                {"unique", AggOp::Unique}};
            for (const auto& [name, op] : aggs) {
                if (*word == name) {
                    pos_ += word->size();
                    QueryStep step;
                    step.kind = QueryStep::Kind::Aggregate;
                    step.agg = op;
                    return step;
                }
            }
        }
        fail({"'.'", "'{'", "'select'", "one of count/sum/min/max/first/last/unique"});
    }

    QueryPath parse_path() {
        QueryPath path;
        expect('.', "'.'");
        path.push_back({PathSeg::Kind::Field, parse_ident(), 0});
        while (!eof()) {
            if (peek() == '.') {
                ++pos_;
                path.push_back({PathSeg::Kind::Field, parse_ident(), 0});
            } else if (peek() == '[') {
                ++pos_;
                skip_ws();
                if (!eof() && peek() == ']') {
                    ++pos_;
                    path.push_back({PathSeg::Kind::Iterate, "", 0});
                    continue;
                }
                size_t start = pos_;
                if (!eof() && (peek() == '-' || peek() == '+')) ++pos_;
                while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
                if (pos_ == start || (pos_ == start + 1 && !std::isdigit(static_cast<unsigned char>(src_[start]))))
                    fail({"integer index", "']'"});
                int64_t idx = std::stoll(std::string(src_.substr(start, pos_ - start)));
                skip_ws();
                expect(']', "']'");
                path.push_back({PathSeg::Kind::Index, "", idx});
            } else {
                break;
            }
        }
        return path;
    }

    QueryStep parse_select() {
        pos_ += 6;  // "select"
        skip_ws();
        expect('(', "'('");
        skip_ws();
        QueryStep step;
        step.kind = QueryStep::Kind::Select;
        step.select_path = parse_path();
        skip_ws();
        step.comparator = parse_comparator();
        skip_ws();
        step.literal = parse_literal();
        skip_ws();
        expect(')', "')'");
        return step;
    }

    Comparator parse_comparator() {
        if (eof()) fail({"comparator"});
        char a = peek();
        char b = pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0';
        if (a == '=' && b == '=') { pos_ += 2; return Comparator::Eq; }
        if (a == '!' && b == '=') { pos_ += 2; return Comparator::Ne; }
        if (a == '<') { pos_ += (b == '=') ? 2 : 1; return b == '=' ? Comparator::Le : Comparator::Lt; }
        if (a == '>') { pos_ += (b == '=') ? 2 : 1; return b == '=' ? Comparator::Ge : Comparator::Gt; }
        fail({"'=='", "'!='", "'<'", "'<='", "'>'", "'>='"});
    }

    json parse_literal() {
        if (eof()) fail({"literal"});
        char c = peek();
        if (c == '"') {
            size_t start = pos_;
            ++pos_;
            while (!eof()) {
                if (peek() == '\\') {
                    pos_ += 2;
                    continue;
                }
                if (peek() == '"') {
                    ++pos_;
                    // Delegate escape decoding to the JSON parser.
                    json v = json::parse(src_.substr(start, pos_ - start), nullptr, false);
                    if (v.is_discarded()) {
                        pos_ = start;
                        fail({"valid string literal"});
                    }
                    return v;
                }
                ++pos_;
            }
            pos_ = start;
            fail({"closing '\"'"});
        }
        if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = pos_;
            if (c == '-') ++pos_;
            while (!eof() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.' ||
                              peek() == 'e' || peek() == 'E' || peek() == '+' ||
                              (peek() == '-' && (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E'))))
                ++pos_;
            json v = json::parse(src_.substr(start, pos_ - start), nullptr, false);
            if (v.is_discarded() || !v.is_number()) {
                pos_ = start;
                fail({"number literal"});
            }
            return v;
        }
        auto word = peek_word();
        if (word == "true") { pos_ += 4; return json(true); }
        if (word == "false") { pos_ += 5; return json(false); }
        if (word == "null") { pos_ += 4; return json(nullptr); }
        fail({"string literal", "number literal", "'true'", "'false'", "'null'"});
    }

    QueryStep parse_project() {
        expect('{', "'{'");
        QueryStep step;
        step.kind = QueryStep::Kind::Project;
        while (true) {
            skip_ws();
            std::string name = parse_ident();
            skip_ws();
            expect(':', "':'");
            skip_ws();
            step.fields.emplace_back(name, parse_path());
            skip_ws();
            if (!eof() && peek() == ',') {
                ++pos_;
                continue;
            }
            break;
        }
        expect('}', "'}'");
        return step;
    }

    std::string_view src_;
    size_t pos_ = 0;
};

}  // namespace parser_detail

inline QueryProgram parse_query(std::string_view text) {
    return parser_detail::Parser(text).parse();
}

// ---------------------------------------------------------------------------
// Interpreter
// ---------------------------------------------------------------------------

struct Limits {
    size_t max_visits = 100000;
    size_t max_output_bytes = 1 << 20;
};

namespace exec_detail {

inline std::string render_path(const QueryPath& path, size_t upto) {
    std::string out;
    for (size_t i = 0; i < upto && i < path.size(); ++i) {
        const PathSeg& seg = path[i];
        switch (seg.kind) {
            case PathSeg::Kind::Field: out += "." + seg.name; break;
            case PathSeg::Kind::Index: out += "[" + std::to_string(seg.index) + "]"; break;
            case PathSeg::Kind::Iterate: out += "[]"; break;
        }
    }
    return out.empty() ? "." : out;
}

class Interpreter {
public:
    Interpreter(const json& document, const Limits& limits) : doc_(document), limits_(limits) {}

    json run(const QueryProgram& program) {
        std::vector<json> stream{doc_};
        visit(1);
        for (const QueryStep& step : program.steps) stream = apply(step, std::move(stream));
        json result = stream.size() == 1 ? stream[0] : json(stream);
        if (result.dump().size() > limits_.max_output_bytes)
            throw ExecError(ExecError::Kind::Limit,
                            "result exceeds max_output_bytes (" +
                                std::to_string(limits_.max_output_bytes) + ")");
        return result;
    }

private:
    void visit(size_t n = 1) {
        visits_ += n;
        if (visits_ > limits_.max_visits)
            throw ExecError(ExecError::Kind::Limit,
                            "visit budget exceeded (max_visits=" +
                                std::to_string(limits_.max_visits) + ")");
    }

    // Strict navigation: errors carry repair hints for the retry prompt.
    void navigate(const json& value, const QueryPath& path, size_t seg_idx,
                  std::vector<json>& out) {
        if (seg_idx == path.size()) {
            visit();
            out.push_back(value);
            return;
        }
        const PathSeg& seg = path[seg_idx];
        switch (seg.kind) {
            case PathSeg::Kind::Field: {
                if (!value.is_object())
                    throw ExecError(
                        ExecError::Kind::Type,
                        "cannot take field '" + seg.name + "' of " + detail::kind_of(value) +
                            " at " + render_path(path, seg_idx),
                        json{{"step", render_path(path, seg_idx + 1)},
                             {"actual_kind", detail::kind_of(value)}});
                if (!value.contains(seg.name)) {
                    json keys = json::array();
                    for (auto it = value.begin(); it != value.end(); ++it) keys.push_back(it.key());
                    throw ExecError(ExecError::Kind::MissingField,
                                    "missing field '" + seg.name + "' at " +
                                        render_path(path, seg_idx) +
                                        "; available keys: " + keys.dump(),
                                    json{{"path", render_path(path, seg_idx + 1)},
                                         {"available_keys", keys}});
                }
                visit();
                navigate(value.at(seg.name), path, seg_idx + 1, out);
                return;
            }
            case PathSeg::Kind::Index: {
                if (!value.is_array())
                    throw ExecError(ExecError::Kind::Type,
                                    "cannot index " + detail::kind_of(value) + " at " +
                                        render_path(path, seg_idx),
                                    json{{"step", render_path(path, seg_idx + 1)},
                                         {"actual_kind", detail::kind_of(value)}});
                int64_t idx = seg.index;
                int64_t n = static_cast<int64_t>(value.size());
                if (idx < 0) idx += n;
                if (idx < 0 || idx >= n)
                    throw ExecError(ExecError::Kind::Type,
                                    "index " + std::to_string(seg.index) +
                                        " out of range (array length " + std::to_string(n) +
                                        ") at " + render_path(path, seg_idx),
                                    json{{"step", render_path(path, seg_idx + 1)},
                                         {"actual_kind", "array[" + std::to_string(n) + "]"}});
                visit();
                navigate(value[static_cast<size_t>(idx)], path, seg_idx + 1, out);
                return;
            }
            case PathSeg::Kind::Iterate: {
                if (!value.is_array())
                    throw ExecError(ExecError::Kind::Type,
                                    "cannot iterate " + detail::kind_of(value) + " at " +
                                        render_path(path, seg_idx),
                                    json{{"step", render_path(path, seg_idx + 1)},
                                         {"actual_kind", detail::kind_of(value)}});
                for (const json& element : value) {
                    visit();
                    navigate(element, path, seg_idx + 1, out);
                }
                return;
            }
        }
    }

    // Lenient navigation for select/project: any failure yields no values.
    void navigate_lenient(const json& value, const QueryPath& path, size_t seg_idx,
                          std::vector<json>& out) {
        if (seg_idx == path.size()) {
            visit();
            out.push_back(value);
            return;
        }
        const PathSeg& seg = path[seg_idx];
        switch (seg.kind) {
            case PathSeg::Kind::Field:
                if (!value.is_object() || !value.contains(seg.name)) return;
                visit();
                navigate_lenient(value.at(seg.name), path, seg_idx + 1, out);
                return;
            case PathSeg::Kind::Index: {
                if (!value.is_array()) return;
                int64_t idx = seg.index;
                int64_t n = static_cast<int64_t>(value.size());
                if (idx < 0) idx += n;
                if (idx < 0 || idx >= n) return;
                visit();
                navigate_lenient(value[static_cast<size_t>(idx)], path, seg_idx + 1, out);
                return;
            }
            case PathSeg::Kind::Iterate:
                if (!value.is_array()) return;
                for (const json& element : value) {
                    visit();
                    navigate_lenient(element, path, seg_idx + 1, out);
                }
                return;
        }
    }

    static bool compare(const json& lhs, Comparator cmp, const json& rhs) {
        switch (cmp) {
            case Comparator::Eq: return lhs == rhs;
            case Comparator::Ne: return lhs != rhs;
            default: break;
        }
        // Ordering is defined for number/number and string/string only.
        if (lhs.is_number() && rhs.is_number()) {
            double a = lhs.get<double>(), b = rhs.get<double>();
            switch (cmp) {
                case Comparator::Lt: return a < b;
                case Comparator::Le: return a <= b;
                case Comparator::Gt: return a > b;
                case Comparator::Ge: return a >= b;
                default: return false;
            }
        }
        if (lhs.is_string() && rhs.is_string()) {
            const auto& a = lhs.get_ref<const std::string&>();
            const auto& b = rhs.get_ref<const std::string&>();
            switch (cmp) {
                case Comparator::Lt: return a < b;
                case Comparator::Le: return a <= b;
                case Comparator::Gt: return a > b;
                case Comparator::Ge: return a >= b;
                default: return false;
            }
        }
        return false;
    }

    std::vector<json> apply(const QueryStep& step, std::vector<json> stream) {
        std::vector<json> out;
        switch (step.kind) {
            case QueryStep::Kind::Path:
                for (const json& v : stream) navigate(v, step.path, 0, out);
                return out;

            case QueryStep::Kind::Select:
                for (json& v : stream) {
                    visit();
                    std::vector<json> probed;
                    navigate_lenient(v, step.select_path, 0, probed);
                    bool keep = false;
                    for (const json& p : probed) {
                        if (compare(p, step.comparator, step.literal)) { keep = true; break; }
                    }
                    if (keep) out.push_back(std::move(v));
                }
                return out;

            case QueryStep::Kind::Project:
                for (const json& v : stream) {
                    visit();
                    json obj = json::object();
                    for (const auto& [name, path] : step.fields) {
                        std::vector<json> probed;
                        navigate_lenient(v, path, 0, probed);
                        if (!probed.empty()) obj[name] = probed.front();
                    }
                    out.push_back(std::move(obj));
                }
                return out;

            case QueryStep::Kind::Aggregate:
                visit(stream.size());
                return {aggregate(step.agg, stream)};
        }
        return out;
    }

    static json aggregate(AggOp op, const std::vector<json>& stream) {
        if (op == AggOp::Count) return json(stream.size());
        if (stream.empty()) return json(nullptr);  // fixed semantics for empty streams
        switch (op) {
            case AggOp::Sum: {
                require_numeric(stream, "sum");
                bool all_integral = true;
                for (const json& v : stream)
                    if (v.is_number_float()) { all_integral = false; break; }
                if (all_integral) {
                    int64_t total = 0;
                    for (const json& v : stream) total += v.get<int64_t>();
                    return json(total);
                }
                double total = 0;
                for (const json& v : stream) total += v.get<double>();
                return json(total);
            }
            case AggOp::Min:
            case AggOp::Max: {
                require_numeric(stream, to_string(op));
                size_t best = 0;
                for (size_t i = 1; i < stream.size(); ++i) {
                    double a = stream[i].get<double>(), b = stream[best].get<double>();
                    if (op == AggOp::Min ? a < b : a > b) best = i;
                }
                return stream[best];
            }
            case AggOp::First: return stream.front();
            case AggOp::Last: return stream.back();
            case AggOp::Unique: {
                json out = json::array();
                for (const json& v : stream) {
                    bool seen = false;
                    for (const json& u : out)
                        if (u == v) { seen = true; break; }
                    if (!seen) out.push_back(v);
                }
                return out;
            }
            default: return json(nullptr);
        }
    }

    static void require_numeric(const std::vector<json>& stream, const std::string& op) {
        for (const json& v : stream) {
            if (!v.is_number())
                throw ExecError(ExecError::Kind::Type,
                                op + " requires numeric stream elements, got " +
                                    detail::kind_of(v),
                                json{{"step", op}, {"actual_kind", detail::kind_of(v)}});
        }
    }

    const json& doc_;
    Limits limits_;
    size_t visits_ = 0;
};

}  // namespace exec_detail

// Executes a program against a document. Pure: the document is read-only and
// no construct performs I/O. Multi-element result streams come back as an
// array; a single element comes back bare.
inline json execute(const QueryProgram& program, const json& document, const Limits& limits = {}) {
    return exec_detail::Interpreter(document, limits).run(program);
}

// ---------------------------------------------------------------------------
// Structural skeleton: keys and kinds to a bounded depth, with at most
// `max_samples` raw scalar samples. This is what the judge sees instead of
// the raw document.
// ---------------------------------------------------------------------------

namespace skeleton_detail {
inline json build(const json& v, int depth, int max_depth, int& samples_left) {
    if (v.is_object()) {
        if (depth >= max_depth) return json("object{" + std::to_string(v.size()) + " keys}");
        json out = json::object();
        for (auto it = v.begin(); it != v.end(); ++it)
            out[it.key()] = build(it.value(), depth + 1, max_depth, samples_left);
        return out;
    }
    if (v.is_array()) {
        if (v.empty()) return json::array();
        if (depth >= max_depth) return json("array[" + std::to_string(v.size()) + "]");
        json out = json::array();
        out.push_back("<" + std::to_string(v.size()) + " items>");
        out.push_back(build(v[0], depth + 1, max_depth, samples_left));
        return out;
    }
    std::string kind = detail::kind_of(v);
    if (samples_left > 0) {
        --samples_left;
        return json(kind + " e.g. " + detail::preview(v, 40));
    }
    return json(kind);
}
}  // namespace skeleton_detail

inline json structure_skeleton(const json& document, int max_depth = 3, int max_samples = 10) {
    int samples_left = max_samples;
    return skeleton_detail::build(document, 0, max_depth, samples_left);
}

// ---------------------------------------------------------------------------
// Extraction loop
// ---------------------------------------------------------------------------

struct ExtractConfig {
    int max_attempts = 3;
    Limits limits;
    int skeleton_depth = 3;
    size_t prompt_byte_budget = 16384;
};

struct ExtractionResult {
    json value;
    QueryProgram program;
    int attempts = 1;
    size_t bytes_in = 0;
    size_t bytes_out = 0;  // canonical serialization
};

struct AttemptRecord {
    std::string query_text;
    std::string error;
};

class ExtractionFailed : public std::runtime_error {
public:
    explicit ExtractionFailed(std::vector<AttemptRecord> attempts)
        : std::runtime_error(render(attempts)), attempts_(std::move(attempts)) {}
    const std::vector<AttemptRecord>& attempts() const { return attempts_; }

private:
    static std::string render(const std::vector<AttemptRecord>& attempts) {
        std::string msg = "extraction failed after " + std::to_string(attempts.size()) + " attempts";
        for (size_t i = 0; i < attempts.size(); ++i)
            msg += "\n  attempt " + std::to_string(i + 1) + ": " + attempts[i].query_text + " -> " +
                   attempts[i].error;
        return msg;
    }
    std::vector<AttemptRecord> attempts_;
};

namespace extract_detail {

inline const char* grammar_help() {
    return "Query language: steps joined by '|'. Steps:\n"
           "  .field.sub[0]        navigate objects and arrays ([] iterates an array)\n"
           "  select(.path OP lit) keep stream elements whose path satisfies OP\n"
           "                       OP is one of == != < <= > >=, lit is a JSON literal\n"
           "  {name: .path, ...}   build an object per element\n"
           "  count|sum|min|max|first|last|unique  aggregate the stream\n"
           "Example: .items[] | select(.price < 100) | count";
}

// Judges habitually wrap replies in code fences; accept that.
inline std::string strip_fences(const std::string& s) {
    std::string t = text::trim(s);
    if (t.rfind("```", 0) == 0) {
        size_t first_nl = t.find('\n');
        if (first_nl != std::string::npos) {
            size_t closing = t.rfind("```");
            if (closing > first_nl) t = t.substr(first_nl + 1, closing - first_nl - 1);
        }
    }
    return text::trim(t);
}

}  // namespace extract_detail

// Prompts the judge for a query, executes it, and retries with the error text
// on failure. The raw document never enters the prompt; only its skeleton.
inline ExtractionResult extract(const ToolResponse& response, const std::string& question,
                                const SchemaNode* response_schema, JudgeClient& judge,
                                const ExtractConfig& config = {}) {
    if (!response.is_json)
        throw MalformedInputError("/tool_response/body", "extract requires a JSON response body");

    const json& document = response.body;
    size_t bytes_in = document.dump().size();

    std::string skeleton = structure_skeleton(document, config.skeleton_depth).dump(2);
    skeleton = text::truncate_utf8(skeleton, config.prompt_byte_budget / 2);

    std::string schema_text;
    if (response_schema)
        schema_text = text::truncate_utf8(schema_to_document(*response_schema).dump(2),
                                          config.prompt_byte_budget / 4);

    std::vector<AttemptRecord> attempts;
    for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
        JudgeRequest req;
        req.system_prompt =
            std::string("You write one query in a restricted JSON query language to answer a "
                        "question about a JSON document. Reply with the query only, no prose.\n") +
            extract_detail::grammar_help();
        std::string user = "Question: " + question + "\n\nDocument structure:\n" + skeleton;
        if (!schema_text.empty()) user += "\n\nResponse schema:\n" + schema_text;
        if (!attempts.empty()) {
            const AttemptRecord& prev = attempts.back();
            user += "\n\nYour previous query:\n" + prev.query_text +
                    "\nfailed with:\n" + prev.error + "\nWrite a corrected query.";
        }
        req.user_prompt = text::truncate_utf8(user, config.prompt_byte_budget);
        req.temperature = 0.0;

        std::string query_text = extract_detail::strip_fences(judge.complete(req).text);
        try {
            QueryProgram program = parse_query(query_text);
            json value = execute(program, document, config.limits);
            ExtractionResult result;
            result.value = std::move(value);
            result.program = std::move(program);
            result.attempts = attempt;
            result.bytes_in = bytes_in;
            result.bytes_out = result.value.dump().size();
            return result;
        } catch (const QueryParseError& e) {
            attempts.push_back({query_text, e.what()});
        } catch (const ExecError& e) {
            attempts.push_back({query_text, e.what()});
        }
    }
    throw ExtractionFailed(std::move(attempts));
}

}  // namespace agentguard::jsonq
