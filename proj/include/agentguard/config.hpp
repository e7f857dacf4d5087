#pragma once
// Config file loading for the component stack. Unknown keys are errors so a
// typo never silently disables a check. The gateway section is carried
// verbatim and parsed by the gateway itself.

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

#include "agentguard/core.hpp"
#include "agentguard/jsonq.hpp"
#include "agentguard/judge.hpp"
#include "agentguard/silent_review.hpp"
#include "agentguard/sparc.hpp"

namespace agentguard {

struct AppConfig {
    SparcConfig sparc;
    ReviewConfig review;
    jsonq::ExtractConfig jsonq;
    JudgeOptions judge;
    json gateway = json::object();  // opaque here
};

namespace config_detail {

inline void check_keys(const json& section, const std::set<std::string>& allowed,
                       const std::string& at) {
    for (auto it = section.begin(); it != section.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("unknown config key '" + at + "/" + it.key() + "'");
    }
}

template <typename T>
T get_or(const json& section, const char* key, T fallback) {
    if (!section.contains(key)) return fallback;
    try {
        return section.at(key).get<T>();
    } catch (const std::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

inline std::vector<std::string> load_lexicon_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open lexicon file '" + path + "'");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_array())
        throw ConfigError("lexicon file '" + path + "' must be a JSON array of strings");
    std::vector<std::string> out;
    for (const auto& e : doc) {
        if (!e.is_string())
            throw ConfigError("lexicon file '" + path + "' must contain only strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace config_detail

inline SparcConfig sparc_config_from_json(const json& section) {
    config_detail::check_keys(section, {"fail_mode", "semantic", "transform", "prompt_byte_budget"},
                              "sparc");
    SparcConfig cfg;
    std::string fail_mode = config_detail::get_or<std::string>(section, "fail_mode", "open");
    if (fail_mode == "open") cfg.fail_mode = SparcConfig::FailMode::Open;
    else if (fail_mode == "closed") cfg.fail_mode = SparcConfig::FailMode::Closed;
    else throw ConfigError("sparc/fail_mode must be 'open' or 'closed'");
    if (section.contains("semantic")) {
        config_detail::check_keys(section["semantic"], {"enabled"}, "sparc/semantic");
        cfg.semantic_enabled = config_detail::get_or<bool>(section["semantic"], "enabled", true);
    }
    if (section.contains("transform")) {
        config_detail::check_keys(section["transform"], {"date_target"}, "sparc/transform");
        cfg.date_target =
            config_detail::get_or<std::string>(section["transform"], "date_target", "iso8601");
        if (cfg.date_target != "iso8601")
            throw ConfigError("sparc/transform/date_target: only 'iso8601' is supported");
    }
    cfg.prompt_byte_budget =
        config_detail::get_or<size_t>(section, "prompt_byte_budget", cfg.prompt_byte_budget);
    return cfg;
}

inline ReviewConfig review_config_from_json(const json& section) {
    config_detail::check_keys(
        section, {"backend", "lexicon_file", "partial_lexicon_file", "body_byte_budget"},
        "silent_review");
    ReviewConfig cfg;
    cfg.backend = config_detail::get_or<std::string>(section, "backend", "heuristic");
    if (cfg.backend != "heuristic" && cfg.backend != "judge")
        throw ConfigError("silent_review/backend must be 'heuristic' or 'judge'");
    if (section.contains("lexicon_file"))
        cfg.failure_lexicon =
            config_detail::load_lexicon_file(section["lexicon_file"].get<std::string>());
    if (section.contains("partial_lexicon_file"))
        cfg.partial_lexicon =
            config_detail::load_lexicon_file(section["partial_lexicon_file"].get<std::string>());
    cfg.body_byte_budget =
        config_detail::get_or<size_t>(section, "body_byte_budget", cfg.body_byte_budget);
    return cfg;
}

inline jsonq::ExtractConfig jsonq_config_from_json(const json& section) {
    config_detail::check_keys(
        section, {"max_attempts", "max_visits", "max_output_bytes", "skeleton_depth"}, "jsonq");
    jsonq::ExtractConfig cfg;
    cfg.max_attempts = config_detail::get_or<int>(section, "max_attempts", cfg.max_attempts);
    if (cfg.max_attempts < 1) throw ConfigError("jsonq/max_attempts must be >= 1");
    cfg.limits.max_visits =
        config_detail::get_or<size_t>(section, "max_visits", cfg.limits.max_visits);
    cfg.limits.max_output_bytes =
        config_detail::get_or<size_t>(section, "max_output_bytes", cfg.limits.max_output_bytes);
    cfg.skeleton_depth = config_detail::get_or<int>(section, "skeleton_depth", cfg.skeleton_depth);
    return cfg;
}

inline JudgeOptions judge_config_from_json(const json& section) {
    config_detail::check_keys(section,
                              {"max_attempts", "backoff_base_ms", "backoff_factor", "timeout_s",
                               "max_inflight", "prompt_byte_budget"},
                              "judge");
    // URL, model and credentials come from the environment only.
    JudgeOptions opts = judge_options_from_env();
    opts.max_attempts = config_detail::get_or<int>(section, "max_attempts", opts.max_attempts);
    opts.backoff_base_ms =
        config_detail::get_or<int>(section, "backoff_base_ms", opts.backoff_base_ms);
    opts.backoff_factor =
        config_detail::get_or<int>(section, "backoff_factor", opts.backoff_factor);
    opts.timeout_s = config_detail::get_or<int>(section, "timeout_s", opts.timeout_s);
    opts.max_inflight = config_detail::get_or<int>(section, "max_inflight", opts.max_inflight);
    opts.prompt_byte_budget =
        config_detail::get_or<size_t>(section, "prompt_byte_budget", opts.prompt_byte_budget);
    return opts;
}

inline AppConfig app_config_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    config_detail::check_keys(doc, {"sparc", "silent_review", "jsonq", "judge", "gateway"}, "");
    AppConfig cfg;
    cfg.judge = judge_options_from_env();
    if (doc.contains("sparc")) cfg.sparc = sparc_config_from_json(doc["sparc"]);
    if (doc.contains("silent_review")) cfg.review = review_config_from_json(doc["silent_review"]);
    if (doc.contains("jsonq")) cfg.jsonq = jsonq_config_from_json(doc["jsonq"]);
    if (doc.contains("judge")) cfg.judge = judge_config_from_json(doc["judge"]);
    if (doc.contains("gateway")) cfg.gateway = doc["gateway"];
    return cfg;
}

inline AppConfig load_app_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    return app_config_from_json(doc);
}

}  // namespace agentguard
