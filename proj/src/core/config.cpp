#include "core/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>

#include "core/errors.hpp"
#include "core/text.hpp"

namespace intertext {

std::string RunConfig::transcripts() const {
    if (!transcripts_path.empty())
        return transcripts_path;
    return run_dir + "/transcripts.jsonl";
}

RunConfig default_config() {
    RunConfig config;
    config.scales = default_scales();
    return config;
}

namespace {

std::string resolve_path(const std::string& value, const std::string& base_dir) {
    if (value.empty() || base_dir.empty())
        return value;
    std::filesystem::path p(value);
    if (p.is_absolute())
        return value;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double out = std::stod(value, &used);
        if (used != value.size())
            throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": " + value);
    }
}

int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        int64_t out = std::stoll(value, &used);
        if (used != value.size())
            throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": " + value);
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "no")
        return false;
    throw ConfigError("bad boolean value for " + key + ": " + value);
}

ScaleSpec* scale_slot(RunConfig& config, Scale scale) {
    for (ScaleSpec& spec : config.scales)
        if (spec.scale == scale)
            return &spec;
    return nullptr;
}

using Setter = std::function<void(RunConfig&, const std::string& key,
                                  const std::string& value,
                                  const std::string& base_dir)>;

std::map<std::string, Setter> build_setters() {
    std::map<std::string, Setter> s;
    auto path_key = [](std::string RunConfig::* field) {
        return [field](RunConfig& c, const std::string&, const std::string& v,
                       const std::string& dir) { c.*field = resolve_path(v, dir); };
    };
    auto string_key = [](std::string RunConfig::* field) {
        return [field](RunConfig& c, const std::string&, const std::string& v,
                       const std::string&) { c.*field = v; };
    };
    auto double_key = [](double RunConfig::* field, double min_value) {
        return [field, min_value](RunConfig& c, const std::string& k,
                                  const std::string& v, const std::string&) {
            double parsed = parse_double(k, v);
            if (parsed < min_value)
                throw ConfigError(k + " must be >= " + format_double(min_value));
            c.*field = parsed;
        };
    };
    auto int_key = [](int RunConfig::* field, int64_t min_value) {
        return [field, min_value](RunConfig& c, const std::string& k,
                                  const std::string& v, const std::string&) {
            int64_t parsed = parse_int(k, v);
            if (parsed < min_value)
                throw ConfigError(k + " must be >= " + std::to_string(min_value));
            c.*field = static_cast<int>(parsed);
        };
    };
    auto scale_key = [](Scale scale, uint32_t ScaleSpec::* field) {
        return [scale, field](RunConfig& c, const std::string& k,
                              const std::string& v, const std::string&) {
            int64_t parsed = parse_int(k, v);
            if (parsed <= 0)
                throw ConfigError(k + " must be positive");
            scale_slot(c, scale)->*field = static_cast<uint32_t>(parsed);
        };
    };

    s["corpus.manifest"] = path_key(&RunConfig::manifest);
    s["corpus.chunk_words"] = [](RunConfig& c, const std::string& k,
                                 const std::string& v, const std::string&) {
        int64_t parsed = parse_int(k, v);
        if (parsed < 1)
            throw ConfigError(k + " must be positive");
        c.chunk_words = static_cast<uint32_t>(parsed);
    };
    s["run.dir"] = path_key(&RunConfig::run_dir);
    s["run.seed"] = [](RunConfig& c, const std::string& k, const std::string& v,
                       const std::string&) {
        c.seed = static_cast<uint64_t>(parse_int(k, v));
    };

    s["idf.source_min"] = [](RunConfig& c, const std::string& k,
                             const std::string& v, const std::string&) {
        c.gate.source_min_idf = parse_double(k, v);
    };
    s["idf.target_word_min"] = [](RunConfig& c, const std::string& k,
                                  const std::string& v, const std::string&) {
        c.gate.target_word_min_idf = parse_double(k, v);
    };
    s["idf.target_phrase_min"] = [](RunConfig& c, const std::string& k,
                                    const std::string& v, const std::string&) {
        c.gate.target_phrase_min_idf = parse_double(k, v);
    };

    s["filters.stopwords"] = path_key(&RunConfig::stopwords_path);
    s["filters.spanish"] = path_key(&RunConfig::spanish_path);
    s["filters.proper_names"] = path_key(&RunConfig::proper_names_path);
    s["filters.ocr_patterns"] = path_key(&RunConfig::ocr_patterns_path);

    s["embed.provider"] = [](RunConfig& c, const std::string& k,
                             const std::string& v, const std::string&) {
        if (v != "mock" && v != "http")
            throw ConfigError(k + " must be mock or http: " + v);
        c.embed_provider = v;
    };
    s["embed.dimension"] = int_key(&RunConfig::embed_dimension, 1);
    s["embed.semantic_model"] = string_key(&RunConfig::embed_semantic_model);
    s["embed.contextual_model"] = string_key(&RunConfig::embed_contextual_model);
    s["embed.endpoint"] = string_key(&RunConfig::embed_endpoint);
    s["embed.api_key_env"] = string_key(&RunConfig::embed_api_key_env);
    s["embed.max_attempts"] = int_key(&RunConfig::embed_max_attempts, 1);

    s["match.same_type_threshold"] = [](RunConfig& c, const std::string& k,
                                        const std::string& v, const std::string&) {
        c.thresholds.same_type = parse_double(k, v);
    };
    s["match.cross_type_threshold"] = [](RunConfig& c, const std::string& k,
                                         const std::string& v, const std::string&) {
        c.thresholds.cross_type = parse_double(k, v);
    };
    s["match.context_floor"] = [](RunConfig& c, const std::string& k,
                                  const std::string& v, const std::string&) {
        c.thresholds.context_floor = parse_double(k, v);
    };

    s["density.narrow.width"] = scale_key(Scale::Narrow, &ScaleSpec::width);
    s["density.narrow.step"] = scale_key(Scale::Narrow, &ScaleSpec::step);
    s["density.narrow.min_distinct"] = scale_key(Scale::Narrow, &ScaleSpec::min_distinct);
    s["density.medium.width"] = scale_key(Scale::Medium, &ScaleSpec::width);
    s["density.medium.step"] = scale_key(Scale::Medium, &ScaleSpec::step);
    s["density.medium.min_distinct"] = scale_key(Scale::Medium, &ScaleSpec::min_distinct);
    s["density.large.width"] = scale_key(Scale::Large, &ScaleSpec::width);
    s["density.large.step"] = scale_key(Scale::Large, &ScaleSpec::step);
    s["density.large.min_distinct"] = scale_key(Scale::Large, &ScaleSpec::min_distinct);

    s["review.provider"] = [](RunConfig& c, const std::string& k,
                              const std::string& v, const std::string&) {
        if (v != "replay" && v != "http")
            throw ConfigError(k + " must be replay or http: " + v);
        c.review_provider = v;
    };
    s["review.endpoint"] = string_key(&RunConfig::review_endpoint);
    s["review.api_key_env"] = string_key(&RunConfig::review_api_key_env);
    s["review.transcripts"] = path_key(&RunConfig::transcripts_path);
    s["review.screen_model"] = string_key(&RunConfig::screen_model);
    s["review.deep_model"] = string_key(&RunConfig::deep_model);
    s["review.register_model"] = string_key(&RunConfig::register_model);
    s["review.confirm_model"] = string_key(&RunConfig::confirm_model);
    s["review.longcontext_model"] = string_key(&RunConfig::longcontext_model);
    s["review.probe_model"] = string_key(&RunConfig::probe_model);
    s["review.screen_workers"] = int_key(&RunConfig::screen_workers, 1);
    s["review.deep_workers"] = int_key(&RunConfig::deep_workers, 1);
    s["review.register_workers"] = int_key(&RunConfig::register_workers, 1);
    s["review.confirm_workers"] = int_key(&RunConfig::confirm_workers, 1);
    s["review.context_budget"] = int_key(&RunConfig::review_context_budget, 1);

    s["prompts.dir"] = path_key(&RunConfig::prompts_dir);
    s["verse.table"] = path_key(&RunConfig::verse_table);
    s["verify.reference_table"] = path_key(&RunConfig::reference_table);

    s["search.enabled"] = [](RunConfig& c, const std::string& k,
                             const std::string& v, const std::string&) {
        c.search_enabled = parse_bool(k, v);
    };
    s["search.throttle_ms"] = int_key(&RunConfig::search_throttle_ms, 0);
    s["search.attempts"] = int_key(&RunConfig::search_attempts, 1);

    s["probe.items"] = path_key(&RunConfig::probe_items);
    s["calibrate.samples"] = int_key(&RunConfig::calibrate_samples, 1000);

    s["cost.embed_per_snippet"] = double_key(&RunConfig::cost_embed_per_snippet, 0.0);
    s["cost.screen_per_pair"] = double_key(&RunConfig::cost_screen_per_pair, 0.0);
    s["cost.deep_per_pair"] = double_key(&RunConfig::cost_deep_per_pair, 0.0);
    s["cost.deep_rate"] = double_key(&RunConfig::cost_deep_rate, 0.0);
    s["cost.register_per_chunk"] = double_key(&RunConfig::cost_register_per_chunk, 0.0);
    s["cost.confirm_per_flag"] = double_key(&RunConfig::cost_confirm_per_flag, 0.0);
    s["cost.confirm_rate"] = double_key(&RunConfig::cost_confirm_rate, 0.0);
    s["cost.longcontext_per_pass"] =
        double_key(&RunConfig::cost_longcontext_per_pass, 0.0);

    return s;
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> s = build_setters();
    return s;
}

} // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir,
                       const std::string& origin) {
    RunConfig config = default_config();
    config.config_path = origin;
    config.config_dir = base_dir;
    size_t line_no = 0;
    for (const std::string& raw : split(text, '\n')) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no)
                              + ": expected key=value, got: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto it = setters().find(key);
        if (it == setters().end())
            throw ConfigError(origin + ":" + std::to_string(line_no)
                              + ": unknown setting: " + key);
        it->second(config, key, value, base_dir);
    }
    return config;
}

RunConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    std::string dir = std::filesystem::path(path).parent_path().string();
    return parse_config(text, dir, path);
}

std::string render_config(const RunConfig& c) {
    std::string out;
    auto emit = [&out](const std::string& key, const std::string& value) {
        out += key + "=" + value + "\n";
    };
    emit("corpus.manifest", c.manifest);
    emit("corpus.chunk_words", std::to_string(c.chunk_words));
    emit("run.dir", c.run_dir);
    emit("run.seed", std::to_string(c.seed));
    emit("idf.source_min", format_double(c.gate.source_min_idf));
    emit("idf.target_word_min", format_double(c.gate.target_word_min_idf));
    emit("idf.target_phrase_min", format_double(c.gate.target_phrase_min_idf));
    emit("filters.stopwords", c.stopwords_path);
    emit("filters.spanish", c.spanish_path);
    emit("filters.proper_names", c.proper_names_path);
    emit("filters.ocr_patterns", c.ocr_patterns_path);
    emit("embed.provider", c.embed_provider);
    emit("embed.dimension", std::to_string(c.embed_dimension));
    emit("embed.semantic_model", c.embed_semantic_model);
    emit("embed.contextual_model", c.embed_contextual_model);
    emit("embed.endpoint", c.embed_endpoint);
    emit("embed.api_key_env", c.embed_api_key_env);
    emit("embed.max_attempts", std::to_string(c.embed_max_attempts));
    emit("match.same_type_threshold", format_double(c.thresholds.same_type));
    emit("match.cross_type_threshold", format_double(c.thresholds.cross_type));
    emit("match.context_floor", format_double(c.thresholds.context_floor));
    for (const ScaleSpec& spec : c.scales) {
        std::string prefix = std::string("density.") + fold(scale_name(spec.scale));
        emit(prefix + ".width", std::to_string(spec.width));
        emit(prefix + ".step", std::to_string(spec.step));
        emit(prefix + ".min_distinct", std::to_string(spec.min_distinct));
    }
    emit("review.provider", c.review_provider);
    emit("review.endpoint", c.review_endpoint);
    emit("review.api_key_env", c.review_api_key_env);
    emit("review.transcripts", c.transcripts_path);
    emit("review.screen_model", c.screen_model);
    emit("review.deep_model", c.deep_model);
    emit("review.register_model", c.register_model);
    emit("review.confirm_model", c.confirm_model);
    emit("review.longcontext_model", c.longcontext_model);
    emit("review.probe_model", c.probe_model);
    emit("review.screen_workers", std::to_string(c.screen_workers));
    emit("review.deep_workers", std::to_string(c.deep_workers));
    emit("review.register_workers", std::to_string(c.register_workers));
    emit("review.confirm_workers", std::to_string(c.confirm_workers));
    emit("review.context_budget", std::to_string(c.review_context_budget));
    emit("prompts.dir", c.prompts_dir);
    emit("verse.table", c.verse_table);
    emit("verify.reference_table", c.reference_table);
    emit("search.enabled", c.search_enabled ? "true" : "false");
    emit("search.throttle_ms", std::to_string(c.search_throttle_ms));
    emit("search.attempts", std::to_string(c.search_attempts));
    emit("probe.items", c.probe_items);
    emit("calibrate.samples", std::to_string(c.calibrate_samples));
    emit("cost.embed_per_snippet", format_double(c.cost_embed_per_snippet));
    emit("cost.screen_per_pair", format_double(c.cost_screen_per_pair));
    emit("cost.deep_per_pair", format_double(c.cost_deep_per_pair));
    emit("cost.deep_rate", format_double(c.cost_deep_rate));
    emit("cost.register_per_chunk", format_double(c.cost_register_per_chunk));
    emit("cost.confirm_per_flag", format_double(c.cost_confirm_per_flag));
    emit("cost.confirm_rate", format_double(c.cost_confirm_rate));
    emit("cost.longcontext_per_pass", format_double(c.cost_longcontext_per_pass));
    return out;
}

} // namespace intertext
