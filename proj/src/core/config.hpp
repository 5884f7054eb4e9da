#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/lexicon.hpp"
#include "core/matching.hpp"

namespace intertext {

// Everything a run needs, loaded from a flat sectioned key=value file.
// Relative paths are resolved against the directory of the config file.
struct RunConfig {
    std::string config_path; // where this config was loaded from ("" = defaults)
    std::string config_dir;

    // corpus.*
    std::string manifest; // corpus manifest (path|title|role lines)
    uint32_t chunk_words = 1000;

    // run.*
    std::string run_dir = "run"; // artifact and marker directory
    uint64_t seed = 17;

    // idf.*
    RarityGate gate;

    // filters.* ("" = list unused)
    std::string stopwords_path;
    std::string spanish_path;
    std::string proper_names_path;
    std::string ocr_patterns_path;

    // embed.*
    std::string embed_provider = "mock"; // mock | http
    int embed_dimension = 256;
    std::string embed_semantic_model = "voyage-3-large";
    std::string embed_contextual_model = "voyage-context-3";
    std::string embed_endpoint;
    std::string embed_api_key_env = "INTERTEXT_EMBED_API_KEY";
    int embed_max_attempts = 3;

    // match.* and density.*
    MatchThresholds thresholds;
    std::vector<ScaleSpec> scales; // defaults to default_scales()

    // review.*
    std::string review_provider = "replay"; // replay | http
    std::string review_endpoint;
    std::string review_api_key_env = "INTERTEXT_REVIEW_API_KEY";
    std::string transcripts_path; // "" = <run_dir>/transcripts.jsonl
    std::string screen_model = "claude-haiku-4-5";
    std::string deep_model = "gpt-5.4";
    std::string register_model = "claude-sonnet-4-5";
    std::string confirm_model = "claude-sonnet-4-5";
    std::string longcontext_model = "gemini-3.1-pro";
    std::string probe_model = "gemini-3x-pro";
    int screen_workers = 10;
    int deep_workers = 5;
    int register_workers = 30;
    int confirm_workers = 30;
    int review_context_budget = 2000000; // max characters per reviewer call

    // prompts.*
    std::string prompts_dir; // "" = built-in prompt texts

    // verse.*
    std::string verse_table; // book|chapter|verse|text sidecar for the source

    // verify.*
    std::string reference_table; // attested-allusion table ("" = none)

    // search.*
    bool search_enabled = false;
    int search_throttle_ms = 1000;
    int search_attempts = 3;

    // probe.*
    std::string probe_items;

    // calibrate.*
    int calibrate_samples = 20000;

    // cost.* (US dollars per unit)
    double cost_embed_per_snippet = 0.00001;
    double cost_screen_per_pair = 0.002;
    double cost_deep_per_pair = 0.010;
    double cost_deep_rate = 0.13; // share of screened pairs reaching deep analysis
    double cost_register_per_chunk = 0.001;
    double cost_confirm_per_flag = 0.001;
    double cost_confirm_rate = 0.10; // flags per target chunk
    double cost_longcontext_per_pass = 0.25;

    std::string transcripts() const; // transcripts_path or its run-dir default
};

// Built-in defaults for every key (no file involved).
RunConfig default_config();

// Parses key=value lines ('#' comments). Unknown keys, malformed values, and
// out-of-range settings raise ConfigError.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& base_dir,
                       const std::string& origin);

// Serializes every setting, one key per line, suitable for load_config.
std::string render_config(const RunConfig& config);

} // namespace intertext
