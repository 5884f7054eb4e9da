#include "core/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <unordered_set>

#include "core/errors.hpp"
#include "core/lexicon.hpp"
#include "core/providers_http.hpp"
#include "core/text.hpp"

namespace intertext {

namespace {

constexpr const char* kStageNames[kStageCount] = {
    "ingest", "idf",       "embed",  "match",     "screen", "deep",  "register",
    "longcontext", "verify", "catalogue", "report", "calibrate", "probe"};

std::vector<StageId> prerequisites(StageId stage) {
    switch (stage) {
    case StageId::Ingest: return {};
    case StageId::Idf: return {StageId::Ingest};
    case StageId::Embed: return {StageId::Idf};
    case StageId::Match: return {StageId::Embed};
    case StageId::Screen: return {StageId::Match};
    case StageId::Deep: return {StageId::Screen};
    // The register track detects independently of the embedding track, but
    // runs after deep analysis so finding ids continue in one sequence.
    case StageId::Register: return {StageId::Ingest, StageId::Deep};
    case StageId::LongContext: return {StageId::Deep, StageId::Register};
    case StageId::Verify: return {StageId::Deep, StageId::Register, StageId::LongContext};
    case StageId::Catalogue: return {StageId::Verify};
    case StageId::Report: return {StageId::Catalogue};
    case StageId::Calibrate: return {StageId::Catalogue};
    case StageId::Probe: return {};
    }
    return {};
}

// Keys whose values feed the stage's computation. Anything else (pricing,
// worker counts of other stages) can change without invalidating the marker.
std::vector<std::string> fingerprint_prefixes(StageId stage) {
    switch (stage) {
    case StageId::Ingest:
        return {"corpus."};
    case StageId::Idf:
        return {"idf.", "filters."};
    case StageId::Embed:
        return {"embed."};
    case StageId::Match:
        return {"match.", "density."};
    case StageId::Screen:
        return {"review.provider", "review.screen_model", "review.context_budget", "prompts."};
    case StageId::Deep:
        return {"review.provider", "review.deep_model", "review.context_budget", "prompts.",
                "verse.table"};
    case StageId::Register:
        return {"review.provider", "review.register_model", "review.confirm_model",
                "review.context_budget", "prompts.", "verse.table"};
    case StageId::LongContext:
        return {"review.provider", "review.longcontext_model", "review.context_budget",
                "prompts.", "verse.table"};
    case StageId::Verify:
        return {"verify.", "search.", "filters."};
    case StageId::Catalogue:
    case StageId::Report:
        return {};
    case StageId::Calibrate:
        return {"calibrate.", "run.seed"};
    case StageId::Probe:
        return {"review.provider", "review.probe_model", "review.context_budget", "prompts.",
                "probe."};
    }
    return {};
}

struct Fnv {
    uint64_t h = 1469598103934665603ULL;

    void mix(std::string_view data) {
        for (unsigned char c : data) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    }
};

std::string money(double dollars) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", dollars);
    return buf;
}

size_t count_rows(const std::string& path) {
    size_t n = 0;
    for (const std::string& line : read_lines(path))
        if (!trim(line).empty())
            ++n;
    return n;
}

const char* kind_name(TokenKind kind) {
    return kind == TokenKind::Word ? "word" : "phrase";
}

TokenKind parse_kind(const std::string& name) {
    if (name == "word")
        return TokenKind::Word;
    if (name == "phrase")
        return TokenKind::Phrase;
    throw IngestError("bad token kind: " + name);
}

void save_occurrences(const std::string& path, const std::vector<TokenOccurrence>& occs) {
    std::string out;
    for (const TokenOccurrence& o : occs)
        out += psv_join({o.document_id, std::to_string(o.char_start), std::to_string(o.char_end),
                         o.surface, o.term, kind_name(o.kind),
                         std::to_string(o.phrase_length)}) +
               "\n";
    write_file(path, out);
}

std::vector<TokenOccurrence> load_occurrences(const std::string& path) {
    std::vector<TokenOccurrence> occs;
    for (const std::string& line : read_lines(path)) {
        if (trim(line).empty())
            continue;
        std::vector<std::string> f = psv_split(line);
        if (f.size() != 7)
            throw IngestError("malformed occurrence row in " + path);
        TokenOccurrence o;
        o.document_id = f[0];
        o.char_start = static_cast<uint32_t>(std::stoul(f[1]));
        o.char_end = static_cast<uint32_t>(std::stoul(f[2]));
        o.surface = f[3];
        o.term = f[4];
        o.kind = parse_kind(f[5]);
        o.phrase_length = static_cast<uint8_t>(std::stoul(f[6]));
        occs.push_back(std::move(o));
    }
    return occs;
}

std::vector<Snippet> snippets_for(const std::vector<TokenOccurrence>& occs,
                                  const Corpus& corpus) {
    std::vector<Snippet> snippets;
    snippets.reserve(occs.size());
    for (size_t i = 0; i < occs.size(); ++i) {
        Snippet s = extract_snippet(occs[i], corpus.by_id(occs[i].document_id));
        s.occurrence_index = static_cast<uint32_t>(i);
        snippets.push_back(std::move(s));
    }
    return snippets;
}

void save_verdicts(const std::string& path, const std::vector<std::optional<Verdict>>& verdicts) {
    std::string out;
    for (size_t i = 0; i < verdicts.size(); ++i) {
        if (!verdicts[i])
            continue;
        out += psv_join({std::to_string(i), verdict_name(verdicts[i]->level),
                         verdicts[i]->quoted_target, verdicts[i]->quoted_source}) +
               "\n";
    }
    write_file(path, out);
}

std::vector<std::optional<Verdict>> load_verdicts(const std::string& path, size_t pair_count) {
    std::vector<std::optional<Verdict>> verdicts(pair_count);
    for (const std::string& line : read_lines(path)) {
        if (trim(line).empty())
            continue;
        std::vector<std::string> f = psv_split(line);
        if (f.size() != 4)
            throw IngestError("malformed verdict row in " + path);
        size_t index = std::stoul(f[0]);
        if (index >= pair_count)
            throw IngestError("verdict row names pair " + f[0] + " beyond the pair list");
        verdicts[index] = Verdict{parse_verdict(f[1]), f[2], f[3]};
    }
    return verdicts;
}

void save_register_flags(const std::string& path, const std::vector<RegisterFlag>& flags) {
    std::string out;
    for (const RegisterFlag& flag : flags) {
        std::string candidates;
        for (size_t i = 0; i < flag.candidates.size(); ++i) {
            if (i)
                candidates += ";";
            candidates += flag.candidates[i];
        }
        out += psv_join({std::to_string(flag.chunk), flag.passage, flag.category, candidates}) +
               "\n";
    }
    write_file(path, out);
}

std::vector<RegisterFlag> load_register_flags(const std::string& path) {
    std::vector<RegisterFlag> flags;
    for (const std::string& line : read_lines(path)) {
        if (trim(line).empty())
            continue;
        std::vector<std::string> f = psv_split(line);
        if (f.size() != 4)
            throw IngestError("malformed register flag row in " + path);
        RegisterFlag flag;
        flag.chunk = static_cast<uint32_t>(std::stoul(f[0]));
        flag.passage = f[1];
        flag.category = f[2];
        for (const std::string& c : split(f[3], ';'))
            if (!trim(c).empty())
                flag.candidates.push_back(trim(c));
        flags.push_back(std::move(flag));
    }
    return flags;
}

void save_attestations(const std::string& path, const std::vector<AttestationRecord>& records) {
    std::string out;
    for (const AttestationRecord& r : records)
        out += psv_join({attestation_name(r.status), r.citation, r.unverified ? "1" : "0"}) +
               "\n";
    write_file(path, out);
}

std::vector<AttestationRecord> load_attestations(const std::string& path) {
    std::vector<AttestationRecord> records;
    for (const std::string& line : read_lines(path)) {
        if (trim(line).empty())
            continue;
        std::vector<std::string> f = psv_split(line);
        if (f.size() != 3)
            throw IngestError("malformed attestation row in " + path);
        AttestationRecord r;
        if (f[0] == attestation_name(Attestation::Attested))
            r.status = Attestation::Attested;
        else if (f[0] == attestation_name(Attestation::Unattested))
            r.status = Attestation::Unattested;
        else
            throw IngestError("bad attestation status: " + f[0]);
        r.citation = f[1];
        r.unverified = f[2] == "1";
        records.push_back(std::move(r));
    }
    return records;
}

void save_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::string out;
    for (const std::string& line : lines)
        out += psv_escape(line) + "\n";
    write_file(path, out);
}

std::vector<std::string> load_saved_lines(const std::string& path) {
    std::vector<std::string> out;
    for (const std::string& line : read_lines(path))
        out.push_back(psv_unescape(line));
    if (!out.empty() && out.back().empty())
        out.pop_back();
    return out;
}

uint32_t max_finding_id(const std::vector<Finding>& findings, uint32_t floor_id) {
    uint32_t m = floor_id;
    for (const Finding& f : findings)
        m = std::max(m, f.id);
    return m;
}

} // namespace

const char* stage_id_name(StageId id) {
    return kStageNames[static_cast<size_t>(id)];
}

StageId parse_stage_id(const std::string& name) {
    for (int i = 0; i < kStageCount; ++i)
        if (name == kStageNames[i])
            return static_cast<StageId>(i);
    throw StageError("unknown stage: " + name);
}

const std::vector<StageId>& stage_order() {
    static const std::vector<StageId> order = [] {
        std::vector<StageId> o;
        for (int i = 0; i < kStageCount; ++i)
            o.push_back(static_cast<StageId>(i));
        return o;
    }();
    return order;
}

CostEstimate estimate_cost(const RunConfig& config, const CorpusStats& stats) {
    CostEstimate e;
    e.embed = static_cast<double>(stats.rare_occurrences) * 2.0 * config.cost_embed_per_snippet;
    e.screen = static_cast<double>(stats.screen_pairs) * config.cost_screen_per_pair;
    e.deep = static_cast<double>(stats.screen_pairs) * config.cost_deep_rate *
             config.cost_deep_per_pair;
    e.register_scan =
        static_cast<double>(stats.target_chunks) * config.cost_register_per_chunk;
    e.confirm = static_cast<double>(stats.target_chunks) * config.cost_confirm_rate *
                config.cost_confirm_per_flag;
    e.longcontext =
        4.0 * static_cast<double>(stats.target_documents) * config.cost_longcontext_per_pass;
    return e;
}

std::string render_cost(const CostEstimate& estimate, const CorpusStats& stats) {
    std::string out;
    out += "Corpus: " + std::to_string(stats.target_documents) + " target documents, " +
           std::to_string(stats.target_chunks) + " target chunks, " +
           std::to_string(stats.source_chunks) + " source chunks\n";
    out += "Rare occurrences: " + std::to_string(stats.rare_occurrences) +
           " (embedding calls: " + std::to_string(stats.rare_occurrences * 2) + ")\n";
    out += "Screen pairs: " + std::to_string(stats.screen_pairs) + "\n";
    out += "\n";
    out += "  embed        $" + money(estimate.embed) + "\n";
    out += "  screen       $" + money(estimate.screen) + "\n";
    out += "  deep         $" + money(estimate.deep) + "\n";
    out += "  register     $" + money(estimate.register_scan) + "\n";
    out += "  confirm      $" + money(estimate.confirm) + "\n";
    out += "  longcontext  $" + money(estimate.longcontext) + "\n";
    out += "  total        $" + money(estimate.total()) + "\n";
    return out;
}

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {
    if (config_.run_dir.empty())
        throw ConfigError("run.dir is not set");
}

void Pipeline::set_embedding_provider(std::shared_ptr<EmbeddingProvider> provider) {
    embedder_ = std::move(provider);
}

void Pipeline::set_reviewer(std::shared_ptr<ReviewerProvider> reviewer) {
    reviewer_ = std::move(reviewer);
    replay_path_.clear();
}

void Pipeline::set_search_client(std::shared_ptr<SearchClient> search) {
    search_ = std::move(search);
}

void Pipeline::set_replay(const std::string& transcript_path) {
    replay_path_ = transcript_path;
    reviewer_.reset();
}

std::string Pipeline::artifact_path(const std::string& name) const {
    return config_.run_dir + "/" + name;
}

std::string Pipeline::marker_path(StageId stage) const {
    return config_.run_dir + "/markers/" + stage_id_name(stage) + ".done";
}

void Pipeline::require_done(StageId prerequisite, StageId stage) {
    if (!file_exists(marker_path(prerequisite)))
        throw StageError(std::string("run ") + stage_id_name(prerequisite) + " before " +
                         stage_id_name(stage));
}

std::string Pipeline::input_hash(StageId stage) {
    Fnv fnv;

    // Relevant configuration slice.
    std::vector<std::string> prefixes = fingerprint_prefixes(stage);
    for (const std::string& line : split(render_config(config_), '\n')) {
        for (const std::string& prefix : prefixes) {
            if (starts_with(line, prefix)) {
                fnv.mix(line);
                fnv.mix("\n");
                break;
            }
        }
    }

    // Input files: artifacts of earlier stages plus files the configuration
    // names. A missing file hashes as absent so creating it triggers a rerun.
    std::vector<std::string> files;
    auto add = [&files](const std::string& path) {
        if (!path.empty())
            files.push_back(path);
    };
    bool replay = !replay_path_.empty() || (!reviewer_ && config_.review_provider == "replay");
    std::string transcripts = !replay_path_.empty() ? replay_path_ : config_.transcripts();
    switch (stage) {
    case StageId::Ingest: {
        add(config_.manifest);
        if (!config_.manifest.empty() && file_exists(config_.manifest)) {
            std::filesystem::path base = std::filesystem::path(config_.manifest).parent_path();
            for (const std::string& line : read_lines(config_.manifest)) {
                if (trim(line).empty() || line[0] == '#')
                    continue;
                std::vector<std::string> f = psv_split(line);
                if (f.empty())
                    continue;
                std::filesystem::path p(trim(f[0]));
                if (p.is_relative())
                    p = base / p;
                add(p.string());
            }
        }
        break;
    }
    case StageId::Idf:
        add(artifact_path("documents.psv"));
        add(config_.stopwords_path);
        add(config_.spanish_path);
        add(config_.proper_names_path);
        add(config_.ocr_patterns_path);
        break;
    case StageId::Embed:
        add(artifact_path("documents.psv"));
        add(artifact_path("rare_target.psv"));
        add(artifact_path("rare_source.psv"));
        break;
    case StageId::Match:
        add(artifact_path("documents.psv"));
        add(artifact_path("chunks.psv"));
        add(artifact_path("rare_target.psv"));
        add(artifact_path("rare_source.psv"));
        add(artifact_path("vectors_target.bin"));
        add(artifact_path("vectors_source.bin"));
        break;
    case StageId::Screen:
        add(artifact_path("documents.psv"));
        add(artifact_path("chunks.psv"));
        add(artifact_path("pairs.psv"));
        if (replay)
            add(transcripts);
        break;
    case StageId::Deep:
        add(artifact_path("documents.psv"));
        add(artifact_path("chunks.psv"));
        add(artifact_path("pairs.psv"));
        add(artifact_path("verdicts.psv"));
        add(config_.verse_table);
        if (replay)
            add(transcripts);
        break;
    case StageId::Register:
        add(artifact_path("documents.psv"));
        add(artifact_path("chunks.psv"));
        add(artifact_path("findings_deep.psv"));
        add(config_.verse_table);
        if (replay)
            add(transcripts);
        break;
    case StageId::LongContext:
        add(artifact_path("documents.psv"));
        add(artifact_path("chunks.psv"));
        add(artifact_path("findings_deep.psv"));
        add(artifact_path("findings_register.psv"));
        add(artifact_path("matches.psv"));
        add(artifact_path("rare_target.psv"));
        add(config_.verse_table);
        if (replay)
            add(transcripts);
        break;
    case StageId::Verify:
        add(artifact_path("documents.psv"));
        add(artifact_path("findings_deep.psv"));
        add(artifact_path("findings_register.psv"));
        add(artifact_path("findings_longcontext.psv"));
        add(artifact_path("disputed.psv"));
        add(config_.reference_table);
        add(config_.stopwords_path);
        add(config_.spanish_path);
        add(config_.proper_names_path);
        add(config_.ocr_patterns_path);
        break;
    case StageId::Catalogue:
        add(artifact_path("documents.psv"));
        add(artifact_path("findings_final.psv"));
        add(artifact_path("findings_missed.psv"));
        add(artifact_path("attestation.psv"));
        add(artifact_path("missed_citations.psv"));
        break;
    case StageId::Report:
    case StageId::Calibrate: {
        std::string index = artifact_path("catalogue/index.psv");
        add(index);
        if (file_exists(index)) {
            for (const std::string& line : read_lines(index)) {
                if (trim(line).empty())
                    continue;
                std::vector<std::string> f = psv_split(line);
                if (f.size() >= 2)
                    add(artifact_path("catalogue/" + f[1]));
            }
        }
        break;
    }
    case StageId::Probe:
        add(config_.probe_items);
        if (replay)
            add(transcripts);
        break;
    }
    if (!config_.prompts_dir.empty() &&
        (stage == StageId::Screen || stage == StageId::Deep || stage == StageId::Register ||
         stage == StageId::LongContext || stage == StageId::Probe)) {
        std::vector<std::string> prompt_files;
        if (std::filesystem::is_directory(config_.prompts_dir))
            for (const auto& entry : std::filesystem::directory_iterator(config_.prompts_dir))
                if (entry.is_regular_file())
                    prompt_files.push_back(entry.path().string());
        std::sort(prompt_files.begin(), prompt_files.end());
        files.insert(files.end(), prompt_files.begin(), prompt_files.end());
    }

    for (const std::string& path : files) {
        fnv.mix("file:");
        fnv.mix(path);
        fnv.mix("\n");
        if (file_exists(path))
            fnv.mix(read_file(path));
        else
            fnv.mix("<absent>");
        fnv.mix("\n");
    }
    return hex64(fnv.h);
}

StageArtifact Pipeline::run_stage(StageId stage, bool force) {
    for (StageId pre : prerequisites(stage))
        require_done(pre, stage);
    std::filesystem::create_directories(config_.run_dir + "/markers");

    StageArtifact artifact;
    artifact.stage = stage_id_name(stage);
    artifact.input_hash = input_hash(stage);

    std::string marker = marker_path(stage);
    if (!force && file_exists(marker)) {
        std::vector<std::string> lines = read_lines(marker);
        if (!lines.empty() && trim(lines[0]) == artifact.input_hash) {
            bool outputs_present = true;
            for (size_t i = 1; i < lines.size(); ++i) {
                std::string path = trim(lines[i]);
                if (path.empty())
                    continue;
                artifact.outputs.push_back(path);
                if (!file_exists(path))
                    outputs_present = false;
            }
            if (outputs_present)
                return artifact;
            artifact.outputs.clear();
        }
    }

    artifact.outputs = execute(stage);
    artifact.recomputed = true;
    std::string content = artifact.input_hash + "\n";
    for (const std::string& out : artifact.outputs)
        content += out + "\n";
    write_file(marker, content);
    return artifact;
}

std::vector<StageArtifact> Pipeline::run_all(bool force) {
    std::vector<StageArtifact> artifacts;
    for (StageId stage : stage_order())
        artifacts.push_back(run_stage(stage, force));
    return artifacts;
}

std::vector<std::string> Pipeline::execute(StageId stage) {
    switch (stage) {
    case StageId::Ingest: return stage_ingest();
    case StageId::Idf: return stage_idf();
    case StageId::Embed: return stage_embed();
    case StageId::Match: return stage_match();
    case StageId::Screen: return stage_screen();
    case StageId::Deep: return stage_deep();
    case StageId::Register: return stage_register();
    case StageId::LongContext: return stage_longcontext();
    case StageId::Verify: return stage_verify();
    case StageId::Catalogue: return stage_catalogue();
    case StageId::Report: return stage_report();
    case StageId::Calibrate: return stage_calibrate();
    case StageId::Probe: return stage_probe();
    }
    throw StageError("unknown stage");
}

// --- Shared loaders ---

Corpus Pipeline::load_corpus_artifact() {
    Corpus corpus;
    for (const std::string& line : read_lines(artifact_path("documents.psv"))) {
        if (trim(line).empty())
            continue;
        std::vector<std::string> f = psv_split(line);
        if (f.size() != 4)
            throw IngestError("malformed document row in the documents artifact");
        corpus.documents.push_back(ingest(f[3], f[0], f[1], doc_role_from_name(f[2])));
    }
    return corpus;
}

std::vector<Chunk> Pipeline::load_chunks_artifact() {
    std::vector<Chunk> chunks;
    for (const std::string& line : read_lines(artifact_path("chunks.psv"))) {
        if (trim(line).empty())
            continue;
        std::vector<std::string> f = psv_split(line);
        if (f.size() != 5)
            throw IngestError("malformed chunk row in the chunks artifact");
        Chunk c;
        c.document_id = f[0];
        c.index = static_cast<uint32_t>(std::stoul(f[1]));
        c.char_start = static_cast<uint32_t>(std::stoul(f[2]));
        c.char_end = static_cast<uint32_t>(std::stoul(f[3]));
        c.word_count = static_cast<uint32_t>(std::stoul(f[4]));
        chunks.push_back(std::move(c));
    }
    return chunks;
}

FilterLists Pipeline::load_filters() {
    return FilterLists::load(config_.stopwords_path, config_.spanish_path,
                             config_.proper_names_path, config_.ocr_patterns_path);
}

PromptSet Pipeline::load_prompts() {
    if (config_.prompts_dir.empty())
        return PromptSet::defaults();
    return PromptSet::load(config_.prompts_dir);
}

VerseIndex Pipeline::load_verse_index(const Corpus& corpus) {
    if (config_.verse_table.empty())
        return VerseIndex();
    return VerseIndex::build(corpus.source(), config_.verse_table);
}

EmbeddingProvider& Pipeline::embedder() {
    if (!embedder_) {
        if (config_.embed_provider == "mock")
            embedder_ = std::make_shared<MockEmbeddingProvider>(config_.embed_dimension);
        else
            embedder_ = std::make_shared<HttpEmbeddingProvider>(config_);
    }
    return *embedder_;
}

ReviewerProvider& Pipeline::reviewer() {
    if (reviewer_)
        return *reviewer_;
    if (!replay_path_.empty()) {
        reviewer_ = std::make_shared<ReplayReviewer>(TranscriptStore::load(replay_path_));
        return *reviewer_;
    }
    if (config_.review_provider == "replay") {
        std::string path = config_.transcripts();
        if (!file_exists(path))
            throw StageError("review.provider is replay but there is no transcript file at " +
                             path);
        reviewer_ = std::make_shared<ReplayReviewer>(TranscriptStore::load(path));
        return *reviewer_;
    }
    struct HttpCached : ReviewerProvider {
        HttpReviewerProvider inner;
        CachingReviewer cached;
        HttpCached(const RunConfig& config)
            : inner(config), cached(inner, config.transcripts()) {}
        std::string id() const override { return cached.id(); }
        std::string model_id(ReviewStage stage) const override { return cached.model_id(stage); }
        std::string call(ReviewStage stage, const std::string& payload) override {
            return cached.call(stage, payload);
        }
        size_t context_budget() const override { return cached.context_budget(); }
    };
    reviewer_ = std::make_shared<HttpCached>(config_);
    return *reviewer_;
}

SearchClient& Pipeline::search() {
    static NullSearchClient null_client;
    if (!config_.search_enabled)
        return search_ ? *search_ : static_cast<SearchClient&>(null_client);
    if (!search_)
        throw StageError("search.enabled is set but this build ships no search transport; "
                         "inject a client through the library seam or disable search");
    if (!throttled_search_)
        throttled_search_ = std::make_unique<ThrottledSearchClient>(
            *search_, ThrottledSearchClient::Clock::real(), config_.search_throttle_ms,
            config_.search_attempts);
    return *throttled_search_;
}

// --- Stages ---

std::vector<std::string> Pipeline::stage_ingest() {
    if (config_.manifest.empty())
        throw ConfigError("corpus.manifest is not set");
    Corpus corpus = Corpus::load(config_.manifest);
    corpus.source(); // demands exactly one source document
    if (corpus.with_role(DocRole::Target).empty())
        throw IngestError("corpus has no target documents");

    std::string docs;
    for (const Document& d : corpus.documents)
        docs += psv_join({d.id, d.title, doc_role_name(d.role), d.text}) + "\n";
    write_file(artifact_path("documents.psv"), docs);

    std::string chunk_rows;
    for (const Document& d : corpus.documents) {
        if (d.role == DocRole::Reference)
            continue;
        for (const Chunk& c : chunk_document(d, config_.chunk_words))
            chunk_rows += psv_join({c.document_id, std::to_string(c.index),
                                    std::to_string(c.char_start), std::to_string(c.char_end),
                                    std::to_string(c.word_count)}) +
                          "\n";
    }
    write_file(artifact_path("chunks.psv"), chunk_rows);
    return {artifact_path("documents.psv"), artifact_path("chunks.psv")};
}

std::vector<std::string> Pipeline::stage_idf() {
    Corpus corpus = load_corpus_artifact();
    std::vector<const Document*> refs = corpus.with_role(DocRole::Reference);
    if (refs.empty())
        throw StageError("corpus has no reference documents; rarity gating needs a "
                         "reference corpus");
    IdfTable table = compute_idf(refs);
    table.save(artifact_path("idf.psv"));

    FilterLists lists = load_filters();
    std::vector<TokenOccurrence> occs = rare_occurrences(corpus, table, config_.gate, lists);
    const std::string source_id = corpus.source().id;
    std::vector<TokenOccurrence> target_occs;
    std::vector<TokenOccurrence> source_occs;
    for (TokenOccurrence& o : occs)
        (o.document_id == source_id ? source_occs : target_occs).push_back(std::move(o));
    save_occurrences(artifact_path("rare_target.psv"), target_occs);
    save_occurrences(artifact_path("rare_source.psv"), source_occs);

    std::string summary;
    summary += "reference documents: " + std::to_string(refs.size()) + "\n";
    summary += "vocabulary terms: " + std::to_string(table.term_count()) + "\n";
    summary += "rare target occurrences: " + std::to_string(target_occs.size()) + "\n";
    summary += "rare source occurrences: " + std::to_string(source_occs.size()) + "\n";
    write_file(artifact_path("idf_summary.txt"), summary);
    return {artifact_path("idf.psv"), artifact_path("rare_target.psv"),
            artifact_path("rare_source.psv"), artifact_path("idf_summary.txt")};
}

std::vector<std::string> Pipeline::stage_embed() {
    Corpus corpus = load_corpus_artifact();
    std::vector<TokenOccurrence> target_occs = load_occurrences(artifact_path("rare_target.psv"));
    std::vector<TokenOccurrence> source_occs = load_occurrences(artifact_path("rare_source.psv"));

    EmbeddingProvider& provider = embedder();
    EmbeddingCache cache(artifact_path("embed_cache.bin"));
    EmbedOptions options;
    options.cache = &cache;
    options.max_attempts = config_.embed_max_attempts;

    std::vector<EmbeddedOccurrence> embedded_target =
        embed_all(snippets_for(target_occs, corpus), provider, options);
    save_vector_store(artifact_path("vectors_target.bin"), embedded_target);
    std::vector<EmbeddedOccurrence> embedded_source =
        embed_all(snippets_for(source_occs, corpus), provider, options);
    save_vector_store(artifact_path("vectors_source.bin"), embedded_source);
    return {artifact_path("vectors_target.bin"), artifact_path("vectors_source.bin")};
}

std::vector<std::string> Pipeline::stage_match() {
    Corpus corpus = load_corpus_artifact();
    std::vector<Chunk> chunks = load_chunks_artifact();
    std::vector<TokenOccurrence> target_occs = load_occurrences(artifact_path("rare_target.psv"));
    std::vector<TokenOccurrence> source_occs = load_occurrences(artifact_path("rare_source.psv"));
    std::string provider_id = embedder().id();

    std::vector<EmbeddedOccurrence> embedded_target = load_vector_store(
        artifact_path("vectors_target.bin"), snippets_for(target_occs, corpus), provider_id);
    std::vector<EmbeddedOccurrence> embedded_source = load_vector_store(
        artifact_path("vectors_source.bin"), snippets_for(source_occs, corpus), provider_id);

    std::vector<MatchPair> matches =
        match_all(target_occs, embedded_target, source_occs, embedded_source, config_.thresholds);
    save_matches(artifact_path("matches.psv"), matches);

    std::vector<DensityCluster> clusters =
        density_map(matches, target_occs, corpus, config_.scales);
    save_clusters(artifact_path("clusters.psv"), clusters);

    std::vector<CandidateChunkPair> pairs =
        assemble_pairs(matches, clusters, chunks, target_occs, source_occs);
    save_pairs(artifact_path("pairs.psv"), pairs);
    return {artifact_path("matches.psv"), artifact_path("clusters.psv"),
            artifact_path("pairs.psv")};
}

std::vector<std::string> Pipeline::stage_screen() {
    Corpus corpus = load_corpus_artifact();
    std::vector<Chunk> chunks = load_chunks_artifact();
    std::vector<CandidateChunkPair> pairs = load_pairs(artifact_path("pairs.psv"));
    PromptSet prompts = load_prompts();
    QuarantineLog quarantine;

    std::vector<std::optional<Verdict>> verdicts = screen_all(
        pairs, chunks, corpus, reviewer(), prompts, config_.screen_workers, &quarantine);
    save_verdicts(artifact_path("verdicts.psv"), verdicts);
    quarantine.save(artifact_path("quarantine_screen.psv"));
    return {artifact_path("verdicts.psv"), artifact_path("quarantine_screen.psv")};
}

std::vector<std::string> Pipeline::stage_deep() {
    Corpus corpus = load_corpus_artifact();
    std::vector<Chunk> chunks = load_chunks_artifact();
    std::vector<CandidateChunkPair> pairs = load_pairs(artifact_path("pairs.psv"));
    std::vector<std::optional<Verdict>> verdicts =
        load_verdicts(artifact_path("verdicts.psv"), pairs.size());
    VerseIndex verses = load_verse_index(corpus);
    PromptSet prompts = load_prompts();
    QuarantineLog quarantine;

    std::vector<Finding> findings = deep_analyze_all(pairs, verdicts, chunks, corpus, verses,
                                                     reviewer(), prompts, config_.deep_workers,
                                                     &quarantine);
    save_findings(artifact_path("findings_deep.psv"), findings);
    quarantine.save(artifact_path("quarantine_deep.psv"));
    return {artifact_path("findings_deep.psv"), artifact_path("quarantine_deep.psv")};
}

std::vector<std::string> Pipeline::stage_register() {
    Corpus corpus = load_corpus_artifact();
    std::vector<Chunk> chunks = load_chunks_artifact();
    VerseIndex verses = load_verse_index(corpus);
    PromptSet prompts = load_prompts();
    QuarantineLog quarantine;

    std::vector<uint32_t> target_chunk_ids;
    for (size_t i = 0; i < chunks.size(); ++i)
        if (corpus.by_id(chunks[i].document_id).role == DocRole::Target)
            target_chunk_ids.push_back(static_cast<uint32_t>(i));

    std::vector<RegisterFlag> flags =
        register_scan_all(target_chunk_ids, chunks, corpus, reviewer(), prompts,
                          config_.register_workers, &quarantine);
    save_register_flags(artifact_path("register_flags.psv"), flags);

    std::vector<ConfirmOutcome> outcomes = confirm_all(
        flags, verses, chunks, corpus, reviewer(), prompts, config_.confirm_workers, &quarantine);

    std::string outcome_rows;
    for (const ConfirmOutcome& o : outcomes) {
        std::string verse = o.reason == ConfirmReason::Confirmed ? verse_label(o.verse) : "";
        outcome_rows += psv_join({confirm_reason_name(o.reason),
                                  std::to_string(o.pair.target_chunk),
                                  std::to_string(o.pair.source_chunk), verse}) +
                        "\n";
    }
    write_file(artifact_path("register_confirms.psv"), outcome_rows);

    uint32_t next_id =
        max_finding_id(load_findings(artifact_path("findings_deep.psv")), 0) + 1;
    std::vector<Finding> findings;
    for (const ConfirmOutcome& outcome : outcomes) {
        if (outcome.reason != ConfirmReason::Confirmed)
            continue;
        Verdict verdict{VerdictLevel::Strong, "", ""};
        for (Finding f : deep_analyze(outcome.pair, verdict, chunks, corpus, verses, reviewer(),
                                      prompts, &quarantine)) {
            f.id = next_id++;
            findings.push_back(std::move(f));
        }
    }
    save_findings(artifact_path("findings_register.psv"), findings);
    quarantine.save(artifact_path("quarantine_register.psv"));
    return {artifact_path("register_flags.psv"), artifact_path("register_confirms.psv"),
            artifact_path("findings_register.psv"), artifact_path("quarantine_register.psv")};
}

std::vector<std::string> Pipeline::stage_longcontext() {
    Corpus corpus = load_corpus_artifact();
    std::vector<Chunk> chunks = load_chunks_artifact();
    VerseIndex verses = load_verse_index(corpus);
    PromptSet prompts = load_prompts();
    QuarantineLog quarantine;

    std::vector<Finding> pipeline_findings = load_findings(artifact_path("findings_deep.psv"));
    for (Finding& f : load_findings(artifact_path("findings_register.psv")))
        pipeline_findings.push_back(std::move(f));

    // Hint terms per novel: the folded vocabulary its retained matches used.
    std::vector<TokenOccurrence> target_occs = load_occurrences(artifact_path("rare_target.psv"));
    std::map<std::string, std::set<std::string>> hints;
    for (const MatchPair& m : load_matches(artifact_path("matches.psv")))
        hints[target_occs.at(m.target_occ).document_id].insert(target_occs.at(m.target_occ).term);

    uint32_t next_id = max_finding_id(pipeline_findings, 0) + 1;
    std::vector<Finding> findings;
    std::vector<uint32_t> disputed;
    const Document& source = corpus.source();
    for (const Document* novel : corpus.with_role(DocRole::Target)) {
        std::vector<Finding> novel_findings;
        for (const Finding& f : pipeline_findings)
            if (f.target_document_id == novel->id)
                novel_findings.push_back(f);
        const std::set<std::string>& terms = hints[novel->id];
        std::vector<std::string> hint_terms(terms.begin(), terms.end());
        if (hint_terms.size() > 50)
            hint_terms.resize(50);
        LongContextResult result =
            long_context_passes(*novel, source, chunks, novel_findings, hint_terms, verses,
                                reviewer(), prompts, next_id, &quarantine);
        for (Finding& f : result.findings)
            findings.push_back(std::move(f));
        disputed.insert(disputed.end(), result.disputed_ids.begin(), result.disputed_ids.end());
    }

    save_findings(artifact_path("findings_longcontext.psv"), findings);
    std::string disputed_rows;
    for (uint32_t id : disputed)
        disputed_rows += std::to_string(id) + "\n";
    write_file(artifact_path("disputed.psv"), disputed_rows);
    quarantine.save(artifact_path("quarantine_longcontext.psv"));
    return {artifact_path("findings_longcontext.psv"), artifact_path("disputed.psv"),
            artifact_path("quarantine_longcontext.psv")};
}

std::vector<std::string> Pipeline::stage_verify() {
    Corpus corpus = load_corpus_artifact();
    FilterLists filters = load_filters();

    std::unordered_set<uint32_t> disputed;
    for (const std::string& line : read_lines(artifact_path("disputed.psv")))
        if (!trim(line).empty())
            disputed.insert(static_cast<uint32_t>(std::stoul(trim(line))));

    // Findings the critique pass disputed drop out of the final set.
    std::vector<Finding> all;
    for (const char* name : {"findings_deep.psv", "findings_register.psv",
                             "findings_longcontext.psv"}) {
        for (Finding& f : load_findings(artifact_path(name))) {
            if (disputed.count(f.id)) {
                f.disputed = true;
                continue;
            }
            all.push_back(std::move(f));
        }
    }

    DedupResult deduped = dedup_passages(all, filters);
    std::vector<Finding> final_findings = dedup_classifications(deduped);

    ReferenceTable table;
    if (!config_.reference_table.empty())
        table = ReferenceTable::load(config_.reference_table);
    AttestResult attested = attest(final_findings, table, search(), filters, 0);

    save_findings(artifact_path("findings_final.psv"), final_findings);
    save_findings(artifact_path("findings_missed.psv"), attested.missed);
    save_attestations(artifact_path("attestation.psv"), attested.records);
    save_lines(artifact_path("missed_citations.psv"), attested.missed_citations);
    return {artifact_path("findings_final.psv"), artifact_path("findings_missed.psv"),
            artifact_path("attestation.psv"), artifact_path("missed_citations.psv")};
}

std::vector<std::string> Pipeline::stage_catalogue() {
    Corpus corpus = load_corpus_artifact();
    std::vector<Finding> final_findings = load_findings(artifact_path("findings_final.psv"));
    std::vector<Finding> missed = load_findings(artifact_path("findings_missed.psv"));
    std::vector<AttestationRecord> records = load_attestations(artifact_path("attestation.psv"));
    std::vector<std::string> citations = load_saved_lines(artifact_path("missed_citations.psv"));
    citations.resize(missed.size());

    Catalogue catalogue = build_catalogue(final_findings, records, missed, citations, corpus);
    std::string dir = artifact_path("catalogue");
    export_workbook(catalogue, dir);

    std::vector<std::string> outputs = {dir + "/index.psv"};
    for (const NovelCatalogue& novel : catalogue.novels)
        outputs.push_back(dir + "/" + slugify(novel.title) + ".psv");
    return outputs;
}

std::vector<std::string> Pipeline::stage_report() {
    Catalogue catalogue = import_workbook(artifact_path("catalogue"));
    write_file(artifact_path("report.txt"), render_report(catalogue));
    return {artifact_path("report.txt")};
}

std::vector<std::string> Pipeline::stage_calibrate() {
    Catalogue catalogue = import_workbook(artifact_path("catalogue"));
    std::vector<TypeSummary> types = summarize_types(catalogue);
    std::vector<StratumPosterior> posteriors = fit_by_type(types);

    int recovered = 0;
    int attested = 0;
    for (const TypeSummary& t : types) {
        recovered += t.attested - t.missed;
        attested += t.attested;
    }
    int found = 0;
    for (const NovelSummary& s : summarize_novels(catalogue))
        found += s.found;

    StratumPosterior pooled =
        fit_sensitivity(ConnectionType::VerbalEcho, recovered, attested);
    AdjustedCount adjusted =
        adjusted_count(found, pooled, config_.calibrate_samples, config_.seed);

    std::string out;
    out += "Sensitivity by connection type (Beta posteriors)\n";
    for (const StratumPosterior& p : posteriors) {
        char line[160];
        std::snprintf(line, sizeof(line), "  %-24s %3d/%-3d  Beta(%g, %g)  mean %.3f\n",
                      connection_type_label(p.stratum), p.recovered, p.attested, p.posterior_a,
                      p.posterior_b, p.mean());
        out += line;
    }
    char pooled_line[200];
    std::snprintf(pooled_line, sizeof(pooled_line),
                  "Pooled sensitivity: %d/%d  Beta(%g, %g)  mean %.3f\n", recovered, attested,
                  pooled.posterior_a, pooled.posterior_b, pooled.mean());
    out += pooled_line;
    char adjusted_line[200];
    std::snprintf(adjusted_line, sizeof(adjusted_line),
                  "Adjusted count for %d recovered connections: median %.0f, "
                  "90%% interval [%.0f, %.0f]\n",
                  found, adjusted.median, adjusted.lo, adjusted.hi);
    out += adjusted_line;

    if (!posteriors.empty()) {
        std::vector<Lever> levers = {{"re-screen flagged chunks", 1.0},
                                     {"expanded context review", 2.0}};
        out += "Levers (expected variance reduction per unit cost)\n";
        for (const LeverRank& r : rank_levers(posteriors, levers)) {
            char line[160];
            std::snprintf(line, sizeof(line), "  %-24s %-26s %.6f\n",
                          connection_type_label(r.stratum), r.lever.c_str(), r.gain);
            out += line;
        }
    }
    write_file(artifact_path("calibration.txt"), out);
    return {artifact_path("calibration.txt")};
}

std::vector<std::string> Pipeline::stage_probe() {
    if (config_.probe_items.empty()) {
        write_file(artifact_path("probe_outcomes.psv"), "");
        write_file(artifact_path("probe_table.txt"), "no probe items configured\n");
        return {artifact_path("probe_outcomes.psv"), artifact_path("probe_table.txt")};
    }
    std::vector<ProbeItem> items = load_probe_items(config_.probe_items);
    PromptSet prompts = load_prompts();
    std::vector<ProbeOutcome> outcomes = run_probe(items, reviewer(), prompts);
    save_probe_outcomes(artifact_path("probe_outcomes.psv"), outcomes);
    std::vector<ProbeModelScore> scores = score_probe(outcomes, items);
    write_file(artifact_path("probe_table.txt"), render_probe_table(scores));
    return {artifact_path("probe_outcomes.psv"), artifact_path("probe_table.txt")};
}

// --- Rendered results ---

std::string Pipeline::report_text() {
    std::string path = artifact_path("report.txt");
    if (!file_exists(path))
        throw StageError("run report before reading it");
    return read_file(path);
}

CorpusStats Pipeline::stats() {
    CorpusStats stats;
    Corpus corpus;
    std::vector<Chunk> chunks;
    bool have_corpus = false;

    if (file_exists(artifact_path("documents.psv")) && file_exists(artifact_path("chunks.psv"))) {
        corpus = load_corpus_artifact();
        chunks = load_chunks_artifact();
        have_corpus = true;
    } else if (!config_.manifest.empty() && file_exists(config_.manifest)) {
        corpus = Corpus::load(config_.manifest);
        for (const Document& d : corpus.documents) {
            if (d.role == DocRole::Reference)
                continue;
            for (const Chunk& c : chunk_document(d, config_.chunk_words))
                chunks.push_back(c);
        }
        have_corpus = true;
    }
    if (!have_corpus)
        return stats;

    const std::string source_id = corpus.source().id;
    stats.target_documents = corpus.with_role(DocRole::Target).size();
    for (const Chunk& c : chunks)
        (c.document_id == source_id ? stats.source_chunks : stats.target_chunks) += 1;

    if (file_exists(artifact_path("rare_target.psv")) &&
        file_exists(artifact_path("rare_source.psv"))) {
        stats.rare_occurrences = count_rows(artifact_path("rare_target.psv")) +
                                 count_rows(artifact_path("rare_source.psv"));
    } else {
        // Mechanical estimate: about two rare occurrences per hundred words.
        size_t words = 0;
        for (const Document& d : corpus.documents)
            if (d.role != DocRole::Reference)
                words += word_spans(d.text).size();
        stats.rare_occurrences = words / 50;
    }

    if (file_exists(artifact_path("pairs.psv")))
        stats.screen_pairs = count_rows(artifact_path("pairs.psv"));
    else
        stats.screen_pairs = stats.rare_occurrences * 2;
    return stats;
}

std::string Pipeline::cost_text() {
    CorpusStats s = stats();
    return render_cost(estimate_cost(config_, s), s);
}

} // namespace intertext
