#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "core/corpus.hpp"
#include "core/errors.hpp"
#include "core/matching.hpp"

namespace intertext {

enum class VerdictLevel : uint8_t { Strong, Moderate, Weak, None };

const char* verdict_name(VerdictLevel v);
VerdictLevel parse_verdict(const std::string& name);

struct Verdict {
    VerdictLevel level = VerdictLevel::None;
    std::string quoted_target; // required for Strong/Moderate
    std::string quoted_source;
};

enum class ConnectionType : uint8_t {
    VerbalEcho,
    InvertedAllusion,
    ParodicHomage,
    RegisterCollision,
    ThematicTransplantation,
    TransformedImagery,
    DirectQuotation,
};

constexpr int kConnectionTypeCount = 7;

const char* connection_type_name(ConnectionType t);  // "VerbalEcho"
const char* connection_type_label(ConnectionType t); // "Verbal echo"
// Accepts both spellings above plus free-form provider variants such as
// "morphological transformation" (mapped to TransformedImagery).
ConnectionType parse_connection_type(const std::string& text);

// One candidate allusion. Offsets address the ingested documents; chunk ids
// index the pipeline chunk list.
struct Finding {
    uint32_t id = 0;
    std::string target_document_id;
    uint32_t target_chunk = 0;
    std::string target_quote;
    uint32_t target_start = 0;
    uint32_t target_end = 0;
    uint32_t source_chunk = 0;
    std::string source_quote;
    uint32_t source_start = 0;
    uint32_t source_end = 0;
    std::vector<VerseRef> verse_refs;
    ConnectionType connection_type = ConnectionType::VerbalEcho;
    VerdictLevel rating = VerdictLevel::Moderate; // Strong or Moderate
    uint8_t tracks = 0;                           // bitmask of Track values
    bool textual = true;
    bool unverifiable = false; // quote offsets could not be mapped
    bool disputed = false;     // flagged by the long-context critique pass
    std::string notes;
    std::vector<uint32_t> merged_ids; // findings merged into this one
};

bool has_track(const Finding& f, Track t);
void add_track(Finding& f, Track t);

void save_findings(const std::string& path, const std::vector<Finding>& findings);
std::vector<Finding> load_findings(const std::string& path);

enum class ReviewStage : uint8_t {
    Screen,
    DeepAnalysis,
    RegisterScan,
    VerseConfirm,
    LongContext,
    Probe,
};

const char* stage_name(ReviewStage s);
ReviewStage parse_review_stage(const std::string& name);

// A reviewer endpoint: one model behind each stage, raw text in and out.
class ReviewerProvider {
  public:
    virtual ~ReviewerProvider() = default;
    virtual std::string id() const = 0;
    virtual std::string model_id(ReviewStage stage) const = 0;
    virtual std::string call(ReviewStage stage, const std::string& payload) = 0;
    // Largest payload (in characters) a single call may carry.
    virtual size_t context_budget() const { return SIZE_MAX; }
};

// Reviewer backed by a plain function, for scripted tests and fixtures.
class FunctionReviewer : public ReviewerProvider {
  public:
    using Fn = std::function<std::string(ReviewStage, const std::string&)>;
    FunctionReviewer(std::string id, Fn fn, size_t budget = SIZE_MAX)
        : id_(std::move(id)), fn_(std::move(fn)), budget_(budget) {}
    std::string id() const override { return id_; }
    std::string model_id(ReviewStage) const override { return id_; }
    std::string call(ReviewStage stage, const std::string& payload) override {
        return fn_(stage, payload);
    }
    size_t context_budget() const override { return budget_; }

  private:
    std::string id_;
    Fn fn_;
    size_t budget_;
};

struct TranscriptRecord {
    std::string stage;
    std::string model;
    std::string hash; // hex64 of the payload
    std::string payload;
    std::string response;
};

// Append-only store of reviewer calls, persisted as JSON lines.
class TranscriptStore {
  public:
    TranscriptStore() = default;
    static TranscriptStore load(const std::string& path);
    void save(const std::string& path) const;

    void append(TranscriptRecord record);
    const TranscriptRecord* find(ReviewStage stage, uint64_t payload_hash) const;
    size_t size() const { return records_.size(); }
    const std::vector<TranscriptRecord>& records() const { return records_; }

  private:
    std::vector<TranscriptRecord> records_;
    std::map<std::pair<std::string, std::string>, size_t> index_; // (stage, hash) -> record
};

// Replays recorded responses; any unrecorded payload is an error.
class ReplayReviewer : public ReviewerProvider {
  public:
    explicit ReplayReviewer(TranscriptStore store) : store_(std::move(store)) {}
    std::string id() const override { return "replay"; }
    std::string model_id(ReviewStage stage) const override;
    std::string call(ReviewStage stage, const std::string& payload) override;

  private:
    TranscriptStore store_;
};

// Forwards to an inner provider and records every exchange.
class RecordingReviewer : public ReviewerProvider {
  public:
    RecordingReviewer(ReviewerProvider& inner, TranscriptStore& store)
        : inner_(inner), store_(store) {}
    std::string id() const override { return inner_.id(); }
    std::string model_id(ReviewStage stage) const override { return inner_.model_id(stage); }
    std::string call(ReviewStage stage, const std::string& payload) override;
    size_t context_budget() const override { return inner_.context_budget(); }

  private:
    ReviewerProvider& inner_;
    TranscriptStore& store_;
    std::mutex mutex_;
};

// Serves repeats from a persistent transcript file, forwarding misses to the
// inner provider and appending each fresh exchange to the file as it lands.
class CachingReviewer : public ReviewerProvider {
  public:
    CachingReviewer(ReviewerProvider& inner, std::string cache_path);
    std::string id() const override { return inner_.id(); }
    std::string model_id(ReviewStage stage) const override { return inner_.model_id(stage); }
    std::string call(ReviewStage stage, const std::string& payload) override;
    size_t context_budget() const override { return inner_.context_budget(); }

  private:
    ReviewerProvider& inner_;
    std::string cache_path_;
    TranscriptStore store_;
    std::mutex mutex_;
};

// Pairs or chunks whose responses stayed unparseable after one retry.
struct QuarantineEntry {
    std::string stage;
    std::string item; // caller-provided identity, e.g. "pair 12" or "chunk 3"
    std::string payload_hash;
    std::string raw_response;
};

class QuarantineLog {
  public:
    void add(ReviewStage stage, const std::string& item, uint64_t payload_hash,
             const std::string& raw);
    void save(const std::string& path) const;
    void load(const std::string& path); // replaces current entries
    const std::vector<QuarantineEntry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

  private:
    std::vector<QuarantineEntry> entries_;
    mutable std::mutex mutex_;
};

// Prompt templates per stage. Files in a prompt directory override the
// compiled-in defaults one by one.
struct PromptSet {
    std::string screen;
    std::string deep;
    std::string register_scan;
    std::string verse_confirm;
    std::string longcontext_read;
    std::string longcontext_hints;
    std::string longcontext_critique;
    std::string probe;

    static PromptSet defaults();
    static PromptSet load(const std::string& dir);
};

// Run fn(item, index) over items with a fixed-size worker pool, preserving
// input order in the result. The first worker exception is rethrown.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& items, int workers, Fn fn)
    -> std::vector<decltype(fn(items[0], size_t{0}))> {
    using Out = decltype(fn(items[0], size_t{0}));
    std::vector<Out> results(items.size());
    if (items.empty())
        return results;
    workers = std::max(1, std::min<int>(workers, static_cast<int>(items.size())));
    if (workers == 1) {
        for (size_t i = 0; i < items.size(); ++i)
            results[i] = fn(items[i], i);
        return results;
    }
    std::atomic<size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= items.size())
                    return;
                try {
                    results[i] = fn(items[i], i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
    return results;
}

// --- Screening ---

std::string screen_payload(const CandidateChunkPair& pair, const std::vector<Chunk>& chunks,
                           const Corpus& corpus, const PromptSet& prompts);

// Verdict for one pair, or nullopt when the response stayed unparseable.
std::optional<Verdict> screen(const CandidateChunkPair& pair, const std::vector<Chunk>& chunks,
                              const Corpus& corpus, ReviewerProvider& provider,
                              const PromptSet& prompts, QuarantineLog* quarantine = nullptr);

std::vector<std::optional<Verdict>> screen_all(const std::vector<CandidateChunkPair>& pairs,
                                               const std::vector<Chunk>& chunks,
                                               const Corpus& corpus, ReviewerProvider& provider,
                                               const PromptSet& prompts, int workers = 10,
                                               QuarantineLog* quarantine = nullptr);

// --- Deep analysis ---

std::string deep_payload(const CandidateChunkPair& pair, const Verdict& verdict,
                         const std::vector<Chunk>& chunks, const Corpus& corpus,
                         const PromptSet& prompts);

std::vector<Finding> deep_analyze(const CandidateChunkPair& pair, const Verdict& verdict,
                                  const std::vector<Chunk>& chunks, const Corpus& corpus,
                                  const VerseIndex& verses, ReviewerProvider& provider,
                                  const PromptSet& prompts, QuarantineLog* quarantine = nullptr);

// Screens gate the cascade: only Strong/Moderate pairs are analyzed. Finding
// ids are assigned sequentially in pair order.
std::vector<Finding> deep_analyze_all(const std::vector<CandidateChunkPair>& pairs,
                                      const std::vector<std::optional<Verdict>>& verdicts,
                                      const std::vector<Chunk>& chunks, const Corpus& corpus,
                                      const VerseIndex& verses, ReviewerProvider& provider,
                                      const PromptSet& prompts, int workers = 5,
                                      QuarantineLog* quarantine = nullptr);

// --- Register scan ---

struct RegisterFlag {
    uint32_t chunk = 0; // index into the chunk list
    std::string passage;
    std::string category;
    std::vector<std::string> candidates; // verse labels, possibly partial
};

std::string register_payload(const Chunk& chunk, const Corpus& corpus, const PromptSet& prompts);

std::vector<RegisterFlag> register_scan(uint32_t chunk_id, const std::vector<Chunk>& chunks,
                                        const Corpus& corpus, ReviewerProvider& provider,
                                        const PromptSet& prompts,
                                        QuarantineLog* quarantine = nullptr);

std::vector<RegisterFlag> register_scan_all(const std::vector<uint32_t>& chunk_ids,
                                            const std::vector<Chunk>& chunks, const Corpus& corpus,
                                            ReviewerProvider& provider, const PromptSet& prompts,
                                            int workers = 30,
                                            QuarantineLog* quarantine = nullptr);

// --- Verse confirmation ---

enum class ConfirmReason : uint8_t { Confirmed, UnknownVerse, ProviderReject, Quarantined };

const char* confirm_reason_name(ConfirmReason r);

struct ConfirmOutcome {
    ConfirmReason reason = ConfirmReason::UnknownVerse;
    CandidateChunkPair pair; // valid when reason == Confirmed
    VerseRef verse;          // resolved candidate when reason == Confirmed
};

ConfirmOutcome confirm_verse(const RegisterFlag& flag, const VerseIndex& verses,
                             const std::vector<Chunk>& chunks, const Corpus& corpus,
                             ReviewerProvider& provider, const PromptSet& prompts,
                             QuarantineLog* quarantine = nullptr);

std::vector<ConfirmOutcome> confirm_all(const std::vector<RegisterFlag>& flags,
                                        const VerseIndex& verses,
                                        const std::vector<Chunk>& chunks, const Corpus& corpus,
                                        ReviewerProvider& provider, const PromptSet& prompts,
                                        int workers = 30, QuarantineLog* quarantine = nullptr);

// --- Long-context cross-validation ---

struct LongContextResult {
    std::vector<Finding> findings;      // ids assigned by the caller's sequence
    std::vector<uint32_t> disputed_ids; // pipeline findings flagged false-positive
};

// Four passes over one novel: source first half, source second half,
// hint-guided, and a critique of the existing findings. Oversized payloads
// are split at paragraph boundaries and the pass repeated per part.
LongContextResult long_context_passes(const Document& novel, const Document& source,
                                      const std::vector<Chunk>& chunks,
                                      const std::vector<Finding>& pipeline_findings,
                                      const std::vector<std::string>& hint_terms,
                                      const VerseIndex& verses, ReviewerProvider& provider,
                                      const PromptSet& prompts, uint32_t& next_finding_id,
                                      QuarantineLog* quarantine = nullptr);

} // namespace intertext
