#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/calibration.hpp"
#include "core/catalogue.hpp"
#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/embedding.hpp"
#include "core/matching.hpp"
#include "core/review.hpp"
#include "core/verification.hpp"

namespace intertext {

// Stages in run order. Density mapping runs inside the match stage.
enum class StageId : uint8_t {
    Ingest,
    Idf,
    Embed,
    Match,
    Screen,
    Deep,
    Register,
    LongContext,
    Verify,
    Catalogue,
    Report,
    Calibrate,
    Probe,
};

constexpr int kStageCount = 13;

const char* stage_id_name(StageId id); // "ingest", "idf", ...
StageId parse_stage_id(const std::string& name);
const std::vector<StageId>& stage_order();

struct StageArtifact {
    std::string stage;
    std::string input_hash;            // hex64 over config slice and input files
    std::vector<std::string> outputs;  // paths written (or reused) by the stage
    bool recomputed = false;           // false: marker matched, nothing ran
};

// Mechanical corpus measurements that drive the cost model.
struct CorpusStats {
    size_t target_documents = 0;
    size_t target_chunks = 0;
    size_t source_chunks = 0;
    size_t rare_occurrences = 0;
    size_t screen_pairs = 0;
};

struct CostEstimate {
    double embed = 0.0;
    double screen = 0.0;
    double deep = 0.0;
    double register_scan = 0.0;
    double confirm = 0.0;
    double longcontext = 0.0;

    double total() const {
        return embed + screen + deep + register_scan + confirm + longcontext;
    }
};

// Projected call counts per stage times the configured prices. Pure
// arithmetic; nothing is contacted.
CostEstimate estimate_cost(const RunConfig& config, const CorpusStats& stats);
std::string render_cost(const CostEstimate& estimate, const CorpusStats& stats);

// Staged, resumable orchestration over one run directory. Each stage writes
// its artifacts plus a marker holding the input hash; a stage reruns only
// when its inputs changed or force is set. Prerequisite stages must have
// completed first or StageError names the gap.
class Pipeline {
  public:
    explicit Pipeline(RunConfig config);

    const RunConfig& config() const { return config_; }

    // Test and embedding seams; call before the stages that use them.
    void set_embedding_provider(std::shared_ptr<EmbeddingProvider> provider);
    void set_reviewer(std::shared_ptr<ReviewerProvider> reviewer);
    void set_search_client(std::shared_ptr<SearchClient> search);

    // Forces replay review from the given transcript file.
    void set_replay(const std::string& transcript_path);

    StageArtifact run_stage(StageId stage, bool force = false);
    std::vector<StageArtifact> run_all(bool force = false);

    // Rendered summary tables; requires the report stage to have completed.
    std::string report_text();

    // Exact counts where artifacts exist, mechanical estimates elsewhere.
    CorpusStats stats();
    std::string cost_text();

    std::string artifact_path(const std::string& name) const;

  private:
    RunConfig config_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    std::shared_ptr<ReviewerProvider> reviewer_;
    std::shared_ptr<SearchClient> search_;
    std::unique_ptr<ThrottledSearchClient> throttled_search_;
    std::string replay_path_;

    std::string marker_path(StageId stage) const;
    std::string input_hash(StageId stage);
    void require_done(StageId prerequisite, StageId stage);

    Corpus load_corpus_artifact();
    std::vector<Chunk> load_chunks_artifact();
    FilterLists load_filters();
    PromptSet load_prompts();
    VerseIndex load_verse_index(const Corpus& corpus);
    ReviewerProvider& reviewer();
    EmbeddingProvider& embedder();
    SearchClient& search();

    std::vector<std::string> execute(StageId stage);
    std::vector<std::string> stage_ingest();
    std::vector<std::string> stage_idf();
    std::vector<std::string> stage_embed();
    std::vector<std::string> stage_match();
    std::vector<std::string> stage_screen();
    std::vector<std::string> stage_deep();
    std::vector<std::string> stage_register();
    std::vector<std::string> stage_longcontext();
    std::vector<std::string> stage_verify();
    std::vector<std::string> stage_catalogue();
    std::vector<std::string> stage_report();
    std::vector<std::string> stage_calibrate();
    std::vector<std::string> stage_probe();
};

} // namespace intertext
