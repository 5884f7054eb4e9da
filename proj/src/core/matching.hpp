#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/corpus.hpp"
#include "core/embedding.hpp"

namespace intertext {

// Cosine similarity of two equal-dimension vectors, clamped to [-1, 1].
// Throws DegenerateVectorError if either vector has zero norm.
double cosine(const std::vector<float>& u, const std::vector<float>& v);

enum class MatchDirection : uint8_t { WordWord, PhrasePhrase, WordPhrase, PhraseWord };

const char* direction_name(MatchDirection d);
MatchDirection parse_direction(const std::string& name);
bool is_same_type(MatchDirection d);

struct MatchThresholds {
    double same_type = 0.88;
    double cross_type = 0.82;
    double context_floor = 0.40;
};

// One retained cross-corpus occurrence match. target_occ and source_occ index
// the occurrence lists handed to match_all.
struct MatchPair {
    uint32_t target_occ = 0;
    uint32_t source_occ = 0;
    MatchDirection direction = MatchDirection::WordWord;
    double semantic_sim = 0.0;
    double context_sim = 0.0;
};

// All-pairs thresholded matching. Embeddings reference their occurrence list
// through occurrence_index; both sides must be fully embedded.
std::vector<MatchPair> match_all(const std::vector<TokenOccurrence>& target_occs,
                                 const std::vector<EmbeddedOccurrence>& target_embeddings,
                                 const std::vector<TokenOccurrence>& source_occs,
                                 const std::vector<EmbeddedOccurrence>& source_embeddings,
                                 const MatchThresholds& thresholds = {});

enum class Scale : uint8_t { Narrow, Medium, Large };

const char* scale_name(Scale s);
Scale parse_scale(const std::string& name);

struct ScaleSpec {
    Scale scale = Scale::Narrow;
    uint32_t width = 0;
    uint32_t step = 0;
    uint32_t min_distinct = 0;
};

// Narrow 500/125/2, Medium 2000/500/4, Large 5000/1250/6.
std::vector<ScaleSpec> default_scales();

struct DensityCluster {
    std::string document_id;
    uint32_t window_start = 0;
    uint32_t window_end = 0;
    Scale scale = Scale::Narrow;
    uint32_t distinct_matches = 0;
    double score = 0.0;
    bool boosted = false;
};

// Slide each scale's window across every target document, score windows that
// meet the scale's distinct-term minimum, boost windows corroborated at other
// scales by 1.25x per extra scale, and keep clusters scoring >= 0.5.
std::vector<DensityCluster> density_map(const std::vector<MatchPair>& matches,
                                        const std::vector<TokenOccurrence>& target_occs,
                                        const Corpus& corpus,
                                        const std::vector<ScaleSpec>& scales = default_scales());

enum class Track : uint8_t { Embedding = 1, Register = 2, LongContext = 4 };

const char* track_name(Track t);
Track parse_track(const std::string& name);

// One (target chunk, source chunk) pairing queued for review. Chunk ids index
// the chunk list handed to assemble_pairs; trigger ids index the match list.
struct CandidateChunkPair {
    uint32_t target_chunk = 0;
    uint32_t source_chunk = 0;
    std::vector<uint32_t> trigger_matches;
    double density_score = 0.0;
    Track origin_track = Track::Embedding;
};

// Group matches by the chunks containing their two occurrences, attach the
// best overlapping density score, and rank by (density desc, trigger count
// desc, chunk ids).
std::vector<CandidateChunkPair> assemble_pairs(const std::vector<MatchPair>& matches,
                                               const std::vector<DensityCluster>& clusters,
                                               const std::vector<Chunk>& chunks,
                                               const std::vector<TokenOccurrence>& target_occs,
                                               const std::vector<TokenOccurrence>& source_occs);

void save_matches(const std::string& path, const std::vector<MatchPair>& matches);
std::vector<MatchPair> load_matches(const std::string& path);

void save_clusters(const std::string& path, const std::vector<DensityCluster>& clusters);
std::vector<DensityCluster> load_clusters(const std::string& path);

void save_pairs(const std::string& path, const std::vector<CandidateChunkPair>& pairs);
std::vector<CandidateChunkPair> load_pairs(const std::string& path);

} // namespace intertext
