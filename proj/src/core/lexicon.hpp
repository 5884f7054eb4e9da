#pragma once

#include <cstdint>
#include <regex>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "core/corpus.hpp"

namespace intertext {

struct IdfEntry {
    uint32_t df = 0;
    double idf = 0.0;
};

// Inverse document frequencies over a reference corpus. idf = ln(N/df);
// terms absent from the table are scored as if df = 1.
class IdfTable {
  public:
    IdfTable() = default;
    explicit IdfTable(uint32_t corpus_size) : corpus_size_(corpus_size) {}

    uint32_t corpus_size() const { return corpus_size_; }
    size_t term_count() const { return entries_.size(); }
    bool contains(const std::string& term) const { return entries_.count(term) != 0; }
    double idf(const std::string& term) const;
    uint32_t df(const std::string& term) const;
    void set(const std::string& term, uint32_t df);

    void save(const std::string& path) const;
    static IdfTable load(const std::string& path);

  private:
    uint32_t corpus_size_ = 0;
    std::unordered_map<std::string, IdfEntry> entries_;
};

// df counts one hit per reference document containing the term (word or
// phrase) at least once.
IdfTable compute_idf(const std::vector<const Document*>& reference_docs);

struct RarityGate {
    double source_min_idf = 4.0;       // strict: idf must exceed this
    double target_word_min_idf = 1.5;  // inclusive
    double target_phrase_min_idf = 0.0; // inclusive
};

enum class CorpusSide { Source, Target };

bool is_rare(const std::string& term, TokenKind kind, CorpusSide side, const RarityGate& gate,
             const IdfTable& table);

struct FilterLists {
    std::unordered_set<std::string> stopwords;
    std::unordered_set<std::string> spanish;
    std::unordered_set<std::string> proper_names;
    std::vector<std::regex> ocr_patterns;
    std::vector<std::string> ocr_pattern_sources;

    bool is_stopword(const std::string& folded) const { return stopwords.count(folded) != 0; }

    // An empty path leaves the corresponding list unused.
    static FilterLists load(const std::string& stopwords_path, const std::string& spanish_path,
                            const std::string& proper_names_path,
                            const std::string& ocr_patterns_path);
};

// Removes exclusion-list hits, artefact-pattern tokens and terms the
// capitalization heuristic classifies as proper names. The heuristic looks
// at target-corpus word occurrences: a term capitalized in at least 90% of
// its mid-sentence uses is treated as a proper name. Phrases are removed
// when any constituent word is removed for a non-stopword reason or when
// every constituent is a stopword.
std::vector<TokenOccurrence> filter_candidates(const std::vector<TokenOccurrence>& occurrences,
                                               const std::vector<const Document*>& target_docs,
                                               const FilterLists& lists);

// All rarity-gated, filtered occurrences from the target and source sides of
// the corpus, ordered by (document, offset).
std::vector<TokenOccurrence> rare_occurrences(const Corpus& corpus, const IdfTable& table,
                                              const RarityGate& gate, const FilterLists& lists);

// True when the folded surface contains a byte outside ASCII letters and the
// apostrophe: the built-in OCR/mojibake artefact check.
bool matches_artefact_pattern(const std::string& folded_surface);

} // namespace intertext
