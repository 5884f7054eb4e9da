#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "core/corpus.hpp"
#include "core/errors.hpp"
#include "core/lexicon.hpp"
#include "core/review.hpp"

namespace intertext {

// Case-folded words of the text with punctuation stripped and whitespace
// collapsed; the unit quote verification works in.
std::vector<std::string> normalized_words(std::string_view text);

// A quote of four or more words counts as present when at least one of its
// consecutive four-word runs occurs verbatim in the source; shorter quotes
// must occur whole. Empty quotes never verify.
bool verify_quote(std::string_view quote, std::string_view source_text);

// Both quotes of a finding located in their documents, unless the finding is
// already marked unverifiable.
bool verify_finding(const Finding& finding, const Corpus& corpus);

// Distinctive words: folded, de-duplicated, stopwords removed.
std::vector<std::string> distinctive_words(std::string_view text, const FilterLists& filters);

// Two quotes describe the same passage when they share at least three
// distinctive words and that overlap covers at least 30% of the shorter
// quote's distinctive vocabulary.
bool same_passage(std::string_view quote_a, std::string_view quote_b,
                  const FilterLists& filters);

// Passage-level dedup. Findings naming the same passage with the same
// connection type collapse into one row: the representative keeps the
// longest target quote (ties to the smallest id) and absorbs the union of
// tracks, verse references, and merged ids of the rest. Output is ordered by
// representative id; clusters lists, per passage, the indexes of the output
// rows that share it.
struct DedupResult {
    std::vector<Finding> findings;
    std::vector<std::vector<size_t>> clusters;
};

DedupResult dedup_passages(const std::vector<Finding>& findings, const FilterLists& filters);

// Classification-level dedup over the clusters of dedup_passages. When one
// passage carries several connection types, the row with the longest notes
// wins (ties resolved by connection-type order); the rest stay in the list
// flagged as duplicates via a "[duplicate] " notes prefix.
std::vector<Finding> dedup_classifications(const DedupResult& deduped);

bool is_duplicate(const Finding& finding);

inline constexpr const char* kDuplicateNotesPrefix = "[duplicate] ";

// --- Attestation against published criticism ---

struct ReferenceEntry {
    std::string novel; // target document id
    std::string quote;
    std::vector<VerseRef> verses; // book/chapter/verse only, no offsets
    ConnectionType type = ConnectionType::VerbalEcho;
    std::string citation;
};

// Sidecar table of published identifications: novel|quote|verses|type|citation
// with verses as semicolon-joined labels.
struct ReferenceTable {
    std::vector<ReferenceEntry> entries;

    static ReferenceTable load(const std::string& path);
    void save(const std::string& path) const;
};

// External bibliographic lookup. Returns a citation when the query turns one
// up. Implementations may throw SearchUnavailableError on transient failure.
class SearchClient {
  public:
    virtual ~SearchClient() = default;
    virtual std::optional<std::string> lookup(const std::string& query) = 0;
};

// Lookup that never finds anything; offline runs and tests.
class NullSearchClient : public SearchClient {
  public:
    std::optional<std::string> lookup(const std::string&) override { return std::nullopt; }
};

// Wraps a client with a one-request-per-second floor, a per-query cache, and
// up to three attempts per query before the failure propagates. The clock is
// injectable so tests control time.
class ThrottledSearchClient : public SearchClient {
  public:
    struct Clock {
        std::function<int64_t()> now_ms;
        std::function<void(int64_t)> sleep_ms;
        static Clock real();
    };

    explicit ThrottledSearchClient(SearchClient& inner, Clock clock = Clock::real(),
                                   int64_t min_interval_ms = 1000, int max_attempts = 3)
        : inner_(inner), clock_(std::move(clock)), min_interval_ms_(min_interval_ms),
          max_attempts_(max_attempts) {}

    std::optional<std::string> lookup(const std::string& query) override;

  private:
    SearchClient& inner_;
    Clock clock_;
    int64_t min_interval_ms_;
    int max_attempts_;
    int64_t last_request_ms_ = -1;
    std::map<std::string, std::optional<std::string>> cache_;
    std::mutex mutex_;
};

enum class Attestation : uint8_t { Attested, Unattested };

const char* attestation_name(Attestation a);

struct AttestationRecord {
    Attestation status = Attestation::Unattested;
    std::string citation;
    bool unverified = false; // the search failed outright; status is unknown, not negative
};

// Attestation of every finding plus synthetic rows for reference entries no
// finding matched. records runs parallel to the input findings; missed rows
// carry no tracks and take quote, verses, and type from their entry, with
// the entry's citation in missed_citations.
struct AttestResult {
    std::vector<AttestationRecord> records;
    std::vector<Finding> missed;
    std::vector<std::string> missed_citations;
};

// A finding matches a reference entry when the novels agree, some verse
// reference shares book and chapter, and the quotes pass the same-passage
// rule. Unmatched findings go to the search client; a search hit attests
// with the returned citation, a miss leaves the finding unattested, and
// search failure flags the record unverified.
AttestResult attest(const std::vector<Finding>& findings, const ReferenceTable& table,
                    SearchClient& search, const FilterLists& filters,
                    uint32_t next_missed_id = 0);

} // namespace intertext
