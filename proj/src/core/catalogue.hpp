#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/corpus.hpp"
#include "core/review.hpp"
#include "core/verification.hpp"

namespace intertext {

// How a row entered the catalogue: the embedding/register pipeline, the
// long-context reader, both, or neither (a published identification the run
// failed to find).
enum class Detection : uint8_t { Pipeline, Gemini, PipelineGemini, Missed };

const char* detection_name(Detection d); // "Pipeline+Gemini" for the combined value
Detection parse_detection(const std::string& name);
Detection detection_from_tracks(uint8_t tracks);

// Rows describing an explicit pointer at scripture rather than a woven-in
// allusion: the notes carry a signpost marker.
bool is_reference(const Finding& finding);

struct CatalogueRow {
    uint32_t number = 0; // per-novel ordinal
    Finding finding;
    Attestation attestation = Attestation::Unattested;
    std::string citation;
    bool attest_unverified = false;
    bool verified = false;
    Detection detection = Detection::Pipeline;
};

struct NovelCatalogue {
    std::string document_id;
    std::string title;
    std::vector<CatalogueRow> rows;
};

struct Catalogue {
    std::vector<NovelCatalogue> novels; // corpus order; index is the novel ordinal
};

// Rows from final findings and their attestation records plus synthetic
// missed rows; grouped per novel in corpus order and numbered by passage
// position.
Catalogue build_catalogue(const std::vector<Finding>& findings,
                          const std::vector<AttestationRecord>& records,
                          const std::vector<Finding>& missed,
                          const std::vector<std::string>& missed_citations,
                          const Corpus& corpus);

// One pipe-delimited file per novel plus an index (title|file|entries). Data
// rows carry eighteen fields under a fixed header line.
void export_workbook(const Catalogue& catalogue, const std::string& dir);
Catalogue import_workbook(const std::string& dir);

extern const char* kWorkbookHeader;

// --- Summaries ---

struct NovelSummary {
    std::string title;
    int total = 0;
    int attested = 0;
    int unattested = 0;
    int found = 0;
    int missed = 0;
};

struct TypeSummary {
    ConnectionType type = ConnectionType::VerbalEcho;
    int total = 0;
    int attested = 0;
    int unattested = 0;
    int found = 0;
    int missed = 0;
    std::optional<int> recall_pct; // round((attested-missed)/attested); empty when attested=0
};

// Textual, non-duplicate rows per novel, references included.
std::vector<NovelSummary> summarize_novels(const Catalogue& catalogue);

// Textual, non-duplicate allusions per connection type (references held
// out), ordered by recall descending, rows without a recall last, ties in
// enum order.
std::vector<TypeSummary> summarize_types(const Catalogue& catalogue);

// Four composition periods by novel ordinal: 0-3, 4, 5-7, and 8-11.
constexpr int kPeriodCount = 4;
int period_of_ordinal(size_t ordinal);
extern const std::array<const char*, kPeriodCount> kPeriodLabels;

// Textual rows per connection type and period, references and duplicates
// included.
struct PeriodTable {
    std::array<std::array<int, kPeriodCount>, kConnectionTypeCount> counts{};

    int row_total(ConnectionType type) const;
    int column_total(int period) const;
    int grand_total() const;
};

PeriodTable summarize_periods(const Catalogue& catalogue);

// --- Verse reference histogram ---

enum class Testament : uint8_t { Old, New, Other };

struct BookCount {
    std::string book;
    int count = 0;
    Testament testament = Testament::Other;
};

// Every verse reference of every textual, non-duplicate row (references
// included), one count per reference. Sorted by count descending, ties in
// canon order.
std::vector<BookCount> book_histogram(const Catalogue& catalogue);

Testament testament_of(const std::string& book);

// All summary tables rendered as plain text.
std::string render_report(const Catalogue& catalogue);

} // namespace intertext
