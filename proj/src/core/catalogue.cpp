#include "core/catalogue.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "core/text.hpp"

namespace intertext {

const char* detection_name(Detection d) {
    switch (d) {
    case Detection::Pipeline: return "Pipeline";
    case Detection::Gemini: return "Gemini";
    case Detection::PipelineGemini: return "Pipeline+Gemini";
    case Detection::Missed: return "Missed";
    }
    throw DomainError("unknown detection");
}

Detection parse_detection(const std::string& name) {
    if (name == "Pipeline") return Detection::Pipeline;
    if (name == "Gemini") return Detection::Gemini;
    if (name == "Pipeline+Gemini") return Detection::PipelineGemini;
    if (name == "Missed") return Detection::Missed;
    throw IngestError("unknown detection: " + name);
}

Detection detection_from_tracks(uint8_t tracks) {
    bool pipeline = (tracks & (static_cast<uint8_t>(Track::Embedding) |
                               static_cast<uint8_t>(Track::Register))) != 0;
    bool longcontext = (tracks & static_cast<uint8_t>(Track::LongContext)) != 0;
    if (pipeline && longcontext)
        return Detection::PipelineGemini;
    if (longcontext)
        return Detection::Gemini;
    if (pipeline)
        return Detection::Pipeline;
    return Detection::Missed;
}

bool is_reference(const Finding& finding) {
    std::string notes = fold(finding.notes);
    return notes.find("signpost:") != std::string::npos ||
           notes.find("overt citation") != std::string::npos ||
           notes.find("proper-noun simile") != std::string::npos ||
           notes.find("framed proverb") != std::string::npos;
}

Catalogue build_catalogue(const std::vector<Finding>& findings,
                          const std::vector<AttestationRecord>& records,
                          const std::vector<Finding>& missed,
                          const std::vector<std::string>& missed_citations,
                          const Corpus& corpus) {
    if (findings.size() != records.size())
        throw DomainError("attestation records do not match findings");
    if (missed.size() != missed_citations.size())
        throw DomainError("missed citations do not match missed findings");

    Catalogue catalogue;
    std::map<std::string, size_t> ordinal;
    for (const Document* doc : corpus.with_role(DocRole::Target)) {
        ordinal[doc->id] = catalogue.novels.size();
        catalogue.novels.push_back({doc->id, doc->title, {}});
    }

    auto place = [&](CatalogueRow row) {
        auto it = ordinal.find(row.finding.target_document_id);
        if (it == ordinal.end())
            throw DomainError("finding names unknown novel: " +
                              row.finding.target_document_id);
        catalogue.novels[it->second].rows.push_back(std::move(row));
    };

    for (size_t i = 0; i < findings.size(); ++i) {
        CatalogueRow row;
        row.finding = findings[i];
        row.attestation = records[i].status;
        row.citation = records[i].citation;
        row.attest_unverified = records[i].unverified;
        row.verified = verify_finding(findings[i], corpus);
        row.detection = detection_from_tracks(findings[i].tracks);
        place(std::move(row));
    }
    for (size_t i = 0; i < missed.size(); ++i) {
        CatalogueRow row;
        row.finding = missed[i];
        row.attestation = Attestation::Attested;
        row.citation = missed_citations[i];
        row.verified = false;
        row.detection = Detection::Missed;
        place(std::move(row));
    }

    for (NovelCatalogue& novel : catalogue.novels) {
        std::sort(novel.rows.begin(), novel.rows.end(),
                  [](const CatalogueRow& a, const CatalogueRow& b) {
                      return std::tie(a.finding.target_start, a.finding.target_end,
                                      a.finding.id) <
                             std::tie(b.finding.target_start, b.finding.target_end,
                                      b.finding.id);
                  });
        for (size_t i = 0; i < novel.rows.size(); ++i)
            novel.rows[i].number = static_cast<uint32_t>(i + 1);
    }
    return catalogue;
}

const char* kWorkbookHeader =
    "#, McCarthy Passage, KJV Verse(s), Connection Type, Rating, Detection, Attestation, "
    "Textual, Allusion Type, Citation(s), Verified?, Notes, MC chunk, MC passage start, "
    "MC passage end, KJV chunk, KJV passage start, KJV passage end";

namespace {

std::string verse_labels_cell(const std::vector<VerseRef>& refs) {
    std::string out;
    for (size_t i = 0; i < refs.size(); ++i) {
        if (i)
            out += "; ";
        out += verse_label(refs[i]);
    }
    return out;
}

std::string attestation_cell(const CatalogueRow& row) {
    if (row.attest_unverified)
        return "Unverified";
    return attestation_name(row.attestation);
}

std::string row_line(const CatalogueRow& row) {
    const Finding& f = row.finding;
    return psv_join({
        std::to_string(row.number),
        f.target_quote,
        verse_labels_cell(f.verse_refs),
        connection_type_label(f.connection_type),
        row.detection == Detection::Missed ? "\xE2\x80\x94" : verdict_name(f.rating),
        detection_name(row.detection),
        attestation_cell(row),
        f.textual ? "yes" : "no",
        is_reference(f) ? "Reference" : "Allusion",
        row.citation,
        row.verified ? "yes" : "no",
        f.notes,
        std::to_string(f.target_chunk),
        std::to_string(f.target_start),
        std::to_string(f.target_end),
        std::to_string(f.source_chunk),
        std::to_string(f.source_start),
        std::to_string(f.source_end),
    });
}

CatalogueRow parse_row_line(const std::string& line, const std::string& document_id,
                            uint32_t fallback_id) {
    auto fields = psv_split(line);
    if (fields.size() != 18)
        throw IngestError("workbook row has " + std::to_string(fields.size()) +
                          " fields, expected 18");
    CatalogueRow row;
    Finding& f = row.finding;
    row.number = static_cast<uint32_t>(std::stoul(fields[0]));
    f.id = fallback_id;
    f.target_document_id = document_id;
    f.target_quote = fields[1];
    for (const std::string& label : split(fields[2], ';')) {
        std::string trimmed = trim(label);
        if (trimmed.empty())
            continue;
        auto parsed = parse_verse_label(trimmed);
        if (!parsed)
            throw IngestError("workbook row has malformed verse label: " + trimmed);
        f.verse_refs.push_back(*parsed);
    }
    f.connection_type = parse_connection_type(fields[3]);
    f.rating = fields[4] == "\xE2\x80\x94" ? VerdictLevel::Moderate : parse_verdict(fields[4]);
    row.detection = parse_detection(fields[5]);
    if (fields[6] == "Unverified") {
        row.attestation = Attestation::Unattested;
        row.attest_unverified = true;
    } else if (fields[6] == "Attested") {
        row.attestation = Attestation::Attested;
    } else if (fields[6] == "Unattested") {
        row.attestation = Attestation::Unattested;
    } else {
        throw IngestError("unknown attestation cell: " + fields[6]);
    }
    f.textual = fields[7] == "yes";
    // fields[8], the allusion/reference kind, re-derives from the notes.
    row.citation = fields[9];
    row.verified = fields[10] == "yes";
    f.notes = fields[11];
    f.target_chunk = static_cast<uint32_t>(std::stoul(fields[12]));
    f.target_start = static_cast<uint32_t>(std::stoul(fields[13]));
    f.target_end = static_cast<uint32_t>(std::stoul(fields[14]));
    f.source_chunk = static_cast<uint32_t>(std::stoul(fields[15]));
    f.source_start = static_cast<uint32_t>(std::stoul(fields[16]));
    f.source_end = static_cast<uint32_t>(std::stoul(fields[17]));
    switch (row.detection) {
    case Detection::Pipeline: f.tracks = static_cast<uint8_t>(Track::Embedding); break;
    case Detection::Gemini: f.tracks = static_cast<uint8_t>(Track::LongContext); break;
    case Detection::PipelineGemini:
        f.tracks = static_cast<uint8_t>(Track::Embedding) |
                   static_cast<uint8_t>(Track::LongContext);
        break;
    case Detection::Missed: f.tracks = 0; break;
    }
    return row;
}

} // namespace

void export_workbook(const Catalogue& catalogue, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::string index;
    for (const NovelCatalogue& novel : catalogue.novels) {
        std::string file = slugify(novel.title) + ".psv";
        std::string body = std::string(kWorkbookHeader) + "\n";
        for (const CatalogueRow& row : novel.rows)
            body += row_line(row) + "\n";
        write_file(dir + "/" + file, body);
        index += psv_join({novel.title, file, std::to_string(novel.rows.size())}) + "\n";
    }
    write_file(dir + "/index.psv", index);
}

Catalogue import_workbook(const std::string& dir) {
    Catalogue catalogue;
    uint32_t next_id = 1;
    for (const std::string& line : read_lines(dir + "/index.psv")) {
        if (line.empty())
            continue;
        auto fields = psv_split(line);
        if (fields.size() != 3)
            throw IngestError("workbook index row needs title|file|entries");
        NovelCatalogue novel;
        novel.title = fields[0];
        novel.document_id = slugify(fields[0]);
        std::vector<std::string> lines = read_lines(dir + "/" + fields[1]);
        if (lines.empty() || lines[0] != kWorkbookHeader)
            throw IngestError("workbook file " + fields[1] + " lacks the expected header");
        for (size_t i = 1; i < lines.size(); ++i) {
            if (lines[i].empty())
                continue;
            novel.rows.push_back(parse_row_line(lines[i], novel.document_id, next_id++));
        }
        if (novel.rows.size() != std::stoul(fields[2]))
            throw IngestError("workbook index count disagrees with " + fields[1]);
        catalogue.novels.push_back(std::move(novel));
    }
    return catalogue;
}

namespace {

bool counts_in_main_tables(const CatalogueRow& row) {
    return row.finding.textual && !is_duplicate(row.finding);
}

} // namespace

std::vector<NovelSummary> summarize_novels(const Catalogue& catalogue) {
    std::vector<NovelSummary> out;
    for (const NovelCatalogue& novel : catalogue.novels) {
        NovelSummary s;
        s.title = novel.title;
        for (const CatalogueRow& row : novel.rows) {
            if (!counts_in_main_tables(row))
                continue;
            ++s.total;
            if (row.attestation == Attestation::Attested)
                ++s.attested;
            else
                ++s.unattested;
            if (row.detection == Detection::Missed)
                ++s.missed;
            else
                ++s.found;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<TypeSummary> summarize_types(const Catalogue& catalogue) {
    std::array<TypeSummary, kConnectionTypeCount> acc;
    for (int t = 0; t < kConnectionTypeCount; ++t)
        acc[t].type = static_cast<ConnectionType>(t);
    for (const NovelCatalogue& novel : catalogue.novels)
        for (const CatalogueRow& row : novel.rows) {
            if (!counts_in_main_tables(row) || is_reference(row.finding))
                continue;
            TypeSummary& s = acc[static_cast<int>(row.finding.connection_type)];
            ++s.total;
            if (row.attestation == Attestation::Attested)
                ++s.attested;
            else
                ++s.unattested;
            if (row.detection == Detection::Missed)
                ++s.missed;
            else
                ++s.found;
        }
    std::vector<TypeSummary> out;
    for (TypeSummary& s : acc) {
        if (s.attested > 0)
            s.recall_pct = static_cast<int>(
                std::lround(100.0 * (s.attested - s.missed) / s.attested));
        out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [](const TypeSummary& a, const TypeSummary& b) {
        if (a.recall_pct.has_value() != b.recall_pct.has_value())
            return a.recall_pct.has_value();
        if (a.recall_pct != b.recall_pct)
            return a.recall_pct > b.recall_pct;
        return static_cast<int>(a.type) < static_cast<int>(b.type);
    });
    return out;
}

int period_of_ordinal(size_t ordinal) {
    if (ordinal <= 3)
        return 0;
    if (ordinal == 4)
        return 1;
    if (ordinal <= 7)
        return 2;
    return 3;
}

const std::array<const char*, kPeriodCount> kPeriodLabels = {"Period 1", "Period 2", "Period 3",
                                                             "Period 4"};

int PeriodTable::row_total(ConnectionType type) const {
    int total = 0;
    for (int p = 0; p < kPeriodCount; ++p)
        total += counts[static_cast<int>(type)][p];
    return total;
}

int PeriodTable::column_total(int period) const {
    int total = 0;
    for (int t = 0; t < kConnectionTypeCount; ++t)
        total += counts[t][period];
    return total;
}

int PeriodTable::grand_total() const {
    int total = 0;
    for (int p = 0; p < kPeriodCount; ++p)
        total += column_total(p);
    return total;
}

PeriodTable summarize_periods(const Catalogue& catalogue) {
    PeriodTable table;
    for (size_t n = 0; n < catalogue.novels.size(); ++n) {
        int period = period_of_ordinal(n);
        for (const CatalogueRow& row : catalogue.novels[n].rows) {
            if (!row.finding.textual)
                continue;
            ++table.counts[static_cast<int>(row.finding.connection_type)][period];
        }
    }
    return table;
}

namespace {

const std::array<const char*, 39> kOldTestament = {
    "Genesis",      "Exodus",    "Leviticus",    "Numbers",       "Deuteronomy",
    "Joshua",       "Judges",    "Ruth",         "1 Samuel",      "2 Samuel",
    "1 Kings",      "2 Kings",   "1 Chronicles", "2 Chronicles",  "Ezra",
    "Nehemiah",     "Esther",    "Job",          "Psalms",        "Proverbs",
    "Ecclesiastes", "Song of Solomon",           "Isaiah",        "Jeremiah",
    "Lamentations", "Ezekiel",   "Daniel",       "Hosea",         "Joel",
    "Amos",         "Obadiah",   "Jonah",        "Micah",         "Nahum",
    "Habakkuk",     "Zephaniah", "Haggai",       "Zechariah",     "Malachi",
};

const std::array<const char*, 27> kNewTestament = {
    "Matthew",   "Mark",          "Luke",          "John",            "Acts",
    "Romans",    "1 Corinthians", "2 Corinthians", "Galatians",       "Ephesians",
    "Philippians",                "Colossians",    "1 Thessalonians", "2 Thessalonians",
    "1 Timothy", "2 Timothy",     "Titus",         "Philemon",        "Hebrews",
    "James",     "1 Peter",       "2 Peter",       "1 John",          "2 John",
    "3 John",    "Jude",          "Revelation",
};

// Position in the canon for tie-breaking; unknown books sort last.
int canon_index(const std::string& book) {
    std::string key = fold(book);
    for (size_t i = 0; i < kOldTestament.size(); ++i)
        if (fold(kOldTestament[i]) == key)
            return static_cast<int>(i);
    for (size_t i = 0; i < kNewTestament.size(); ++i)
        if (fold(kNewTestament[i]) == key)
            return static_cast<int>(kOldTestament.size() + i);
    return static_cast<int>(kOldTestament.size() + kNewTestament.size());
}

} // namespace

Testament testament_of(const std::string& book) {
    std::string key = fold(book);
    for (const char* name : kOldTestament)
        if (fold(name) == key)
            return Testament::Old;
    for (const char* name : kNewTestament)
        if (fold(name) == key)
            return Testament::New;
    return Testament::Other;
}

std::vector<BookCount> book_histogram(const Catalogue& catalogue) {
    std::map<std::string, int> counts;
    for (const NovelCatalogue& novel : catalogue.novels)
        for (const CatalogueRow& row : novel.rows) {
            if (!counts_in_main_tables(row))
                continue;
            for (const VerseRef& ref : row.finding.verse_refs)
                ++counts[ref.book];
        }
    std::vector<BookCount> out;
    for (const auto& [book, count] : counts)
        out.push_back({book, count, testament_of(book)});
    std::sort(out.begin(), out.end(), [](const BookCount& a, const BookCount& b) {
        if (a.count != b.count)
            return a.count > b.count;
        return canon_index(a.book) < canon_index(b.book);
    });
    return out;
}

namespace {

int percent(int part, int whole) {
    return whole == 0 ? 0 : static_cast<int>(std::lround(100.0 * part / whole));
}

} // namespace

std::string render_report(const Catalogue& catalogue) {
    std::string out;

    out += "== Connections by novel (references included) ==\n";
    out += "Novel | Total | Attested | Unattested | Found | Missed\n";
    NovelSummary novel_total{"Total", 0, 0, 0, 0, 0};
    for (const NovelSummary& s : summarize_novels(catalogue)) {
        out += s.title + " | " + std::to_string(s.total) + " | " + std::to_string(s.attested) +
               " | " + std::to_string(s.unattested) + " | " + std::to_string(s.found) + " | " +
               std::to_string(s.missed) + "\n";
        novel_total.total += s.total;
        novel_total.attested += s.attested;
        novel_total.unattested += s.unattested;
        novel_total.found += s.found;
        novel_total.missed += s.missed;
    }
    out += "Total | " + std::to_string(novel_total.total) + " | " +
           std::to_string(novel_total.attested) + " | " + std::to_string(novel_total.unattested) +
           " | " + std::to_string(novel_total.found) + " | " +
           std::to_string(novel_total.missed) + "\n";

    out += "\n== Allusions by connection type ==\n";
    out += "Connection type | Total | Attested | Unattested | Found | Missed | Recall\n";
    TypeSummary type_total;
    for (const TypeSummary& s : summarize_types(catalogue)) {
        out += std::string(connection_type_label(s.type)) + " | " + std::to_string(s.total) +
               " | " + std::to_string(s.attested) + " | " + std::to_string(s.unattested) +
               " | " + std::to_string(s.found) + " | " + std::to_string(s.missed) + " | " +
               (s.recall_pct ? std::to_string(*s.recall_pct) + "%" : "\xE2\x80\x94") + "\n";
        type_total.total += s.total;
        type_total.attested += s.attested;
        type_total.unattested += s.unattested;
        type_total.found += s.found;
        type_total.missed += s.missed;
    }
    std::string total_recall = "\xE2\x80\x94";
    if (type_total.attested > 0)
        total_recall =
            std::to_string(percent(type_total.attested - type_total.missed,
                                   type_total.attested)) +
            "%";
    out += "Total | " + std::to_string(type_total.total) + " | " +
           std::to_string(type_total.attested) + " | " + std::to_string(type_total.unattested) +
           " | " + std::to_string(type_total.found) + " | " + std::to_string(type_total.missed) +
           " | " + total_recall + "\n";

    out += "\n== Textual connections by period (references and duplicates included) ==\n";
    out += "Connection type";
    for (const char* label : kPeriodLabels)
        out += std::string(" | ") + label;
    out += " | Total\n";
    PeriodTable periods = summarize_periods(catalogue);
    std::vector<ConnectionType> period_order;
    for (int t = 0; t < kConnectionTypeCount; ++t)
        period_order.push_back(static_cast<ConnectionType>(t));
    std::sort(period_order.begin(), period_order.end(),
              [&](ConnectionType a, ConnectionType b) {
                  int ta = periods.row_total(a), tb = periods.row_total(b);
                  if (ta != tb)
                      return ta > tb;
                  return static_cast<int>(a) < static_cast<int>(b);
              });
    for (ConnectionType type : period_order) {
        out += connection_type_label(type);
        for (int p = 0; p < kPeriodCount; ++p)
            out += " | " + std::to_string(periods.counts[static_cast<int>(type)][p]);
        out += " | " + std::to_string(periods.row_total(type)) + "\n";
    }
    out += "Total";
    for (int p = 0; p < kPeriodCount; ++p)
        out += " | " + std::to_string(periods.column_total(p));
    out += " | " + std::to_string(periods.grand_total()) + "\n";

    out += "\n== Verse references by book ==\n";
    out += "Book | References | Share\n";
    std::vector<BookCount> books = book_histogram(catalogue);
    int total_refs = 0, old_refs = 0, new_refs = 0;
    for (const BookCount& b : books) {
        total_refs += b.count;
        if (b.testament == Testament::Old)
            old_refs += b.count;
        else if (b.testament == Testament::New)
            new_refs += b.count;
    }
    for (const BookCount& b : books)
        out += b.book + " | " + std::to_string(b.count) + " | " +
               std::to_string(percent(b.count, total_refs)) + "%\n";
    out += "Old Testament | " + std::to_string(old_refs) + " | " +
           std::to_string(percent(old_refs, total_refs)) + "%\n";
    out += "New Testament | " + std::to_string(new_refs) + " | " +
           std::to_string(percent(new_refs, total_refs)) + "%\n";
    return out;
}

} // namespace intertext
