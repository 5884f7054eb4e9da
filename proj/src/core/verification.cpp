#include "core/verification.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <set>
#include <thread>
#include <unordered_set>

#include "core/text.hpp"

namespace intertext {

std::vector<std::string> normalized_words(std::string_view text) {
    std::vector<std::string> words;
    for (const auto& [begin, end] : word_spans(text))
        words.push_back(fold(text.substr(begin, end - begin)));
    return words;
}

namespace {

std::string join_words(const std::vector<std::string>& words, size_t begin, size_t count) {
    std::string out;
    for (size_t i = begin; i < begin + count; ++i) {
        if (i > begin)
            out += ' ';
        out += words[i];
    }
    return out;
}

} // namespace

bool verify_quote(std::string_view quote, std::string_view source_text) {
    std::vector<std::string> qwords = normalized_words(quote);
    if (qwords.empty())
        return false;
    std::vector<std::string> swords = normalized_words(source_text);
    size_t need = std::min<size_t>(qwords.size(), 4);
    if (swords.size() < need)
        return false;

    std::unordered_set<std::string> source_grams;
    for (size_t i = 0; i + need <= swords.size(); ++i)
        source_grams.insert(join_words(swords, i, need));

    if (qwords.size() < 4)
        return source_grams.count(join_words(qwords, 0, qwords.size())) != 0;
    for (size_t i = 0; i + 4 <= qwords.size(); ++i)
        if (source_grams.count(join_words(qwords, i, 4)))
            return true;
    return false;
}

bool verify_finding(const Finding& finding, const Corpus& corpus) {
    if (finding.unverifiable)
        return false;
    const Document* target = corpus.find(finding.target_document_id);
    if (!target)
        return false;
    return verify_quote(finding.target_quote, target->text) &&
           verify_quote(finding.source_quote, corpus.source().text);
}

std::vector<std::string> distinctive_words(std::string_view text, const FilterLists& filters) {
    std::vector<std::string> words = normalized_words(text);
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    words.erase(std::remove_if(words.begin(), words.end(),
                               [&](const std::string& w) { return filters.is_stopword(w); }),
                words.end());
    return words;
}

bool same_passage(std::string_view quote_a, std::string_view quote_b,
                  const FilterLists& filters) {
    std::vector<std::string> a = distinctive_words(quote_a, filters);
    std::vector<std::string> b = distinctive_words(quote_b, filters);
    if (a.empty() || b.empty())
        return false;
    std::vector<std::string> shared;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
    size_t shorter = std::min(a.size(), b.size());
    return shared.size() >= 3 && 10 * shared.size() >= 3 * shorter;
}

namespace {

struct UnionFind {
    std::vector<size_t> parent;

    explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    size_t find(size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    void unite(size_t a, size_t b) { parent[find(a)] = find(b); }
};

bool verse_ref_less(const VerseRef& a, const VerseRef& b) {
    return std::tie(a.book, a.chapter, a.verse, a.char_start) <
           std::tie(b.book, b.chapter, b.verse, b.char_start);
}

bool verse_ref_equal(const VerseRef& a, const VerseRef& b) {
    return a.book == b.book && a.chapter == b.chapter && a.verse == b.verse &&
           a.char_start == b.char_start && a.char_end == b.char_end;
}

} // namespace

DedupResult dedup_passages(const std::vector<Finding>& findings, const FilterLists& filters) {
    UnionFind uf(findings.size());
    for (size_t i = 0; i < findings.size(); ++i)
        for (size_t j = i + 1; j < findings.size(); ++j)
            if (findings[i].target_document_id == findings[j].target_document_id &&
                same_passage(findings[i].target_quote, findings[j].target_quote, filters))
                uf.unite(i, j);

    std::map<size_t, std::vector<size_t>> components;
    for (size_t i = 0; i < findings.size(); ++i)
        components[uf.find(i)].push_back(i);

    DedupResult result;
    struct ClusterRow {
        uint32_t representative_id;
        Finding finding;
        size_t component;
    };
    std::vector<ClusterRow> rows;
    size_t component_index = 0;
    for (const auto& [root, members] : components) {
        std::map<ConnectionType, std::vector<size_t>> by_type;
        for (size_t idx : members)
            by_type[findings[idx].connection_type].push_back(idx);
        for (const auto& [type, group] : by_type) {
            size_t rep = group[0];
            for (size_t idx : group) {
                const Finding& cand = findings[idx];
                const Finding& best = findings[rep];
                if (cand.target_quote.size() > best.target_quote.size() ||
                    (cand.target_quote.size() == best.target_quote.size() &&
                     cand.id < best.id))
                    rep = idx;
            }
            Finding merged = findings[rep];
            for (size_t idx : group) {
                const Finding& other = findings[idx];
                merged.tracks |= other.tracks;
                merged.disputed = merged.disputed || other.disputed;
                for (const VerseRef& r : other.verse_refs)
                    merged.verse_refs.push_back(r);
                if (idx == rep)
                    continue;
                merged.merged_ids.push_back(other.id);
                for (uint32_t ancestor : other.merged_ids)
                    merged.merged_ids.push_back(ancestor);
                if (merged.notes.empty())
                    merged.notes = other.notes;
            }
            std::sort(merged.verse_refs.begin(), merged.verse_refs.end(), verse_ref_less);
            merged.verse_refs.erase(std::unique(merged.verse_refs.begin(),
                                                merged.verse_refs.end(), verse_ref_equal),
                                    merged.verse_refs.end());
            std::sort(merged.merged_ids.begin(), merged.merged_ids.end());
            for (size_t idx : group)
                if (findings[idx].rating == VerdictLevel::Strong)
                    merged.rating = VerdictLevel::Strong;
            rows.push_back({merged.id, std::move(merged), component_index});
        }
        ++component_index;
    }

    std::sort(rows.begin(), rows.end(), [](const ClusterRow& a, const ClusterRow& b) {
        return a.representative_id < b.representative_id;
    });
    std::map<size_t, std::vector<size_t>> cluster_rows;
    for (size_t i = 0; i < rows.size(); ++i) {
        cluster_rows[rows[i].component].push_back(i);
        result.findings.push_back(std::move(rows[i].finding));
    }
    // Clusters ordered by their first output row.
    std::vector<std::vector<size_t>> clusters;
    for (auto& [component, indexes] : cluster_rows)
        clusters.push_back(std::move(indexes));
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    result.clusters = std::move(clusters);
    return result;
}

bool is_duplicate(const Finding& finding) {
    return finding.notes.rfind(kDuplicateNotesPrefix, 0) == 0;
}

std::vector<Finding> dedup_classifications(const DedupResult& deduped) {
    std::vector<Finding> out = deduped.findings;
    for (const std::vector<size_t>& cluster : deduped.clusters) {
        std::vector<size_t> contenders;
        for (size_t idx : cluster)
            if (!is_duplicate(out.at(idx)))
                contenders.push_back(idx);
        if (contenders.size() < 2)
            continue;
        size_t winner = contenders[0];
        for (size_t idx : contenders) {
            const Finding& cand = out[idx];
            const Finding& best = out[winner];
            if (cand.notes.size() > best.notes.size() ||
                (cand.notes.size() == best.notes.size() &&
                 static_cast<int>(cand.connection_type) < static_cast<int>(best.connection_type)))
                winner = idx;
        }
        for (size_t idx : contenders)
            if (idx != winner)
                out[idx].notes = kDuplicateNotesPrefix + out[idx].notes;
    }
    return out;
}

const char* attestation_name(Attestation a) {
    switch (a) {
    case Attestation::Attested: return "Attested";
    case Attestation::Unattested: return "Unattested";
    }
    throw DomainError("unknown attestation");
}

ReferenceTable ReferenceTable::load(const std::string& path) {
    ReferenceTable table;
    for (const std::string& line : read_lines(path)) {
        if (line.empty() || line[0] == '#')
            continue;
        auto f = psv_split(line);
        if (f.size() != 5)
            throw IngestError("malformed reference entry (" + std::to_string(f.size()) +
                              " fields)");
        ReferenceEntry entry;
        entry.novel = f[0];
        entry.quote = f[1];
        for (const std::string& label : split(f[2], ';')) {
            if (label.empty())
                continue;
            auto parsed = parse_verse_label(label);
            if (!parsed)
                throw IngestError("malformed verse label in reference entry: " + label);
            entry.verses.push_back(*parsed);
        }
        entry.type = parse_connection_type(f[3]);
        entry.citation = f[4];
        table.entries.push_back(std::move(entry));
    }
    return table;
}

void ReferenceTable::save(const std::string& path) const {
    std::string out;
    for (const ReferenceEntry& e : entries) {
        std::string verses;
        for (size_t i = 0; i < e.verses.size(); ++i) {
            if (i)
                verses += ';';
            verses += verse_label(e.verses[i]);
        }
        out += psv_join({e.novel, e.quote, verses, connection_type_name(e.type), e.citation}) +
               "\n";
    }
    write_file(path, out);
}

ThrottledSearchClient::Clock ThrottledSearchClient::Clock::real() {
    return {
        [] {
            return std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now().time_since_epoch())
                .count();
        },
        [](int64_t ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); },
    };
}

std::optional<std::string> ThrottledSearchClient::lookup(const std::string& query) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto cached = cache_.find(query);
    if (cached != cache_.end())
        return cached->second;

    for (int attempt = 1;; ++attempt) {
        int64_t now = clock_.now_ms();
        if (last_request_ms_ >= 0 && now - last_request_ms_ < min_interval_ms_) {
            clock_.sleep_ms(min_interval_ms_ - (now - last_request_ms_));
            now = clock_.now_ms();
        }
        last_request_ms_ = now;
        try {
            std::optional<std::string> result = inner_.lookup(query);
            cache_[query] = result;
            return result;
        } catch (const SearchUnavailableError&) {
            if (attempt >= max_attempts_)
                throw;
        }
    }
}

namespace {

bool verses_share_chapter(const std::vector<VerseRef>& a, const std::vector<VerseRef>& b) {
    for (const VerseRef& x : a)
        for (const VerseRef& y : b)
            if (fold(x.book) == fold(y.book) && x.chapter == y.chapter)
                return true;
    return false;
}

std::string search_query(const Finding& f, const FilterLists& filters) {
    std::string query = f.target_document_id;
    std::vector<std::string> terms = distinctive_words(f.target_quote, filters);
    size_t take = std::min<size_t>(terms.size(), 6);
    for (size_t i = 0; i < take; ++i)
        query += " " + terms[i];
    if (!f.verse_refs.empty())
        query += " " + f.verse_refs.front().book;
    return query;
}

} // namespace

AttestResult attest(const std::vector<Finding>& findings, const ReferenceTable& table,
                    SearchClient& search, const FilterLists& filters, uint32_t next_missed_id) {
    if (next_missed_id == 0) {
        for (const Finding& f : findings)
            next_missed_id = std::max(next_missed_id, f.id);
        ++next_missed_id;
    }

    AttestResult result;
    result.records.resize(findings.size());
    std::vector<bool> entry_matched(table.entries.size(), false);

    for (size_t i = 0; i < findings.size(); ++i) {
        const Finding& f = findings[i];
        AttestationRecord& record = result.records[i];
        for (size_t e = 0; e < table.entries.size(); ++e) {
            const ReferenceEntry& entry = table.entries[e];
            if (entry.novel != f.target_document_id)
                continue;
            if (!verses_share_chapter(entry.verses, f.verse_refs))
                continue;
            if (!same_passage(entry.quote, f.target_quote, filters))
                continue;
            entry_matched[e] = true;
            if (record.status != Attestation::Attested) {
                record.status = Attestation::Attested;
                record.citation = entry.citation;
            }
        }
        if (record.status == Attestation::Attested)
            continue;
        try {
            std::optional<std::string> citation = search.lookup(search_query(f, filters));
            if (citation) {
                record.status = Attestation::Attested;
                record.citation = *citation;
            }
        } catch (const SearchUnavailableError&) {
            record.unverified = true;
        }
    }

    for (size_t e = 0; e < table.entries.size(); ++e) {
        if (entry_matched[e])
            continue;
        const ReferenceEntry& entry = table.entries[e];
        Finding missed;
        missed.id = next_missed_id++;
        missed.target_document_id = entry.novel;
        missed.target_quote = entry.quote;
        missed.verse_refs = entry.verses;
        missed.connection_type = entry.type;
        missed.tracks = 0;
        missed.unverifiable = true;
        result.missed.push_back(std::move(missed));
        result.missed_citations.push_back(entry.citation);
    }
    return result;
}

} // namespace intertext
