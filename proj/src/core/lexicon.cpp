#include "core/lexicon.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"
#include "core/text.hpp"

namespace intertext {

double IdfTable::idf(const std::string& term) const {
    auto it = entries_.find(term);
    if (it == entries_.end())
        return std::log(static_cast<double>(corpus_size_)); // unseen: df = 1
    return it->second.idf;
}

uint32_t IdfTable::df(const std::string& term) const {
    auto it = entries_.find(term);
    return it == entries_.end() ? 0 : it->second.df;
}

void IdfTable::set(const std::string& term, uint32_t df) {
    if (df == 0 || df > corpus_size_)
        throw DomainError("df out of range for term: " + term);
    entries_[term] = {df, std::log(static_cast<double>(corpus_size_) / df)};
}

void IdfTable::save(const std::string& path) const {
    std::vector<std::string> terms;
    terms.reserve(entries_.size());
    for (const auto& [term, entry] : entries_)
        terms.push_back(term);
    std::sort(terms.begin(), terms.end());
    std::string out = "#N=" + std::to_string(corpus_size_) + "\n";
    for (const std::string& term : terms) {
        const IdfEntry& e = entries_.at(term);
        out += psv_join({term, std::to_string(e.df), format_double(e.idf)});
        out.push_back('\n');
    }
    write_file(path, out);
}

IdfTable IdfTable::load(const std::string& path) {
    std::vector<std::string> lines = read_lines(path);
    if (lines.empty() || !starts_with(lines[0], "#N="))
        throw DomainError("idf table missing #N= header: " + path);
    IdfTable table(static_cast<uint32_t>(std::stoul(lines[0].substr(3))));
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        std::vector<std::string> fields = psv_split(lines[i]);
        if (fields.size() != 3)
            throw DomainError("idf table line " + std::to_string(i + 1) + " malformed");
        table.set(fields[0], static_cast<uint32_t>(std::stoul(fields[1])));
    }
    return table;
}

IdfTable compute_idf(const std::vector<const Document*>& reference_docs) {
    if (reference_docs.empty())
        throw ConfigError("reference corpus is empty");
    IdfTable table(static_cast<uint32_t>(reference_docs.size()));
    std::unordered_map<std::string, uint32_t> df;
    for (const Document* doc : reference_docs) {
        std::unordered_set<std::string> seen;
        for (const TokenOccurrence& occ : tokenize(*doc))
            seen.insert(occ.term);
        for (const std::string& term : seen)
            ++df[term];
    }
    for (const auto& [term, count] : df)
        table.set(term, count);
    return table;
}

bool is_rare(const std::string& term, TokenKind kind, CorpusSide side, const RarityGate& gate,
             const IdfTable& table) {
    const double idf = table.idf(term);
    if (side == CorpusSide::Source)
        return idf > gate.source_min_idf; // strictly above the floor
    return kind == TokenKind::Word ? idf >= gate.target_word_min_idf
                                   : idf >= gate.target_phrase_min_idf;
}

bool matches_artefact_pattern(const std::string& folded_surface) {
    for (char c : folded_surface) {
        unsigned char u = static_cast<unsigned char>(c);
        bool ok = (u >= 'a' && u <= 'z') || u == '\'';
        if (!ok)
            return true;
    }
    return folded_surface.empty();
}

namespace {

std::unordered_set<std::string> load_word_list(const std::string& path) {
    std::unordered_set<std::string> words;
    if (path.empty())
        return words;
    for (const std::string& line : read_lines(path)) {
        std::string w = trim(line);
        if (w.empty() || w[0] == '#')
            continue;
        words.insert(fold(w));
    }
    return words;
}

struct CapStats {
    uint32_t mid_sentence = 0;
    uint32_t capitalized_mid = 0;
};

// Capitalization statistics per folded word over the target corpus. An
// occurrence is mid-sentence when an earlier word of the same sentence
// precedes it.
std::unordered_map<std::string, CapStats>
capitalization_stats(const std::vector<const Document*>& target_docs) {
    std::unordered_map<std::string, CapStats> stats;
    for (const Document* doc : target_docs) {
        const std::vector<WordSpan> words = word_spans(doc->text);
        bool sentence_start = true;
        for (size_t i = 0; i < words.size(); ++i) {
            if (i > 0) {
                std::string_view gap(doc->text.data() + words[i - 1].end,
                                     words[i].begin - words[i - 1].end);
                sentence_start = gap_breaks_sentence(gap);
            }
            std::string_view surface(doc->text.data() + words[i].begin,
                                     words[i].end - words[i].begin);
            if (!sentence_start) {
                CapStats& s = stats[fold(surface)];
                ++s.mid_sentence;
                if (is_capitalized(surface))
                    ++s.capitalized_mid;
            }
            sentence_start = false;
        }
    }
    return stats;
}

} // namespace

FilterLists FilterLists::load(const std::string& stopwords_path, const std::string& spanish_path,
                              const std::string& proper_names_path,
                              const std::string& ocr_patterns_path) {
    FilterLists lists;
    lists.stopwords = load_word_list(stopwords_path);
    lists.spanish = load_word_list(spanish_path);
    lists.proper_names = load_word_list(proper_names_path);
    if (ocr_patterns_path.empty())
        return lists;
    for (const std::string& line : read_lines(ocr_patterns_path)) {
        std::string pattern = trim(line);
        if (pattern.empty() || pattern[0] == '#')
            continue;
        try {
            lists.ocr_patterns.emplace_back(pattern, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw ConfigError("bad OCR pattern '" + pattern + "': " + e.what());
        }
        lists.ocr_pattern_sources.push_back(pattern);
    }
    return lists;
}

std::vector<TokenOccurrence> filter_candidates(const std::vector<TokenOccurrence>& occurrences,
                                               const std::vector<const Document*>& target_docs,
                                               const FilterLists& lists) {
    const auto stats = capitalization_stats(target_docs);

    auto is_proper_name = [&](const std::string& folded) {
        if (lists.proper_names.count(folded))
            return true;
        auto it = stats.find(folded);
        if (it == stats.end() || it->second.mid_sentence == 0)
            return false;
        return it->second.capitalized_mid * 10 >= it->second.mid_sentence * 9;
    };

    auto word_removed_hard = [&](const std::string& folded) {
        if (lists.spanish.count(folded))
            return true;
        if (matches_artefact_pattern(folded))
            return true;
        for (const std::regex& re : lists.ocr_patterns)
            if (std::regex_search(folded, re))
                return true;
        return is_proper_name(folded);
    };

    std::vector<TokenOccurrence> kept;
    kept.reserve(occurrences.size());
    for (const TokenOccurrence& occ : occurrences) {
        if (occ.kind == TokenKind::Word) {
            if (lists.is_stopword(occ.term) || word_removed_hard(occ.term))
                continue;
            kept.push_back(occ);
            continue;
        }
        bool drop = false;
        bool all_stopwords = true;
        for (const std::string& w : split(occ.term, ' ')) {
            if (!lists.is_stopword(w))
                all_stopwords = false;
            if (word_removed_hard(w)) {
                drop = true;
                break;
            }
        }
        if (!drop && !all_stopwords)
            kept.push_back(occ);
    }
    return kept;
}

std::vector<TokenOccurrence> rare_occurrences(const Corpus& corpus, const IdfTable& table,
                                              const RarityGate& gate, const FilterLists& lists) {
    std::vector<TokenOccurrence> gated;
    std::unordered_map<std::string, size_t> doc_order;
    for (const Document& doc : corpus.documents) {
        doc_order.emplace(doc.id, doc_order.size());
        if (doc.role == DocRole::Reference)
            continue;
        const CorpusSide side =
            doc.role == DocRole::Source ? CorpusSide::Source : CorpusSide::Target;
        for (TokenOccurrence& occ : tokenize(doc)) {
            if (is_rare(occ.term, occ.kind, side, gate, table))
                gated.push_back(std::move(occ));
        }
    }
    std::vector<TokenOccurrence> kept =
        filter_candidates(gated, corpus.with_role(DocRole::Target), lists);
    std::sort(kept.begin(), kept.end(), [&](const TokenOccurrence& a, const TokenOccurrence& b) {
        const size_t da = doc_order.at(a.document_id);
        const size_t db = doc_order.at(b.document_id);
        if (da != db)
            return da < db;
        if (a.char_start != b.char_start)
            return a.char_start < b.char_start;
        if (a.phrase_length != b.phrase_length)
            return a.phrase_length < b.phrase_length;
        return a.char_end < b.char_end;
    });
    return kept;
}

} // namespace intertext
