#include "core/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "core/errors.hpp"
#include "core/text.hpp"

namespace intertext {

const char* doc_role_name(DocRole role) {
    switch (role) {
    case DocRole::Target: return "target";
    case DocRole::Source: return "source";
    case DocRole::Reference: return "reference";
    }
    return "target";
}

DocRole doc_role_from_name(std::string_view name) {
    if (name == "target")
        return DocRole::Target;
    if (name == "source")
        return DocRole::Source;
    if (name == "reference")
        return DocRole::Reference;
    throw IngestError("unknown document role: " + std::string(name));
}

uint32_t Document::original_offset(uint32_t normalized_offset) const {
    if (normalized_offset >= origin.size())
        return origin.empty() ? 0 : origin.back() + 1;
    return origin[normalized_offset];
}

Document ingest(std::string_view raw, std::string id, std::string title, DocRole role) {
    if (!valid_utf8(raw))
        throw IngestError("document '" + id + "' is not valid UTF-8");
    Document doc;
    doc.id = std::move(id);
    doc.title = std::move(title);
    doc.role = role;
    doc.text.reserve(raw.size());
    doc.origin.reserve(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(raw[i]);
        if (c == '\r') {
            // CRLF collapses to LF; a bare CR becomes LF.
            if (i + 1 < raw.size() && raw[i + 1] == '\n')
                continue;
            doc.text.push_back('\n');
            doc.origin.push_back(static_cast<uint32_t>(i));
            continue;
        }
        if (c < 0x20 && c != '\n' && c != '\t')
            continue; // drop stray control characters
        doc.text.push_back(static_cast<char>(c));
        doc.origin.push_back(static_cast<uint32_t>(i));
    }
    return doc;
}

namespace {

// Word index (count of words strictly before the offset) for a sorted span list.
uint32_t words_before(const std::vector<WordSpan>& words, uint32_t offset) {
    auto it = std::lower_bound(words.begin(), words.end(), offset,
                               [](const WordSpan& w, uint32_t off) { return w.begin < off; });
    return static_cast<uint32_t>(it - words.begin());
}

// Sentence boundaries as byte offsets where a new sentence starts.
std::vector<uint32_t> sentence_starts_after_terminals(const std::string& text,
                                                      const std::vector<WordSpan>& words) {
    std::vector<uint32_t> starts;
    for (size_t w = 0; w + 1 < words.size(); ++w) {
        std::string_view gap(text.data() + words[w].end, words[w + 1].begin - words[w].end);
        if (gap_breaks_sentence(gap))
            starts.push_back(words[w + 1].begin);
    }
    return starts;
}

} // namespace

std::vector<Chunk> chunk_document(const Document& doc, uint32_t target_words) {
    if (target_words == 0)
        throw DomainError("target_words must be positive");
    std::vector<Chunk> chunks;
    const std::vector<WordSpan> words = word_spans(doc.text);
    const uint32_t total_words = static_cast<uint32_t>(words.size());
    if (doc.text.empty())
        return chunks;

    std::vector<uint32_t> paragraphs = paragraph_starts(doc.text);
    std::vector<uint32_t> sentences = sentence_starts_after_terminals(doc.text, words);

    const uint32_t half = target_words / 2;
    uint32_t cut_char = 0; // current chunk start
    uint32_t cut_word = 0;
    uint32_t index = 0;

    auto emit = [&](uint32_t end_char, uint32_t end_word) {
        Chunk c;
        c.document_id = doc.id;
        c.index = index++;
        c.char_start = cut_char;
        c.char_end = end_char;
        c.word_count = end_word - cut_word;
        chunks.push_back(std::move(c));
        cut_char = end_char;
        cut_word = end_word;
    };

    auto nearest_in_window = [&](const std::vector<uint32_t>& boundaries, uint32_t ideal_word,
                                 uint32_t lo_word, uint32_t hi_word) -> std::optional<uint32_t> {
        std::optional<uint32_t> best;
        uint32_t best_dist = 0;
        for (uint32_t b : boundaries) {
            if (b <= cut_char)
                continue;
            uint32_t w = words_before(words, b);
            if (w < lo_word || w > hi_word)
                continue;
            uint32_t dist = w > ideal_word ? w - ideal_word : ideal_word - w;
            if (!best || dist < best_dist || (dist == best_dist && b < *best)) {
                best = b;
                best_dist = dist;
            }
        }
        return best;
    };

    while (total_words - cut_word > target_words + half) {
        const uint32_t ideal = cut_word + target_words;
        const uint32_t lo = cut_word + (target_words - half);
        const uint32_t hi = cut_word + (target_words + half);
        std::optional<uint32_t> cut = nearest_in_window(paragraphs, ideal, lo, hi);
        if (!cut)
            cut = nearest_in_window(sentences, ideal, lo, hi);
        if (!cut && ideal < total_words)
            cut = words[ideal].begin; // hard fallback on a word boundary
        if (!cut || *cut <= cut_char)
            break;
        emit(*cut, words_before(words, *cut));
    }
    emit(static_cast<uint32_t>(doc.text.size()), total_words);
    return chunks;
}

std::vector<TokenOccurrence> tokenize(const Document& doc) {
    std::vector<TokenOccurrence> out;
    const std::vector<WordSpan> words = word_spans(doc.text);
    const size_t n = words.size();

    // sentence_break[i] is true when a sentence ends between word i and i+1.
    std::vector<bool> sentence_break(n > 0 ? n - 1 : 0, false);
    for (size_t i = 0; i + 1 < n; ++i) {
        std::string_view gap(doc.text.data() + words[i].end, words[i + 1].begin - words[i].end);
        sentence_break[i] = gap_breaks_sentence(gap);
    }

    auto slice = [&](uint32_t b, uint32_t e) { return doc.text.substr(b, e - b); };

    for (size_t i = 0; i < n; ++i) {
        TokenOccurrence occ;
        occ.document_id = doc.id;
        occ.char_start = words[i].begin;
        occ.char_end = words[i].end;
        occ.surface = slice(words[i].begin, words[i].end);
        occ.term = fold(occ.surface);
        occ.kind = TokenKind::Word;
        occ.phrase_length = 1;
        out.push_back(std::move(occ));
    }

    for (size_t i = 0; i < n; ++i) {
        std::string term = fold(slice(words[i].begin, words[i].end));
        for (size_t len = 2; len <= 5; ++len) {
            size_t j = i + len - 1;
            if (j >= n || sentence_break[j - 1])
                break;
            term += ' ';
            term += fold(slice(words[j].begin, words[j].end));
            TokenOccurrence occ;
            occ.document_id = doc.id;
            occ.char_start = words[i].begin;
            occ.char_end = words[j].end;
            occ.surface = slice(words[i].begin, words[j].end);
            occ.term = term;
            occ.kind = TokenKind::Phrase;
            occ.phrase_length = static_cast<uint8_t>(len);
            out.push_back(std::move(occ));
        }
    }

    std::sort(out.begin(), out.end(), [](const TokenOccurrence& a, const TokenOccurrence& b) {
        if (a.char_start != b.char_start)
            return a.char_start < b.char_start;
        if (a.phrase_length != b.phrase_length)
            return a.phrase_length < b.phrase_length;
        return a.char_end < b.char_end;
    });
    return out;
}

std::string verse_label(const VerseRef& ref) {
    return ref.book + " " + std::to_string(ref.chapter) + ":" + std::to_string(ref.verse);
}

std::string VerseIndex::key(std::string_view book, uint32_t chapter, uint32_t verse) {
    std::string k = fold(book);
    k += '/';
    k += std::to_string(chapter);
    k += ':';
    k += std::to_string(verse);
    return k;
}

VerseIndex VerseIndex::build(const Document& source, const std::string& table_path) {
    return build_from_lines(source, read_lines(table_path));
}

VerseIndex VerseIndex::build_from_lines(const Document& source,
                                        const std::vector<std::string>& lines) {
    VerseIndex index;
    size_t cursor = 0;
    for (size_t lineno = 0; lineno < lines.size(); ++lineno) {
        const std::string& line = lines[lineno];
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<std::string> fields = psv_split(line);
        if (fields.size() != 4)
            throw IndexError("verse table line " + std::to_string(lineno + 1) +
                             ": expected book|chapter|verse|text");
        VerseRef ref;
        ref.book = trim(fields[0]);
        ref.chapter = static_cast<uint32_t>(std::stoul(fields[1]));
        ref.verse = static_cast<uint32_t>(std::stoul(fields[2]));
        const std::string text = trim(fields[3]);
        if (text.empty())
            throw IndexError("verse table line " + std::to_string(lineno + 1) + ": empty text");

        std::string k = key(ref.book, ref.chapter, ref.verse);
        if (index.by_key_.count(k))
            throw IndexError("duplicate verse id: " + verse_label(ref));

        size_t pos = source.text.find(text, cursor);
        if (pos == std::string::npos)
            throw IndexError("verse text not found in source document: " + verse_label(ref));
        ref.char_start = static_cast<uint32_t>(pos);
        ref.char_end = static_cast<uint32_t>(pos + text.size());
        cursor = ref.char_end;

        index.by_key_.emplace(std::move(k), index.ordered_.size());
        index.ordered_.push_back(std::move(ref));
    }
    return index;
}

const VerseRef* VerseIndex::try_resolve(std::string_view book, uint32_t chapter,
                                        uint32_t verse) const {
    auto it = by_key_.find(key(book, chapter, verse));
    if (it == by_key_.end())
        return nullptr;
    return &ordered_[it->second];
}

const VerseRef& VerseIndex::resolve(std::string_view book, uint32_t chapter,
                                    uint32_t verse) const {
    const VerseRef* ref = try_resolve(book, chapter, verse);
    if (!ref)
        throw UnknownVerseError("unknown verse: " + std::string(book) + " " +
                                std::to_string(chapter) + ":" + std::to_string(verse));
    return *ref;
}

std::vector<VerseRef> VerseIndex::covering(uint32_t char_start, uint32_t char_end) const {
    std::vector<VerseRef> out;
    for (const VerseRef& ref : ordered_) {
        if (ref.char_start < char_end && char_start < ref.char_end)
            out.push_back(ref);
    }
    return out;
}

const VerseRef* VerseIndex::first_in_chapter(std::string_view book, uint32_t chapter) const {
    const VerseRef* best = nullptr;
    std::string folded = fold(book);
    for (const VerseRef& ref : ordered_) {
        if (ref.chapter != chapter || fold(ref.book) != folded)
            continue;
        if (!best || ref.verse < best->verse)
            best = &ref;
    }
    return best;
}

std::optional<VerseRef> parse_verse_label(std::string_view label) {
    size_t colon = label.rfind(':');
    if (colon == std::string_view::npos)
        return std::nullopt;
    size_t space = label.rfind(' ', colon);
    if (space == std::string_view::npos)
        return std::nullopt;
    VerseRef ref;
    ref.book = trim(label.substr(0, space));
    if (ref.book.empty())
        return std::nullopt;
    try {
        ref.chapter = static_cast<uint32_t>(std::stoul(std::string(label.substr(space + 1, colon - space - 1))));
        ref.verse = static_cast<uint32_t>(std::stoul(std::string(label.substr(colon + 1))));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return ref;
}

const Document* Corpus::find(std::string_view id) const {
    for (const Document& d : documents)
        if (d.id == id)
            return &d;
    return nullptr;
}

const Document& Corpus::by_id(std::string_view id) const {
    const Document* d = find(id);
    if (!d)
        throw DomainError("unknown document id: " + std::string(id));
    return *d;
}

std::vector<const Document*> Corpus::with_role(DocRole role) const {
    std::vector<const Document*> out;
    for (const Document& d : documents)
        if (d.role == role)
            out.push_back(&d);
    return out;
}

const Document& Corpus::source() const {
    const Document* found = nullptr;
    for (const Document& d : documents) {
        if (d.role != DocRole::Source)
            continue;
        if (found)
            throw IngestError("corpus has more than one source document");
        found = &d;
    }
    if (!found)
        throw IngestError("corpus has no source document");
    return *found;
}

std::string slugify(std::string_view title) {
    std::string slug;
    bool pending = false;
    for (char c : title) {
        if (is_ascii_letter(static_cast<unsigned char>(c)) || (c >= '0' && c <= '9')) {
            if (pending && !slug.empty())
                slug.push_back('_');
            pending = false;
            slug.push_back(fold_char(c));
        } else {
            pending = true;
        }
    }
    return slug.empty() ? "doc" : slug;
}

Corpus Corpus::load(const std::string& manifest_path) {
    Corpus corpus;
    std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
    std::vector<std::string> lines = read_lines(manifest_path);
    for (size_t lineno = 0; lineno < lines.size(); ++lineno) {
        const std::string& line = lines[lineno];
        if (trim(line).empty() || line[0] == '#')
            continue;
        std::vector<std::string> fields = psv_split(line);
        if (fields.size() != 3)
            throw IngestError("manifest line " + std::to_string(lineno + 1) +
                              ": expected path|title|role");
        std::filesystem::path p(trim(fields[0]));
        if (p.is_relative())
            p = base / p;
        std::string title = trim(fields[1]);
        std::string id = slugify(title);
        for (const Document& d : corpus.documents)
            if (d.id == id)
                throw IngestError("duplicate document id from title: " + title);
        corpus.documents.push_back(
            ingest(read_file(p.string()), id, title, doc_role_from_name(trim(fields[2]))));
    }
    return corpus;
}

} // namespace intertext
