#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace intertext {

enum class DocRole { Target, Source, Reference };

const char* doc_role_name(DocRole role);
DocRole doc_role_from_name(std::string_view name);

// A normalized text plus the mapping from normalized byte offsets back to
// offsets in the original input.
struct Document {
    std::string id;
    std::string title;
    DocRole role = DocRole::Target;
    std::string text;             // normalized
    std::vector<uint32_t> origin; // origin[i] = offset of text[i] in the raw input

    size_t char_count() const { return text.size(); }
    uint32_t original_offset(uint32_t normalized_offset) const;
};

// Normalizes raw bytes: CRLF and CR become LF, other C0 control characters
// (except TAB) are dropped, and the input must be valid UTF-8.
Document ingest(std::string_view raw, std::string id, std::string title, DocRole role);

struct Chunk {
    std::string document_id;
    uint32_t index = 0; // per document, 0-based
    uint32_t char_start = 0;
    uint32_t char_end = 0; // half-open
    uint32_t word_count = 0;
};

// Splits a document into non-overlapping chunks that jointly cover it.
// Cuts land on the paragraph boundary nearest to each running multiple of
// target_words; where no paragraph boundary falls within half a target of
// the ideal cut, the nearest sentence boundary is used, then a hard word
// boundary. Every chunk except the last holds between target/2 and
// 3*target/2 words.
std::vector<Chunk> chunk_document(const Document& doc, uint32_t target_words);

enum class TokenKind { Word, Phrase };

struct TokenOccurrence {
    std::string document_id;
    uint32_t char_start = 0;
    uint32_t char_end = 0; // half-open, slice equals surface
    std::string surface;   // exact document slice
    std::string term;      // case-folded lookup key (phrase words joined by one space)
    TokenKind kind = TokenKind::Word;
    uint8_t phrase_length = 1; // 1 for words, 2..5 for phrases
};

// Word occurrences plus sliding 2..5-word phrase occurrences. Phrase windows
// never cross sentence-terminal punctuation (. ! ? ;).
std::vector<TokenOccurrence> tokenize(const Document& doc);

struct VerseRef {
    std::string book;
    uint32_t chapter = 0;
    uint32_t verse = 0;
    uint32_t char_start = 0;
    uint32_t char_end = 0;
};

std::string verse_label(const VerseRef& ref); // "Genesis 1:1"

// Maps (book, chapter, verse) ids to byte ranges of the source document.
// Built from a sidecar table of book|chapter|verse|text lines whose text
// must occur verbatim, in order, in the source document.
class VerseIndex {
  public:
    static VerseIndex build(const Document& source, const std::string& table_path);
    static VerseIndex build_from_lines(const Document& source,
                                       const std::vector<std::string>& lines);

    const VerseRef& resolve(std::string_view book, uint32_t chapter, uint32_t verse) const;
    const VerseRef* try_resolve(std::string_view book, uint32_t chapter, uint32_t verse) const;

    // All verses overlapping [char_start, char_end) of the source document.
    std::vector<VerseRef> covering(uint32_t char_start, uint32_t char_end) const;

    // Lowest-numbered verse of a chapter, or null when the chapter is absent.
    const VerseRef* first_in_chapter(std::string_view book, uint32_t chapter) const;

    const std::vector<VerseRef>& verses() const { return ordered_; }
    bool empty() const { return ordered_.empty(); }

  private:
    std::vector<VerseRef> ordered_;
    std::unordered_map<std::string, size_t> by_key_;

    static std::string key(std::string_view book, uint32_t chapter, uint32_t verse);
};

// Parses "Book 3:16" style labels; returns book/chapter/verse without offsets.
std::optional<VerseRef> parse_verse_label(std::string_view label);

// Manifest-driven document collection. Manifest lines: path|title|role.
struct Corpus {
    std::vector<Document> documents;

    const Document& by_id(std::string_view id) const;
    const Document* find(std::string_view id) const;
    std::vector<const Document*> with_role(DocRole role) const;
    const Document& source() const; // exactly one source document required

    static Corpus load(const std::string& manifest_path);
};

std::string slugify(std::string_view title);

} // namespace intertext
