#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace intertext {

// Byte-level text helpers shared across the pipeline. All offsets are byte
// offsets into normalized document text; multi-byte UTF-8 sequences are kept
// intact and treated as letter material.

bool valid_utf8(std::string_view bytes);

bool is_ascii_letter(unsigned char c);
bool is_letter_byte(unsigned char c); // ASCII letter or a byte >= 0x80
char fold_char(char c);               // ASCII lowercase, other bytes unchanged
std::string fold(std::string_view s);

struct WordSpan {
    uint32_t begin = 0;
    uint32_t end = 0; // half-open
};

// Words are maximal letter runs; an ASCII apostrophe joins two letter runs
// ("LORD's" is one word). Everything else separates words.
std::vector<WordSpan> word_spans(std::string_view text);

bool is_capitalized(std::string_view surface);

// Terminal punctuation ending a sentence for tokenization purposes.
bool is_sentence_terminal(char c); // . ! ? ;
// Snippet windows additionally stop at colons and em dashes but run
// through commas.
bool gap_breaks_sentence(std::string_view gap);
bool gap_breaks_snippet(std::string_view gap);

// Byte offsets where paragraphs start: offset 0 plus the position after each
// blank line (a whitespace run containing at least two newlines).
std::vector<uint32_t> paragraph_starts(std::string_view text);

uint64_t fnv1a64(std::string_view data);
std::string hex64(uint64_t value);

// Pipe-separated record encoding used by every text artifact. Escapes
// backslash, pipe, CR and LF so fields round-trip losslessly.
std::string psv_escape(std::string_view field);
std::string psv_unescape(std::string_view field);
std::vector<std::string> psv_split(std::string_view line);
std::string psv_join(const std::vector<std::string>& fields);

std::vector<std::string> split(std::string_view s, char delim);
std::string trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

// Deterministic float rendering for artifacts; %.17g round-trips doubles.
std::string format_double(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
bool file_exists(const std::string& path);
void append_file(const std::string& path, std::string_view content);
std::vector<std::string> read_lines(const std::string& path);

} // namespace intertext
