#include "core/text.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace intertext {

bool valid_utf8(std::string_view bytes) {
    size_t i = 0;
    const size_t n = bytes.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(bytes[i]);
        size_t len;
        uint32_t cp;
        if (c < 0x80) {
            i += 1;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > n)
            return false;
        for (size_t k = 1; k < len; ++k) {
            unsigned char cc = static_cast<unsigned char>(bytes[i + k]);
            if ((cc & 0xC0) != 0x80)
                return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // Reject overlong encodings, surrogates and out-of-range points.
        if (len == 2 && cp < 0x80)
            return false;
        if (len == 3 && cp < 0x800)
            return false;
        if (len == 4 && cp < 0x10000)
            return false;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            return false;
        i += len;
    }
    return true;
}

bool is_ascii_letter(unsigned char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
}

bool is_letter_byte(unsigned char c) {
    return is_ascii_letter(c) || c >= 0x80;
}

char fold_char(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u >= 'A' && u <= 'Z')
        return static_cast<char>(u - 'A' + 'a');
    return c;
}

std::string fold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
        out.push_back(fold_char(c));
    return out;
}

std::vector<WordSpan> word_spans(std::string_view text) {
    std::vector<WordSpan> spans;
    const size_t n = text.size();
    size_t i = 0;
    while (i < n) {
        if (!is_letter_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        size_t begin = i;
        while (i < n) {
            unsigned char c = static_cast<unsigned char>(text[i]);
            if (is_letter_byte(c)) {
                ++i;
            } else if (c == '\'' && i > begin && i + 1 < n &&
                       is_letter_byte(static_cast<unsigned char>(text[i + 1]))) {
                ++i; // interior apostrophe
            } else {
                break;
            }
        }
        spans.push_back({static_cast<uint32_t>(begin), static_cast<uint32_t>(i)});
    }
    return spans;
}

bool is_capitalized(std::string_view surface) {
    return !surface.empty() &&
           static_cast<unsigned char>(surface[0]) >= 'A' &&
           static_cast<unsigned char>(surface[0]) <= 'Z';
}

bool is_sentence_terminal(char c) {
    return c == '.' || c == '!' || c == '?' || c == ';';
}

bool gap_breaks_sentence(std::string_view gap) {
    for (char c : gap)
        if (is_sentence_terminal(c))
            return true;
    return false;
}

bool gap_breaks_snippet(std::string_view gap) {
    for (char c : gap)
        if (is_sentence_terminal(c) || c == ':')
            return true;
    return false;
}

std::vector<uint32_t> paragraph_starts(std::string_view text) {
    std::vector<uint32_t> starts;
    if (text.empty())
        return starts;
    starts.push_back(0);
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        if (text[i] != '\n') {
            ++i;
            continue;
        }
        size_t j = i;
        int newlines = 0;
        while (j < n && (text[j] == '\n' || text[j] == ' ' || text[j] == '\t')) {
            if (text[j] == '\n')
                ++newlines;
            ++j;
        }
        if (newlines >= 2 && j < n)
            starts.push_back(static_cast<uint32_t>(j));
        i = j > i ? j : i + 1;
    }
    return starts;
}

uint64_t fnv1a64(std::string_view data) {
    uint64_t h = 14695981039346656037ull;
    for (char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return std::string(buf);
}

std::string psv_escape(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    for (char c : field) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '|': out += "\\|"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

std::string psv_unescape(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    for (size_t i = 0; i < field.size(); ++i) {
        char c = field[i];
        if (c != '\\' || i + 1 >= field.size()) {
            out.push_back(c);
            continue;
        }
        char next = field[++i];
        switch (next) {
        case '\\': out.push_back('\\'); break;
        case '|': out.push_back('|'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        default:
            out.push_back('\\');
            out.push_back(next);
        }
    }
    return out;
}

std::vector<std::string> psv_split(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '\\' && i + 1 < line.size()) {
            current.push_back(c);
            current.push_back(line[++i]);
        } else if (c == '|') {
            fields.push_back(psv_unescape(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(psv_unescape(current));
    return fields;
}

std::string psv_join(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i)
            out.push_back('|');
        out += psv_escape(fields[i]);
    }
    return out;
}

std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(s.substr(start));
            break;
        }
        parts.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n'))
        ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n'))
        --e;
    return std::string(s.substr(b, e - b));
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return std::string(buf);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ExportError("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        throw ExportError("short write: " + path);
}

void append_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out)
        throw ExportError("cannot append to file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        throw ExportError("short write: " + path);
}

bool file_exists(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return static_cast<bool>(in);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::string content = read_file(path);
    std::vector<std::string> lines;
    std::string current;
    for (char c : content) {
        if (c == '\n') {
            if (!current.empty() && current.back() == '\r')
                current.pop_back();
            lines.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty())
        lines.push_back(current);
    return lines;
}

} // namespace intertext
