#include "core/embedding.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "core/errors.hpp"
#include "core/text.hpp"

namespace intertext {

const char* embed_role_name(EmbedRole role) {
    return role == EmbedRole::Semantic ? "semantic" : "contextual";
}

Snippet extract_snippet(const TokenOccurrence& occ, const Document& doc) {
    const std::vector<WordSpan> words = word_spans(doc.text);
    if (words.empty())
        throw DomainError("cannot extract snippet from an empty document");

    // Locate the word containing the occurrence start and the word whose end
    // closes the occurrence (identical for single words).
    size_t first = words.size();
    size_t last = words.size();
    for (size_t i = 0; i < words.size(); ++i) {
        if (words[i].begin == occ.char_start)
            first = i;
        if (words[i].end == occ.char_end)
            last = i;
    }
    if (first == words.size() || last == words.size() || last < first)
        throw DomainError("occurrence does not align with word boundaries: " + occ.surface);

    auto gap = [&](size_t left_word) {
        return std::string_view(doc.text.data() + words[left_word].end,
                                words[left_word + 1].begin - words[left_word].end);
    };

    const int window = 4;
    size_t lo = first;
    int left = 0;
    while (left < window && lo > 0 && !gap_breaks_snippet(gap(lo - 1))) {
        --lo;
        ++left;
    }
    size_t hi = last;
    int right = 0;
    while (right < window && hi + 1 < words.size() && !gap_breaks_snippet(gap(hi))) {
        ++hi;
        ++right;
    }

    Snippet snip;
    snip.occurrence_index = 0;
    snip.text = doc.text.substr(words[lo].begin, words[hi].end - words[lo].begin);
    snip.left_words = left;
    snip.right_words = right;
    return snip;
}

namespace {

void l2_normalize(std::vector<float>& v) {
    double norm = 0.0;
    for (float x : v)
        norm += double(x) * x;
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
        if (!v.empty())
            v[0] = 1.0f; // canonical unit vector for degenerate input
        return;
    }
    for (float& x : v)
        x = static_cast<float>(x / norm);
}

} // namespace

std::vector<float> mock_embed(std::string_view text, EmbedRole role, int dimension) {
    if (dimension < 8)
        throw DomainError("mock embedding dimension must be at least 8");
    std::vector<float> v(static_cast<size_t>(dimension), 0.0f);
    std::vector<std::string> tokens;
    for (const WordSpan& w : word_spans(text))
        tokens.push_back(fold(text.substr(w.begin, w.end - w.begin)));
    if (tokens.empty()) {
        v[0] = 1.0f;
        return v;
    }
    if (role == EmbedRole::Semantic) {
        for (const std::string& t : tokens)
            v[fnv1a64(t) % dimension] += 1.0f;
    } else {
        if (tokens.size() == 1) {
            v[fnv1a64(tokens[0] + " " + tokens[0]) % dimension] += 1.0f;
        } else {
            for (size_t i = 0; i + 1 < tokens.size(); ++i)
                v[fnv1a64(tokens[i] + " " + tokens[i + 1]) % dimension] += 1.0f;
        }
    }
    l2_normalize(v);
    return v;
}

MockEmbeddingProvider::MockEmbeddingProvider(int dimension) : dimension_(dimension) {
    if (dimension < 8)
        throw DomainError("mock embedding dimension must be at least 8");
}

std::string MockEmbeddingProvider::id() const {
    return "mock-bow-" + std::to_string(dimension_);
}

std::vector<std::vector<float>>
MockEmbeddingProvider::embed_batch(const std::vector<std::string>& texts, EmbedRole role) {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const std::string& t : texts)
        out.push_back(mock_embed(t, role, dimension_));
    return out;
}

std::string EmbeddingCache::key(const std::string& provider_id, EmbedRole role,
                                std::string_view text) {
    return provider_id + "/" + embed_role_name(role) + "/" + hex64(fnv1a64(text));
}

EmbeddingCache::EmbeddingCache(std::string path) : path_(std::move(path)) {
    load();
}

void EmbeddingCache::load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in)
        return;
    while (true) {
        uint8_t role;
        uint32_t id_len;
        if (!in.read(reinterpret_cast<char*>(&role), 1))
            break;
        if (!in.read(reinterpret_cast<char*>(&id_len), 4))
            break;
        std::string provider_id(id_len, '\0');
        uint64_t text_hash;
        uint32_t dim;
        if (!in.read(provider_id.data(), id_len) ||
            !in.read(reinterpret_cast<char*>(&text_hash), 8) ||
            !in.read(reinterpret_cast<char*>(&dim), 4))
            break;
        std::vector<float> vec(dim);
        if (!in.read(reinterpret_cast<char*>(vec.data()), std::streamsize(dim) * 4))
            break;
        std::string k = provider_id + "/" +
                        embed_role_name(static_cast<EmbedRole>(role)) + "/" + hex64(text_hash);
        entries_[std::move(k)] = std::move(vec);
    }
}

void EmbeddingCache::append_record(const std::string& provider_id, EmbedRole role,
                                   uint64_t text_hash, const std::vector<float>& vec) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out)
        throw ExportError("cannot append to embedding cache: " + path_);
    uint8_t r = static_cast<uint8_t>(role);
    uint32_t id_len = static_cast<uint32_t>(provider_id.size());
    uint32_t dim = static_cast<uint32_t>(vec.size());
    out.write(reinterpret_cast<const char*>(&r), 1);
    out.write(reinterpret_cast<const char*>(&id_len), 4);
    out.write(provider_id.data(), id_len);
    out.write(reinterpret_cast<const char*>(&text_hash), 8);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(vec.data()), std::streamsize(dim) * 4);
}

bool EmbeddingCache::lookup(const std::string& provider_id, EmbedRole role,
                            std::string_view text, std::vector<float>& out) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key(provider_id, role, text));
    if (it == entries_.end())
        return false;
    out = it->second;
    return true;
}

void EmbeddingCache::store(const std::string& provider_id, EmbedRole role, std::string_view text,
                           const std::vector<float>& vec) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string k = key(provider_id, role, text);
    if (entries_.count(k))
        return;
    entries_[k] = vec;
    append_record(provider_id, role, fnv1a64(text), vec);
}

size_t EmbeddingCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

namespace {

// Embeds the given texts for one role, batch by batch, with retries.
std::vector<std::vector<float>> embed_role(const std::vector<std::string>& texts, EmbedRole role,
                                           EmbeddingProvider& provider,
                                           const EmbedOptions& options) {
    Sleeper sleep_fn = options.sleeper
                           ? options.sleeper
                           : [](std::chrono::milliseconds ms) { std::this_thread::sleep_for(ms); };
    std::vector<std::vector<float>> result;
    result.reserve(texts.size());

    std::vector<size_t> pending; // indexes of texts not yet resolved via cache
    std::vector<std::string> pending_texts;
    result.resize(texts.size());
    for (size_t i = 0; i < texts.size(); ++i) {
        std::vector<float> cached;
        if (options.cache &&
            options.cache->lookup(provider.id(), role, texts[i], cached)) {
            result[i] = std::move(cached);
        } else {
            pending.push_back(i);
            pending_texts.push_back(texts[i]);
        }
    }

    for (size_t batch_start = 0, batch_index = 0; batch_start < pending_texts.size();
         batch_start += EmbeddingProvider::kMaxBatch, ++batch_index) {
        const size_t count =
            std::min(EmbeddingProvider::kMaxBatch, pending_texts.size() - batch_start);
        std::vector<std::string> batch(pending_texts.begin() + batch_start,
                                       pending_texts.begin() + batch_start + count);
        std::vector<std::vector<float>> vectors;
        std::string last_error;
        for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
            if (attempt > 0) {
                const int idx = std::min<int>(attempt - 1,
                                              int(options.backoff_seconds.size()) - 1);
                const int secs = idx >= 0 ? options.backoff_seconds[idx] : 1;
                sleep_fn(std::chrono::milliseconds(secs * 1000));
            }
            try {
                vectors = provider.embed_batch(batch, role);
                last_error.clear();
                break;
            } catch (const std::exception& e) {
                last_error = e.what();
            }
        }
        if (!last_error.empty())
            throw ProviderError("embedding batch " + std::to_string(batch_index) + " (" +
                                embed_role_name(role) + ") failed after " +
                                std::to_string(options.max_attempts) + " attempts: " + last_error);
        if (vectors.size() != batch.size())
            throw ProviderError("embedding batch " + std::to_string(batch_index) +
                                " returned " + std::to_string(vectors.size()) + " vectors for " +
                                std::to_string(batch.size()) + " texts");
        for (size_t k = 0; k < vectors.size(); ++k) {
            l2_normalize(vectors[k]);
            if (options.cache)
                options.cache->store(provider.id(), role, batch[k], vectors[k]);
            result[pending[batch_start + k]] = std::move(vectors[k]);
        }
    }
    return result;
}

} // namespace

std::vector<EmbeddedOccurrence> embed_all(const std::vector<Snippet>& snippets,
                                          EmbeddingProvider& provider,
                                          const EmbedOptions& options) {
    std::vector<EmbeddedOccurrence> out;
    if (snippets.empty())
        return out;

    std::vector<std::string> texts;
    texts.reserve(snippets.size());
    for (const Snippet& s : snippets)
        texts.push_back(s.text);

    std::vector<std::vector<float>> semantic = embed_role(texts, EmbedRole::Semantic, provider, options);
    std::vector<std::vector<float>> contextual =
        embed_role(texts, EmbedRole::Contextual, provider, options);

    const size_t dim = semantic.empty() ? 0 : semantic[0].size();
    out.reserve(snippets.size());
    for (size_t i = 0; i < snippets.size(); ++i) {
        if (semantic[i].size() != dim || contextual[i].size() != dim)
            throw ProviderError("inconsistent embedding dimensions from provider " +
                                provider.id());
        EmbeddedOccurrence eo;
        eo.occurrence_index = snippets[i].occurrence_index;
        eo.snippet = snippets[i];
        eo.semantic = std::move(semantic[i]);
        eo.contextual = std::move(contextual[i]);
        eo.provider_id = provider.id();
        eo.dimension = static_cast<int>(dim);
        out.push_back(std::move(eo));
    }
    return out;
}

void save_vector_store(const std::string& path, const std::vector<EmbeddedOccurrence>& embedded) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ExportError("cannot write vector store: " + path);
    for (const EmbeddedOccurrence& eo : embedded) {
        for (int role = 0; role < 2; ++role) {
            const std::vector<float>& vec = role == 0 ? eo.semantic : eo.contextual;
            uint32_t occ = eo.occurrence_index;
            uint8_t r = static_cast<uint8_t>(role);
            uint32_t dim = static_cast<uint32_t>(vec.size());
            out.write(reinterpret_cast<const char*>(&occ), 4);
            out.write(reinterpret_cast<const char*>(&r), 1);
            out.write(reinterpret_cast<const char*>(&dim), 4);
            out.write(reinterpret_cast<const char*>(vec.data()), std::streamsize(dim) * 4);
        }
    }
}

std::vector<EmbeddedOccurrence> load_vector_store(const std::string& path,
                                                  const std::vector<Snippet>& snippets,
                                                  const std::string& provider_id) {
    std::unordered_map<uint32_t, size_t> by_index;
    std::vector<EmbeddedOccurrence> out(snippets.size());
    for (size_t i = 0; i < snippets.size(); ++i) {
        out[i].occurrence_index = snippets[i].occurrence_index;
        out[i].snippet = snippets[i];
        out[i].provider_id = provider_id;
        by_index[snippets[i].occurrence_index] = i;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestError("cannot open vector store: " + path);
    while (true) {
        uint32_t occ, dim;
        uint8_t role;
        if (!in.read(reinterpret_cast<char*>(&occ), 4))
            break;
        if (!in.read(reinterpret_cast<char*>(&role), 1) ||
            !in.read(reinterpret_cast<char*>(&dim), 4))
            throw IngestError("truncated vector store: " + path);
        std::vector<float> vec(dim);
        if (!in.read(reinterpret_cast<char*>(vec.data()), std::streamsize(dim) * 4))
            throw IngestError("truncated vector store: " + path);
        auto it = by_index.find(occ);
        if (it == by_index.end())
            continue;
        EmbeddedOccurrence& eo = out[it->second];
        eo.dimension = static_cast<int>(dim);
        (role == 0 ? eo.semantic : eo.contextual) = std::move(vec);
    }
    for (const EmbeddedOccurrence& eo : out)
        if (eo.semantic.empty() || eo.contextual.empty())
            throw IngestError("vector store is missing occurrence " +
                              std::to_string(eo.occurrence_index));
    return out;
}

} // namespace intertext
