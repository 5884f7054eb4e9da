#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/corpus.hpp"

namespace intertext {

struct Snippet {
    uint32_t occurrence_index = 0; // index into the rare-occurrence list
    std::string text;              // document slice around the occurrence
    int left_words = 0;
    int right_words = 0;
};

// Context window of up to four words on each side of the occurrence,
// truncated at clause punctuation (. ! ? ; : and em dash) but running
// through commas.
Snippet extract_snippet(const TokenOccurrence& occ, const Document& doc);

enum class EmbedRole : uint8_t { Semantic = 0, Contextual = 1 };

const char* embed_role_name(EmbedRole role);

class EmbeddingProvider {
  public:
    static constexpr size_t kMaxBatch = 128;

    virtual ~EmbeddingProvider() = default;
    virtual std::string id() const = 0;
    virtual int dimension() const = 0;
    // texts.size() <= kMaxBatch; returns one vector per input text.
    virtual std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts,
                                                        EmbedRole role) = 0;
};

// Deterministic hashed bag-of-words embedder. The semantic role hashes
// folded words, the contextual role hashes adjacent word bigrams; vectors
// are L2-normalized.
std::vector<float> mock_embed(std::string_view text, EmbedRole role, int dimension);

class MockEmbeddingProvider : public EmbeddingProvider {
  public:
    explicit MockEmbeddingProvider(int dimension = 256);
    std::string id() const override;
    int dimension() const override { return dimension_; }
    std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts,
                                                EmbedRole role) override;

  private:
    int dimension_;
};

// Disk-backed vector cache keyed by (provider id, role, snippet text hash).
// Append-only binary records; safe for concurrent lookups and stores.
class EmbeddingCache {
  public:
    explicit EmbeddingCache(std::string path);

    bool lookup(const std::string& provider_id, EmbedRole role, std::string_view text,
                std::vector<float>& out) const;
    void store(const std::string& provider_id, EmbedRole role, std::string_view text,
               const std::vector<float>& vec);
    size_t size() const;

  private:
    std::string path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::vector<float>> entries_;

    static std::string key(const std::string& provider_id, EmbedRole role,
                           std::string_view text);
    void load();
    void append_record(const std::string& provider_id, EmbedRole role, uint64_t text_hash,
                       const std::vector<float>& vec);
};

struct EmbeddedOccurrence {
    uint32_t occurrence_index = 0;
    Snippet snippet;
    std::vector<float> semantic;
    std::vector<float> contextual;
    std::string provider_id;
    int dimension = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct EmbedOptions {
    EmbeddingCache* cache = nullptr;
    int max_attempts = 3;
    std::vector<int> backoff_seconds = {1, 4, 16};
    Sleeper sleeper; // defaults to std::this_thread::sleep_for
};

// Embeds every snippet in both roles, batching at most kMaxBatch texts per
// provider call, consulting and filling the cache, unit-normalizing on
// receipt, and retrying failed batches with exponential backoff. Vectors
// already cached cause no provider calls.
std::vector<EmbeddedOccurrence> embed_all(const std::vector<Snippet>& snippets,
                                          EmbeddingProvider& provider,
                                          const EmbedOptions& options = {});

// Binary per-occurrence vector store: (occurrence_id, role, dimension,
// float32[dimension]) records.
void save_vector_store(const std::string& path, const std::vector<EmbeddedOccurrence>& embedded);
std::vector<EmbeddedOccurrence> load_vector_store(const std::string& path,
                                                  const std::vector<Snippet>& snippets,
                                                  const std::string& provider_id);

} // namespace intertext
