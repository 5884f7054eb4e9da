#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "core/corpus.hpp"
#include "core/embedding.hpp"
#include "core/errors.hpp"

using namespace intertext;

namespace {

TokenOccurrence occurrence_of(const Document& doc, const std::string& surface) {
    for (const TokenOccurrence& occ : tokenize(doc))
        if (occ.surface == surface)
            return occ;
    REQUIRE(false);
    return {};
}

// Provider that counts calls and can fail a fixed number of times.
class CountingProvider : public EmbeddingProvider {
  public:
    explicit CountingProvider(int dimension = 16, int failures = 0)
        : dimension_(dimension), failures_(failures) {}
    std::string id() const override { return "counting"; }
    int dimension() const override { return dimension_; }
    std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts,
                                                EmbedRole role) override {
        ++calls;
        batch_sizes.push_back(texts.size());
        if (failures_ > 0) {
            --failures_;
            throw std::runtime_error("transient failure");
        }
        std::vector<std::vector<float>> out;
        for (const std::string& t : texts)
            out.push_back(mock_embed(t, role, dimension_));
        return out;
    }
    int calls = 0;
    std::vector<size_t> batch_sizes;

  private:
    int dimension_;
    int failures_;
};

std::vector<Snippet> make_snippets(size_t n) {
    std::vector<Snippet> snippets;
    for (size_t i = 0; i < n; ++i) {
        Snippet s;
        s.occurrence_index = static_cast<uint32_t>(i);
        s.text = "snippet number " + std::to_string(i);
        snippets.push_back(std::move(s));
    }
    return snippets;
}

} // namespace

TEST_CASE("snippet runs through commas and stops at periods") {
    Document doc = ingest("And the earth opened her mouth, and swallowed them up.", "d", "D",
                          DocRole::Target);
    TokenOccurrence occ = occurrence_of(doc, "swallowed");
    Snippet snip = extract_snippet(occ, doc);
    CHECK(snip.text == "opened her mouth, and swallowed them up");
    CHECK(snip.left_words == 4);
    CHECK(snip.right_words == 2);
}

TEST_CASE("snippet is truncated by a sentence break on the left") {
    Document doc = ingest("He wept. Then he smote the rock and water came", "d", "D",
                          DocRole::Target);
    TokenOccurrence occ = occurrence_of(doc, "smote");
    Snippet snip = extract_snippet(occ, doc);
    CHECK(snip.text == "Then he smote the rock and water");
    CHECK(snip.left_words == 2);
    CHECK(snip.right_words == 4);
}

TEST_CASE("snippet stops at colons but runs through commas") {
    Document doc = ingest("he said: the well, long dry, was stone", "d", "D", DocRole::Target);
    TokenOccurrence occ = occurrence_of(doc, "well");
    Snippet snip = extract_snippet(occ, doc);
    CHECK(snip.text == "the well, long dry, was stone");
    CHECK(snip.left_words == 1);
    CHECK(snip.right_words == 4);
}

TEST_CASE("phrase snippets cover the whole phrase plus context") {
    Document doc = ingest("for they shall see God said he", "d", "D", DocRole::Target);
    TokenOccurrence phrase;
    bool found = false;
    for (const TokenOccurrence& occ : tokenize(doc)) {
        if (occ.surface == "shall see God") {
            phrase = occ;
            found = true;
        }
    }
    REQUIRE(found);
    Snippet snip = extract_snippet(phrase, doc);
    CHECK(snip.text == "for they shall see God said he");
}

TEST_CASE("mock embeddings are deterministic unit vectors") {
    auto v1 = mock_embed("smote the rock", EmbedRole::Semantic, 64);
    auto v2 = mock_embed("smote the rock", EmbedRole::Semantic, 64);
    CHECK(v1 == v2);
    double norm = 0;
    for (float x : v1)
        norm += double(x) * x;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("identical word bags embed identically, disjoint bags orthogonally") {
    auto a = mock_embed("the rock smote", EmbedRole::Semantic, 64);
    auto b = mock_embed("smote the rock", EmbedRole::Semantic, 64);
    CHECK(a == b); // bag of words ignores order

    auto c = mock_embed("wholly unrelated words", EmbedRole::Semantic, 64);
    double dot = 0;
    for (size_t i = 0; i < a.size(); ++i)
        dot += double(a[i]) * c[i];
    CHECK(dot == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("contextual role distinguishes word order") {
    auto a = mock_embed("the rock smote", EmbedRole::Contextual, 64);
    auto b = mock_embed("smote the rock", EmbedRole::Contextual, 64);
    CHECK(a != b);
}

TEST_CASE("mock dimension floor") {
    CHECK_THROWS_AS(mock_embed("x", EmbedRole::Semantic, 4), DomainError);
}

TEST_CASE("130 snippets embed as two batches per role") {
    CountingProvider provider(16);
    auto embedded = embed_all(make_snippets(130), provider);
    CHECK(embedded.size() == 130);
    CHECK(provider.calls == 4); // 128+2 per role, two roles
    REQUIRE(provider.batch_sizes.size() == 4);
    CHECK(provider.batch_sizes[0] == 128);
    CHECK(provider.batch_sizes[1] == 2);
}

TEST_CASE("empty snippet list embeds to nothing with no calls") {
    CountingProvider provider(16);
    CHECK(embed_all({}, provider).empty());
    CHECK(provider.calls == 0);
}

TEST_CASE("warm cache serves vectors without provider calls") {
    std::filesystem::path p = std::filesystem::temp_directory_path() / "itx_cache_test.bin";
    std::filesystem::remove(p);
    {
        EmbeddingCache cache(p.string());
        CountingProvider provider(16);
        EmbedOptions opts;
        opts.cache = &cache;
        auto first = embed_all(make_snippets(10), provider, opts);
        CHECK(provider.calls == 2);
        CHECK(first.size() == 10);
    }
    {
        // Fresh cache object reloads the same file: no provider traffic, and
        // identical vectors come back.
        EmbeddingCache cache(p.string());
        CHECK(cache.size() == 20);
        CountingProvider provider(16);
        EmbedOptions opts;
        opts.cache = &cache;
        auto second = embed_all(make_snippets(10), provider, opts);
        CHECK(provider.calls == 0);
        for (const auto& eo : second) {
            CHECK(eo.semantic == mock_embed(eo.snippet.text, EmbedRole::Semantic, 16));
            CHECK(eo.contextual == mock_embed(eo.snippet.text, EmbedRole::Contextual, 16));
        }
    }
    std::filesystem::remove(p);
}

TEST_CASE("transient failures retry with backoff then succeed") {
    CountingProvider provider(16, 2); // first two calls fail
    std::vector<std::chrono::milliseconds> sleeps;
    EmbedOptions opts;
    opts.sleeper = [&](std::chrono::milliseconds ms) { sleeps.push_back(ms); };
    auto embedded = embed_all(make_snippets(3), provider, opts);
    CHECK(embedded.size() == 3);
    REQUIRE(sleeps.size() == 2);
    CHECK(sleeps[0].count() == 1000);
    CHECK(sleeps[1].count() == 4000);
}

TEST_CASE("a batch that keeps failing raises a provider error naming the batch") {
    CountingProvider provider(16, 100);
    EmbedOptions opts;
    opts.sleeper = [](std::chrono::milliseconds) {};
    try {
        embed_all(make_snippets(2), provider, opts);
        REQUIRE(false);
    } catch (const ProviderError& e) {
        CHECK(std::string(e.what()).find("batch 0") != std::string::npos);
    }
}

TEST_CASE("vector store round-trips embedded occurrences") {
    MockEmbeddingProvider provider(16);
    auto snippets = make_snippets(7);
    auto embedded = embed_all(snippets, provider);
    std::filesystem::path p = std::filesystem::temp_directory_path() / "itx_store_test.bin";
    save_vector_store(p.string(), embedded);
    auto loaded = load_vector_store(p.string(), snippets, provider.id());
    REQUIRE(loaded.size() == embedded.size());
    for (size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].semantic == embedded[i].semantic);
        CHECK(loaded[i].contextual == embedded[i].contextual);
    }
    std::filesystem::remove(p);
}
