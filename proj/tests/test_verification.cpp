#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "core/text.hpp"
#include "core/verification.hpp"

using namespace intertext;

namespace {

FilterLists basic_filters() {
    FilterLists lists;
    for (const char* w : {"the", "and", "of", "a", "an", "in", "to", "that", "was", "upon",
                          "they", "them", "be", "is", "are", "shall", "his", "her", "he",
                          "she", "it", "but", "for", "with", "all"})
        lists.stopwords.insert(w);
    return lists;
}

Finding make_finding(uint32_t id, const std::string& novel, const std::string& quote,
                     ConnectionType type, Track track,
                     const std::vector<VerseRef>& verses = {}, const std::string& notes = "") {
    Finding f;
    f.id = id;
    f.target_document_id = novel;
    f.target_quote = quote;
    f.source_quote = "placeholder source";
    f.connection_type = type;
    f.rating = VerdictLevel::Moderate;
    f.tracks = static_cast<uint8_t>(track);
    f.verse_refs = verses;
    f.notes = notes;
    return f;
}

const char* kVerse = "And the waters prevailed exceedingly upon the earth; and all the high "
                     "hills, that were under the whole heaven, were covered.";

struct RecordingSearch : SearchClient {
    std::vector<std::string> queries;
    std::optional<std::string> answer;
    int failures_before_success = 0;

    std::optional<std::string> lookup(const std::string& query) override {
        queries.push_back(query);
        if (failures_before_success > 0) {
            --failures_before_success;
            throw SearchUnavailableError("index offline");
        }
        return answer;
    }
};

struct FakeClock {
    int64_t now = 0;
    std::vector<int64_t> sleeps;

    ThrottledSearchClient::Clock clock() {
        return {
            [this] { return now; },
            [this](int64_t ms) {
                sleeps.push_back(ms);
                now += ms;
            },
        };
    }
};

} // namespace

TEST_CASE("quote verification requires a verbatim four-word run") {
    CHECK(verify_quote("the waters prevailed exceedingly upon the earth", kVerse));
    CHECK(verify_quote("And the WATERS prevailed, exceedingly", kVerse));
    // One clean four-word run suffices even when the rest is paraphrased.
    CHECK(verify_quote("great waters prevailed exceedingly upon the world", kVerse));
    // No four consecutive words survive this paraphrase.
    CHECK_FALSE(verify_quote("the flood rose exceedingly over the world", kVerse));
    CHECK_FALSE(verify_quote("", kVerse));
    CHECK_FALSE(verify_quote("...", kVerse));
}

TEST_CASE("short quotes must appear whole") {
    CHECK(verify_quote("waters prevailed", kVerse));
    CHECK(verify_quote("under the whole heaven", kVerse));
    CHECK_FALSE(verify_quote("waters receded", kVerse));
    CHECK_FALSE(verify_quote("prevailed waters", kVerse));
    CHECK(verify_quote("covered", kVerse));
}

TEST_CASE("corruption inside every four-word run defeats verification") {
    // For quotes of n words (4 <= n <= 7), positions n-4 through 3 lie inside
    // every consecutive four-word run, so corrupting one such word must fail.
    std::vector<std::string> words = normalized_words(kVerse);
    REQUIRE(words.size() >= 12);
    for (size_t n = 4; n <= 7; ++n) {
        for (size_t p = n - 4; p <= 3; ++p) {
            std::vector<std::string> quote(words.begin() + 2,
                                           words.begin() + 2 + static_cast<long>(n));
            quote[p] = "zanzibar";
            std::string text;
            for (const std::string& w : quote)
                text += w + " ";
            CAPTURE(n);
            CAPTURE(p);
            CHECK_FALSE(verify_quote(text, kVerse));
        }
    }
    // Past seven words some run always dodges a single corruption.
    std::vector<std::string> eight(words.begin() + 2, words.begin() + 10);
    eight[4] = "zanzibar";
    std::string text;
    for (const std::string& w : eight)
        text += w + " ";
    CHECK(verify_quote(text, kVerse));
}

TEST_CASE("finding verification checks both quotes and the unverifiable flag") {
    Corpus corpus;
    corpus.documents.push_back(ingest("He saw the waters prevailed exceedingly upon the land.\n",
                                      "novel", "Novel", DocRole::Target));
    corpus.documents.push_back(ingest(std::string(kVerse) + "\n", "kjv", "Scripture",
                                      DocRole::Source));

    Finding f = make_finding(1, "novel", "the waters prevailed exceedingly upon the land",
                             ConnectionType::VerbalEcho, Track::Embedding);
    f.source_quote = "waters prevailed exceedingly upon the earth";
    CHECK(verify_finding(f, corpus));

    Finding unmapped = f;
    unmapped.unverifiable = true;
    CHECK_FALSE(verify_finding(unmapped, corpus));

    Finding bad_source = f;
    bad_source.source_quote = "the flood rose over all the world entirely";
    CHECK_FALSE(verify_finding(bad_source, corpus));
}

TEST_CASE("same-passage rule needs three shared distinctive words and 30% overlap") {
    FilterLists filters = basic_filters();
    // Shared distinctive words: waters, prevailed, exceedingly (3 of 4 in the
    // shorter quote).
    CHECK(same_passage("the waters prevailed exceedingly upon the earth",
                       "waters prevailed exceedingly elsewhere", filters));
    // Only two shared distinctive words.
    CHECK_FALSE(same_passage("the waters prevailed exceedingly",
                             "waters prevailed greatly over everything", filters));
    // Three shared but the shorter quote is too rich for 30%.
    CHECK_FALSE(same_passage(
        "waters prevailed exceedingly alpha bravo charlie delta echo foxtrot golf hotel",
        "waters prevailed exceedingly india juliett kilo lima mike november oscar papa",
        filters));
    CHECK_FALSE(same_passage("", "waters prevailed exceedingly", filters));
}

TEST_CASE("passage dedup merges same-type findings and keeps provenance") {
    FilterLists filters = basic_filters();
    std::vector<VerseRef> genesis = {{"Genesis", 7, 19, 100, 160}};
    std::vector<VerseRef> genesis_next = {{"Genesis", 7, 20, 160, 220}};

    std::vector<Finding> input = {
        make_finding(1, "novel", "waters prevailed exceedingly upon the mountain",
                     ConnectionType::VerbalEcho, Track::Embedding, genesis, "embedding note"),
        make_finding(2, "novel", "the waters prevailed exceedingly upon the mountain that day",
                     ConnectionType::VerbalEcho, Track::LongContext, genesis_next, ""),
        make_finding(3, "novel", "waters prevailed exceedingly upon the mountain",
                     ConnectionType::RegisterCollision, Track::Register, genesis,
                     "register note"),
        make_finding(4, "novel", "an entirely different passage about sparrows and millet",
                     ConnectionType::VerbalEcho, Track::Embedding),
    };

    DedupResult deduped = dedup_passages(input, filters);
    REQUIRE(deduped.findings.size() == 3);

    // Representative of the merged pair: longest quote wins, so finding 2.
    const Finding* merged = nullptr;
    for (const Finding& f : deduped.findings)
        if (f.id == 2)
            merged = &f;
    REQUIRE(merged != nullptr);
    CHECK(merged->merged_ids == std::vector<uint32_t>{1});
    CHECK(has_track(*merged, Track::Embedding));
    CHECK(has_track(*merged, Track::LongContext));
    CHECK(merged->verse_refs.size() == 2);
    CHECK(merged->notes == "embedding note"); // absorbed: its own notes were empty

    // Findings out plus ids merged away equals findings in.
    size_t absorbed = 0;
    for (const Finding& f : deduped.findings)
        absorbed += f.merged_ids.size();
    CHECK(deduped.findings.size() + absorbed == input.size());

    // Clusters: the shared passage carries two rows (VerbalEcho + Register),
    // the sparrow passage one.
    REQUIRE(deduped.clusters.size() == 2);
    std::vector<size_t> sizes = {deduped.clusters[0].size(), deduped.clusters[1].size()};
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<size_t>{1, 2});
}

TEST_CASE("passage dedup is idempotent and order-insensitive") {
    FilterLists filters = basic_filters();
    std::vector<Finding> input;
    std::vector<VerseRef> verses = {{"Job", 3, 3, 0, 50}};
    for (uint32_t i = 1; i <= 6; ++i)
        input.push_back(make_finding(
            i, "novel",
            i % 2 ? "let the day perish wherein he was born"
                  : "let the day perish wherein he was born and the night also",
            ConnectionType::InvertedAllusion, i % 2 ? Track::Embedding : Track::LongContext,
            verses));
    input.push_back(make_finding(7, "other", "let the day perish wherein he was born",
                                 ConnectionType::InvertedAllusion, Track::Embedding, verses));

    DedupResult once = dedup_passages(input, filters);
    // Same passage in a different novel must not merge.
    REQUIRE(once.findings.size() == 2);
    size_t absorbed = 0;
    for (const Finding& f : once.findings)
        absorbed += f.merged_ids.size();
    CHECK(once.findings.size() + absorbed == input.size());

    DedupResult twice = dedup_passages(once.findings, filters);
    REQUIRE(twice.findings.size() == once.findings.size());
    for (size_t i = 0; i < twice.findings.size(); ++i) {
        CHECK(twice.findings[i].id == once.findings[i].id);
        CHECK(twice.findings[i].merged_ids == once.findings[i].merged_ids);
        CHECK(twice.findings[i].tracks == once.findings[i].tracks);
    }

    std::mt19937 rng(11);
    for (int round = 0; round < 5; ++round) {
        std::vector<Finding> shuffled = input;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        DedupResult again = dedup_passages(shuffled, filters);
        REQUIRE(again.findings.size() == once.findings.size());
        for (size_t i = 0; i < again.findings.size(); ++i) {
            CHECK(again.findings[i].id == once.findings[i].id);
            CHECK(again.findings[i].merged_ids == once.findings[i].merged_ids);
        }
    }
}

TEST_CASE("classification dedup keeps the fullest notes and flags the rest") {
    FilterLists filters = basic_filters();
    std::vector<VerseRef> verses = {{"Mark", 10, 31, 0, 50}};
    std::vector<Finding> input = {
        make_finding(1, "novel", "the last of them would be first through the gate",
                     ConnectionType::VerbalEcho, Track::Embedding, verses, "short"),
        make_finding(2, "novel", "the last of them would be first through the gate",
                     ConnectionType::DirectQuotation, Track::Register, verses,
                     "a considerably longer explanation of the borrowing"),
        make_finding(3, "novel", "some unrelated passage about horses on the mesa",
                     ConnectionType::VerbalEcho, Track::Embedding),
    };

    DedupResult deduped = dedup_passages(input, filters);
    REQUIRE(deduped.findings.size() == 3);
    std::vector<Finding> final_rows = dedup_classifications(deduped);
    REQUIRE(final_rows.size() == 3);

    int duplicates = 0;
    for (const Finding& f : final_rows) {
        if (f.id == 2)
            CHECK_FALSE(is_duplicate(f));
        if (f.id == 1) {
            CHECK(is_duplicate(f));
            CHECK(f.notes == std::string(kDuplicateNotesPrefix) + "short");
        }
        if (is_duplicate(f))
            ++duplicates;
    }
    CHECK(duplicates == 1);

    // Running classification dedup again changes nothing: flagged rows no
    // longer compete.
    DedupResult redo;
    redo.findings = final_rows;
    redo.clusters = deduped.clusters;
    std::vector<Finding> again = dedup_classifications(redo);
    for (size_t i = 0; i < again.size(); ++i)
        CHECK(again[i].notes == final_rows[i].notes);
}

TEST_CASE("classification dedup breaks note ties by connection-type order") {
    FilterLists filters = basic_filters();
    std::vector<Finding> input = {
        make_finding(1, "novel", "behold a pale horse and his name that sat on him",
                     ConnectionType::TransformedImagery, Track::Embedding, {}, "same length"),
        make_finding(2, "novel", "behold a pale horse and his name that sat on him",
                     ConnectionType::VerbalEcho, Track::Embedding, {}, "same length"),
    };
    std::vector<Finding> rows = dedup_classifications(dedup_passages(input, filters));
    REQUIRE(rows.size() == 2);
    for (const Finding& f : rows) {
        if (f.connection_type == ConnectionType::VerbalEcho)
            CHECK_FALSE(is_duplicate(f));
        else
            CHECK(is_duplicate(f));
    }
}

TEST_CASE("reference table round-trips through its sidecar format") {
    ReferenceTable table;
    table.entries.push_back({"blood-meridian",
                             "legion of horribles wearing the skins of animals",
                             {{"Revelation", 6, 8, 0, 0}, {"Isaiah", 34, 14, 0, 0}},
                             ConnectionType::TransformedImagery,
                             "Sepich 1993, p. 112"});
    table.entries.push_back({"the-road",
                             "he carried the fire",
                             {{"Exodus", 13, 21, 0, 0}},
                             ConnectionType::ThematicTransplantation,
                             "Frye 2013"});
    std::string path = "/tmp/intertext_reference.psv";
    table.save(path);
    ReferenceTable loaded = ReferenceTable::load(path);
    REQUIRE(loaded.entries.size() == 2);
    CHECK(loaded.entries[0].novel == "blood-meridian");
    CHECK(loaded.entries[0].verses.size() == 2);
    CHECK(loaded.entries[0].verses[1].book == "Isaiah");
    CHECK(loaded.entries[0].type == ConnectionType::TransformedImagery);
    CHECK(loaded.entries[1].citation == "Frye 2013");
    std::remove(path.c_str());
}

TEST_CASE("attestation matches reference entries before searching") {
    FilterLists filters = basic_filters();
    ReferenceTable table;
    table.entries.push_back({"novel",
                             "waters prevailed exceedingly upon the mountain",
                             {{"Genesis", 7, 19, 0, 0}},
                             ConnectionType::VerbalEcho,
                             "Critic 1999"});
    table.entries.push_back({"novel",
                             "a passage nobody in the pipeline ever found",
                             {{"Amos", 5, 24, 0, 0}},
                             ConnectionType::ThematicTransplantation,
                             "Critic 2005"});

    std::vector<VerseRef> genesis = {{"Genesis", 7, 19, 100, 160}};
    std::vector<Finding> findings = {
        make_finding(1, "novel", "the waters prevailed exceedingly upon the mountain that day",
                     ConnectionType::VerbalEcho, Track::Embedding, genesis),
        make_finding(2, "novel", "an unmatched passage about sparrows and millet",
                     ConnectionType::VerbalEcho, Track::Embedding,
                     {{"Matthew", 10, 29, 0, 0}}),
    };

    SUBCASE("table hit, search miss") {
        RecordingSearch search;
        AttestResult result = attest(findings, table, search, filters);
        REQUIRE(result.records.size() == 2);
        CHECK(result.records[0].status == Attestation::Attested);
        CHECK(result.records[0].citation == "Critic 1999");
        CHECK_FALSE(result.records[0].unverified);
        CHECK(result.records[1].status == Attestation::Unattested);
        // Only the unmatched finding went to search, and the query names the
        // novel, quote vocabulary, and book.
        REQUIRE(search.queries.size() == 1);
        CHECK(search.queries[0].find("novel") != std::string::npos);
        CHECK(search.queries[0].find("sparrows") != std::string::npos);
        CHECK(search.queries[0].find("Matthew") != std::string::npos);

        // The unmatched table entry surfaces as a synthetic missed finding.
        REQUIRE(result.missed.size() == 1);
        CHECK(result.missed[0].target_quote == "a passage nobody in the pipeline ever found");
        CHECK(result.missed[0].tracks == 0);
        CHECK(result.missed[0].unverifiable);
        CHECK(result.missed[0].connection_type == ConnectionType::ThematicTransplantation);
        CHECK(result.missed[0].id == 3); // allocated past the largest finding id
        REQUIRE(result.missed_citations.size() == 1);
        CHECK(result.missed_citations[0] == "Critic 2005");
    }

    SUBCASE("search hit attests with the returned citation") {
        RecordingSearch search;
        search.answer = "Found 2010, p. 5";
        AttestResult result = attest(findings, table, search, filters);
        CHECK(result.records[1].status == Attestation::Attested);
        CHECK(result.records[1].citation == "Found 2010, p. 5");
        CHECK_FALSE(result.records[1].unverified);
    }

    SUBCASE("search failure flags the record instead of inventing an answer") {
        RecordingSearch search;
        search.failures_before_success = 100;
        AttestResult result = attest(findings, table, search, filters);
        CHECK(result.records[1].status == Attestation::Unattested);
        CHECK(result.records[1].unverified);
        CHECK(result.records[1].citation.empty());
    }
}

TEST_CASE("verse overlap for attestation is at book and chapter granularity") {
    FilterLists filters = basic_filters();
    ReferenceTable table;
    table.entries.push_back({"novel",
                             "waters prevailed exceedingly upon the mountain",
                             {{"Genesis", 7, 19, 0, 0}},
                             ConnectionType::VerbalEcho,
                             "Critic 1999"});
    NullSearchClient null_search;

    // Same chapter, different verse: still a match.
    std::vector<Finding> same_chapter = {
        make_finding(1, "novel", "the waters prevailed exceedingly upon the mountain",
                     ConnectionType::VerbalEcho, Track::Embedding,
                     {{"Genesis", 7, 24, 0, 0}})};
    CHECK(attest(same_chapter, table, null_search, filters).records[0].status ==
          Attestation::Attested);

    // Different chapter: no match even with identical quotes.
    std::vector<Finding> other_chapter = {
        make_finding(1, "novel", "the waters prevailed exceedingly upon the mountain",
                     ConnectionType::VerbalEcho, Track::Embedding,
                     {{"Genesis", 8, 1, 0, 0}})};
    AttestResult result = attest(other_chapter, table, null_search, filters);
    CHECK(result.records[0].status == Attestation::Unattested);
    CHECK(result.missed.size() == 1);
}

TEST_CASE("throttled search spaces requests, caches queries, and retries") {
    SUBCASE("requests a second apart, repeats from cache") {
        RecordingSearch inner;
        inner.answer = "hit";
        FakeClock clock;
        ThrottledSearchClient throttled(inner, clock.clock());
        CHECK(throttled.lookup("q1") == "hit");
        CHECK(clock.sleeps.empty()); // first request goes straight out
        CHECK(throttled.lookup("q2") == "hit");
        REQUIRE(clock.sleeps.size() == 1);
        CHECK(clock.sleeps[0] == 1000);
        CHECK(throttled.lookup("q1") == "hit"); // cached, no third request
        CHECK(inner.queries.size() == 2);
        CHECK(clock.sleeps.size() == 1);
    }

    SUBCASE("negative answers are cached too") {
        RecordingSearch inner;
        FakeClock clock;
        ThrottledSearchClient throttled(inner, clock.clock());
        CHECK(throttled.lookup("q") == std::nullopt);
        CHECK(throttled.lookup("q") == std::nullopt);
        CHECK(inner.queries.size() == 1);
    }

    SUBCASE("two transient failures recover on the third attempt") {
        RecordingSearch inner;
        inner.answer = "late hit";
        inner.failures_before_success = 2;
        FakeClock clock;
        ThrottledSearchClient throttled(inner, clock.clock());
        CHECK(throttled.lookup("q") == "late hit");
        CHECK(inner.queries.size() == 3);
        // Retries respect the same pacing.
        CHECK(clock.sleeps.size() == 2);
    }

    SUBCASE("three failures propagate") {
        RecordingSearch inner;
        inner.failures_before_success = 3;
        FakeClock clock;
        ThrottledSearchClient throttled(inner, clock.clock());
        CHECK_THROWS_AS(throttled.lookup("q"), SearchUnavailableError);
        CHECK(inner.queries.size() == 3);
    }
}
