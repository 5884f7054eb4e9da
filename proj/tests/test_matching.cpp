#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "core/corpus.hpp"
#include "core/errors.hpp"
#include "core/matching.hpp"

using namespace intertext;

namespace {

TokenOccurrence occ(const std::string& doc, uint32_t start, uint32_t end, const std::string& term,
                    TokenKind kind) {
    TokenOccurrence o;
    o.document_id = doc;
    o.char_start = start;
    o.char_end = end;
    o.surface = term;
    o.term = term;
    o.kind = kind;
    o.phrase_length = kind == TokenKind::Word ? 1 : 2;
    return o;
}

EmbeddedOccurrence emb(uint32_t index, std::vector<float> semantic, std::vector<float> contextual) {
    EmbeddedOccurrence e;
    e.occurrence_index = index;
    e.semantic = std::move(semantic);
    e.contextual = std::move(contextual);
    e.dimension = static_cast<int>(e.semantic.size());
    return e;
}

// Unit vector in the plane at a chosen cosine against (1,0,0,0).
std::vector<float> unit_at(double c) {
    return {static_cast<float>(c), static_cast<float>(std::sqrt(1.0 - c * c)), 0.0f, 0.0f};
}

const std::vector<float> kRef = {1.0f, 0.0f, 0.0f, 0.0f};

// Independent cosine for oracle comparisons.
double oracle_cosine(const std::vector<float>& u, const std::vector<float>& v) {
    double d = 0, a = 0, b = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        d += double(u[i]) * v[i];
        a += double(u[i]) * u[i];
        b += double(v[i]) * v[i];
    }
    double r = d / std::sqrt(a) / std::sqrt(b);
    return r > 1 ? 1 : (r < -1 ? -1 : r);
}

std::vector<float> random_unit(std::mt19937& rng, int dim) {
    std::normal_distribution<double> gauss;
    std::vector<float> v(dim);
    double norm = 0;
    do {
        norm = 0;
        for (int i = 0; i < dim; ++i) {
            v[i] = static_cast<float>(gauss(rng));
            norm += double(v[i]) * v[i];
        }
    } while (norm == 0);
    norm = std::sqrt(norm);
    for (float& x : v)
        x = static_cast<float>(x / norm);
    return v;
}

} // namespace

TEST_CASE("cosine identities") {
    std::vector<float> u = {0.6f, 0.8f};
    CHECK(cosine(u, u) == doctest::Approx(1.0));
    CHECK(cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(cosine({1, 1, 0}, {1, 0, 0}) == doctest::Approx(0.7071).epsilon(1e-4));
    CHECK(cosine({1, 0}, {-1, 0}) == doctest::Approx(-1.0));
    CHECK(cosine(u, u) <= 1.0); // clamped
    CHECK_THROWS_AS(cosine({0, 0}, {1, 0}), DegenerateVectorError);
    CHECK_THROWS_AS(cosine({1, 0}, {1, 0, 0}), DomainError);
}

TEST_CASE("match thresholds by direction") {
    std::vector<TokenOccurrence> targets = {occ("n", 0, 5, "alpha", TokenKind::Word)};
    std::vector<TokenOccurrence> sources = {occ("kjv", 0, 5, "alpha", TokenKind::Word)};

    auto run = [&](TokenKind tk, TokenKind sk, double semantic, double context) {
        targets[0].kind = tk;
        sources[0].kind = sk;
        std::vector<EmbeddedOccurrence> te = {emb(0, kRef, kRef)};
        std::vector<EmbeddedOccurrence> se = {emb(0, unit_at(semantic), unit_at(context))};
        return match_all(targets, te, sources, se, {});
    };

    CHECK(run(TokenKind::Word, TokenKind::Word, 0.90, 0.45).size() == 1);
    CHECK(run(TokenKind::Word, TokenKind::Word, 0.90, 0.35).empty());
    CHECK(run(TokenKind::Word, TokenKind::Word, 0.84, 0.45).empty());
    CHECK(run(TokenKind::Word, TokenKind::Phrase, 0.84, 0.45).size() == 1);
    CHECK(run(TokenKind::Phrase, TokenKind::Word, 0.84, 0.45).size() == 1);
    CHECK(run(TokenKind::Phrase, TokenKind::Phrase, 0.84, 0.45).empty());
    CHECK(run(TokenKind::Phrase, TokenKind::Phrase, 0.90, 0.45).size() == 1);

    auto pairs = run(TokenKind::Word, TokenKind::Phrase, 0.84, 0.45);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].direction == MatchDirection::WordPhrase);
    CHECK(pairs[0].semantic_sim == doctest::Approx(0.84).epsilon(1e-6));
}

TEST_CASE("match_all agrees with an all-pairs oracle") {
    std::mt19937 rng(20260819);
    std::uniform_int_distribution<int> count(1, 60);
    std::bernoulli_distribution phrase(0.4);
    // Narrowed vectors so a useful fraction of pairs cross the thresholds.
    auto biased_unit = [&](std::vector<float> base) {
        auto v = random_unit(rng, 8);
        for (size_t i = 0; i < v.size(); ++i)
            v[i] = 0.93f * base[i] + 0.37f * v[i];
        double n = 0;
        for (float x : v)
            n += double(x) * x;
        for (float& x : v)
            x = static_cast<float>(x / std::sqrt(n));
        return v;
    };
    std::vector<float> pole = random_unit(rng, 8);

    for (int round = 0; round < 20; ++round) {
        int nt = count(rng), ns = count(rng);
        std::vector<TokenOccurrence> tocc, socc;
        std::vector<EmbeddedOccurrence> temb, semb;
        for (int i = 0; i < nt; ++i) {
            tocc.push_back(occ("n", i * 10, i * 10 + 5, "t" + std::to_string(i),
                               phrase(rng) ? TokenKind::Phrase : TokenKind::Word));
            temb.push_back(emb(i, biased_unit(pole), biased_unit(pole)));
        }
        for (int i = 0; i < ns; ++i) {
            socc.push_back(occ("kjv", i * 10, i * 10 + 5, "s" + std::to_string(i),
                               phrase(rng) ? TokenKind::Phrase : TokenKind::Word));
            semb.push_back(emb(i, biased_unit(pole), biased_unit(pole)));
        }

        MatchThresholds th;
        auto got = match_all(tocc, temb, socc, semb, th);

        std::vector<MatchPair> expected;
        for (int i = 0; i < nt; ++i)
            for (int j = 0; j < ns; ++j) {
                bool same = tocc[i].kind == socc[j].kind;
                double sem = oracle_cosine(temb[i].semantic, semb[j].semantic);
                if (sem < (same ? th.same_type : th.cross_type))
                    continue;
                double ctx = oracle_cosine(temb[i].contextual, semb[j].contextual);
                if (ctx < th.context_floor)
                    continue;
                MatchPair p;
                p.target_occ = i;
                p.source_occ = j;
                p.semantic_sim = sem;
                p.context_sim = ctx;
                expected.push_back(p);
            }

        REQUIRE(got.size() == expected.size());
        for (size_t k = 0; k < got.size(); ++k) {
            CHECK(got[k].target_occ == expected[k].target_occ);
            CHECK(got[k].source_occ == expected[k].source_occ);
            CHECK(got[k].semantic_sim == doctest::Approx(expected[k].semantic_sim).epsilon(1e-12));
            CHECK(got[k].context_sim == doctest::Approx(expected[k].context_sim).epsilon(1e-12));
        }
    }
}

TEST_CASE("raising thresholds never adds matches") {
    std::mt19937 rng(7);
    std::vector<TokenOccurrence> tocc, socc;
    std::vector<EmbeddedOccurrence> temb, semb;
    std::bernoulli_distribution phrase(0.5);
    std::vector<float> pole = random_unit(rng, 8);
    auto near_pole = [&](double w) {
        auto v = random_unit(rng, 8);
        for (size_t i = 0; i < v.size(); ++i)
            v[i] = static_cast<float>(w * pole[i] + (1 - w) * v[i]);
        double n = 0;
        for (float x : v)
            n += double(x) * x;
        for (float& x : v)
            x = static_cast<float>(x / std::sqrt(n));
        return v;
    };
    for (int i = 0; i < 40; ++i) {
        tocc.push_back(occ("n", i * 10, i * 10 + 5, "t" + std::to_string(i),
                           phrase(rng) ? TokenKind::Phrase : TokenKind::Word));
        temb.push_back(emb(i, near_pole(0.9), near_pole(0.9)));
        socc.push_back(occ("kjv", i * 10, i * 10 + 5, "s" + std::to_string(i),
                           phrase(rng) ? TokenKind::Phrase : TokenKind::Word));
        semb.push_back(emb(i, near_pole(0.9), near_pole(0.9)));
    }

    auto keys = [](const std::vector<MatchPair>& ms) {
        std::set<std::pair<uint32_t, uint32_t>> k;
        for (const auto& m : ms)
            k.insert({m.target_occ, m.source_occ});
        return k;
    };

    MatchThresholds base;
    auto base_keys = keys(match_all(tocc, temb, socc, semb, base));
    std::uniform_real_distribution<double> bump(0.0, 0.1);
    for (int round = 0; round < 15; ++round) {
        MatchThresholds higher = base;
        higher.same_type += bump(rng);
        higher.cross_type += bump(rng);
        higher.context_floor += bump(rng);
        auto higher_keys = keys(match_all(tocc, temb, socc, semb, higher));
        for (const auto& k : higher_keys)
            CHECK(base_keys.count(k) == 1);
    }
}

TEST_CASE("a 500-char window with two distinct matches forms a Narrow cluster") {
    Corpus corpus;
    corpus.documents.push_back(ingest(std::string(600, 'a'), "novel", "Novel", DocRole::Target));

    std::vector<TokenOccurrence> tocc = {occ("novel", 10, 15, "alpha", TokenKind::Word),
                                         occ("novel", 100, 105, "beta", TokenKind::Word)};
    std::vector<MatchPair> matches = {{0, 0, MatchDirection::WordWord, 0.9, 0.5},
                                      {1, 0, MatchDirection::WordWord, 0.9, 0.5}};
    auto clusters = density_map(matches, tocc, corpus);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].scale == Scale::Narrow);
    CHECK(clusters[0].window_start == 0);
    CHECK(clusters[0].window_end == 500);
    CHECK(clusters[0].distinct_matches == 2);
    CHECK(clusters[0].score == doctest::Approx(0.9));
    CHECK_FALSE(clusters[0].boosted);
}

TEST_CASE("a single match forms no cluster") {
    Corpus corpus;
    corpus.documents.push_back(ingest(std::string(600, 'a'), "novel", "Novel", DocRole::Target));
    std::vector<TokenOccurrence> tocc = {occ("novel", 10, 15, "alpha", TokenKind::Word)};
    std::vector<MatchPair> matches = {{0, 0, MatchDirection::WordWord, 0.95, 0.5}};
    CHECK(density_map(matches, tocc, corpus).empty());
}

TEST_CASE("repeated occurrences of one term count once") {
    Corpus corpus;
    corpus.documents.push_back(ingest(std::string(600, 'a'), "novel", "Novel", DocRole::Target));
    std::vector<TokenOccurrence> tocc = {occ("novel", 10, 15, "alpha", TokenKind::Word),
                                         occ("novel", 100, 105, "alpha", TokenKind::Word)};
    std::vector<MatchPair> matches = {{0, 0, MatchDirection::WordWord, 0.95, 0.5},
                                      {1, 0, MatchDirection::WordWord, 0.95, 0.5}};
    CHECK(density_map(matches, tocc, corpus).empty());
}

TEST_CASE("clusters present at two scales are boosted") {
    Corpus corpus;
    corpus.documents.push_back(ingest(std::string(2100, 'a'), "novel", "Novel", DocRole::Target));

    std::vector<TokenOccurrence> tocc = {
        occ("novel", 10, 15, "a", TokenKind::Word), occ("novel", 50, 55, "b", TokenKind::Word),
        occ("novel", 200, 205, "c", TokenKind::Word), occ("novel", 300, 305, "d", TokenKind::Word)};
    std::vector<MatchPair> matches;
    for (uint32_t i = 0; i < 4; ++i)
        matches.push_back({i, 0, MatchDirection::WordWord, 1.0, 0.5});

    auto clusters = density_map(matches, tocc, corpus);
    bool saw_medium = false, saw_narrow_full = false;
    for (const auto& c : clusters) {
        if (c.scale == Scale::Medium && c.window_start == 0) {
            saw_medium = true;
            CHECK(c.distinct_matches == 4);
            CHECK(c.boosted);
            // Base (4/4)*1.0 lifted once for the Narrow corroboration.
            CHECK(c.score == doctest::Approx(1.25));
        }
        if (c.scale == Scale::Narrow && c.window_start == 0) {
            saw_narrow_full = true;
            CHECK(c.boosted);
            CHECK(c.score == doctest::Approx(2.0 * 1.25));
        }
    }
    CHECK(saw_medium);
    CHECK(saw_narrow_full);
}

TEST_CASE("density map agrees with a every-window oracle") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> len_dist(600, 10000);
    std::uniform_int_distribution<int> occ_count(0, 60);
    std::uniform_real_distribution<double> sim(0.82, 1.0);
    std::uniform_int_distribution<int> term_id(0, 9);

    for (int round = 0; round < 12; ++round) {
        int len = len_dist(rng);
        Corpus corpus;
        corpus.documents.push_back(ingest(std::string(len, 'a'), "novel", "Novel",
                                          DocRole::Target));

        std::vector<TokenOccurrence> tocc;
        std::vector<MatchPair> matches;
        int n = occ_count(rng);
        std::uniform_int_distribution<int> pos(0, len - 6);
        for (int i = 0; i < n; ++i) {
            int p = pos(rng);
            tocc.push_back(occ("novel", p, p + 5, "t" + std::to_string(term_id(rng)),
                               TokenKind::Word));
            matches.push_back({static_cast<uint32_t>(i), 0, MatchDirection::WordWord, sim(rng),
                               0.5});
        }

        auto got = density_map(matches, tocc, corpus);

        // Oracle: evaluate every window of every scale from scratch.
        struct Cand {
            Scale scale;
            uint32_t start, end, distinct;
            double base;
        };
        std::vector<Cand> cands;
        for (const auto& spec : default_scales()) {
            for (uint64_t start = 0; start < static_cast<uint64_t>(len); start += spec.step) {
                std::set<std::string> terms;
                double sum = 0;
                int cnt = 0;
                for (int i = 0; i < n; ++i)
                    if (tocc[i].char_start >= start && tocc[i].char_end <= start + spec.width) {
                        terms.insert(tocc[i].term);
                        sum += matches[i].semantic_sim;
                        ++cnt;
                    }
                if (terms.size() >= spec.min_distinct)
                    cands.push_back({spec.scale, static_cast<uint32_t>(start),
                                     static_cast<uint32_t>(start + spec.width),
                                     static_cast<uint32_t>(terms.size()),
                                     double(terms.size()) / spec.min_distinct * (sum / cnt)});
            }
        }
        std::vector<DensityCluster> expected;
        for (const Cand& c : cands) {
            int extra = 0;
            for (Scale other : {Scale::Narrow, Scale::Medium, Scale::Large}) {
                if (other == c.scale)
                    continue;
                for (const Cand& o : cands)
                    if (o.scale == other && o.start < c.end && c.start < o.end) {
                        ++extra;
                        break;
                    }
            }
            double score = c.base;
            for (int i = 0; i < extra; ++i)
                score *= 1.25;
            if (score >= 0.5)
                expected.push_back({"novel", c.start, c.end, c.scale, c.distinct, score,
                                    extra > 0});
        }
        std::sort(expected.begin(), expected.end(),
                  [](const DensityCluster& a, const DensityCluster& b) {
                      if (a.scale != b.scale)
                          return a.scale < b.scale;
                      return a.window_start < b.window_start;
                  });

        REQUIRE(got.size() == expected.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].scale == expected[i].scale);
            CHECK(got[i].window_start == expected[i].window_start);
            CHECK(got[i].distinct_matches == expected[i].distinct_matches);
            CHECK(got[i].score == doctest::Approx(expected[i].score).epsilon(1e-12));
            CHECK(got[i].boosted == expected[i].boosted);
        }
    }
}

namespace {

std::vector<Chunk> two_by_two_chunks() {
    std::vector<Chunk> chunks;
    Chunk c;
    c.document_id = "novel";
    c.index = 0;
    c.char_start = 0;
    c.char_end = 1000;
    chunks.push_back(c);
    c.index = 1;
    c.char_start = 1000;
    c.char_end = 2000;
    chunks.push_back(c);
    c.document_id = "kjv";
    c.index = 0;
    c.char_start = 0;
    c.char_end = 800;
    chunks.push_back(c);
    c.index = 1;
    c.char_start = 800;
    c.char_end = 1600;
    chunks.push_back(c);
    return chunks;
}

} // namespace

TEST_CASE("assemble_pairs groups matches by chunk pair") {
    auto chunks = two_by_two_chunks();
    std::vector<TokenOccurrence> tocc = {occ("novel", 100, 105, "alpha", TokenKind::Word),
                                         occ("novel", 200, 205, "beta", TokenKind::Word),
                                         occ("novel", 1500, 1505, "gamma", TokenKind::Word)};
    std::vector<TokenOccurrence> socc = {occ("kjv", 50, 55, "alpha", TokenKind::Word),
                                         occ("kjv", 900, 905, "delta", TokenKind::Word)};
    std::vector<MatchPair> matches = {{0, 0, MatchDirection::WordWord, 0.9, 0.5},
                                      {1, 0, MatchDirection::WordWord, 0.91, 0.5},
                                      {2, 1, MatchDirection::WordWord, 0.92, 0.5}};
    std::vector<DensityCluster> clusters = {{"novel", 0, 500, Scale::Narrow, 2, 0.9, false}};

    auto pairs = assemble_pairs(matches, clusters, chunks, tocc, socc);
    REQUIRE(pairs.size() == 2);
    // (novel#0, kjv#0) carries two triggers and the overlapping cluster score.
    CHECK(pairs[0].target_chunk == 0);
    CHECK(pairs[0].source_chunk == 2);
    CHECK(pairs[0].trigger_matches == std::vector<uint32_t>{0, 1});
    CHECK(pairs[0].density_score == doctest::Approx(0.9));
    CHECK(pairs[0].origin_track == Track::Embedding);
    // (novel#1, kjv#1) has no overlapping cluster.
    CHECK(pairs[1].target_chunk == 1);
    CHECK(pairs[1].source_chunk == 3);
    CHECK(pairs[1].density_score == 0.0);
}

TEST_CASE("assemble_pairs with no matches is empty") {
    auto chunks = two_by_two_chunks();
    CHECK(assemble_pairs({}, {}, chunks, {}, {}).empty());
}

TEST_CASE("pair ranking prefers density then trigger count then ids") {
    auto chunks = two_by_two_chunks();
    std::vector<TokenOccurrence> tocc = {occ("novel", 100, 105, "a", TokenKind::Word),
                                         occ("novel", 1100, 1105, "b", TokenKind::Word),
                                         occ("novel", 1200, 1205, "c", TokenKind::Word)};
    std::vector<TokenOccurrence> socc = {occ("kjv", 50, 55, "x", TokenKind::Word),
                                         occ("kjv", 900, 905, "y", TokenKind::Word)};
    // novel#0-kjv#0: one trigger, high density. novel#1-kjv#0 two triggers, no
    // density. novel#1-kjv#1 one trigger, no density.
    std::vector<MatchPair> matches = {{0, 0, MatchDirection::WordWord, 0.9, 0.5},
                                      {1, 0, MatchDirection::WordWord, 0.9, 0.5},
                                      {2, 0, MatchDirection::WordWord, 0.9, 0.5},
                                      {2, 1, MatchDirection::WordWord, 0.9, 0.5}};
    std::vector<DensityCluster> clusters = {{"novel", 0, 500, Scale::Narrow, 2, 1.8, false}};
    auto pairs = assemble_pairs(matches, clusters, chunks, tocc, socc);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].target_chunk == 0); // density 1.8
    CHECK(pairs[1].target_chunk == 1); // two triggers
    CHECK(pairs[1].trigger_matches.size() == 2);
    CHECK(pairs[2].trigger_matches.size() == 1);
}

TEST_CASE("match, cluster, and pair records round-trip through files") {
    std::vector<MatchPair> matches = {{3, 9, MatchDirection::WordPhrase, 0.912345678901234, 0.5},
                                      {1, 2, MatchDirection::PhraseWord, 0.88, 0.4123}};
    std::vector<DensityCluster> clusters = {{"novel", 125, 625, Scale::Narrow, 3, 1.23456789, true},
                                            {"other", 0, 2000, Scale::Medium, 4, 0.75, false}};
    std::vector<CandidateChunkPair> pairs;
    CandidateChunkPair p;
    p.target_chunk = 4;
    p.source_chunk = 7;
    p.trigger_matches = {0, 1, 5};
    p.density_score = 1.5;
    p.origin_track = Track::Embedding;
    pairs.push_back(p);
    p.trigger_matches = {};
    p.origin_track = Track::Register;
    pairs.push_back(p);

    auto dir = std::filesystem::temp_directory_path();
    save_matches((dir / "m.psv").string(), matches);
    save_clusters((dir / "c.psv").string(), clusters);
    save_pairs((dir / "p.psv").string(), pairs);

    auto m2 = load_matches((dir / "m.psv").string());
    REQUIRE(m2.size() == 2);
    CHECK(m2[0].target_occ == 3);
    CHECK(m2[0].direction == MatchDirection::WordPhrase);
    CHECK(m2[0].semantic_sim == matches[0].semantic_sim);
    CHECK(m2[1].context_sim == matches[1].context_sim);

    auto c2 = load_clusters((dir / "c.psv").string());
    REQUIRE(c2.size() == 2);
    CHECK(c2[0].document_id == "novel");
    CHECK(c2[0].scale == Scale::Narrow);
    CHECK(c2[0].window_start == 125);
    CHECK(c2[0].score == clusters[0].score);
    CHECK(c2[0].boosted);
    CHECK_FALSE(c2[1].boosted);

    auto p2 = load_pairs((dir / "p.psv").string());
    REQUIRE(p2.size() == 2);
    CHECK(p2[0].trigger_matches == std::vector<uint32_t>{0, 1, 5});
    CHECK(p2[1].trigger_matches.empty());
    CHECK(p2[1].origin_track == Track::Register);

    std::filesystem::remove(dir / "m.psv");
    std::filesystem::remove(dir / "c.psv");
    std::filesystem::remove(dir / "p.psv");
}
