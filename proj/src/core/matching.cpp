#include "core/matching.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "core/errors.hpp"
#include "core/text.hpp"

namespace intertext {

double cosine(const std::vector<float>& u, const std::vector<float>& v) {
    if (u.size() != v.size())
        throw DomainError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()) + ")");
    double dot = 0, nu = 0, nv = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += double(u[i]) * v[i];
        nu += double(u[i]) * u[i];
        nv += double(v[i]) * v[i];
    }
    if (nu == 0.0 || nv == 0.0)
        throw DegenerateVectorError("cosine: zero-norm vector");
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

const char* direction_name(MatchDirection d) {
    switch (d) {
    case MatchDirection::WordWord: return "WordWord";
    case MatchDirection::PhrasePhrase: return "PhrasePhrase";
    case MatchDirection::WordPhrase: return "WordPhrase";
    case MatchDirection::PhraseWord: return "PhraseWord";
    }
    throw DomainError("unknown match direction");
}

MatchDirection parse_direction(const std::string& name) {
    if (name == "WordWord") return MatchDirection::WordWord;
    if (name == "PhrasePhrase") return MatchDirection::PhrasePhrase;
    if (name == "WordPhrase") return MatchDirection::WordPhrase;
    if (name == "PhraseWord") return MatchDirection::PhraseWord;
    throw DomainError("unknown match direction: " + name);
}

bool is_same_type(MatchDirection d) {
    return d == MatchDirection::WordWord || d == MatchDirection::PhrasePhrase;
}

namespace {

MatchDirection direction_for(TokenKind target, TokenKind source) {
    if (target == TokenKind::Word)
        return source == TokenKind::Word ? MatchDirection::WordWord : MatchDirection::WordPhrase;
    return source == TokenKind::Word ? MatchDirection::PhraseWord : MatchDirection::PhrasePhrase;
}

const TokenOccurrence& occ_for(const std::vector<TokenOccurrence>& occs,
                               const EmbeddedOccurrence& emb, const char* side) {
    if (emb.occurrence_index >= occs.size())
        throw DomainError(std::string("embedding references missing ") + side + " occurrence " +
                          std::to_string(emb.occurrence_index));
    return occs[emb.occurrence_index];
}

} // namespace

std::vector<MatchPair> match_all(const std::vector<TokenOccurrence>& target_occs,
                                 const std::vector<EmbeddedOccurrence>& target_embeddings,
                                 const std::vector<TokenOccurrence>& source_occs,
                                 const std::vector<EmbeddedOccurrence>& source_embeddings,
                                 const MatchThresholds& thresholds) {
    std::vector<MatchPair> out;
    for (const EmbeddedOccurrence& te : target_embeddings) {
        const TokenOccurrence& t = occ_for(target_occs, te, "target");
        for (const EmbeddedOccurrence& se : source_embeddings) {
            const TokenOccurrence& s = occ_for(source_occs, se, "source");
            MatchDirection dir = direction_for(t.kind, s.kind);
            double gate = is_same_type(dir) ? thresholds.same_type : thresholds.cross_type;
            double semantic = cosine(te.semantic, se.semantic);
            if (semantic < gate)
                continue;
            double context = cosine(te.contextual, se.contextual);
            if (context < thresholds.context_floor)
                continue;
            out.push_back({te.occurrence_index, se.occurrence_index, dir, semantic, context});
        }
    }
    return out;
}

const char* scale_name(Scale s) {
    switch (s) {
    case Scale::Narrow: return "Narrow";
    case Scale::Medium: return "Medium";
    case Scale::Large: return "Large";
    }
    throw DomainError("unknown scale");
}

Scale parse_scale(const std::string& name) {
    if (name == "Narrow") return Scale::Narrow;
    if (name == "Medium") return Scale::Medium;
    if (name == "Large") return Scale::Large;
    throw DomainError("unknown scale: " + name);
}

std::vector<ScaleSpec> default_scales() {
    return {{Scale::Narrow, 500, 125, 2}, {Scale::Medium, 2000, 500, 4},
            {Scale::Large, 5000, 1250, 6}};
}

std::vector<DensityCluster> density_map(const std::vector<MatchPair>& matches,
                                        const std::vector<TokenOccurrence>& target_occs,
                                        const Corpus& corpus,
                                        const std::vector<ScaleSpec>& scales) {
    // Bucket matches by target document, keeping the target occurrence span,
    // term, and semantic similarity of each.
    struct Anchor {
        uint32_t char_start;
        uint32_t char_end;
        const std::string* term;
        double semantic_sim;
    };
    std::unordered_map<std::string, std::vector<Anchor>> by_doc;
    for (const MatchPair& m : matches) {
        if (m.target_occ >= target_occs.size())
            throw DomainError("match references missing target occurrence " +
                              std::to_string(m.target_occ));
        const TokenOccurrence& occ = target_occs[m.target_occ];
        by_doc[occ.document_id].push_back(
            {occ.char_start, occ.char_end, &occ.term, m.semantic_sim});
    }

    std::vector<DensityCluster> candidates;
    for (const Document& doc : corpus.documents) {
        if (doc.role != DocRole::Target)
            continue;
        auto it = by_doc.find(doc.id);
        if (it == by_doc.end())
            continue;
        const std::vector<Anchor>& anchors = it->second;
        uint32_t length = static_cast<uint32_t>(doc.char_count());
        for (const ScaleSpec& spec : scales) {
            for (uint64_t start = 0; start < length; start += spec.step) {
                uint64_t end = start + spec.width;
                std::set<std::string> terms;
                double sim_sum = 0;
                uint32_t in_window = 0;
                for (const Anchor& a : anchors) {
                    if (a.char_start >= start && a.char_end <= end) {
                        terms.insert(*a.term);
                        sim_sum += a.semantic_sim;
                        ++in_window;
                    }
                }
                if (terms.size() < spec.min_distinct)
                    continue;
                double base = (double(terms.size()) / spec.min_distinct) * (sim_sum / in_window);
                candidates.push_back({doc.id, static_cast<uint32_t>(start),
                                      static_cast<uint32_t>(end), spec.scale,
                                      static_cast<uint32_t>(terms.size()), base, false});
            }
        }
    }

    // Cross-scale boost: 1.25x per other scale holding at least one
    // overlapping candidate window in the same document.
    std::vector<DensityCluster> retained;
    for (const DensityCluster& c : candidates) {
        uint32_t extra_scales = 0;
        for (Scale other : {Scale::Narrow, Scale::Medium, Scale::Large}) {
            if (other == c.scale)
                continue;
            bool overlaps = std::any_of(
                candidates.begin(), candidates.end(), [&](const DensityCluster& o) {
                    return o.scale == other && o.document_id == c.document_id &&
                           o.window_start < c.window_end && c.window_start < o.window_end;
                });
            if (overlaps)
                ++extra_scales;
        }
        DensityCluster boosted = c;
        for (uint32_t i = 0; i < extra_scales; ++i)
            boosted.score *= 1.25;
        boosted.boosted = extra_scales > 0;
        if (boosted.score >= 0.5)
            retained.push_back(std::move(boosted));
    }

    std::sort(retained.begin(), retained.end(), [](const DensityCluster& a,
                                                   const DensityCluster& b) {
        if (a.document_id != b.document_id)
            return a.document_id < b.document_id;
        if (a.scale != b.scale)
            return a.scale < b.scale;
        return a.window_start < b.window_start;
    });
    return retained;
}

const char* track_name(Track t) {
    switch (t) {
    case Track::Embedding: return "Embedding";
    case Track::Register: return "Register";
    case Track::LongContext: return "LongContext";
    }
    throw DomainError("unknown track");
}

Track parse_track(const std::string& name) {
    if (name == "Embedding") return Track::Embedding;
    if (name == "Register") return Track::Register;
    if (name == "LongContext") return Track::LongContext;
    throw DomainError("unknown track: " + name);
}

namespace {

// Chunk index lookup: document id -> chunk positions ordered by char_start.
class ChunkLocator {
  public:
    explicit ChunkLocator(const std::vector<Chunk>& chunks) : chunks_(chunks) {
        for (uint32_t i = 0; i < chunks.size(); ++i)
            by_doc_[chunks[i].document_id].push_back(i);
        for (auto& [doc, ids] : by_doc_)
            std::sort(ids.begin(), ids.end(), [&](uint32_t a, uint32_t b) {
                return chunks_[a].char_start < chunks_[b].char_start;
            });
    }

    uint32_t locate(const std::string& document_id, uint32_t offset) const {
        auto it = by_doc_.find(document_id);
        if (it == by_doc_.end())
            throw DomainError("no chunks for document " + document_id);
        for (uint32_t id : it->second) {
            const Chunk& c = chunks_[id];
            if (offset >= c.char_start && offset < c.char_end)
                return id;
        }
        throw DomainError("offset " + std::to_string(offset) + " outside all chunks of " +
                          document_id);
    }

  private:
    const std::vector<Chunk>& chunks_;
    std::unordered_map<std::string, std::vector<uint32_t>> by_doc_;
};

} // namespace

std::vector<CandidateChunkPair> assemble_pairs(const std::vector<MatchPair>& matches,
                                               const std::vector<DensityCluster>& clusters,
                                               const std::vector<Chunk>& chunks,
                                               const std::vector<TokenOccurrence>& target_occs,
                                               const std::vector<TokenOccurrence>& source_occs) {
    ChunkLocator locator(chunks);
    std::map<std::pair<uint32_t, uint32_t>, std::vector<uint32_t>> groups;
    for (uint32_t i = 0; i < matches.size(); ++i) {
        const MatchPair& m = matches[i];
        if (m.target_occ >= target_occs.size() || m.source_occ >= source_occs.size())
            throw DomainError("match references a missing occurrence");
        const TokenOccurrence& t = target_occs[m.target_occ];
        const TokenOccurrence& s = source_occs[m.source_occ];
        uint32_t tc = locator.locate(t.document_id, t.char_start);
        uint32_t sc = locator.locate(s.document_id, s.char_start);
        groups[{tc, sc}].push_back(i);
    }

    std::vector<CandidateChunkPair> pairs;
    for (const auto& [key, triggers] : groups) {
        const Chunk& tc = chunks[key.first];
        double density = 0;
        for (const DensityCluster& c : clusters) {
            if (c.document_id != tc.document_id)
                continue;
            if (c.window_start < tc.char_end && tc.char_start < c.window_end)
                density = std::max(density, c.score);
        }
        pairs.push_back({key.first, key.second, triggers, density, Track::Embedding});
    }

    std::sort(pairs.begin(), pairs.end(), [](const CandidateChunkPair& a,
                                             const CandidateChunkPair& b) {
        if (a.density_score != b.density_score)
            return a.density_score > b.density_score;
        if (a.trigger_matches.size() != b.trigger_matches.size())
            return a.trigger_matches.size() > b.trigger_matches.size();
        if (a.target_chunk != b.target_chunk)
            return a.target_chunk < b.target_chunk;
        return a.source_chunk < b.source_chunk;
    });
    return pairs;
}

void save_matches(const std::string& path, const std::vector<MatchPair>& matches) {
    std::string out;
    for (const MatchPair& m : matches)
        out += psv_join({std::to_string(m.target_occ), std::to_string(m.source_occ),
                         direction_name(m.direction), format_double(m.semantic_sim),
                         format_double(m.context_sim)}) +
               "\n";
    write_file(path, out);
}

std::vector<MatchPair> load_matches(const std::string& path) {
    std::vector<MatchPair> out;
    for (const std::string& line : read_lines(path)) {
        if (line.empty())
            continue;
        auto f = psv_split(line);
        if (f.size() != 5)
            throw IngestError("malformed match record: " + line);
        out.push_back({static_cast<uint32_t>(std::stoul(f[0])),
                       static_cast<uint32_t>(std::stoul(f[1])), parse_direction(f[2]),
                       std::stod(f[3]), std::stod(f[4])});
    }
    return out;
}

void save_clusters(const std::string& path, const std::vector<DensityCluster>& clusters) {
    std::string out;
    for (const DensityCluster& c : clusters)
        out += psv_join({c.document_id, scale_name(c.scale), std::to_string(c.window_start),
                         std::to_string(c.window_end), std::to_string(c.distinct_matches),
                         format_double(c.score), c.boosted ? "1" : "0"}) +
               "\n";
    write_file(path, out);
}

std::vector<DensityCluster> load_clusters(const std::string& path) {
    std::vector<DensityCluster> out;
    for (const std::string& line : read_lines(path)) {
        if (line.empty())
            continue;
        auto f = psv_split(line);
        if (f.size() != 7)
            throw IngestError("malformed cluster record: " + line);
        out.push_back({f[0], static_cast<uint32_t>(std::stoul(f[2])),
                       static_cast<uint32_t>(std::stoul(f[3])), parse_scale(f[1]),
                       static_cast<uint32_t>(std::stoul(f[4])), std::stod(f[5]), f[6] == "1"});
    }
    return out;
}

void save_pairs(const std::string& path, const std::vector<CandidateChunkPair>& pairs) {
    std::string out;
    for (const CandidateChunkPair& p : pairs) {
        std::string triggers;
        for (size_t i = 0; i < p.trigger_matches.size(); ++i) {
            if (i)
                triggers += ',';
            triggers += std::to_string(p.trigger_matches[i]);
        }
        out += psv_join({std::to_string(p.target_chunk), std::to_string(p.source_chunk),
                         format_double(p.density_score), track_name(p.origin_track), triggers}) +
               "\n";
    }
    write_file(path, out);
}

std::vector<CandidateChunkPair> load_pairs(const std::string& path) {
    std::vector<CandidateChunkPair> out;
    for (const std::string& line : read_lines(path)) {
        if (line.empty())
            continue;
        auto f = psv_split(line);
        if (f.size() != 5)
            throw IngestError("malformed pair record: " + line);
        CandidateChunkPair p;
        p.target_chunk = static_cast<uint32_t>(std::stoul(f[0]));
        p.source_chunk = static_cast<uint32_t>(std::stoul(f[1]));
        p.density_score = std::stod(f[2]);
        p.origin_track = parse_track(f[3]);
        for (const std::string& t : split(f[4], ','))
            if (!t.empty())
                p.trigger_matches.push_back(static_cast<uint32_t>(std::stoul(t)));
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace intertext
