#include "core/review.hpp"

#include <algorithm>

#include <json.hpp>

#include "core/text.hpp"

namespace intertext {

using nlohmann::json;

const char* verdict_name(VerdictLevel v) {
    switch (v) {
    case VerdictLevel::Strong: return "Strong";
    case VerdictLevel::Moderate: return "Moderate";
    case VerdictLevel::Weak: return "Weak";
    case VerdictLevel::None: return "None";
    }
    throw DomainError("unknown verdict level");
}

VerdictLevel parse_verdict(const std::string& name) {
    if (name == "Strong") return VerdictLevel::Strong;
    if (name == "Moderate") return VerdictLevel::Moderate;
    if (name == "Weak") return VerdictLevel::Weak;
    if (name == "None") return VerdictLevel::None;
    throw ParseError("unknown verdict level: " + name);
}

const char* connection_type_name(ConnectionType t) {
    switch (t) {
    case ConnectionType::VerbalEcho: return "VerbalEcho";
    case ConnectionType::InvertedAllusion: return "InvertedAllusion";
    case ConnectionType::ParodicHomage: return "ParodicHomage";
    case ConnectionType::RegisterCollision: return "RegisterCollision";
    case ConnectionType::ThematicTransplantation: return "ThematicTransplantation";
    case ConnectionType::TransformedImagery: return "TransformedImagery";
    case ConnectionType::DirectQuotation: return "DirectQuotation";
    }
    throw DomainError("unknown connection type");
}

const char* connection_type_label(ConnectionType t) {
    switch (t) {
    case ConnectionType::VerbalEcho: return "Verbal echo";
    case ConnectionType::InvertedAllusion: return "Inverted allusion";
    case ConnectionType::ParodicHomage: return "Parodic homage";
    case ConnectionType::RegisterCollision: return "Register collision";
    case ConnectionType::ThematicTransplantation: return "Thematic transplantation";
    case ConnectionType::TransformedImagery: return "Transformed imagery";
    case ConnectionType::DirectQuotation: return "Direct quotation";
    }
    throw DomainError("unknown connection type");
}

ConnectionType parse_connection_type(const std::string& text) {
    std::string key = fold(text);
    std::replace(key.begin(), key.end(), '_', ' ');
    std::replace(key.begin(), key.end(), '-', ' ');
    key.erase(std::remove(key.begin(), key.end(), ' '), key.end());
    if (key == "verbalecho") return ConnectionType::VerbalEcho;
    if (key == "invertedallusion") return ConnectionType::InvertedAllusion;
    if (key == "parodichomage") return ConnectionType::ParodicHomage;
    if (key == "registercollision") return ConnectionType::RegisterCollision;
    if (key == "thematictransplantation") return ConnectionType::ThematicTransplantation;
    if (key == "transformedimagery") return ConnectionType::TransformedImagery;
    if (key == "morphologicaltransformation") return ConnectionType::TransformedImagery;
    if (key == "directquotation") return ConnectionType::DirectQuotation;
    throw ParseError("unknown connection type: " + text);
}

bool has_track(const Finding& f, Track t) {
    return (f.tracks & static_cast<uint8_t>(t)) != 0;
}

void add_track(Finding& f, Track t) {
    f.tracks |= static_cast<uint8_t>(t);
}

namespace {

std::string tracks_to_string(uint8_t tracks) {
    std::string out;
    for (Track t : {Track::Embedding, Track::Register, Track::LongContext}) {
        if (!(tracks & static_cast<uint8_t>(t)))
            continue;
        if (!out.empty())
            out += ',';
        out += track_name(t);
    }
    return out;
}

uint8_t tracks_from_string(const std::string& s) {
    uint8_t tracks = 0;
    for (const std::string& part : split(s, ','))
        if (!part.empty())
            tracks |= static_cast<uint8_t>(parse_track(part));
    return tracks;
}

std::string verses_to_string(const std::vector<VerseRef>& refs) {
    std::string out;
    for (const VerseRef& r : refs) {
        if (!out.empty())
            out += ';';
        out += verse_label(r) + "@" + std::to_string(r.char_start) + "-" +
               std::to_string(r.char_end);
    }
    return out;
}

std::vector<VerseRef> verses_from_string(const std::string& s) {
    std::vector<VerseRef> refs;
    for (const std::string& part : split(s, ';')) {
        if (part.empty())
            continue;
        size_t at = part.rfind('@');
        size_t dash = part.rfind('-');
        if (at == std::string::npos || dash == std::string::npos || dash < at)
            throw IngestError("malformed verse record: " + part);
        auto parsed = parse_verse_label(part.substr(0, at));
        if (!parsed)
            throw IngestError("malformed verse label: " + part);
        parsed->char_start = static_cast<uint32_t>(std::stoul(part.substr(at + 1, dash - at - 1)));
        parsed->char_end = static_cast<uint32_t>(std::stoul(part.substr(dash + 1)));
        refs.push_back(*parsed);
    }
    return refs;
}

} // namespace

void save_findings(const std::string& path, const std::vector<Finding>& findings) {
    std::string out;
    for (const Finding& f : findings) {
        std::string merged;
        for (size_t i = 0; i < f.merged_ids.size(); ++i) {
            if (i)
                merged += ',';
            merged += std::to_string(f.merged_ids[i]);
        }
        out += psv_join({std::to_string(f.id), f.target_document_id,
                         std::to_string(f.target_chunk), std::to_string(f.target_start),
                         std::to_string(f.target_end), f.target_quote,
                         std::to_string(f.source_chunk), std::to_string(f.source_start),
                         std::to_string(f.source_end), f.source_quote,
                         verses_to_string(f.verse_refs), connection_type_name(f.connection_type),
                         verdict_name(f.rating), tracks_to_string(f.tracks),
                         f.textual ? "1" : "0", f.unverifiable ? "1" : "0",
                         f.disputed ? "1" : "0", f.notes, merged}) +
               "\n";
    }
    write_file(path, out);
}

std::vector<Finding> load_findings(const std::string& path) {
    std::vector<Finding> out;
    for (const std::string& line : read_lines(path)) {
        if (line.empty())
            continue;
        auto f = psv_split(line);
        if (f.size() != 19)
            throw IngestError("malformed finding record (" + std::to_string(f.size()) +
                              " fields)");
        Finding fd;
        fd.id = static_cast<uint32_t>(std::stoul(f[0]));
        fd.target_document_id = f[1];
        fd.target_chunk = static_cast<uint32_t>(std::stoul(f[2]));
        fd.target_start = static_cast<uint32_t>(std::stoul(f[3]));
        fd.target_end = static_cast<uint32_t>(std::stoul(f[4]));
        fd.target_quote = f[5];
        fd.source_chunk = static_cast<uint32_t>(std::stoul(f[6]));
        fd.source_start = static_cast<uint32_t>(std::stoul(f[7]));
        fd.source_end = static_cast<uint32_t>(std::stoul(f[8]));
        fd.source_quote = f[9];
        fd.verse_refs = verses_from_string(f[10]);
        fd.connection_type = parse_connection_type(f[11]);
        fd.rating = parse_verdict(f[12]);
        fd.tracks = tracks_from_string(f[13]);
        fd.textual = f[14] == "1";
        fd.unverifiable = f[15] == "1";
        fd.disputed = f[16] == "1";
        fd.notes = f[17];
        for (const std::string& id : split(f[18], ','))
            if (!id.empty())
                fd.merged_ids.push_back(static_cast<uint32_t>(std::stoul(id)));
        out.push_back(std::move(fd));
    }
    return out;
}

const char* stage_name(ReviewStage s) {
    switch (s) {
    case ReviewStage::Screen: return "screen";
    case ReviewStage::DeepAnalysis: return "deep";
    case ReviewStage::RegisterScan: return "register";
    case ReviewStage::VerseConfirm: return "confirm";
    case ReviewStage::LongContext: return "longcontext";
    case ReviewStage::Probe: return "probe";
    }
    throw DomainError("unknown review stage");
}

ReviewStage parse_review_stage(const std::string& name) {
    if (name == "screen") return ReviewStage::Screen;
    if (name == "deep") return ReviewStage::DeepAnalysis;
    if (name == "register") return ReviewStage::RegisterScan;
    if (name == "confirm") return ReviewStage::VerseConfirm;
    if (name == "longcontext") return ReviewStage::LongContext;
    if (name == "probe") return ReviewStage::Probe;
    throw DomainError("unknown review stage: " + name);
}

TranscriptStore TranscriptStore::load(const std::string& path) {
    TranscriptStore store;
    for (const std::string& line : read_lines(path)) {
        if (line.empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IngestError("malformed transcript line: " + std::string(e.what()));
        }
        TranscriptRecord r;
        r.stage = j.at("stage").get<std::string>();
        r.model = j.value("model", "");
        r.hash = j.at("hash").get<std::string>();
        r.payload = j.value("payload", "");
        r.response = j.at("response").get<std::string>();
        store.append(std::move(r));
    }
    return store;
}

void TranscriptStore::save(const std::string& path) const {
    std::string out;
    for (const TranscriptRecord& r : records_) {
        json j;
        j["stage"] = r.stage;
        j["model"] = r.model;
        j["hash"] = r.hash;
        j["payload"] = r.payload;
        j["response"] = r.response;
        out += j.dump() + "\n";
    }
    write_file(path, out);
}

void TranscriptStore::append(TranscriptRecord record) {
    index_.emplace(std::make_pair(record.stage, record.hash), records_.size());
    records_.push_back(std::move(record));
}

const TranscriptRecord* TranscriptStore::find(ReviewStage stage, uint64_t payload_hash) const {
    auto it = index_.find({stage_name(stage), hex64(payload_hash)});
    return it == index_.end() ? nullptr : &records_[it->second];
}

std::string ReplayReviewer::model_id(ReviewStage) const {
    return "replay";
}

std::string ReplayReviewer::call(ReviewStage stage, const std::string& payload) {
    const TranscriptRecord* r = store_.find(stage, fnv1a64(payload));
    if (!r)
        throw MissingTranscriptError(std::string("no transcript for ") + stage_name(stage) +
                                     " payload " + hex64(fnv1a64(payload)));
    return r->response;
}

std::string RecordingReviewer::call(ReviewStage stage, const std::string& payload) {
    std::string response = inner_.call(stage, payload);
    std::lock_guard<std::mutex> lock(mutex_);
    store_.append({stage_name(stage), inner_.model_id(stage), hex64(fnv1a64(payload)), payload,
                   response});
    return response;
}

CachingReviewer::CachingReviewer(ReviewerProvider& inner, std::string cache_path)
    : inner_(inner), cache_path_(std::move(cache_path)) {
    if (file_exists(cache_path_))
        store_ = TranscriptStore::load(cache_path_);
}

std::string CachingReviewer::call(ReviewStage stage, const std::string& payload) {
    uint64_t hash = fnv1a64(payload);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (const TranscriptRecord* r = store_.find(stage, hash))
            if (r->model == inner_.model_id(stage))
                return r->response;
    }
    std::string response = inner_.call(stage, payload);
    std::lock_guard<std::mutex> lock(mutex_);
    TranscriptRecord record{stage_name(stage), inner_.model_id(stage), hex64(hash), payload,
                            response};
    json j;
    j["stage"] = record.stage;
    j["model"] = record.model;
    j["hash"] = record.hash;
    j["payload"] = record.payload;
    j["response"] = record.response;
    append_file(cache_path_, j.dump() + "\n");
    store_.append(std::move(record));
    return response;
}

void QuarantineLog::add(ReviewStage stage, const std::string& item, uint64_t payload_hash,
                        const std::string& raw) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back({stage_name(stage), item, hex64(payload_hash), raw});
}

void QuarantineLog::save(const std::string& path) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string out;
    for (const QuarantineEntry& e : entries_)
        out += psv_join({e.stage, e.item, e.payload_hash, e.raw_response}) + "\n";
    write_file(path, out);
}

void QuarantineLog::load(const std::string& path) {
    std::vector<QuarantineEntry> entries;
    for (const std::string& line : read_lines(path)) {
        if (line.empty())
            continue;
        auto f = psv_split(line);
        if (f.size() != 4)
            throw IngestError("malformed quarantine record");
        entries.push_back({f[0], f[1], f[2], f[3]});
    }
    std::lock_guard<std::mutex> lock(mutex_);
    entries_ = std::move(entries);
}

PromptSet PromptSet::defaults() {
    PromptSet p;
    p.screen =
        "You are a scholar of comparative literature judging whether two passages are genuinely "
        "connected. Shared subject matter alone (death, winter, rivers, cities, decay) is not "
        "evidence: these are universal literary subjects. Evidence requires specific shared "
        "phrasing, matching syntactic structure, unusual vocabulary appearing in both, or a "
        "distinctive image clearly reworked rather than independently invented. Rate the "
        "connection Strong, Moderate, Weak, or None. Respond with one JSON object: {\"level\": "
        "\"Strong|Moderate|Weak|None\", \"target_quote\": \"...\", \"source_quote\": \"...\"}. "
        "Strong and Moderate verdicts must quote the connecting phrases from both passages; use "
        "empty strings otherwise.";
    p.deep =
        "You are analysing a confirmed connection between a novel passage and a scripture "
        "passage. Classify each distinct connection as one of: verbal echo, inverted allusion, "
        "parodic homage, register collision, thematic transplantation, transformed imagery, "
        "direct quotation. When multiple signals co-occur, treat the combination as stronger "
        "evidence than any single signal; allusion often works through transformation rather "
        "than quotation. Novel lines are numbered M1..; scripture lines K1... Respond with one "
        "JSON object: {\"findings\": [{\"connection_type\": \"...\", \"target_quote\": \"exact "
        "novel text\", \"target_line\": 0, \"source_quote\": \"exact scripture text\", "
        "\"source_line\": 0, \"notes\": \"...\"}]}. Quote exactly, never paraphrase; return an "
        "empty list when nothing holds up.";
    p.register_scan =
        "Read the following novel passage. No scripture text is supplied. Flag every stretch "
        "whose language is biblical under one of six categories: direct quotation, cadence, "
        "vocabulary, prophetic register, liturgical pattern, transformed allusion. For each "
        "flag, name the likely source at book-and-verse specificity where possible. Respond "
        "with one JSON object: {\"flags\": [{\"passage\": \"exact text from the passage\", "
        "\"category\": \"...\", \"candidates\": [\"Book 1:2\"]}]}. Return an empty list when "
        "nothing qualifies.";
    p.verse_confirm =
        "Decide whether the flagged novel passage genuinely connects to the candidate verse. "
        "Respond with one JSON object: {\"decision\": \"confirm\" or \"reject\", \"notes\": "
        "\"...\"}.";
    p.longcontext_read =
        "Read the complete novel and the scripture portion below. Identify every passage of the "
        "novel that echoes, quotes, transforms, inverts, or alludes to a specific scripture "
        "passage. Respond with one JSON object: {\"findings\": [{\"target_quote\": \"exact "
        "novel text\", \"source_quote\": \"exact scripture text\", \"verse\": \"Book 1:2\", "
        "\"connection_type\": \"...\", \"notes\": \"...\"}]}.";
    p.longcontext_hints =
        "Read the complete novel below. An earlier pass matched these rare terms against "
        "scripture; use them as hints, not as limits. Identify every passage alluding to a "
        "specific scripture passage. Respond with one JSON object: {\"findings\": "
        "[{\"target_quote\": \"exact novel text\", \"source_quote\": \"exact scripture text\", "
        "\"verse\": \"Book 1:2\", \"connection_type\": \"...\", \"notes\": \"...\"}]}.";
    p.longcontext_critique =
        "Review the numbered findings below against the complete novel. Flag false positives "
        "and add omissions. Respond with one JSON object: {\"edits\": [{\"finding_id\": 0, "
        "\"action\": \"keep\" or \"drop\" or \"add\", \"finding\": {\"target_quote\": \"...\", "
        "\"source_quote\": \"...\", \"verse\": \"Book 1:2\", \"connection_type\": \"...\", "
        "\"notes\": \"...\"}}]}. The finding object is required only for add.";
    p.probe =
        "Does the following passage quote, echo, or allude to any specific scripture passage? "
        "If so, name the source as Book chapter:verse and quote the connecting text. If not, "
        "say that no allusion is present.";
    return p;
}

PromptSet PromptSet::load(const std::string& dir) {
    PromptSet p = defaults();
    auto take = [&](const char* file, std::string& slot) {
        std::string path = dir + "/" + file;
        if (file_exists(path)) {
            slot = read_file(path);
            while (!slot.empty() && (slot.back() == '\n' || slot.back() == '\r'))
                slot.pop_back();
        }
    };
    take("screen.txt", p.screen);
    take("deep.txt", p.deep);
    take("register_scan.txt", p.register_scan);
    take("verse_confirm.txt", p.verse_confirm);
    take("longcontext_read.txt", p.longcontext_read);
    take("longcontext_hints.txt", p.longcontext_hints);
    take("longcontext_critique.txt", p.longcontext_critique);
    take("probe.txt", p.probe);
    return p;
}

namespace {

constexpr const char* kReformatSuffix =
    "\n\nYour previous reply could not be parsed. Respond with exactly the JSON object "
    "described above and nothing else.";

std::string_view chunk_text(const Chunk& chunk, const Corpus& corpus) {
    const Document& doc = corpus.by_id(chunk.document_id);
    return std::string_view(doc.text).substr(chunk.char_start, chunk.char_end - chunk.char_start);
}

json parse_json_response(const std::string& raw) {
    try {
        return json::parse(raw);
    } catch (const json::exception&) {
    }
    size_t open = raw.find('{');
    size_t close = raw.rfind('}');
    if (open != std::string::npos && close != std::string::npos && close > open) {
        try {
            return json::parse(raw.substr(open, close - open + 1));
        } catch (const json::exception&) {
        }
    }
    throw ParseError("response is not a JSON object");
}

// One parse attempt, one reformat retry, then quarantine. Returns nullopt
// only after quarantining.
template <typename T, typename ParseFn>
std::optional<T> call_parsed(ReviewerProvider& provider, ReviewStage stage,
                             const std::string& payload, const std::string& item,
                             QuarantineLog* quarantine, ParseFn parse) {
    std::string raw = provider.call(stage, payload);
    try {
        return parse(raw);
    } catch (const ParseError&) {
    }
    std::string retry_payload = payload + kReformatSuffix;
    std::string retry_raw = provider.call(stage, retry_payload);
    try {
        return parse(retry_raw);
    } catch (const ParseError&) {
        if (quarantine)
            quarantine->add(stage, item, fnv1a64(payload), retry_raw);
        return std::nullopt;
    }
}

Verdict parse_screen_response(const std::string& raw) {
    json j = parse_json_response(raw);
    if (!j.contains("level"))
        throw ParseError("screen response lacks level");
    Verdict v;
    v.level = parse_verdict(j.at("level").get<std::string>());
    v.quoted_target = j.value("target_quote", "");
    v.quoted_source = j.value("source_quote", "");
    if ((v.level == VerdictLevel::Strong || v.level == VerdictLevel::Moderate) &&
        (v.quoted_target.empty() || v.quoted_source.empty()))
        throw ParseError("Strong/Moderate verdict without both quotes");
    return v;
}

std::string pair_item(const CandidateChunkPair& pair) {
    return "pair " + std::to_string(pair.target_chunk) + ":" + std::to_string(pair.source_chunk);
}

// Non-empty lines of a text slice with their offsets relative to the slice.
struct NumberedLine {
    size_t begin;
    size_t end;
};

std::vector<NumberedLine> numbered_lines(std::string_view text) {
    std::vector<NumberedLine> lines;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        size_t end = nl == std::string_view::npos ? text.size() : nl;
        bool blank = true;
        for (size_t i = pos; i < end && blank; ++i)
            blank = text[i] == ' ' || text[i] == '\t' || text[i] == '\r';
        if (end > pos && !blank)
            lines.push_back({pos, end});
        if (nl == std::string_view::npos)
            break;
        pos = nl + 1;
    }
    return lines;
}

std::string numbered_block(std::string_view text, char prefix) {
    std::string out;
    auto lines = numbered_lines(text);
    for (size_t i = 0; i < lines.size(); ++i) {
        out += prefix;
        out += std::to_string(i + 1);
        out += ": ";
        out += text.substr(lines[i].begin, lines[i].end - lines[i].begin);
        out += '\n';
    }
    return out;
}

// Locate quote inside the chunk, preferring the numbered line when given.
// Returns false when the quote cannot be found verbatim.
bool map_quote(const std::string& quote, const Chunk& chunk, const Corpus& corpus, int line_no,
               uint32_t& start, uint32_t& end) {
    if (quote.empty())
        return false;
    std::string_view slice = chunk_text(chunk, corpus);
    if (line_no > 0) {
        auto lines = numbered_lines(slice);
        if (static_cast<size_t>(line_no) <= lines.size()) {
            const NumberedLine& l = lines[line_no - 1];
            size_t pos = slice.substr(l.begin, l.end - l.begin).find(quote);
            if (pos != std::string_view::npos) {
                start = chunk.char_start + static_cast<uint32_t>(l.begin + pos);
                end = start + static_cast<uint32_t>(quote.size());
                return true;
            }
        }
    }
    size_t pos = slice.find(quote);
    if (pos == std::string_view::npos)
        return false;
    start = chunk.char_start + static_cast<uint32_t>(pos);
    end = start + static_cast<uint32_t>(quote.size());
    return true;
}

uint32_t find_chunk(const std::vector<Chunk>& chunks, const std::string& document_id,
                    uint32_t offset) {
    for (uint32_t i = 0; i < chunks.size(); ++i)
        if (chunks[i].document_id == document_id && offset >= chunks[i].char_start &&
            offset < chunks[i].char_end)
            return i;
    throw DomainError("offset " + std::to_string(offset) + " outside all chunks of " +
                      document_id);
}

} // namespace

std::string screen_payload(const CandidateChunkPair& pair, const std::vector<Chunk>& chunks,
                           const Corpus& corpus, const PromptSet& prompts) {
    std::string payload = prompts.screen;
    payload += "\n\n--- PASSAGE A ---\n";
    payload += chunk_text(chunks.at(pair.target_chunk), corpus);
    payload += "\n\n--- PASSAGE B ---\n";
    payload += chunk_text(chunks.at(pair.source_chunk), corpus);
    payload += "\n";
    return payload;
}

std::optional<Verdict> screen(const CandidateChunkPair& pair, const std::vector<Chunk>& chunks,
                              const Corpus& corpus, ReviewerProvider& provider,
                              const PromptSet& prompts, QuarantineLog* quarantine) {
    std::string payload = screen_payload(pair, chunks, corpus, prompts);
    return call_parsed<Verdict>(provider, ReviewStage::Screen, payload, pair_item(pair),
                                quarantine, parse_screen_response);
}

std::vector<std::optional<Verdict>> screen_all(const std::vector<CandidateChunkPair>& pairs,
                                               const std::vector<Chunk>& chunks,
                                               const Corpus& corpus, ReviewerProvider& provider,
                                               const PromptSet& prompts, int workers,
                                               QuarantineLog* quarantine) {
    return parallel_map(pairs, workers, [&](const CandidateChunkPair& pair, size_t) {
        return screen(pair, chunks, corpus, provider, prompts, quarantine);
    });
}

std::string deep_payload(const CandidateChunkPair& pair, const Verdict& verdict,
                         const std::vector<Chunk>& chunks, const Corpus& corpus,
                         const PromptSet& prompts) {
    std::string payload = prompts.deep;
    payload += "\n\nScreening verdict: ";
    payload += verdict_name(verdict.level);
    payload += "\n\n--- NOVEL ---\n";
    payload += numbered_block(chunk_text(chunks.at(pair.target_chunk), corpus), 'M');
    payload += "\n--- SCRIPTURE ---\n";
    payload += numbered_block(chunk_text(chunks.at(pair.source_chunk), corpus), 'K');
    return payload;
}

std::vector<Finding> deep_analyze(const CandidateChunkPair& pair, const Verdict& verdict,
                                  const std::vector<Chunk>& chunks, const Corpus& corpus,
                                  const VerseIndex& verses, ReviewerProvider& provider,
                                  const PromptSet& prompts, QuarantineLog* quarantine) {
    if (verdict.level != VerdictLevel::Strong && verdict.level != VerdictLevel::Moderate)
        throw DomainError("deep analysis requires a Strong or Moderate verdict");

    const Chunk& target_chunk = chunks.at(pair.target_chunk);
    const Chunk& source_chunk = chunks.at(pair.source_chunk);
    std::string payload = deep_payload(pair, verdict, chunks, corpus, prompts);

    auto parse = [&](const std::string& raw) {
        json j = parse_json_response(raw);
        if (!j.contains("findings") || !j.at("findings").is_array())
            throw ParseError("deep response lacks findings array");
        std::vector<Finding> findings;
        for (const json& item : j.at("findings")) {
            Finding f;
            f.target_document_id = target_chunk.document_id;
            f.target_chunk = pair.target_chunk;
            f.source_chunk = pair.source_chunk;
            if (!item.contains("connection_type") || !item.contains("target_quote") ||
                !item.contains("source_quote"))
                throw ParseError("deep finding lacks a required field");
            f.connection_type =
                parse_connection_type(item.at("connection_type").get<std::string>());
            f.target_quote = item.at("target_quote").get<std::string>();
            f.source_quote = item.at("source_quote").get<std::string>();
            f.notes = item.value("notes", "");
            f.rating = verdict.level;
            f.tracks = static_cast<uint8_t>(pair.origin_track);

            if (map_quote(f.target_quote, target_chunk, corpus, item.value("target_line", 0),
                          f.target_start, f.target_end)) {
            } else {
                f.target_start = f.target_end = target_chunk.char_start;
                f.unverifiable = true;
            }
            if (map_quote(f.source_quote, source_chunk, corpus, item.value("source_line", 0),
                          f.source_start, f.source_end)) {
                f.verse_refs = verses.covering(f.source_start, f.source_end);
            } else {
                f.source_start = f.source_end = source_chunk.char_start;
                f.unverifiable = true;
            }
            findings.push_back(std::move(f));
        }
        return findings;
    };

    auto result = call_parsed<std::vector<Finding>>(provider, ReviewStage::DeepAnalysis, payload,
                                                    pair_item(pair), quarantine, parse);
    return result ? *result : std::vector<Finding>{};
}

std::vector<Finding> deep_analyze_all(const std::vector<CandidateChunkPair>& pairs,
                                      const std::vector<std::optional<Verdict>>& verdicts,
                                      const std::vector<Chunk>& chunks, const Corpus& corpus,
                                      const VerseIndex& verses, ReviewerProvider& provider,
                                      const PromptSet& prompts, int workers,
                                      QuarantineLog* quarantine) {
    if (pairs.size() != verdicts.size())
        throw DomainError("verdict list does not match pair list");
    std::vector<size_t> eligible;
    for (size_t i = 0; i < pairs.size(); ++i)
        if (verdicts[i] && (verdicts[i]->level == VerdictLevel::Strong ||
                            verdicts[i]->level == VerdictLevel::Moderate))
            eligible.push_back(i);

    auto grouped = parallel_map(eligible, workers, [&](size_t pair_index, size_t) {
        return deep_analyze(pairs[pair_index], *verdicts[pair_index], chunks, corpus, verses,
                            provider, prompts, quarantine);
    });

    std::vector<Finding> findings;
    uint32_t next_id = 1;
    for (auto& group : grouped)
        for (Finding& f : group) {
            f.id = next_id++;
            findings.push_back(std::move(f));
        }
    return findings;
}

std::string register_payload(const Chunk& chunk, const Corpus& corpus, const PromptSet& prompts) {
    std::string payload = prompts.register_scan;
    payload += "\n\n--- PASSAGE ---\n";
    payload += chunk_text(chunk, corpus);
    payload += "\n";
    return payload;
}

std::vector<RegisterFlag> register_scan(uint32_t chunk_id, const std::vector<Chunk>& chunks,
                                        const Corpus& corpus, ReviewerProvider& provider,
                                        const PromptSet& prompts, QuarantineLog* quarantine) {
    const Chunk& chunk = chunks.at(chunk_id);
    std::string payload = register_payload(chunk, corpus, prompts);
    auto parse = [&](const std::string& raw) {
        json j = parse_json_response(raw);
        if (!j.contains("flags") || !j.at("flags").is_array())
            throw ParseError("register response lacks flags array");
        std::vector<RegisterFlag> flags;
        for (const json& item : j.at("flags")) {
            RegisterFlag flag;
            flag.chunk = chunk_id;
            if (!item.contains("passage"))
                throw ParseError("register flag lacks passage");
            flag.passage = item.at("passage").get<std::string>();
            flag.category = fold(item.value("category", ""));
            if (item.contains("candidates"))
                for (const json& c : item.at("candidates"))
                    flag.candidates.push_back(c.get<std::string>());
            flags.push_back(std::move(flag));
        }
        return flags;
    };
    auto result = call_parsed<std::vector<RegisterFlag>>(
        provider, ReviewStage::RegisterScan, payload, "chunk " + std::to_string(chunk_id),
        quarantine, parse);
    return result ? *result : std::vector<RegisterFlag>{};
}

std::vector<RegisterFlag> register_scan_all(const std::vector<uint32_t>& chunk_ids,
                                            const std::vector<Chunk>& chunks, const Corpus& corpus,
                                            ReviewerProvider& provider, const PromptSet& prompts,
                                            int workers, QuarantineLog* quarantine) {
    auto grouped = parallel_map(chunk_ids, workers, [&](uint32_t chunk_id, size_t) {
        return register_scan(chunk_id, chunks, corpus, provider, prompts, quarantine);
    });
    std::vector<RegisterFlag> flags;
    for (auto& group : grouped)
        for (RegisterFlag& f : group)
            flags.push_back(std::move(f));
    return flags;
}

const char* confirm_reason_name(ConfirmReason r) {
    switch (r) {
    case ConfirmReason::Confirmed: return "Confirmed";
    case ConfirmReason::UnknownVerse: return "UnknownVerse";
    case ConfirmReason::ProviderReject: return "ProviderReject";
    case ConfirmReason::Quarantined: return "Quarantined";
    }
    throw DomainError("unknown confirm reason");
}

namespace {

// A candidate label is "Book 1:2" or, loosely, "Book 1" (first verse of the
// chapter). Returns null when the index holds no match.
const VerseRef* resolve_candidate(const VerseIndex& verses, const std::string& label) {
    if (auto parsed = parse_verse_label(label))
        if (const VerseRef* ref = verses.try_resolve(parsed->book, parsed->chapter, parsed->verse))
            return ref;
    size_t space = label.rfind(' ');
    if (space != std::string::npos && space + 1 < label.size()) {
        const std::string book = label.substr(0, space);
        const std::string tail = label.substr(space + 1);
        if (!tail.empty() && tail.find_first_not_of("0123456789") == std::string::npos)
            return verses.first_in_chapter(book, static_cast<uint32_t>(std::stoul(tail)));
    }
    return nullptr;
}

} // namespace

ConfirmOutcome confirm_verse(const RegisterFlag& flag, const VerseIndex& verses,
                             const std::vector<Chunk>& chunks, const Corpus& corpus,
                             ReviewerProvider& provider, const PromptSet& prompts,
                             QuarantineLog* quarantine) {
    const VerseRef* resolved = nullptr;
    for (const std::string& candidate : flag.candidates)
        if ((resolved = resolve_candidate(verses, candidate)))
            break;
    if (!resolved)
        return {ConfirmReason::UnknownVerse, {}, {}};

    const Document& source = corpus.source();
    std::string payload = prompts.verse_confirm;
    payload += "\n\n--- NOVEL PASSAGE ---\n";
    payload += flag.passage;
    payload += "\n\n--- CANDIDATE VERSE (" + verse_label(*resolved) + ") ---\n";
    payload += source.text.substr(resolved->char_start, resolved->char_end - resolved->char_start);
    payload += "\n";

    auto parse = [](const std::string& raw) {
        json j = parse_json_response(raw);
        if (!j.contains("decision"))
            throw ParseError("confirm response lacks decision");
        std::string decision = fold(j.at("decision").get<std::string>());
        if (decision != "confirm" && decision != "reject")
            throw ParseError("confirm decision must be confirm or reject");
        return decision == "confirm";
    };
    auto confirmed = call_parsed<bool>(provider, ReviewStage::VerseConfirm, payload,
                                       "flag chunk " + std::to_string(flag.chunk), quarantine,
                                       parse);
    if (!confirmed)
        return {ConfirmReason::Quarantined, {}, {}};
    if (!*confirmed)
        return {ConfirmReason::ProviderReject, {}, {}};

    CandidateChunkPair pair;
    pair.target_chunk = flag.chunk;
    pair.source_chunk = find_chunk(chunks, source.id, resolved->char_start);
    pair.density_score = 0.0;
    pair.origin_track = Track::Register;
    return {ConfirmReason::Confirmed, pair, *resolved};
}

std::vector<ConfirmOutcome> confirm_all(const std::vector<RegisterFlag>& flags,
                                        const VerseIndex& verses,
                                        const std::vector<Chunk>& chunks, const Corpus& corpus,
                                        ReviewerProvider& provider, const PromptSet& prompts,
                                        int workers, QuarantineLog* quarantine) {
    return parallel_map(flags, workers, [&](const RegisterFlag& flag, size_t) {
        return confirm_verse(flag, verses, chunks, corpus, provider, prompts, quarantine);
    });
}

namespace {

// Greedy paragraph-aligned partition so every part fits within max_chars.
std::vector<std::pair<uint32_t, uint32_t>> split_parts(const std::string& text,
                                                       size_t max_chars) {
    std::vector<std::pair<uint32_t, uint32_t>> parts;
    if (text.size() <= max_chars) {
        parts.push_back({0, static_cast<uint32_t>(text.size())});
        return parts;
    }
    std::vector<uint32_t> starts = paragraph_starts(text);
    starts.push_back(static_cast<uint32_t>(text.size()));
    uint32_t begin = 0;
    for (size_t i = 1; i < starts.size(); ++i) {
        bool last = i + 1 == starts.size();
        uint32_t para_end = starts[i];
        if (para_end - begin > max_chars) {
            // Close the part before this paragraph; hard-cut paragraphs that
            // alone exceed the budget.
            uint32_t prev = starts[i - 1];
            if (prev > begin) {
                parts.push_back({begin, prev});
                begin = prev;
            }
            while (para_end - begin > max_chars) {
                parts.push_back({begin, begin + static_cast<uint32_t>(max_chars)});
                begin += static_cast<uint32_t>(max_chars);
            }
        }
        if (last && para_end > begin)
            parts.push_back({begin, para_end});
    }
    return parts;
}

struct LcParsedFinding {
    std::string target_quote;
    std::string source_quote;
    std::string verse;
    std::string connection_type;
    std::string notes;
};

LcParsedFinding parse_lc_finding(const json& item) {
    LcParsedFinding f;
    if (!item.contains("target_quote") || !item.contains("source_quote"))
        throw ParseError("long-context finding lacks a quote");
    f.target_quote = item.at("target_quote").get<std::string>();
    f.source_quote = item.at("source_quote").get<std::string>();
    f.verse = item.value("verse", "");
    f.connection_type = item.value("connection_type", "verbal echo");
    f.notes = item.value("notes", "");
    return f;
}

} // namespace

LongContextResult long_context_passes(const Document& novel, const Document& source,
                                      const std::vector<Chunk>& chunks,
                                      const std::vector<Finding>& pipeline_findings,
                                      const std::vector<std::string>& hint_terms,
                                      const VerseIndex& verses, ReviewerProvider& provider,
                                      const PromptSet& prompts, uint32_t& next_finding_id,
                                      QuarantineLog* quarantine) {
    LongContextResult result;

    // Source halves split at the chunk boundary nearest the midpoint.
    uint32_t source_len = static_cast<uint32_t>(source.char_count());
    uint32_t mid = source_len / 2;
    uint32_t best_gap = source_len;
    for (const Chunk& c : chunks) {
        if (c.document_id != source.id || c.char_start == 0)
            continue;
        uint32_t gap = c.char_start > source_len / 2 ? c.char_start - source_len / 2
                                                     : source_len / 2 - c.char_start;
        if (gap < best_gap) {
            best_gap = gap;
            mid = c.char_start;
        }
    }
    std::string first_half = source.text.substr(0, mid);
    std::string second_half = source.text.substr(mid);

    // Realise one finding from a parsed response item.
    auto realize = [&](const LcParsedFinding& p) {
        Finding f;
        f.id = next_finding_id++;
        f.target_document_id = novel.id;
        f.tracks = static_cast<uint8_t>(Track::LongContext);
        f.rating = VerdictLevel::Strong;
        f.target_quote = p.target_quote;
        f.source_quote = p.source_quote;
        f.notes = p.notes;
        try {
            f.connection_type = parse_connection_type(p.connection_type);
        } catch (const ParseError&) {
            f.connection_type = ConnectionType::VerbalEcho;
        }

        size_t tpos = novel.text.find(p.target_quote);
        if (!p.target_quote.empty() && tpos != std::string::npos) {
            f.target_start = static_cast<uint32_t>(tpos);
            f.target_end = static_cast<uint32_t>(tpos + p.target_quote.size());
            f.target_chunk = find_chunk(chunks, novel.id, f.target_start);
        } else {
            f.unverifiable = true;
            f.target_chunk = find_chunk(chunks, novel.id, 0);
            f.target_start = f.target_end = chunks[f.target_chunk].char_start;
        }

        const VerseRef* verse = nullptr;
        if (auto parsed = parse_verse_label(p.verse))
            verse = verses.try_resolve(parsed->book, parsed->chapter, parsed->verse);
        size_t spos = p.source_quote.empty() ? std::string::npos
                                             : source.text.find(p.source_quote);
        if (spos != std::string::npos) {
            f.source_start = static_cast<uint32_t>(spos);
            f.source_end = static_cast<uint32_t>(spos + p.source_quote.size());
            f.source_chunk = find_chunk(chunks, source.id, f.source_start);
            f.verse_refs = verses.covering(f.source_start, f.source_end);
            if (f.verse_refs.empty() && verse)
                f.verse_refs.push_back(*verse);
        } else if (verse) {
            f.source_start = verse->char_start;
            f.source_end = verse->char_end;
            f.source_chunk = find_chunk(chunks, source.id, f.source_start);
            f.verse_refs.push_back(*verse);
            f.unverifiable = true;
        } else {
            f.unverifiable = true;
            f.source_chunk = find_chunk(chunks, source.id, 0);
            f.source_start = f.source_end = chunks[f.source_chunk].char_start;
        }
        return f;
    };

    auto parse_findings = [&](const std::string& raw) {
        json j = parse_json_response(raw);
        if (!j.contains("findings") || !j.at("findings").is_array())
            throw ParseError("long-context response lacks findings array");
        std::vector<LcParsedFinding> parsed;
        for (const json& item : j.at("findings"))
            parsed.push_back(parse_lc_finding(item));
        return parsed;
    };

    // Passes (a) and (b): novel against each source half. Pass (c): novel
    // with hint terms. Oversized novels are split per part.
    struct ReadPass {
        const char* label;
        const std::string* prompt;
        const std::string* scripture; // null for the hint pass
    };
    std::string hint_list;
    for (size_t i = 0; i < hint_terms.size(); ++i) {
        if (i)
            hint_list += ", ";
        hint_list += hint_terms[i];
    }
    std::vector<ReadPass> passes = {
        {"scripture part 1", &prompts.longcontext_read, &first_half},
        {"scripture part 2", &prompts.longcontext_read, &second_half},
        {"hint-guided", &prompts.longcontext_hints, nullptr},
    };

    for (const ReadPass& pass : passes) {
        size_t overhead = pass.prompt->size() + 256 +
                          (pass.scripture ? pass.scripture->size() : hint_list.size());
        size_t budget = provider.context_budget();
        size_t room = budget > overhead ? budget - overhead : 1;
        auto parts = split_parts(novel.text, room);
        for (size_t part = 0; part < parts.size(); ++part) {
            std::string payload = *pass.prompt;
            payload += "\n\n[";
            payload += pass.label;
            payload += "; novel part " + std::to_string(part + 1) + " of " +
                       std::to_string(parts.size()) + "]";
            if (!pass.scripture)
                payload += "\nHint terms: " + hint_list;
            payload += "\n\n--- NOVEL: " + novel.title + " ---\n";
            payload += novel.text.substr(parts[part].first,
                                         parts[part].second - parts[part].first);
            if (pass.scripture) {
                payload += "\n\n--- SCRIPTURE ---\n";
                payload += *pass.scripture;
            }
            payload += "\n";
            auto parsed = call_parsed<std::vector<LcParsedFinding>>(
                provider, ReviewStage::LongContext, payload,
                std::string(pass.label) + " part " + std::to_string(part + 1), quarantine,
                parse_findings);
            if (parsed)
                for (const LcParsedFinding& p : *parsed)
                    result.findings.push_back(realize(p));
        }
    }

    // Pass (d): critique of the existing findings for this novel.
    {
        std::string listing;
        for (const Finding& f : pipeline_findings) {
            std::string verse_labels;
            for (const VerseRef& r : f.verse_refs) {
                if (!verse_labels.empty())
                    verse_labels += "; ";
                verse_labels += verse_label(r);
            }
            listing += "F" + std::to_string(f.id) + " | " + f.target_quote + " | " +
                       f.source_quote + " | " + verse_labels + "\n";
        }
        size_t overhead = prompts.longcontext_critique.size() + 256 + listing.size();
        size_t budget = provider.context_budget();
        size_t room = budget > overhead ? budget - overhead : 1;
        auto parts = split_parts(novel.text, room);
        for (size_t part = 0; part < parts.size(); ++part) {
            std::string payload = prompts.longcontext_critique;
            payload += "\n\n[critique; novel part " + std::to_string(part + 1) + " of " +
                       std::to_string(parts.size()) + "]";
            payload += "\n\n--- FINDINGS ---\n";
            payload += listing;
            payload += "\n--- NOVEL: " + novel.title + " ---\n";
            payload += novel.text.substr(parts[part].first,
                                         parts[part].second - parts[part].first);
            payload += "\n";

            auto parse_edits = [&](const std::string& raw) {
                json j = parse_json_response(raw);
                if (!j.contains("edits") || !j.at("edits").is_array())
                    throw ParseError("critique response lacks edits array");
                std::vector<std::pair<std::string, json>> edits;
                for (const json& item : j.at("edits")) {
                    if (!item.contains("action"))
                        throw ParseError("critique edit lacks action");
                    std::string action = fold(item.at("action").get<std::string>());
                    if (action != "keep" && action != "drop" && action != "add")
                        throw ParseError("critique action must be keep, drop, or add");
                    if (action != "add" && !item.contains("finding_id"))
                        throw ParseError("critique edit lacks finding_id");
                    edits.push_back({action, item});
                }
                return edits;
            };
            auto edits = call_parsed<std::vector<std::pair<std::string, json>>>(
                provider, ReviewStage::LongContext, payload,
                "critique part " + std::to_string(part + 1), quarantine, parse_edits);
            if (!edits)
                continue;
            for (const auto& [action, item] : *edits) {
                if (action == "drop")
                    result.disputed_ids.push_back(item.at("finding_id").get<uint32_t>());
                else if (action == "add") {
                    if (!item.contains("finding"))
                        continue;
                    try {
                        result.findings.push_back(realize(parse_lc_finding(item.at("finding"))));
                    } catch (const ParseError&) {
                        // A malformed added finding invalidates only itself.
                    }
                }
            }
        }
    }

    return result;
}

} // namespace intertext
