#include "core/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <regex>

#include "core/errors.hpp"
#include "core/text.hpp"

namespace intertext {

// --- Beta-binomial sensitivity model ---

double StratumPosterior::variance() const {
    double s = posterior_a + posterior_b;
    return posterior_a * posterior_b / (s * s * (s + 1.0));
}

StratumPosterior fit_sensitivity(ConnectionType stratum, int k, int n,
                                 double prior_a, double prior_b) {
    if (prior_a <= 0.0 || prior_b <= 0.0)
        throw DomainError("prior parameters must be positive");
    if (k < 0 || n < 0)
        throw DomainError("calibration counts must be non-negative");
    if (k > n)
        throw DomainError("recovered count exceeds attested count");
    StratumPosterior p;
    p.stratum = stratum;
    p.prior_a = prior_a;
    p.prior_b = prior_b;
    p.recovered = k;
    p.attested = n;
    p.posterior_a = prior_a + k;
    p.posterior_b = prior_b + (n - k);
    return p;
}

std::vector<StratumPosterior> fit_by_type(const std::vector<TypeSummary>& types,
                                          double prior_a, double prior_b) {
    std::vector<StratumPosterior> out;
    out.reserve(types.size());
    for (const TypeSummary& t : types)
        out.push_back(fit_sensitivity(t.type, t.attested - t.missed, t.attested,
                                      prior_a, prior_b));
    return out;
}

// --- Measurement-adjusted counts ---

namespace {

double next_uniform(std::mt19937_64& gen) {
    // 53 uniform bits in [0, 1).
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

double next_normal(std::mt19937_64& gen) {
    double u1 = next_uniform(gen);
    while (u1 <= 0.0)
        u1 = next_uniform(gen);
    double u2 = next_uniform(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Marsaglia-Tsang squeeze for shape >= 1, boosted for shape < 1.
double next_gamma(std::mt19937_64& gen, double shape) {
    if (shape < 1.0) {
        double u = next_uniform(gen);
        while (u <= 0.0)
            u = next_uniform(gen);
        return next_gamma(gen, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = next_normal(gen);
        double t = 1.0 + c * x;
        if (t <= 0.0)
            continue;
        double v = t * t * t;
        double u = next_uniform(gen);
        if (u < 1.0 - 0.0331 * x * x * x * x)
            return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
            return d * v;
    }
}

double next_beta(std::mt19937_64& gen, double a, double b) {
    double x = next_gamma(gen, a);
    double y = next_gamma(gen, b);
    return x / (x + y);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    double pos = q * static_cast<double>(sorted.size() - 1);
    size_t idx = static_cast<size_t>(std::llround(pos));
    return sorted[std::min(idx, sorted.size() - 1)];
}

} // namespace

AdjustedCount adjusted_count(int observed, const StratumPosterior& posterior,
                             int samples, uint64_t seed) {
    if (observed < 0)
        throw DomainError("observed count must be non-negative");
    if (samples < 1000)
        throw DomainError("need at least 1000 samples");
    if (observed == 0)
        return {0.0, 0.0, 0.0};
    std::mt19937_64 gen(seed);
    std::vector<double> draws;
    draws.reserve(static_cast<size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        double s = next_beta(gen, posterior.posterior_a, posterior.posterior_b);
        while (s <= 0.0)
            s = next_beta(gen, posterior.posterior_a, posterior.posterior_b);
        draws.push_back(static_cast<double>(observed) / s);
    }
    std::sort(draws.begin(), draws.end());
    AdjustedCount out;
    size_t m = draws.size();
    out.median = (m % 2 == 1) ? draws[m / 2]
                              : 0.5 * (draws[m / 2 - 1] + draws[m / 2]);
    out.lo = quantile_sorted(draws, 0.05);
    out.hi = quantile_sorted(draws, 0.95);
    return out;
}

// --- Adaptive calibration levers ---

std::vector<LeverRank> rank_levers(const std::vector<StratumPosterior>& posteriors,
                                   const std::vector<Lever>& levers) {
    if (posteriors.empty())
        throw DomainError("need at least one stratum");
    for (const Lever& lever : levers)
        if (lever.cost <= 0.0)
            throw DomainError("lever cost must be positive: " + lever.name);
    std::vector<LeverRank> out;
    out.reserve(posteriors.size() * levers.size());
    for (const StratumPosterior& p : posteriors) {
        double a = p.posterior_a;
        double b = p.posterior_b;
        double s = a + b;
        // Preposterior variance reduction from one more Bernoulli observation.
        double reduction = a * b / (s * s * (s + 1.0) * (s + 1.0));
        for (const Lever& lever : levers)
            out.push_back({p.stratum, lever.name, reduction / lever.cost});
    }
    std::sort(out.begin(), out.end(), [](const LeverRank& x, const LeverRank& y) {
        if (x.gain != y.gain)
            return x.gain > y.gain;
        int cmp = std::string(connection_type_label(x.stratum))
                      .compare(connection_type_label(y.stratum));
        if (cmp != 0)
            return cmp < 0;
        return x.lever < y.lever;
    });
    return out;
}

// --- Contamination probe ---

const char* probe_category_name(ProbeCategory c) {
    switch (c) {
    case ProbeCategory::Attested: return "Attested";
    case ProbeCategory::Unattested: return "Unattested";
    case ProbeCategory::Synthetic: return "Synthetic";
    case ProbeCategory::Null: return "Null";
    }
    return "Null";
}

ProbeCategory parse_probe_category(const std::string& name) {
    if (name == "Attested") return ProbeCategory::Attested;
    if (name == "Unattested") return ProbeCategory::Unattested;
    if (name == "Synthetic") return ProbeCategory::Synthetic;
    if (name == "Null") return ProbeCategory::Null;
    throw IngestError("unknown probe category: " + name);
}

const char* probe_result_name(ProbeResult r) {
    switch (r) {
    case ProbeResult::Hit: return "Hit";
    case ProbeResult::HedgedHit: return "HedgedHit";
    case ProbeResult::PartialMiss: return "PartialMiss";
    case ProbeResult::Miss: return "Miss";
    case ProbeResult::CorrectNull: return "CorrectNull";
    case ProbeResult::FalsePositive: return "FalsePositive";
    case ProbeResult::HedgedFalsePositive: return "HedgedFalsePositive";
    case ProbeResult::Unscorable: return "Unscorable";
    }
    return "Miss";
}

ProbeResult parse_probe_result(const std::string& name) {
    if (name == "Hit") return ProbeResult::Hit;
    if (name == "HedgedHit") return ProbeResult::HedgedHit;
    if (name == "PartialMiss") return ProbeResult::PartialMiss;
    if (name == "Miss") return ProbeResult::Miss;
    if (name == "CorrectNull") return ProbeResult::CorrectNull;
    if (name == "FalsePositive") return ProbeResult::FalsePositive;
    if (name == "HedgedFalsePositive") return ProbeResult::HedgedFalsePositive;
    if (name == "Unscorable") return ProbeResult::Unscorable;
    throw IngestError("unknown probe result: " + name);
}

double probe_score(ProbeResult r) {
    if (r == ProbeResult::Hit)
        return 1.0;
    if (r == ProbeResult::HedgedHit)
        return 0.5;
    return 0.0;
}

std::vector<ProbeItem> load_probe_items(const std::string& path) {
    std::vector<ProbeItem> items;
    for (const std::string& line : read_lines(path)) {
        if (line.empty() || line[0] == '#')
            continue;
        auto fields = psv_split(line);
        if (fields.size() != 4)
            throw IngestError("probe item needs 4 fields: " + line);
        ProbeItem item;
        item.id = fields[0];
        item.category = parse_probe_category(fields[1]);
        for (const std::string& label : split(fields[2], ';')) {
            std::string name = trim(label);
            if (name.empty())
                continue;
            auto ref = parse_verse_label(name);
            if (!ref)
                throw IngestError("bad verse label in probe item: " + name);
            item.expected_sources.push_back(*ref);
        }
        item.passage = fields[3];
        if (item.category == ProbeCategory::Null && !item.expected_sources.empty())
            throw IngestError("null probe item carries expected sources: " + item.id);
        if (item.category == ProbeCategory::Synthetic && item.expected_sources.empty())
            throw IngestError("synthetic probe item lacks planted sources: " + item.id);
        items.push_back(std::move(item));
    }
    return items;
}

void save_probe_items(const std::string& path, const std::vector<ProbeItem>& items) {
    std::string out;
    for (const ProbeItem& item : items) {
        std::string labels;
        for (size_t i = 0; i < item.expected_sources.size(); ++i) {
            if (i)
                labels += "; ";
            labels += verse_label(item.expected_sources[i]);
        }
        out += psv_join({item.id, probe_category_name(item.category), labels,
                         item.passage});
        out += "\n";
    }
    write_file(path, out);
}

std::vector<ProbeOutcome> load_probe_outcomes(const std::string& path) {
    std::vector<ProbeOutcome> out;
    for (const std::string& line : read_lines(path)) {
        if (line.empty() || line[0] == '#')
            continue;
        auto fields = psv_split(line);
        if (fields.size() != 3)
            throw IngestError("probe outcome needs 3 fields: " + line);
        ProbeOutcome o;
        o.item_id = fields[0];
        o.model_id = fields[1];
        o.result = parse_probe_result(fields[2]);
        o.score = probe_score(o.result);
        out.push_back(std::move(o));
    }
    return out;
}

void save_probe_outcomes(const std::string& path,
                         const std::vector<ProbeOutcome>& outcomes) {
    std::string out;
    for (const ProbeOutcome& o : outcomes) {
        out += psv_join({o.item_id, o.model_id, probe_result_name(o.result)});
        out += "\n";
    }
    write_file(path, out);
}

namespace {

const char* kHedgeMarkers[] = {"uncertain", "possible", "no definite", "may echo"};

bool response_is_hedged(const std::string& folded) {
    for (const char* marker : kHedgeMarkers)
        if (folded.find(marker) != std::string::npos)
            return true;
    return false;
}

struct VerseClaim {
    std::string book; // includes a numbered prefix when present
    uint32_t chapter = 0;
};

std::vector<VerseClaim> extract_claims(const std::string& response) {
    static const std::regex pattern(R"((?:([0-9])[ ])?([A-Z][a-z]+) ([0-9]+):[0-9]+)");
    std::vector<VerseClaim> claims;
    auto begin = std::sregex_iterator(response.begin(), response.end(), pattern);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        VerseClaim claim;
        claim.book = (*it)[1].matched ? (*it)[1].str() + " " + (*it)[2].str()
                                      : (*it)[2].str();
        claim.chapter = static_cast<uint32_t>(std::stoul((*it)[3].str()));
        claims.push_back(std::move(claim));
    }
    return claims;
}

bool books_match(const std::string& claim_book, const std::string& expected_book) {
    std::string c = fold(claim_book);
    std::string e = fold(expected_book);
    if (c == e)
        return true;
    // Accept a citation that drops the numbered prefix of the book name.
    return e.size() > c.size() && e.compare(e.size() - c.size(), c.size(), c) == 0
           && e[e.size() - c.size() - 1] == ' ';
}

} // namespace

ProbeResult judge_probe_response(const ProbeItem& item, const std::string& response) {
    bool hedged = response_is_hedged(fold(response));
    auto claims = extract_claims(response);
    if (item.category == ProbeCategory::Null) {
        if (claims.empty())
            return ProbeResult::CorrectNull;
        return hedged ? ProbeResult::HedgedFalsePositive : ProbeResult::FalsePositive;
    }
    bool partial = false;
    for (const VerseRef& expected : item.expected_sources) {
        for (const VerseClaim& claim : claims) {
            if (!books_match(claim.book, expected.book))
                continue;
            if (claim.chapter == expected.chapter)
                return hedged ? ProbeResult::HedgedHit : ProbeResult::Hit;
            partial = true;
        }
    }
    return partial ? ProbeResult::PartialMiss : ProbeResult::Miss;
}

std::vector<ProbeOutcome> run_probe(const std::vector<ProbeItem>& items,
                                    ReviewerProvider& provider,
                                    const PromptSet& prompts) {
    std::vector<ProbeOutcome> outcomes;
    outcomes.reserve(items.size());
    for (const ProbeItem& item : items) {
        ProbeOutcome o;
        o.item_id = item.id;
        o.model_id = provider.model_id(ReviewStage::Probe);
        std::string payload = prompts.probe + "\n\n--- PASSAGE ---\n" + item.passage;
        try {
            std::string response = provider.call(ReviewStage::Probe, payload);
            o.result = judge_probe_response(item, response);
        } catch (const ParseError&) {
            o.result = ProbeResult::Unscorable;
        }
        o.score = probe_score(o.result);
        outcomes.push_back(std::move(o));
    }
    return outcomes;
}

std::vector<ProbeModelScore> score_probe(const std::vector<ProbeOutcome>& outcomes,
                                         const std::vector<ProbeItem>& items) {
    std::map<std::string, ProbeCategory> categories;
    for (const ProbeItem& item : items)
        categories[item.id] = item.category;
    std::vector<ProbeModelScore> scores;
    auto model_row = [&scores](const std::string& model_id) -> ProbeModelScore& {
        for (ProbeModelScore& s : scores)
            if (s.model_id == model_id)
                return s;
        scores.push_back({});
        scores.back().model_id = model_id;
        return scores.back();
    };
    for (const ProbeOutcome& o : outcomes) {
        auto it = categories.find(o.item_id);
        if (it == categories.end())
            throw DomainError("outcome for unknown probe item: " + o.item_id);
        ProbeModelScore& row = model_row(o.model_id);
        if (o.result == ProbeResult::Unscorable) {
            row.unscorable += 1;
            continue;
        }
        switch (it->second) {
        case ProbeCategory::Attested:
            row.attested += probe_score(o.result);
            break;
        case ProbeCategory::Unattested:
            row.unattested += probe_score(o.result);
            break;
        case ProbeCategory::Synthetic:
            row.synthetic += probe_score(o.result);
            row.synthetic_total += 1;
            break;
        case ProbeCategory::Null:
            if (o.result == ProbeResult::FalsePositive)
                row.null_false_positives += 1;
            else if (o.result == ProbeResult::HedgedFalsePositive)
                row.null_hedged_false_positives += 1;
            break;
        }
    }
    return scores;
}

std::string render_probe_table(const std::vector<ProbeModelScore>& scores) {
    std::string out = "Model | Attested | Unattested | Synthetic | Null FPs\n";
    for (const ProbeModelScore& s : scores) {
        std::string null_cell;
        if (s.null_false_positives == 0 && s.null_hedged_false_positives > 0)
            null_cell = std::to_string(s.null_hedged_false_positives) + " (hedged)";
        else if (s.null_hedged_false_positives > 0)
            null_cell = std::to_string(s.null_false_positives) + " (+"
                        + std::to_string(s.null_hedged_false_positives) + " hedged)";
        else
            null_cell = std::to_string(s.null_false_positives);
        out += s.model_id + " | " + format_double(s.attested) + " | "
               + format_double(s.unattested) + " | " + format_double(s.synthetic)
               + "/" + std::to_string(s.synthetic_total) + " | " + null_cell;
        if (s.unscorable > 0)
            out += " | unscorable: " + std::to_string(s.unscorable);
        out += "\n";
    }
    return out;
}

} // namespace intertext
