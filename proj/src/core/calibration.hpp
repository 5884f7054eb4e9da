#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/catalogue.hpp"
#include "core/corpus.hpp"
#include "core/review.hpp"

namespace intertext {

// --- Beta-binomial sensitivity model ---

// Conjugate posterior over one connection type's detection sensitivity.
struct StratumPosterior {
    ConnectionType stratum = ConnectionType::VerbalEcho;
    double prior_a = 1.0;
    double prior_b = 1.0;
    int recovered = 0; // k: attested connections the pipeline found
    int attested = 0;  // n: attested connections in the record
    double posterior_a = 1.0;
    double posterior_b = 1.0;

    double mean() const { return posterior_a / (posterior_a + posterior_b); }
    double variance() const;
};

// Beta(prior_a, prior_b) updated with k successes in n trials.
StratumPosterior fit_sensitivity(ConnectionType stratum, int k, int n,
                                 double prior_a = 1.0, double prior_b = 1.0);

// One posterior per summary row, k = attested - missed, n = attested.
std::vector<StratumPosterior> fit_by_type(const std::vector<TypeSummary>& types,
                                          double prior_a = 1.0, double prior_b = 1.0);

// --- Measurement-adjusted counts ---

struct AdjustedCount {
    double median = 0.0;
    double lo = 0.0; // central 90% interval
    double hi = 0.0;
};

// Monte Carlo distribution of observed / s with s drawn from the posterior.
// Fixed seed gives a bit-reproducible result.
AdjustedCount adjusted_count(int observed, const StratumPosterior& posterior,
                             int samples, uint64_t seed);

// --- Adaptive calibration levers ---

struct Lever {
    std::string name;
    double cost = 1.0; // relative effort per additional labelled observation
};

struct LeverRank {
    ConnectionType stratum = ConnectionType::VerbalEcho;
    std::string lever;
    double gain = 0.0; // expected variance reduction per unit cost
};

// Expected posterior-variance reduction from one more labelled observation,
// divided by lever cost. Descending; ties break on stratum label then lever.
std::vector<LeverRank> rank_levers(const std::vector<StratumPosterior>& posteriors,
                                   const std::vector<Lever>& levers);

// --- Contamination probe ---

enum class ProbeCategory : uint8_t { Attested, Unattested, Synthetic, Null };

const char* probe_category_name(ProbeCategory c);
ProbeCategory parse_probe_category(const std::string& name);

struct ProbeItem {
    std::string id;
    ProbeCategory category = ProbeCategory::Null;
    std::vector<VerseRef> expected_sources; // empty for Null items
    std::string passage;
};

// id|category|expected_sources|passage, expected sources ";"-joined labels.
std::vector<ProbeItem> load_probe_items(const std::string& path);
void save_probe_items(const std::string& path, const std::vector<ProbeItem>& items);

enum class ProbeResult : uint8_t {
    Hit,
    HedgedHit,
    PartialMiss,
    Miss,
    CorrectNull,
    FalsePositive,
    HedgedFalsePositive,
    Unscorable, // response could not be obtained or judged
};

const char* probe_result_name(ProbeResult r);
ProbeResult parse_probe_result(const std::string& name);
double probe_score(ProbeResult r);

struct ProbeOutcome {
    std::string item_id;
    std::string model_id;
    ProbeResult result = ProbeResult::Miss;
    double score = 0.0;
};

// item_id|model_id|result, one row per line; score recomputed on load.
std::vector<ProbeOutcome> load_probe_outcomes(const std::string& path);
void save_probe_outcomes(const std::string& path,
                         const std::vector<ProbeOutcome>& outcomes);

// Judge a free-text response against one item. A source counts as named when
// the response cites its book at the expected chapter; hedge markers turn a
// hit into a hedged hit. A verse claim on a null item is a false positive.
ProbeResult judge_probe_response(const ProbeItem& item, const std::string& response);

// Ask the provider about every item under the neutral probe prompt.
std::vector<ProbeOutcome> run_probe(const std::vector<ProbeItem>& items,
                                    ReviewerProvider& provider,
                                    const PromptSet& prompts);

struct ProbeModelScore {
    std::string model_id;
    double attested = 0.0;
    double unattested = 0.0;
    double synthetic = 0.0;
    int synthetic_total = 0;
    int null_false_positives = 0;
    int null_hedged_false_positives = 0;
    int unscorable = 0;
};

// Per-model aggregates in first-appearance order of the model ids.
std::vector<ProbeModelScore> score_probe(const std::vector<ProbeOutcome>& outcomes,
                                         const std::vector<ProbeItem>& items);

// Plain-text aggregate table (model, category scores, null false positives).
std::string render_probe_table(const std::vector<ProbeModelScore>& scores);

} // namespace intertext
