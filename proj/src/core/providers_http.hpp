#pragma once

#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/embedding.hpp"
#include "core/review.hpp"

namespace intertext {

// Embedding service client. POSTs {"model", "role", "texts"} to
// {endpoint}/embed and expects {"vectors": [[...], ...]}, one vector per
// input text. Transport failures, non-200 statuses, and malformed bodies
// raise ProviderError.
class HttpEmbeddingProvider : public EmbeddingProvider {
  public:
    explicit HttpEmbeddingProvider(const RunConfig& config);

    std::string id() const override { return id_; }
    int dimension() const override { return dimension_; }
    std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts,
                                                EmbedRole role) override;

  private:
    std::string id_;
    std::string endpoint_;
    std::string semantic_model_;
    std::string contextual_model_;
    std::string bearer_;
    int dimension_;
};

// Reviewer service client. POSTs {"stage", "model", "payload"} to
// {endpoint}/review and expects {"response": "..."}. One model per stage,
// taken from the run configuration.
class HttpReviewerProvider : public ReviewerProvider {
  public:
    explicit HttpReviewerProvider(const RunConfig& config);

    std::string id() const override { return id_; }
    std::string model_id(ReviewStage stage) const override;
    std::string call(ReviewStage stage, const std::string& payload) override;
    size_t context_budget() const override { return budget_; }

  private:
    std::string id_;
    std::string endpoint_;
    std::string bearer_;
    std::vector<std::string> models_; // indexed by ReviewStage
    size_t budget_;
};

} // namespace intertext
