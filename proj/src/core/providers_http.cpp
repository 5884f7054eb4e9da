#include "core/providers_http.hpp"

#include <cstdlib>
#include <utility>

#include "httplib.h"
#include "json.hpp"

#include "core/errors.hpp"
#include "core/text.hpp"

namespace intertext {

namespace {

// "http://host:port/prefix" -> {"http://host:port", "/prefix"}.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    if (endpoint.empty())
        throw ConfigError("endpoint not set for http provider");
    if (starts_with(endpoint, "https://"))
        throw ConfigError("https endpoints are not supported; front the service "
                          "with a plain-http proxy: " + endpoint);
    if (!starts_with(endpoint, "http://"))
        throw ConfigError("endpoint must start with http://: " + endpoint);
    size_t slash = endpoint.find('/', 7);
    if (slash == std::string::npos)
        return {endpoint, ""};
    std::string prefix = endpoint.substr(slash);
    while (!prefix.empty() && prefix.back() == '/')
        prefix.pop_back();
    return {endpoint.substr(0, slash), prefix};
}

std::string bearer_from_env(const std::string& env_name) {
    if (env_name.empty())
        return "";
    const char* value = std::getenv(env_name.c_str());
    return value ? value : "";
}

nlohmann::json post_json(const std::string& endpoint, const std::string& route,
                         const std::string& bearer, const nlohmann::json& body) {
    auto [base, prefix] = split_endpoint(endpoint);
    httplib::Client client(base);
    client.set_connection_timeout(15, 0);
    client.set_read_timeout(300, 0);
    httplib::Headers headers;
    if (!bearer.empty())
        headers.emplace("Authorization", "Bearer " + bearer);
    auto res = client.Post(prefix + route, headers, body.dump(), "application/json");
    if (!res)
        throw ProviderError("request to " + endpoint + route + " failed: " +
                            httplib::to_string(res.error()));
    if (res->status != 200)
        throw ProviderError("request to " + endpoint + route + " returned status " +
                            std::to_string(res->status) + ": " + res->body);
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError("malformed response from " + endpoint + route + ": " + e.what());
    }
}

} // namespace

HttpEmbeddingProvider::HttpEmbeddingProvider(const RunConfig& config)
    : endpoint_(config.embed_endpoint),
      semantic_model_(config.embed_semantic_model),
      contextual_model_(config.embed_contextual_model),
      bearer_(bearer_from_env(config.embed_api_key_env)),
      dimension_(config.embed_dimension) {
    split_endpoint(endpoint_); // validate eagerly
    id_ = semantic_model_ + "+" + contextual_model_;
}

std::vector<std::vector<float>> HttpEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts, EmbedRole role) {
    nlohmann::json body;
    body["model"] = role == EmbedRole::Semantic ? semantic_model_ : contextual_model_;
    body["role"] = embed_role_name(role);
    body["texts"] = texts;
    nlohmann::json reply = post_json(endpoint_, "/embed", bearer_, body);
    try {
        auto vectors = reply.at("vectors").get<std::vector<std::vector<float>>>();
        if (vectors.size() != texts.size())
            throw ProviderError("embed endpoint returned " + std::to_string(vectors.size()) +
                                " vectors for " + std::to_string(texts.size()) + " texts");
        for (const auto& v : vectors)
            if (static_cast<int>(v.size()) != dimension_)
                throw ProviderError("embed endpoint returned a vector of dimension " +
                                    std::to_string(v.size()) + ", expected " +
                                    std::to_string(dimension_));
        return vectors;
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("malformed embed response: ") + e.what());
    }
}

HttpReviewerProvider::HttpReviewerProvider(const RunConfig& config)
    : endpoint_(config.review_endpoint),
      bearer_(bearer_from_env(config.review_api_key_env)),
      budget_(static_cast<size_t>(config.review_context_budget)) {
    split_endpoint(endpoint_); // validate eagerly
    models_ = {config.screen_model,      config.deep_model,  config.register_model,
               config.confirm_model,     config.longcontext_model,
               config.probe_model};
    id_ = "http";
}

std::string HttpReviewerProvider::model_id(ReviewStage stage) const {
    return models_.at(static_cast<size_t>(stage));
}

std::string HttpReviewerProvider::call(ReviewStage stage, const std::string& payload) {
    nlohmann::json body;
    body["stage"] = stage_name(stage);
    body["model"] = model_id(stage);
    body["payload"] = payload;
    nlohmann::json reply = post_json(endpoint_, "/review", bearer_, body);
    try {
        return reply.at("response").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("malformed review response: ") + e.what());
    }
}

} // namespace intertext
