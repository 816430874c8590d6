#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "toolgraph/embedding.hpp"
#include "toolgraph/errors.hpp"

namespace toolgraph {

struct RemoteEndpoint {
    std::string url;          // e.g. http://127.0.0.1:8089/v1/embeddings
    std::string model;
    std::string api_key_env;  // name of the env var holding the bearer token
    int timeout_ms = 30000;
    int retries = 2;          // extra attempts after the first
};

namespace detail {

struct SplitUrl {
    std::string host_part; // scheme://host:port
    std::string path;
};

inline SplitUrl split_url(const std::string& url) {
    size_t scheme = url.find("://");
    if (scheme == std::string::npos)
        throw Error(ErrorCode::invalid_config, "endpoint url lacks a scheme: " + url);
    size_t path_start = url.find('/', scheme + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace detail

// Web-API embedding client. POSTs {"input": [...], "model": ...} and expects
// {"data": [{"embedding": [...]}...]} in input order. Transport failures and
// 5xx responses are retried; other non-success statuses are not.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteEndpoint endpoint)
        : endpoint_(std::move(endpoint)) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        if (texts.empty()) return {};
        nlohmann::json request = {{"input", texts}, {"model", endpoint_.model}};
        const std::string body = request.dump();

        const auto [host, path] = detail::split_url(endpoint_.url);
        httplib::Client client(host);
        client.set_connection_timeout(std::chrono::milliseconds(endpoint_.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(endpoint_.timeout_ms));
        httplib::Headers headers;
        if (!endpoint_.api_key_env.empty()) {
            const char* key = std::getenv(endpoint_.api_key_env.c_str());
            if (key != nullptr && *key != '\0')
                headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        std::string last_failure;
        for (int attempt = 0; attempt <= endpoint_.retries; ++attempt) {
            httplib::Result res = client.Post(path, headers, body, "application/json");
            if (!res) {
                last_failure = "transport: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_failure = "status " + std::to_string(res->status) + ": " + res->body;
                continue;
            }
            if (res->status < 200 || res->status >= 300)
                throw Error(ErrorCode::provider_error,
                            "status " + std::to_string(res->status) + ": " + res->body);
            return parse_vectors(res->body, texts.size());
        }
        if (last_failure.rfind("transport:", 0) == 0)
            throw Error(ErrorCode::transport_error, last_failure);
        throw Error(ErrorCode::provider_error, last_failure);
    }

    size_t dim() override {
        if (dim_ == 0) {
            auto vectors = embed({"dimension probe"});
            dim_ = vectors.front().size();
        }
        return dim_;
    }

private:
    std::vector<EmbeddingVector> parse_vectors(const std::string& body, size_t expected) {
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::provider_error, std::string("unparseable body: ") + e.what());
        }
        if (!parsed.is_object() || !parsed.contains("data") || !parsed["data"].is_array())
            throw Error(ErrorCode::provider_error, "response lacks a data array");
        if (parsed["data"].size() != expected)
            throw Error(ErrorCode::shape_error,
                        std::to_string(parsed["data"].size()) + " vectors for " +
                            std::to_string(expected) + " inputs");
        std::vector<EmbeddingVector> vectors;
        for (const auto& item : parsed["data"]) {
            if (!item.is_object() || !item.contains("embedding") || !item["embedding"].is_array())
                throw Error(ErrorCode::provider_error, "data entry lacks an embedding array");
            vectors.push_back(item["embedding"].get<EmbeddingVector>());
        }
        for (const auto& v : vectors) {
            if (v.empty() || v.size() != vectors.front().size())
                throw Error(ErrorCode::shape_error, "embedding dims differ within one response");
        }
        if (dim_ != 0 && vectors.front().size() != dim_)
            throw Error(ErrorCode::shape_error, "embedding dim changed between responses");
        if (dim_ == 0) dim_ = vectors.front().size();
        return vectors;
    }

    RemoteEndpoint endpoint_;
    size_t dim_ = 0;
};

} // namespace toolgraph
