#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "toolgraph/errors.hpp"

namespace toolgraph {

using EmbeddingVector = std::vector<double>;

// cos(a,b) = dot/(|a||b|); zero-norm input yields 0 so prior construction
// stays total.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::dimension_mismatch,
                    "vectors of dim " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Text embedding source. Implementations must emit vectors of one fixed
// dimension; the bundled stub is pure, so identical text gives identical
// vectors on every platform.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
    virtual size_t dim() = 0;
};

namespace detail {

inline uint64_t fnv1a_64(std::string_view token) {
    uint64_t hash = 14695981039346656037ull;
    for (unsigned char byte : token) {
        hash ^= byte;
        hash *= 1099511628211ull;
    }
    return hash;
}

} // namespace detail

// Deterministic local embedding: hashed bag of words over 256 buckets.
// Lowercase, split on non-alphanumerics, bucket by 64-bit FNV-1a mod 256,
// L2-normalize (all-zero input stays all-zero).
inline EmbeddingVector stub_embed(std::string_view text) {
    EmbeddingVector vec(256, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        vec[detail::fnv1a_64(token) % 256] += 1.0;
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else
            flush();
    }
    flush();

    double norm_sq = 0.0;
    for (double v : vec) norm_sq += v * v;
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : vec) v *= inv;
    }
    return vec;
}

class StubEmbeddingProvider final : public EmbeddingProvider {
public:
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const std::string& text : texts) out.push_back(stub_embed(text));
        return out;
    }

    size_t dim() override { return 256; }
};

} // namespace toolgraph
