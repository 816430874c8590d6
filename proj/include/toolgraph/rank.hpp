#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "toolgraph/embedding.hpp"
#include "toolgraph/errors.hpp"
#include "toolgraph/graph.hpp"

namespace toolgraph {

inline constexpr double kDefaultDamping = 0.4;
inline constexpr double kSimilarityFloor = 1e-9;
inline constexpr double kSteadyStateTolerance = 1e-9;

// Everything the ranking solve produced, kept together so callers can
// inspect the intermediate quantities.
struct RankDistribution {
    std::vector<NodeId> ordering; // fixes matrix/vector indices
    Eigen::VectorXd prior;        // p0, entries >= 0, sums to 1
    Eigen::MatrixXd transition;   // column-stochastic
    Eigen::VectorXd steady;       // fixed point of the damped walk
    double damping = kDefaultDamping;
};

struct RetrievedTool {
    NodeId id = kNoNode;
    double score = 0.0;
};

// Clamp raw similarities below at a small positive floor, then normalize to
// a probability vector. Negative cosines would break the probabilistic
// reading of the prior.
inline Eigen::VectorXd prior_from_similarities(const std::vector<double>& similarities) {
    if (similarities.empty())
        throw Error(ErrorCode::empty_graph, "cannot build a prior over zero nodes");
    Eigen::VectorXd prior(static_cast<Eigen::Index>(similarities.size()));
    for (Eigen::Index i = 0; i < prior.size(); ++i)
        prior[i] = std::max(similarities[static_cast<size_t>(i)], kSimilarityFloor);
    prior /= prior.sum();
    return prior;
}

// Query-vs-docstring cosine prior. Cached node embeddings are used when
// present; a zero query vector degrades to the uniform prior.
inline std::pair<std::vector<NodeId>, Eigen::VectorXd> build_prior(const ToolGraph& graph,
                                                                   const std::string& query,
                                                                   EmbeddingProvider& provider) {
    if (graph.empty()) throw Error(ErrorCode::empty_graph, "cannot rank an empty graph");
    const std::vector<NodeId> ordering = graph.ordering();

    const EmbeddingVector query_vec = provider.embed({query}).at(0);
    bool query_is_zero = true;
    for (double v : query_vec)
        if (v != 0.0) {
            query_is_zero = false;
            break;
        }
    if (query_is_zero) {
        Eigen::VectorXd uniform = Eigen::VectorXd::Constant(
            static_cast<Eigen::Index>(ordering.size()), 1.0 / static_cast<double>(ordering.size()));
        return {ordering, uniform};
    }

    std::vector<double> sims;
    sims.reserve(ordering.size());
    std::vector<std::string> missing_texts;
    std::vector<size_t> missing_pos;
    std::vector<EmbeddingVector> node_vecs(ordering.size());
    for (size_t i = 0; i < ordering.size(); ++i) {
        const ToolNode& node = graph.node(ordering[i]);
        if (node.embedding) {
            node_vecs[i] = *node.embedding;
        } else {
            missing_pos.push_back(i);
            missing_texts.push_back(node.embed_text());
        }
    }
    if (!missing_texts.empty()) {
        auto embedded = provider.embed(missing_texts);
        if (embedded.size() != missing_texts.size())
            throw Error(ErrorCode::shape_error, "provider returned a short batch");
        for (size_t j = 0; j < missing_pos.size(); ++j) node_vecs[missing_pos[j]] = embedded[j];
    }
    for (auto& vec : node_vecs) sims.push_back(cosine_similarity(query_vec, vec));
    return {ordering, prior_from_similarities(sims)};
}

// Precompute and store docstring embeddings on the nodes so later retrievals
// are read-only.
inline void warm_embeddings(ToolGraph& graph, EmbeddingProvider& provider) {
    std::vector<NodeId> missing;
    std::vector<std::string> texts;
    for (auto& [id, node] : graph.nodes()) {
        if (!node.embedding) {
            missing.push_back(id);
            texts.push_back(node.embed_text());
        }
    }
    if (missing.empty()) return;
    auto embedded = provider.embed(texts);
    if (embedded.size() != missing.size())
        throw Error(ErrorCode::shape_error, "provider returned a short batch");
    for (size_t i = 0; i < missing.size(); ++i) graph.set_embedding(missing[i], std::move(embedded[i]));
}

// Column-normalized transition matrix. Columns with no incident edges (and
// the N = 0 degenerate case aside, isolated nodes generally) become uniform
// so every node keeps participating in the walk.
inline Eigen::MatrixXd build_transition(const ToolGraph& graph, const std::vector<NodeId>& ordering) {
    const Eigen::Index n = static_cast<Eigen::Index>(ordering.size());
    Eigen::MatrixXd transition = adjacency_matrix(graph, ordering);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double column_sum = transition.col(j).sum();
        if (column_sum > 0.0)
            transition.col(j) /= column_sum;
        else
            transition.col(j).setConstant(1.0 / static_cast<double>(n));
    }
    return transition;
}

// Fixed point of gr = (1-d) p0 + d M^T gr by dense direct solve with partial
// pivoting. For d < 1 and column-stochastic M the system is nonsingular; the
// residual check guards against numerical degeneration anyway.
inline Eigen::VectorXd steady_state(const Eigen::VectorXd& prior, const Eigen::MatrixXd& transition,
                                    double damping) {
    if (damping < 0.0 || damping >= 1.0)
        throw Error(ErrorCode::invalid_config, "damping must lie in [0, 1)");
    const Eigen::Index n = prior.size();
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(n, n) - damping * transition.transpose();
    Eigen::VectorXd steady = system.partialPivLu().solve((1.0 - damping) * prior);
    const double residual =
        (steady - (1.0 - damping) * prior - damping * transition.transpose() * steady)
            .lpNorm<Eigen::Infinity>();
    if (!(residual <= kSteadyStateTolerance))
        throw Error(ErrorCode::singular_system,
                    "steady-state residual " + std::to_string(residual) + " exceeds tolerance");
    return steady;
}

inline RankDistribution rank(const ToolGraph& graph, const std::string& query, double damping,
                             EmbeddingProvider& provider) {
    RankDistribution dist;
    auto [ordering, prior] = build_prior(graph, query, provider);
    dist.ordering = std::move(ordering);
    dist.prior = std::move(prior);
    dist.transition = build_transition(graph, dist.ordering);
    dist.steady = steady_state(dist.prior, dist.transition, damping);
    dist.damping = damping;
    return dist;
}

// Top-k by steady-state score, descending. Ties go to the older tool
// (created_iter), then the smaller id, so replays are deterministic.
inline std::vector<RetrievedTool> top_k(const ToolGraph& graph, const RankDistribution& dist,
                                        int k) {
    if (k < 1) throw Error(ErrorCode::invalid_config, "k must be >= 1");
    std::vector<size_t> index(dist.ordering.size());
    for (size_t i = 0; i < index.size(); ++i) index[i] = i;
    std::sort(index.begin(), index.end(), [&](size_t a, size_t b) {
        const double sa = dist.steady[static_cast<Eigen::Index>(a)];
        const double sb = dist.steady[static_cast<Eigen::Index>(b)];
        if (sa != sb) return sa > sb;
        const ToolNode& na = graph.node(dist.ordering[a]);
        const ToolNode& nb = graph.node(dist.ordering[b]);
        if (na.created_iter != nb.created_iter) return na.created_iter < nb.created_iter;
        return na.id < nb.id;
    });
    std::vector<RetrievedTool> result;
    const size_t count = std::min(static_cast<size_t>(k), index.size());
    result.reserve(count);
    for (size_t i = 0; i < count; ++i)
        result.push_back({dist.ordering[index[i]], dist.steady[static_cast<Eigen::Index>(index[i])]});
    return result;
}

inline std::vector<RetrievedTool> retrieve(const ToolGraph& graph, const std::string& query, int k,
                                           double damping, EmbeddingProvider& provider) {
    return top_k(graph, rank(graph, query, damping, provider), k);
}

} // namespace toolgraph
