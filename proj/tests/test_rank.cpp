#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <random>

#include <toolgraph/toolgraph.hpp>

#include "support/oracles.hpp"

using namespace toolgraph;

namespace {

bool throws_code(ErrorCode code, const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}

// Provider that hands out fixed vectors keyed by text. Unknown text maps to
// zero, and every embed call is counted so caching can be observed.
class TableProvider final : public EmbeddingProvider {
public:
    explicit TableProvider(std::map<std::string, EmbeddingVector> table, size_t dimension)
        : table_(std::move(table)), dim_(dimension) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        calls += texts.size();
        std::vector<EmbeddingVector> out;
        for (const auto& text : texts) {
            auto it = table_.find(text);
            out.push_back(it == table_.end() ? EmbeddingVector(dim_, 0.0) : it->second);
        }
        return out;
    }

    size_t dim() override { return dim_; }

    size_t calls = 0;

private:
    std::map<std::string, EmbeddingVector> table_;
    size_t dim_;
};

// The worked three-node example: one edge between the first two tools, the
// third isolated, prior (0.5, 0.3, 0.2).
struct ThreeNodeFixture {
    ToolGraph graph;
    TableProvider provider;

    ThreeNodeFixture()
        : provider(
              {
                  {"q", {1.0, 0.0, 0.0, 0.0}},
                  {"alpha: first tool", {0.5, std::sqrt(0.75), 0.0, 0.0}},
                  {"beta: second tool", {0.3, std::sqrt(0.91), 0.0, 0.0}},
                  {"gamma: third tool", {0.2, std::sqrt(0.96), 0.0, 0.0}},
              },
              4) {
        NodeId a = graph.add_basic_tool("alpha", "first tool", "");
        NodeId b = graph.add_basic_tool("beta", "second tool", "");
        graph.add_basic_tool("gamma", "third tool", "");
        graph.register_composed_tool("bridge", "links alpha and beta", "", {a, b});
    }
};

Eigen::VectorXd to_eigen(const std::vector<double>& values) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(values.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = values[static_cast<size_t>(i)];
    return out;
}

std::vector<std::vector<double>> nested(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> out(static_cast<size_t>(m.rows()),
                                         std::vector<double>(static_cast<size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out[static_cast<size_t>(i)][static_cast<size_t>(j)] = m(i, j);
    return out;
}

std::vector<std::vector<int>> nested_int(const Eigen::MatrixXd& m) {
    std::vector<std::vector<int>> out(static_cast<size_t>(m.rows()),
                                      std::vector<int>(static_cast<size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out[static_cast<size_t>(i)][static_cast<size_t>(j)] = static_cast<int>(m(i, j));
    return out;
}

} // namespace

TEST_CASE("prior clamps negatives and normalizes") {
    Eigen::VectorXd prior = prior_from_similarities({0.9, -0.5, 0.1});
    CHECK(prior.sum() == Catch::Approx(1.0));
    CHECK(prior.minCoeff() > 0.0);
    CHECK(prior[0] == Catch::Approx(0.9 / (0.9 + 0.1 + 1e-9)));
    CHECK(prior[1] == Catch::Approx(1e-9 / (0.9 + 0.1 + 1e-9)));
}

TEST_CASE("prior over zero nodes is refused") {
    CHECK(throws_code(ErrorCode::empty_graph, [] { prior_from_similarities({}); }));
}

TEST_CASE("all-negative similarities give the uniform prior") {
    Eigen::VectorXd prior = prior_from_similarities({-0.2, -0.9, -0.4});
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(prior[i] == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("zero query vector degrades to the uniform prior") {
    ToolGraph graph;
    graph.add_basic_tool("a", "alpha doc", "");
    graph.add_basic_tool("b", "beta doc", "");
    TableProvider provider({}, 4);
    auto [ordering, prior] = build_prior(graph, "anything", provider);
    REQUIRE(ordering.size() == 2);
    CHECK(prior[0] == Catch::Approx(0.5));
    CHECK(prior[1] == Catch::Approx(0.5));
}

TEST_CASE("build_prior on an empty graph is refused") {
    ToolGraph graph;
    StubEmbeddingProvider provider;
    CHECK(throws_code(ErrorCode::empty_graph, [&] { build_prior(graph, "q", provider); }));
}

TEST_CASE("warm_embeddings caches docstring vectors") {
    ToolGraph graph;
    graph.add_basic_tool("a", "alpha doc", "");
    graph.add_basic_tool("b", "beta doc", "");
    TableProvider provider({{"q", {1.0, 0.0}}}, 2);

    warm_embeddings(graph, provider);
    CHECK(provider.calls == 2);
    for (const auto& [id, node] : graph.nodes()) CHECK(node.embedding.has_value());

    warm_embeddings(graph, provider);
    CHECK(provider.calls == 2);

    build_prior(graph, "q", provider);
    CHECK(provider.calls == 3);
}

TEST_CASE("transition columns are stochastic with uniform isolated columns") {
    std::mt19937 rng(7);
    ToolGraph graph = oracles::random_graph(rng, 6, 0.4);
    const auto ordering = graph.ordering();
    Eigen::MatrixXd transition = build_transition(graph, ordering);
    for (Eigen::Index j = 0; j < transition.cols(); ++j)
        CHECK(transition.col(j).sum() == Catch::Approx(1.0));

    auto oracle = oracles::column_normalized(nested_int(adjacency_matrix(graph, ordering)));
    for (Eigen::Index i = 0; i < transition.rows(); ++i)
        for (Eigen::Index j = 0; j < transition.cols(); ++j)
            CHECK(transition(i, j) ==
                  Catch::Approx(oracle[static_cast<size_t>(i)][static_cast<size_t>(j)])
                      .margin(1e-12));
}

TEST_CASE("steady state matches the worked three-node example") {
    ThreeNodeFixture fx;
    Eigen::VectorXd prior = to_eigen({0.5, 0.3, 0.2});
    Eigen::MatrixXd adjacency = Eigen::MatrixXd::Zero(3, 3);
    adjacency(0, 1) = adjacency(1, 0) = 1.0;
    Eigen::MatrixXd transition = adjacency;
    transition.col(0) /= transition.col(0).sum();
    transition.col(1) /= transition.col(1).sum();
    transition.col(2).setConstant(1.0 / 3.0);

    Eigen::VectorXd steady = steady_state(prior, transition, 0.4);
    CHECK(steady[0] == Catch::Approx(0.442857).margin(1e-3));
    CHECK(steady[1] == Catch::Approx(0.357143).margin(1e-3));
    CHECK(steady[2] == Catch::Approx(0.261538).margin(1e-3));

    auto iterated = oracles::power_iteration({0.5, 0.3, 0.2}, nested(transition), 0.4);
    for (Eigen::Index i = 0; i < 3; ++i)
        CHECK(steady[i] == Catch::Approx(iterated[static_cast<size_t>(i)]).margin(1e-9));
}

TEST_CASE("damping zero returns the prior itself") {
    ThreeNodeFixture fx;
    Eigen::VectorXd prior = to_eigen({0.5, 0.3, 0.2});
    Eigen::MatrixXd transition = build_transition(fx.graph, fx.graph.ordering());
    Eigen::VectorXd steady = steady_state(prior, transition, 0.0);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(steady[i] == Catch::Approx(prior[i]).margin(1e-12));
}

TEST_CASE("damping outside the unit interval is refused") {
    Eigen::VectorXd prior = to_eigen({1.0});
    Eigen::MatrixXd transition = Eigen::MatrixXd::Ones(1, 1);
    CHECK(throws_code(ErrorCode::invalid_config, [&] { steady_state(prior, transition, -0.1); }));
    CHECK(throws_code(ErrorCode::invalid_config, [&] { steady_state(prior, transition, 1.0); }));
    CHECK(throws_code(ErrorCode::invalid_config, [&] { steady_state(prior, transition, 1.5); }));
}

TEST_CASE("direct solve agrees with power iteration across dampings") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> mass(0.01, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        ToolGraph graph = oracles::random_graph(rng, 8, 0.35);
        const auto ordering = graph.ordering();
        const size_t n = ordering.size();
        std::vector<double> raw(n);
        double total = 0.0;
        for (double& v : raw) total += (v = mass(rng));
        for (double& v : raw) v /= total;

        Eigen::MatrixXd transition = build_transition(graph, ordering);
        for (double damping : {0.0, 0.4, 0.85}) {
            Eigen::VectorXd steady = steady_state(to_eigen(raw), transition, damping);
            auto iterated = oracles::power_iteration(raw, nested(transition), damping);
            for (size_t i = 0; i < n; ++i)
                CHECK(steady[static_cast<Eigen::Index>(i)] ==
                      Catch::Approx(iterated[i]).margin(1e-9));
        }
    }
}

TEST_CASE("rank with damping zero orders by cosine similarity") {
    ThreeNodeFixture fx;
    RankDistribution dist = rank(fx.graph, "q", 0.0, fx.provider);
    auto hits = top_k(fx.graph, dist, 4);
    REQUIRE(hits.size() == 4);
    CHECK(fx.graph.node(hits[0].id).name == "alpha");
    CHECK(fx.graph.node(hits[1].id).name == "beta");
    CHECK(fx.graph.node(hits[2].id).name == "gamma");
    CHECK(hits[0].score > hits[1].score);
    CHECK(hits[1].score > hits[2].score);
}

TEST_CASE("retrieve on the worked example boosts the connected pair") {
    ThreeNodeFixture fx;
    auto hits = retrieve(fx.graph, "q", 3, kDefaultDamping, fx.provider);
    REQUIRE(hits.size() == 3);
    CHECK(fx.graph.node(hits[0].id).name == "alpha");
    CHECK(fx.graph.node(hits[1].id).name == "beta");
    CHECK(fx.graph.node(hits[2].id).name == "gamma");
}

TEST_CASE("top_k refuses k below one") {
    ThreeNodeFixture fx;
    RankDistribution dist = rank(fx.graph, "q", 0.4, fx.provider);
    CHECK(throws_code(ErrorCode::invalid_config, [&] { top_k(fx.graph, dist, 0); }));
    CHECK(throws_code(ErrorCode::invalid_config, [&] { top_k(fx.graph, dist, -2); }));
}

TEST_CASE("top_k truncates to the library size") {
    ThreeNodeFixture fx;
    auto hits = retrieve(fx.graph, "q", 50, 0.4, fx.provider);
    CHECK(hits.size() == fx.graph.nodes().size());
}

TEST_CASE("score ties break by age then id") {
    ToolGraph graph;
    graph.set_iter(3);
    NodeId young = graph.add_basic_tool("young", "same doc", "");
    graph.set_iter(1);
    NodeId old = graph.add_basic_tool("old", "same doc", "");
    NodeId twin = graph.add_basic_tool("old_twin", "same doc", "");

    RankDistribution dist;
    dist.ordering = graph.ordering();
    dist.prior = to_eigen({1.0 / 3, 1.0 / 3, 1.0 / 3});
    dist.transition = build_transition(graph, dist.ordering);
    dist.steady = to_eigen({0.25, 0.25, 0.25});

    auto hits = top_k(graph, dist, 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].id == old);
    CHECK(hits[1].id == twin);
    CHECK(hits[2].id == young);
    CHECK(old < twin);
    CHECK(graph.node(young).created_iter > graph.node(old).created_iter);
}

// Scaling every raw similarity by one positive constant must not move any
// tool across another in the normalized prior. Entries at the clamp floor tie
// exactly, so index order settles those in both runs identically.
TEST_CASE("prior ordering is invariant to positive scaling of raw similarities") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> sim(-0.5, 1.0);
    std::uniform_real_distribution<double> factor_dist(0.01, 100.0);
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = 2 + static_cast<size_t>(trial % 7);
        std::vector<double> raw(n), scaled(n);
        const double factor = factor_dist(rng);
        for (size_t i = 0; i < n; ++i) {
            raw[i] = sim(rng);
            scaled[i] = raw[i] * factor;
        }
        Eigen::VectorXd p_raw = prior_from_similarities(raw);
        Eigen::VectorXd p_scaled = prior_from_similarities(scaled);

        auto order_of = [](const Eigen::VectorXd& p) {
            std::vector<size_t> idx(static_cast<size_t>(p.size()));
            for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
                const double pa = p[static_cast<Eigen::Index>(a)];
                const double pb = p[static_cast<Eigen::Index>(b)];
                if (pa != pb) return pa > pb;
                return a < b;
            });
            return idx;
        };
        CHECK(order_of(p_raw) == order_of(p_scaled));
    }
}

TEST_CASE("retrieval is invariant to uniform embedding scaling") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> coord(0.1, 1.0);
    std::uniform_real_distribution<double> factor_dist(0.1, 20.0);
    for (int trial = 0; trial < 20; ++trial) {
        ToolGraph graph;
        std::map<std::string, EmbeddingVector> base, scaled;
        const double factor = factor_dist(rng);
        for (int i = 0; i < 5; ++i) {
            const std::string name = "tool" + std::to_string(i);
            const std::string doc = "doc " + std::to_string(i);
            graph.add_basic_tool(name, doc, "");
            EmbeddingVector vec(6);
            for (double& v : vec) v = coord(rng);
            const std::string key = name + ": " + doc;
            base[key] = vec;
            for (double& v : vec) v *= factor;
            scaled[key] = vec;
        }
        EmbeddingVector qvec(6);
        for (double& v : qvec) v = coord(rng);
        base["query"] = qvec;
        scaled["query"] = qvec;

        TableProvider p_base(base, 6), p_scaled(scaled, 6);
        for (double damping : {0.0, 0.4}) {
            auto hits_base = retrieve(graph, "query", 3, damping, p_base);
            auto hits_scaled = retrieve(graph, "query", 3, damping, p_scaled);
            REQUIRE(hits_base.size() == hits_scaled.size());
            for (size_t i = 0; i < hits_base.size(); ++i) {
                CHECK(hits_base[i].id == hits_scaled[i].id);
                CHECK(hits_base[i].score == Catch::Approx(hits_scaled[i].score).margin(1e-9));
            }
        }
    }
}

TEST_CASE("singular residual guard stays quiet on well-posed systems") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        ToolGraph graph = oracles::random_graph(rng, 12, 0.3);
        StubEmbeddingProvider provider;
        RankDistribution dist = rank(graph, "composed tool description", 0.85, provider);
        CHECK(dist.steady.size() == static_cast<Eigen::Index>(graph.nodes().size()));
        CHECK(dist.steady.minCoeff() >= 0.0);
    }
}
