#include <catch2/catch_amalgamated.hpp>

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

ToolGraph minecraft_basics() {
    ToolGraph g;
    g.add_basic_tool("check_inventory", "Retrieves the current inventory state.", "");
    g.add_basic_tool("get_object", "Fetches an object from the environment.", "");
    g.add_basic_tool("craft_object", "Crafts a target item from ingredients.", "");
    return g;
}

} // namespace

TEST_CASE("basic tools sit at layer 1 with no deps") {
    ToolGraph g = minecraft_basics();
    REQUIRE(g.size() == 3);
    for (auto& [id, node] : g.nodes()) {
        CHECK(node.layer == 1);
        CHECK(node.kind == ToolKind::basic);
        CHECK(node.deps.empty());
    }
    CHECK(g.edges().empty());
    CHECK(g.verify().empty());
}

TEST_CASE("names must be unique and nonempty") {
    ToolGraph g = minecraft_basics();
    CHECK(throws_code(ErrorCode::duplicate_name,
                      [&] { g.add_basic_tool("craft_object", "", ""); }));
    CHECK(throws_code(ErrorCode::empty_name, [&] { g.add_basic_tool("", "", ""); }));
    CHECK(throws_code(ErrorCode::duplicate_name,
                      [&] { g.register_composed_tool("get_object", "", "", {}); }));
}

TEST_CASE("layer is one above the deepest dependency") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId get = *g.find_by_name("get_object");
    NodeId planks = g.register_composed_tool("craft_planks", "planks from logs", "", {craft, get});
    CHECK(g.node(planks).layer == 2);
    NodeId sword = g.register_composed_tool("craft_sword", "sword from planks", "", {planks});
    CHECK(g.node(sword).layer == 3);
    NodeId mixed = g.register_composed_tool("mixed", "both layers", "", {craft, sword});
    CHECK(g.node(mixed).layer == 4);
}

TEST_CASE("a composed tool with no deps is admitted at layer 2") {
    ToolGraph g;
    NodeId id = g.register_composed_tool("standalone", "no deps", "", {});
    CHECK(g.node(id).layer == 2);
    CHECK(g.node(id).kind == ToolKind::composed);
    CHECK(g.verify().empty());
}

TEST_CASE("unknown and self dependencies are rejected") {
    ToolGraph g = minecraft_basics();
    CHECK(throws_code(ErrorCode::unknown_dependency,
                      [&] { g.register_composed_tool("x", "", "", {99}); }));
    // id 4 would be the new node itself
    CHECK(throws_code(ErrorCode::cycle_detected,
                      [&] { g.register_composed_tool("x", "", "", {4}); }));
}

TEST_CASE("edges mirror the dependency relation symmetrically") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId planks = g.register_composed_tool("craft_planks", "", "", {craft});
    CHECK(g.edges() == EdgeSet{make_edge(craft, planks)});

    auto ordering = g.ordering();
    Eigen::MatrixXd m = adjacency_matrix(g, ordering);
    REQUIRE(m.rows() == 4);
    CHECK(m == m.transpose());
    CHECK(m.diagonal().isZero());
    CHECK(m.sum() == 2.0); // one undirected edge, two mirrored entries
}

TEST_CASE("extract_dependencies finds call sites of known tools") {
    ToolGraph g = minecraft_basics();
    const std::string source =
        "def craft_black_dye():\n"
        "    \"\"\"Craft 1 black dye from a wither rose.\"\"\"\n"
        "    craft_object('1 black dye', ['1 wither rose'])\n";
    auto deps = extract_dependencies(source, known_names(g), "craft_black_dye");
    REQUIRE(deps == std::set<NodeId>{*g.find_by_name("craft_object")});
}

TEST_CASE("extract_dependencies skips self-calls and strings") {
    ToolGraph g = minecraft_basics();
    auto names = known_names(g);
    CHECK(extract_dependencies("def f():\n    f()\n", names, "f").empty());
    CHECK(extract_dependencies("s = 'craft_object(1)'", names).empty());
}

TEST_CASE("dependents and dependency closure") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId planks = g.register_composed_tool("planks", "", "", {craft});
    NodeId sword = g.register_composed_tool("sword", "", "", {planks});
    CHECK(g.dependents_of(craft) == std::vector<NodeId>{planks});
    CHECK(g.dependency_closure(sword) == std::set<NodeId>{craft, planks});
    CHECK(g.dependency_closure(craft).empty());
}

TEST_CASE("removal requires no dependents") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId planks = g.register_composed_tool("planks", "", "", {craft});
    CHECK(throws_code(ErrorCode::has_dependents, [&] { g.remove_node(craft); }));
    g.remove_node(planks);
    CHECK_FALSE(g.contains(planks));
    CHECK(g.verify().empty());
    g.remove_node(craft);
    CHECK(g.verify().empty());
}

TEST_CASE("replace_deps rewires edges and recomputes layers") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId get = *g.find_by_name("get_object");
    NodeId planks = g.register_composed_tool("planks", "", "", {craft});
    NodeId sword = g.register_composed_tool("sword", "", "", {planks});
    REQUIRE(g.node(sword).layer == 3);

    g.replace_deps(sword, {get});
    CHECK(g.node(sword).layer == 2);
    CHECK(g.edges() == EdgeSet{make_edge(craft, planks), make_edge(get, sword)});
    CHECK(g.verify().empty());
}

TEST_CASE("replace_deps rejects cycles and rolls back") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId planks = g.register_composed_tool("planks", "", "", {craft});
    NodeId sword = g.register_composed_tool("sword", "", "", {planks});
    CHECK(throws_code(ErrorCode::cycle_detected, [&] { g.replace_deps(planks, {sword}); }));
    CHECK(g.node(planks).deps == std::set<NodeId>{craft});
    CHECK(g.node(sword).layer == 3);
    CHECK(g.verify().empty());
}

TEST_CASE("usage counters bump together and windows reset alone") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    g.bump_usage(craft);
    g.bump_usage(craft);
    CHECK(g.node(craft).usage_total == 2);
    CHECK(g.node(craft).usage_window == 2);
    g.reset_usage_windows();
    CHECK(g.node(craft).usage_total == 2);
    CHECK(g.node(craft).usage_window == 0);
}

TEST_CASE("verify flags dangling edges and layer drift") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId planks = g.register_composed_tool("planks", "", "", {craft});

    std::vector<ToolNode> nodes;
    for (auto& [id, node] : g.nodes()) nodes.push_back(node);
    EdgeSet edges = g.edges();
    edges.insert(make_edge(planks, 42));
    ToolGraph broken = ToolGraph::from_parts(nodes, edges, 0, 0);
    auto violations = broken.verify();
    REQUIRE_FALSE(violations.empty());

    nodes.back().layer = 7; // stored layer disagrees with recomputation
    ToolGraph drifted = ToolGraph::from_parts(nodes, g.edges(), 0, 0);
    REQUIRE_FALSE(drifted.verify().empty());
}

TEST_CASE("update_after_task inserts a used draft with extracted deps") {
    ToolGraph g = minecraft_basics();
    ToolDraft draft;
    draft.name = "craft_planks";
    draft.docstring = "planks from logs";
    draft.source = "def craft_planks(n):\n    craft_object(n)\n    get_object(n)\n";

    auto report = update_after_task(g, {draft});
    REQUIRE(report.added_nodes.size() == 1);
    NodeId id = report.added_nodes[0];
    CHECK(g.node(id).deps == std::set<NodeId>{*g.find_by_name("craft_object"),
                                              *g.find_by_name("get_object")});
    CHECK(report.added_edges.size() == 2);
    CHECK(g.node(id).usage_total == 1);
    CHECK(g.node(*g.find_by_name("craft_object")).usage_total == 1);
    CHECK(g.node(*g.find_by_name("check_inventory")).usage_total == 0);
    CHECK(g.verify().empty());
}

TEST_CASE("update_after_task is idempotent on the node set") {
    ToolGraph g = minecraft_basics();
    ToolDraft draft{"craft_planks", "planks", "def craft_planks():\n    craft_object('x')\n", {}};
    update_after_task(g, {draft});
    const size_t before = g.size();
    auto report = update_after_task(g, {draft});
    CHECK(g.size() == before);
    CHECK(report.added_nodes.empty());
    CHECK(g.node(*g.find_by_name("craft_planks")).usage_total == 2);
}

TEST_CASE("update_after_task counts each use separately") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    update_after_task(g, {craft, craft, craft});
    CHECK(g.node(craft).usage_total == 3);
}

TEST_CASE("update_after_task propagates usage through the whole closure") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId planks = g.register_composed_tool("planks", "", "", {craft});
    NodeId sword = g.register_composed_tool("sword", "", "", {planks});
    update_after_task(g, {sword});
    CHECK(g.node(sword).usage_total == 1);
    CHECK(g.node(planks).usage_total == 1);
    CHECK(g.node(craft).usage_total == 1);
}

TEST_CASE("update_after_task honors declared deps over extraction") {
    ToolGraph g = minecraft_basics();
    ToolDraft draft{"wrapper", "wraps", "def wrapper():\n    pass\n", {"craft_object"}};
    auto report = update_after_task(g, {draft});
    NodeId id = report.added_nodes[0];
    CHECK(g.node(id).deps == std::set<NodeId>{*g.find_by_name("craft_object")});
    CHECK(throws_code(ErrorCode::unknown_dependency, [&] {
        ToolDraft bad{"broken", "", "", {"missing_tool"}};
        update_after_task(g, {bad});
    }));
}

TEST_CASE("update_after_task rejects unknown used ids") {
    ToolGraph g = minecraft_basics();
    CHECK(throws_code(ErrorCode::unknown_tool, [&] { update_after_task(g, {NodeId{99}}); }));
}

TEST_CASE("redundant tools are removed unless depended upon") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId old_a = g.register_composed_tool("old_a", "", "", {craft});
    NodeId old_b = g.register_composed_tool("old_b", "", "", {craft});
    g.register_composed_tool("keeper", "", "", {old_b}); // protects old_b

    ToolDraft merged{"merged", "absorbs old_a and old_b",
                     "def merged(x):\n    craft_object(x)\n", {}};
    RedundancyMap redundancy{{"merged", {old_a, old_b}}};
    auto report = update_after_task(g, {merged}, redundancy);

    CHECK_FALSE(g.contains(old_a));
    CHECK(g.contains(old_b));
    CHECK(report.removed_nodes == std::vector<NodeId>{old_a});
    CHECK(g.verify().empty());
}

TEST_CASE("redundant removal cascades when a dependent falls too") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId lower = g.register_composed_tool("lower", "", "", {craft});
    NodeId upper = g.register_composed_tool("upper", "", "", {lower});

    ToolDraft merged{"merged", "", "def merged(x):\n    craft_object(x)\n", {}};
    RedundancyMap redundancy{{"merged", {lower, upper}}};
    update_after_task(g, {merged}, redundancy);
    CHECK_FALSE(g.contains(lower));
    CHECK_FALSE(g.contains(upper));
    CHECK(g.verify().empty());
}

TEST_CASE("redundancy for an uncommitted merge leaves victims alone") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId victim = g.register_composed_tool("victim", "", "", {craft});
    RedundancyMap redundancy{{"never_inserted", {victim}}};
    update_after_task(g, {craft}, redundancy);
    CHECK(g.contains(victim));
}

TEST_CASE("a used tool survives even when slated as redundant") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    NodeId twin = g.register_composed_tool("twin", "", "", {craft});
    ToolDraft merged{"twin", "same name as the victim",
                     "def twin(x):\n    craft_object(x)\n", {}};
    RedundancyMap redundancy{{"twin", {twin}}};
    update_after_task(g, {merged}, redundancy);
    CHECK(g.contains(twin));
    CHECK(g.verify().empty());
}

TEST_CASE("basic tools are never removed by redundancy") {
    ToolGraph g = minecraft_basics();
    NodeId craft = *g.find_by_name("craft_object");
    ToolDraft merged{"merged", "", "def merged():\n    pass\n", {}};
    RedundancyMap redundancy{{"merged", {craft}}};
    update_after_task(g, {merged}, redundancy);
    CHECK(g.contains(craft));
}

TEST_CASE("random graphs satisfy the full invariant audit") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> size_dist(0, 30);
    std::uniform_real_distribution<double> prob_dist(0.0, 0.7);
    for (int trial = 0; trial < 50; ++trial) {
        ToolGraph g = oracles::random_graph(rng, size_dist(rng), prob_dist(rng));
        CAPTURE(trial);
        CHECK(g.verify().empty());
        auto layers = g.compute_layers();
        REQUIRE(layers.has_value());
        for (auto& [id, node] : g.nodes()) CHECK(node.layer == (*layers)[id]);
    }
}
