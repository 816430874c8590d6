#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "toolgraph/errors.hpp"
#include "toolgraph/tokenize.hpp"

namespace toolgraph {

using NodeId = int;
inline constexpr NodeId kNoNode = 0; // ids start at 1

enum class ToolKind { basic, composed };

struct ToolNode {
    NodeId id = kNoNode;
    std::string name;
    std::string docstring;
    std::string source;
    ToolKind kind = ToolKind::basic;
    int layer = 1;
    long usage_total = 0;  // inclusions in correct solutions, direct or transitive
    long usage_window = 0; // portion of usage_total accrued since the last prune
    long created_iter = 0;
    std::set<NodeId> deps;                          // node ids this tool calls
    std::optional<std::vector<double>> embedding;   // cached docstring embedding

    // Text a provider embeds for this node.
    std::string embed_text() const { return name + ": " + docstring; }
};

using EdgeSet = std::set<std::pair<NodeId, NodeId>>; // pairs stored as (lo, hi)

inline std::pair<NodeId, NodeId> make_edge(NodeId a, NodeId b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

// A tool pending insertion: produced by a synthesizer, validated by
// self-check, inserted into the graph only when its task completes correctly.
struct ToolDraft {
    std::string name;
    std::string docstring;
    std::string source;
    // Dependency names declared explicitly by the producer; extraction from
    // source is used when empty.
    std::vector<std::string> declared_deps;
};

// Hierarchical undirected tool graph. Nodes carry a directed dependency
// relation (acyclic); the undirected edge set mirrors it symmetrically.
// Value type: copy freely, mutate under exclusive access.
class ToolGraph {
public:
    const std::map<NodeId, ToolNode>& nodes() const { return nodes_; }
    const EdgeSet& edges() const { return edges_; }
    bool empty() const { return nodes_.empty(); }
    size_t size() const { return nodes_.size(); }

    long iter() const { return iter_; }
    void set_iter(long value) { iter_ = value; }
    void advance_iter() { ++iter_; }
    long last_prune_iter() const { return last_prune_iter_; }
    void set_last_prune_iter(long value) { last_prune_iter_ = value; }

    bool contains(NodeId id) const { return nodes_.count(id) > 0; }

    const ToolNode& node(NodeId id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end())
            throw Error(ErrorCode::unknown_tool, "no node with id " + std::to_string(id));
        return it->second;
    }

    std::optional<NodeId> find_by_name(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) return std::nullopt;
        return it->second;
    }

    // Sorted id list, the default matrix ordering.
    std::vector<NodeId> ordering() const {
        std::vector<NodeId> ids;
        ids.reserve(nodes_.size());
        for (auto& [id, _] : nodes_) ids.push_back(id);
        return ids;
    }

    NodeId add_basic_tool(const std::string& name, const std::string& docstring,
                          const std::string& source) {
        check_new_name(name);
        ToolNode node;
        node.id = next_id_++;
        node.name = name;
        node.docstring = docstring;
        node.source = source;
        node.kind = ToolKind::basic;
        node.layer = 1;
        node.created_iter = iter_;
        by_name_[name] = node.id;
        nodes_.emplace(node.id, std::move(node));
        return next_id_ - 1;
    }

    // Layer = 1 + max layer over deps. A composed tool with no dependencies
    // sits at layer 2: composed/basic is a provenance split, not a degree one.
    NodeId register_composed_tool(const std::string& name, const std::string& docstring,
                                  const std::string& source, const std::set<NodeId>& deps) {
        check_new_name(name);
        int layer = 2;
        for (NodeId dep : deps) {
            if (dep == next_id_)
                throw Error(ErrorCode::cycle_detected, "tool '" + name + "' depends on itself");
            auto it = nodes_.find(dep);
            if (it == nodes_.end())
                throw Error(ErrorCode::unknown_dependency,
                            "dependency id " + std::to_string(dep) + " not in graph");
            layer = std::max(layer, it->second.layer + 1);
        }
        ToolNode node;
        node.id = next_id_++;
        node.name = name;
        node.docstring = docstring;
        node.source = source;
        node.kind = ToolKind::composed;
        node.layer = layer;
        node.created_iter = iter_;
        node.deps = deps;
        by_name_[name] = node.id;
        for (NodeId dep : deps) edges_.insert(make_edge(node.id, dep));
        nodes_.emplace(node.id, std::move(node));
        return next_id_ - 1;
    }

    // Direct dependents (nodes whose deps contain id).
    std::vector<NodeId> dependents_of(NodeId id) const {
        std::vector<NodeId> result;
        for (auto& [nid, node] : nodes_)
            if (node.deps.count(id)) result.push_back(nid);
        return result;
    }

    // Transitive dependency closure, excluding the node itself.
    std::set<NodeId> dependency_closure(NodeId id) const {
        std::set<NodeId> closure;
        std::vector<NodeId> stack{id};
        while (!stack.empty()) {
            NodeId current = stack.back();
            stack.pop_back();
            for (NodeId dep : node(current).deps)
                if (closure.insert(dep).second) stack.push_back(dep);
        }
        return closure;
    }

    // Removal requires that no surviving node depends on the target.
    void remove_node(NodeId id) {
        auto it = nodes_.find(id);
        if (it == nodes_.end())
            throw Error(ErrorCode::unknown_tool, "no node with id " + std::to_string(id));
        if (!dependents_of(id).empty())
            throw Error(ErrorCode::has_dependents,
                        "node " + std::to_string(id) + " still has dependents");
        for (NodeId dep : it->second.deps) edges_.erase(make_edge(id, dep));
        by_name_.erase(it->second.name);
        nodes_.erase(it);
    }

    // Swap out a node's dependency set, e.g. when a merge replaces one of its
    // callees. Rebuilds edges and recomputes every layer; rejects cycles
    // before mutating anything.
    void replace_deps(NodeId id, const std::set<NodeId>& new_deps) {
        ToolNode& target = mutable_node(id);
        for (NodeId dep : new_deps) {
            if (dep == id)
                throw Error(ErrorCode::cycle_detected, "self-dependency on node " + std::to_string(id));
            if (!contains(dep))
                throw Error(ErrorCode::unknown_dependency,
                            "dependency id " + std::to_string(dep) + " not in graph");
        }
        std::set<NodeId> old_deps = std::exchange(target.deps, new_deps);
        if (!try_recompute_layers()) {
            target.deps = std::move(old_deps);
            recompute_layers_or_throw();
            throw Error(ErrorCode::cycle_detected,
                        "replacing deps of node " + std::to_string(id) + " creates a cycle");
        }
        rebuild_edges();
    }

    void bump_usage(NodeId id) {
        ToolNode& n = mutable_node(id);
        ++n.usage_total;
        ++n.usage_window;
    }

    void reset_usage_windows() {
        for (auto& [_, node] : nodes_) node.usage_window = 0;
    }

    void set_embedding(NodeId id, std::vector<double> values) {
        mutable_node(id).embedding = std::move(values);
    }

    void clear_embedding(NodeId id) { mutable_node(id).embedding.reset(); }

    // Full invariant audit; returns human-readable violations (empty = ok).
    // Drives both corrupt-document rejection and property tests.
    std::vector<std::string> verify() const {
        std::vector<std::string> violations;
        std::map<std::string, int> name_count;
        for (auto& [id, node] : nodes_) {
            if (node.id != id) violations.push_back("node id field mismatch at " + std::to_string(id));
            if (node.name.empty()) violations.push_back("empty name on node " + std::to_string(id));
            ++name_count[node.name];
            if (node.usage_window > node.usage_total)
                violations.push_back("usage_window exceeds usage_total on node " + std::to_string(id));
            if (node.usage_total < 0 || node.usage_window < 0)
                violations.push_back("negative usage counter on node " + std::to_string(id));
            if (node.kind == ToolKind::basic && (!node.deps.empty() || node.layer != 1))
                violations.push_back("basic node " + std::to_string(id) + " must be layer 1 with no deps");
            for (NodeId dep : node.deps) {
                if (dep == id) violations.push_back("self-dependency on node " + std::to_string(id));
                if (!contains(dep))
                    violations.push_back("node " + std::to_string(id) + " depends on missing id " +
                                         std::to_string(dep));
            }
        }
        for (auto& [name, count] : name_count)
            if (count > 1) violations.push_back("duplicate name '" + name + "'");

        for (auto& [a, b] : edges_) {
            if (a == b) violations.push_back("self-edge on node " + std::to_string(a));
            if (!contains(a) || !contains(b))
                violations.push_back("edge {" + std::to_string(a) + "," + std::to_string(b) +
                                     "} references a missing node");
        }
        if (edges_ != derive_edges())
            violations.push_back("edge set does not mirror the dependency relation");

        auto layers = compute_layers();
        if (!layers) {
            violations.push_back("dependency relation contains a cycle");
        } else {
            for (auto& [id, node] : nodes_)
                if (node.layer != (*layers)[id])
                    violations.push_back("stored layer of node " + std::to_string(id) +
                                         " disagrees with recomputation");
        }
        return violations;
    }

    // From-scratch layer map via topological pass; nullopt when cyclic.
    std::optional<std::map<NodeId, int>> compute_layers() const {
        std::map<NodeId, int> layer;
        std::map<NodeId, int> state; // 0 unvisited, 1 in progress, 2 done
        bool cyclic = false;

        auto visit = [&](auto&& self, NodeId id) -> int {
            if (cyclic) return 0;
            auto& st = state[id];
            if (st == 2) return layer[id];
            if (st == 1) {
                cyclic = true;
                return 0;
            }
            st = 1;
            const ToolNode& n = nodes_.at(id);
            int result = 1;
            if (n.kind == ToolKind::composed) {
                result = 2;
                for (NodeId dep : n.deps) {
                    if (!nodes_.count(dep)) continue;
                    result = std::max(result, self(self, dep) + 1);
                }
            }
            st = 2;
            layer[id] = result;
            return result;
        };
        for (auto& [id, _] : nodes_) visit(visit, id);
        if (cyclic) return std::nullopt;
        return layer;
    }

    // Used by the persistence layer to reconstitute exact state. The caller
    // must run verify() afterwards.
    static ToolGraph from_parts(std::vector<ToolNode> nodes, EdgeSet edges, long iter,
                                long last_prune_iter) {
        ToolGraph g;
        NodeId max_id = 0;
        for (auto& node : nodes) {
            max_id = std::max(max_id, node.id);
            g.by_name_[node.name] = node.id;
            g.nodes_.emplace(node.id, std::move(node));
        }
        g.edges_ = std::move(edges);
        g.iter_ = iter;
        g.last_prune_iter_ = last_prune_iter;
        g.next_id_ = max_id + 1;
        return g;
    }

private:
    void check_new_name(const std::string& name) const {
        if (name.empty()) throw Error(ErrorCode::empty_name, "tool name must be non-empty");
        if (by_name_.count(name))
            throw Error(ErrorCode::duplicate_name, "tool '" + name + "' already exists");
    }

    ToolNode& mutable_node(NodeId id) {
        auto it = nodes_.find(id);
        if (it == nodes_.end())
            throw Error(ErrorCode::unknown_tool, "no node with id " + std::to_string(id));
        return it->second;
    }

    EdgeSet derive_edges() const {
        EdgeSet derived;
        for (auto& [id, node] : nodes_)
            for (NodeId dep : node.deps)
                if (dep != id) derived.insert(make_edge(id, dep));
        return derived;
    }

    void rebuild_edges() { edges_ = derive_edges(); }

    bool try_recompute_layers() {
        auto layers = compute_layers();
        if (!layers) return false;
        for (auto& [id, node] : nodes_) node.layer = (*layers)[id];
        return true;
    }

    void recompute_layers_or_throw() {
        if (!try_recompute_layers())
            throw Error(ErrorCode::cycle_detected, "dependency relation contains a cycle");
    }

    std::map<NodeId, ToolNode> nodes_;
    std::map<std::string, NodeId> by_name_;
    EdgeSet edges_;
    NodeId next_id_ = 1;
    long iter_ = 0;
    long last_prune_iter_ = 0;
};

// Ids of known tools whose names occur as call sites in `source`. A tool's
// own name (when supplied) is skipped: recursion does not create a
// dependency, the layer rule would be undefined on it.
inline std::set<NodeId> extract_dependencies(std::string_view source,
                                             const std::map<std::string, NodeId>& known_names,
                                             const std::string& self_name = {}) {
    std::set<NodeId> deps;
    for (const std::string& name : call_sites(source)) {
        if (!self_name.empty() && name == self_name) continue;
        auto it = known_names.find(name);
        if (it != known_names.end()) deps.insert(it->second);
    }
    return deps;
}

inline std::map<std::string, NodeId> known_names(const ToolGraph& graph) {
    std::map<std::string, NodeId> names;
    for (auto& [id, node] : graph.nodes()) names[node.name] = id;
    return names;
}

// One entry of the used-tool list handed to update_after_task: either a tool
// already in the graph or a validated draft awaiting insertion.
using UsedTool = std::variant<NodeId, ToolDraft>;

// Per-used-tool redundant sets discovered by the merge scan, keyed by the
// used tool's name (drafts have no id until insertion).
using RedundancyMap = std::map<std::string, std::set<NodeId>>;

struct UpdateReport {
    std::vector<NodeId> added_nodes;
    std::vector<std::pair<NodeId, NodeId>> added_edges;
    std::vector<NodeId> removed_nodes;
    std::vector<NodeId> zero_dep_composed; // admitted at layer 2, flagged
    std::map<NodeId, long> usage_increments;
};

// Post-task graph update: insert used drafts (set union by name), add the
// edges their call sites imply, propagate usage through dependency closures,
// then drop redundant tools that no surviving node depends on.
inline UpdateReport update_after_task(ToolGraph& graph, const std::vector<UsedTool>& used,
                                      const RedundancyMap& redundancy = {}) {
    UpdateReport report;
    EdgeSet edges_before = graph.edges();

    // Insertion first, in order, so later drafts can call earlier ones.
    std::vector<NodeId> used_ids;
    for (const UsedTool& entry : used) {
        if (std::holds_alternative<NodeId>(entry)) {
            NodeId id = std::get<NodeId>(entry);
            if (!graph.contains(id))
                throw Error(ErrorCode::unknown_tool,
                            "used id " + std::to_string(id) + " is not in the graph");
            used_ids.push_back(id);
            continue;
        }
        const ToolDraft& draft = std::get<ToolDraft>(entry);
        if (auto existing = graph.find_by_name(draft.name)) {
            // Already present: node-set union, only usage changes.
            used_ids.push_back(*existing);
            continue;
        }
        std::set<NodeId> deps;
        auto names = known_names(graph);
        if (!draft.declared_deps.empty()) {
            for (const std::string& dep_name : draft.declared_deps) {
                auto it = names.find(dep_name);
                if (it == names.end())
                    throw Error(ErrorCode::unknown_dependency,
                                "declared dependency '" + dep_name + "' is not in the graph");
                deps.insert(it->second);
            }
        } else {
            deps = extract_dependencies(draft.source, names, draft.name);
        }
        NodeId id = graph.register_composed_tool(draft.name, draft.docstring, draft.source, deps);
        report.added_nodes.push_back(id);
        if (deps.empty()) report.zero_dep_composed.push_back(id);
        used_ids.push_back(id);
    }

    // Usage counts are execution counts: each used tool bumps itself and its
    // whole dependency closure.
    for (NodeId id : used_ids) {
        graph.bump_usage(id);
        ++report.usage_increments[id];
        for (NodeId dep : graph.dependency_closure(id)) {
            graph.bump_usage(dep);
            ++report.usage_increments[dep];
        }
    }

    // Redundant-tool removal, with the higher-level-tool exception: a
    // redundant tool some surviving node depends on is retained. Removal
    // cascades until stable. Victims of a merge that never made it into the
    // graph stay, as do victims that were themselves used this task.
    const std::set<NodeId> protected_ids(used_ids.begin(), used_ids.end());
    std::set<NodeId> slated;
    for (auto& [used_name, ids] : redundancy) {
        if (!graph.find_by_name(used_name)) continue;
        for (NodeId id : ids)
            if (graph.contains(id) && graph.node(id).kind == ToolKind::composed &&
                !protected_ids.count(id))
                slated.insert(id);
    }
    bool changed = true;
    while (changed) {
        changed = false;
        for (auto it = slated.begin(); it != slated.end();) {
            if (graph.dependents_of(*it).empty()) {
                report.removed_nodes.push_back(*it);
                graph.remove_node(*it);
                it = slated.erase(it);
                changed = true;
            } else {
                ++it;
            }
        }
    }
    std::sort(report.removed_nodes.begin(), report.removed_nodes.end());

    for (auto& edge : graph.edges())
        if (!edges_before.count(edge)) report.added_edges.push_back(edge);
    return report;
}

// Symmetric 0/1 adjacency matrix over a caller-supplied total ordering.
inline Eigen::MatrixXd adjacency_matrix(const ToolGraph& graph, const std::vector<NodeId>& ordering) {
    const Eigen::Index n = static_cast<Eigen::Index>(ordering.size());
    std::map<NodeId, Eigen::Index> index;
    for (Eigen::Index i = 0; i < n; ++i) index[ordering[i]] = i;
    Eigen::MatrixXd adjacency = Eigen::MatrixXd::Zero(n, n);
    for (auto& [a, b] : graph.edges()) {
        auto ia = index.find(a);
        auto ib = index.find(b);
        if (ia == index.end() || ib == index.end()) continue;
        adjacency(ia->second, ib->second) = 1.0;
        adjacency(ib->second, ia->second) = 1.0;
    }
    return adjacency;
}

} // namespace toolgraph
