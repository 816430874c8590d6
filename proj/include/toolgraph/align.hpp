#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "toolgraph/errors.hpp"
#include "toolgraph/graph.hpp"
#include "toolgraph/tokenize.hpp"

namespace toolgraph {

// Local-alignment scoring. match > 0, mismatch <= 0, gap <= 0.
struct AlignScoring {
    double match = 2.0;
    double mismatch = -1.0;
    double gap = -1.0;
};

inline constexpr double kDefaultMergeThreshold = 0.6;

// Classic local alignment over token sequences:
//   H[i][j] = max(0, H[i-1][j-1] + s(a_i, b_j), H[i-1][j] + gap, H[i][j-1] + gap)
// Returns the maximum cell. Rolling single-row DP.
inline double smith_waterman(const std::vector<std::string>& a, const std::vector<std::string>& b,
                             const AlignScoring& scoring = {}) {
    if (a.empty() || b.empty()) return 0.0;
    std::vector<double> row(b.size() + 1, 0.0);
    double best = 0.0;
    for (size_t i = 1; i <= a.size(); ++i) {
        double diag = 0.0; // H[i-1][j-1]
        for (size_t j = 1; j <= b.size(); ++j) {
            const double up = row[j];
            const double s = (a[i - 1] == b[j - 1]) ? scoring.match : scoring.mismatch;
            double cell = std::max(0.0, diag + s);
            cell = std::max(cell, up + scoring.gap);
            cell = std::max(cell, row[j - 1] + scoring.gap);
            row[j] = cell;
            diag = up;
            best = std::max(best, cell);
        }
        row[0] = 0.0;
    }
    return best;
}

// A (new tool, existing tool) pair flagged as structurally redundant.
// new_tool is kNoNode when the new side is a draft not yet in the graph.
struct MergeCandidate {
    NodeId new_tool = kNoNode;
    NodeId existing_tool = kNoNode;
    double raw_score = 0.0;
    double similarity = 0.0; // raw / (match * min(lenA, lenB)), in [0, 1]
};

namespace detail {

inline double normalized_similarity(double raw, size_t len_a, size_t len_b,
                                    const AlignScoring& scoring) {
    const size_t min_len = std::min(len_a, len_b);
    if (min_len == 0) return 0.0;
    return raw / (scoring.match * static_cast<double>(min_len));
}

inline std::vector<MergeCandidate> scan_tokens(const ToolGraph& graph,
                                               const std::vector<std::string>& tokens,
                                               NodeId exclude, double threshold,
                                               const AlignScoring& scoring) {
    if (!(threshold > 0.0))
        throw Error(ErrorCode::invalid_config, "merge threshold must be positive");
    std::vector<MergeCandidate> candidates;
    for (auto& [id, node] : graph.nodes()) {
        if (id == exclude) continue;
        if (node.kind != ToolKind::composed) continue; // basic tools are never merged
        const std::vector<std::string> other = token_texts(node.source);
        const double raw = smith_waterman(tokens, other, scoring);
        const double similarity = normalized_similarity(raw, tokens.size(), other.size(), scoring);
        if (similarity >= threshold)
            candidates.push_back({exclude, id, raw, similarity});
    }
    std::sort(candidates.begin(), candidates.end(), [](const MergeCandidate& a, const MergeCandidate& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.existing_tool < b.existing_tool;
    });
    return candidates;
}

} // namespace detail

// Existing composed tools structurally similar to a graph-resident tool.
inline std::vector<MergeCandidate> scan_redundant(const ToolGraph& graph, NodeId tool,
                                                  double threshold = kDefaultMergeThreshold,
                                                  const AlignScoring& scoring = {}) {
    return detail::scan_tokens(graph, token_texts(graph.node(tool).source), tool, threshold, scoring);
}

// Same scan for a draft that has not been inserted yet.
inline std::vector<MergeCandidate> scan_redundant_source(const ToolGraph& graph,
                                                         const std::string& source,
                                                         double threshold = kDefaultMergeThreshold,
                                                         const AlignScoring& scoring = {}) {
    return detail::scan_tokens(graph, token_texts(source), kNoNode, threshold, scoring);
}

struct MergeReport {
    NodeId replacement = kNoNode;
    std::vector<NodeId> rewired;  // dependents pointed at the replacement
    std::vector<NodeId> removed;  // merged tools with no surviving dependents
    std::vector<NodeId> retained; // merged tools kept by the dependent rule
};

// Replace a tool and its redundant set with an externally supplied
// generalized tool. Dependents of any merged node are rewired to the
// replacement; merged nodes that end up with no dependents are removed.
// Validated on a scratch copy so a cycle rejection leaves the graph intact.
inline MergeReport apply_merge(ToolGraph& graph, NodeId tool, const std::vector<NodeId>& candidates,
                               const std::string& replacement_name,
                               const std::string& replacement_docstring,
                               const std::string& replacement_source,
                               const std::set<NodeId>& replacement_deps) {
    std::set<NodeId> merged{tool};
    merged.insert(candidates.begin(), candidates.end());
    for (NodeId id : merged)
        if (!graph.contains(id))
            throw Error(ErrorCode::unknown_tool, "merge target id " + std::to_string(id) +
                                                     " is not in the graph");
    for (NodeId dep : replacement_deps)
        if (!graph.contains(dep))
            throw Error(ErrorCode::unknown_dependency,
                        "replacement dependency id " + std::to_string(dep) + " is not in the graph");

    ToolGraph scratch = graph;
    MergeReport report;
    report.replacement = scratch.register_composed_tool(replacement_name, replacement_docstring,
                                                        replacement_source, replacement_deps);

    for (auto& [id, node] : graph.nodes()) {
        if (merged.count(id)) continue;
        bool touches_merged = false;
        for (NodeId dep : node.deps)
            if (merged.count(dep)) {
                touches_merged = true;
                break;
            }
        if (!touches_merged) continue;
        std::set<NodeId> new_deps;
        for (NodeId dep : node.deps)
            if (!merged.count(dep)) new_deps.insert(dep);
        new_deps.insert(report.replacement);
        scratch.replace_deps(id, new_deps); // throws CycleDetected on a bad rewire
        report.rewired.push_back(id);
    }

    // Merged nodes still depended on (e.g. by the replacement itself) stay.
    bool changed = true;
    std::set<NodeId> pending = merged;
    while (changed) {
        changed = false;
        for (auto it = pending.begin(); it != pending.end();) {
            if (scratch.dependents_of(*it).empty()) {
                report.removed.push_back(*it);
                scratch.remove_node(*it);
                it = pending.erase(it);
                changed = true;
            } else {
                ++it;
            }
        }
    }
    report.retained.assign(pending.begin(), pending.end());
    std::sort(report.removed.begin(), report.removed.end());
    std::sort(report.rewired.begin(), report.rewired.end());

    graph = std::move(scratch);
    return report;
}

} // namespace toolgraph
