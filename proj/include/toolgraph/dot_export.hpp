#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "toolgraph/errors.hpp"
#include "toolgraph/graph.hpp"

namespace toolgraph {

struct DotOptions {
    bool exclude_basic = false;
    bool rank_by_layer = true;
};

// Deterministic DOT text: vertices sorted by id, labels name/layer/usage.
inline std::string export_dot_string(const ToolGraph& graph, const DotOptions& options = {}) {
    auto included = [&](NodeId id) {
        return !(options.exclude_basic && graph.node(id).kind == ToolKind::basic);
    };
    std::string out = "graph toolgraph {\n";
    out += "  node [shape=box];\n";

    if (options.rank_by_layer) {
        std::map<int, std::vector<NodeId>> by_layer;
        for (auto& [id, node] : graph.nodes())
            if (included(id)) by_layer[node.layer].push_back(id);
        for (auto& [layer, ids] : by_layer) {
            out += "  { rank=same;";
            for (NodeId id : ids) out += " n" + std::to_string(id) + ";";
            out += " }\n";
        }
    }
    for (auto& [id, node] : graph.nodes()) {
        if (!included(id)) continue;
        out += "  n" + std::to_string(id) + " [label=\"" + node.name + "\\nL" +
               std::to_string(node.layer) + " u" + std::to_string(node.usage_total) + "\"];\n";
    }
    for (auto& [a, b] : graph.edges())
        if (included(a) && included(b))
            out += "  n" + std::to_string(a) + " -- n" + std::to_string(b) + ";\n";
    out += "}\n";
    return out;
}

inline void export_dot(const ToolGraph& graph, const std::string& path,
                       const DotOptions& options = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot open " + path + " for writing");
    out << export_dot_string(graph, options);
    if (!out) throw Error(ErrorCode::io_error, "write to " + path + " failed");
}

} // namespace toolgraph
