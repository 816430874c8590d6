#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolgraph/errors.hpp"
#include "toolgraph/graph.hpp"
#include "toolgraph/lifecycle.hpp"
#include "toolgraph/metrics.hpp"

namespace toolgraph {

inline constexpr int kFormatVersion = 1;

namespace detail {

inline std::string json_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size() + 2);
    for (unsigned char c : text) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\b': out += "\\b"; break;
        case '\f': out += "\\f"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (c < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", c);
                out += buf;
            } else {
                out += static_cast<char>(c);
            }
        }
    }
    return out;
}

// Fixed 9-significant-digit float form; the canonical format's only float
// representation.
inline std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

inline const char* kind_label(ToolKind kind) {
    return kind == ToolKind::basic ? "basic" : "composed";
}

} // namespace detail

// Canonical serialized form: fixed key order, nodes and edges sorted by id,
// floats always %.9g. Byte-identical across save/load/save.
inline std::string save_string(const ToolGraph& graph, const PipelineConfig& config = {},
                               bool include_embeddings = false) {
    std::string out;
    auto str = [](std::string_view s) { return "\"" + detail::json_escape(s) + "\""; };
    out += "{\n";
    out += "  \"format_version\": " + std::to_string(kFormatVersion) + ",\n";
    out += "  \"iter\": " + std::to_string(graph.iter()) + ",\n";
    out += "  \"last_prune_iter\": " + std::to_string(graph.last_prune_iter()) + ",\n";
    out += "  \"config\": {\n";
    out += "    \"damping\": " + detail::format_double(config.damping) + ",\n";
    out += "    \"k\": " + std::to_string(config.k) + ",\n";
    out += "    \"merge_threshold\": " + detail::format_double(config.merge_threshold) + ",\n";
    out += "    \"max_checks\": " + std::to_string(config.max_checks) + ",\n";
    out += "    \"prune_period\": " + std::to_string(config.prune_period) + ",\n";
    out += "    \"scoring\": {\"match\": " + detail::format_double(config.scoring.match) +
           ", \"mismatch\": " + detail::format_double(config.scoring.mismatch) +
           ", \"gap\": " + detail::format_double(config.scoring.gap) + "},\n";
    out += std::string("    \"lifetime_usage\": ") + (config.lifetime_usage ? "true" : "false") +
           "\n";
    out += "  },\n";
    out += "  \"nodes\": [";
    bool first = true;
    for (auto& [id, node] : graph.nodes()) {
        out += first ? "\n" : ",\n";
        first = false;
        out += "    {\n";
        out += "      \"id\": " + std::to_string(id) + ",\n";
        out += "      \"name\": " + str(node.name) + ",\n";
        out += std::string("      \"kind\": \"") + detail::kind_label(node.kind) + "\",\n";
        out += "      \"layer\": " + std::to_string(node.layer) + ",\n";
        out += "      \"usage_total\": " + std::to_string(node.usage_total) + ",\n";
        out += "      \"usage_window\": " + std::to_string(node.usage_window) + ",\n";
        out += "      \"created_iter\": " + std::to_string(node.created_iter) + ",\n";
        out += "      \"deps\": [";
        bool first_dep = true;
        for (NodeId dep : node.deps) {
            if (!first_dep) out += ", ";
            first_dep = false;
            out += std::to_string(dep);
        }
        out += "],\n";
        out += "      \"docstring\": " + str(node.docstring) + ",\n";
        out += "      \"source\": " + str(node.source);
        if (include_embeddings && node.embedding) {
            out += ",\n      \"embedding\": [";
            for (size_t i = 0; i < node.embedding->size(); ++i) {
                if (i > 0) out += ", ";
                out += detail::format_double((*node.embedding)[i]);
            }
            out += "]";
        }
        out += "\n    }";
    }
    out += first ? "],\n" : "\n  ],\n";
    out += "  \"edges\": [";
    first = true;
    for (auto& [a, b] : graph.edges()) {
        if (!first) out += ", ";
        first = false;
        out += "[" + std::to_string(a) + ", " + std::to_string(b) + "]";
    }
    out += "]\n";
    out += "}\n";
    return out;
}

inline void save(const ToolGraph& graph, const std::string& path,
                 const PipelineConfig& config = {}, bool include_embeddings = false) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot open " + path + " for writing");
    out << save_string(graph, config, include_embeddings);
    if (!out) throw Error(ErrorCode::io_error, "write to " + path + " failed");
}

struct LoadedDocument {
    ToolGraph graph;
    PipelineConfig config;
};

inline LoadedDocument load_string(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::corrupt_document, e.what());
    }
    if (!doc.is_object() || !doc.contains("format_version") ||
        !doc["format_version"].is_number_integer())
        throw Error(ErrorCode::corrupt_document, "missing format_version");
    if (doc["format_version"].get<int>() != kFormatVersion)
        throw Error(ErrorCode::version_mismatch,
                    "document has format_version " + doc["format_version"].dump() +
                        ", this build reads " + std::to_string(kFormatVersion));

    try {
        LoadedDocument loaded;
        if (doc.contains("config")) {
            const auto& c = doc["config"];
            loaded.config.damping = c.value("damping", kDefaultDamping);
            loaded.config.k = c.value("k", 5);
            loaded.config.merge_threshold = c.value("merge_threshold", kDefaultMergeThreshold);
            loaded.config.max_checks = c.value("max_checks", 2);
            loaded.config.prune_period = c.value("prune_period", 40);
            loaded.config.lifetime_usage = c.value("lifetime_usage", false);
            if (c.contains("scoring")) {
                loaded.config.scoring.match = c["scoring"].value("match", 2.0);
                loaded.config.scoring.mismatch = c["scoring"].value("mismatch", -1.0);
                loaded.config.scoring.gap = c["scoring"].value("gap", -1.0);
            }
        }
        std::vector<ToolNode> nodes;
        for (const auto& n : doc.at("nodes")) {
            ToolNode node;
            node.id = n.at("id").get<NodeId>();
            node.name = n.at("name").get<std::string>();
            const std::string kind = n.at("kind").get<std::string>();
            if (kind != "basic" && kind != "composed")
                throw Error(ErrorCode::corrupt_document, "unknown node kind " + kind);
            node.kind = kind == "basic" ? ToolKind::basic : ToolKind::composed;
            node.layer = n.at("layer").get<int>();
            node.usage_total = n.at("usage_total").get<long>();
            node.usage_window = n.at("usage_window").get<long>();
            node.created_iter = n.at("created_iter").get<long>();
            for (const auto& dep : n.at("deps")) node.deps.insert(dep.get<NodeId>());
            node.docstring = n.at("docstring").get<std::string>();
            node.source = n.at("source").get<std::string>();
            if (n.contains("embedding"))
                node.embedding = n["embedding"].get<std::vector<double>>();
            nodes.push_back(std::move(node));
        }
        EdgeSet edges;
        for (const auto& e : doc.at("edges")) {
            if (!e.is_array() || e.size() != 2)
                throw Error(ErrorCode::corrupt_document, "edge is not an id pair");
            edges.insert(make_edge(e[0].get<NodeId>(), e[1].get<NodeId>()));
        }
        loaded.graph = ToolGraph::from_parts(std::move(nodes), std::move(edges),
                                             doc.value("iter", 0L),
                                             doc.value("last_prune_iter", 0L));
        const std::vector<std::string> violations = loaded.graph.verify();
        if (!violations.empty())
            throw Error(ErrorCode::corrupt_document, violations.front());
        return loaded;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::corrupt_document, e.what());
    }
}

inline LoadedDocument load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load_string(buffer.str());
}

// Stats report in deterministic structured text, for the CLI and the server.
inline std::string render_stats(const ToolGraph& graph) {
    const ComplexityReport report = complexity_report(graph);
    long basic = 0;
    int max_layer = 0;
    for (auto& [id, node] : graph.nodes()) {
        if (node.kind == ToolKind::basic) ++basic;
        max_layer = std::max(max_layer, node.layer);
    }
    std::string out;
    out += "{\n";
    out += "  \"total_nodes\": " + std::to_string(graph.nodes().size()) + ",\n";
    out += "  \"basic_tools\": " + std::to_string(basic) + ",\n";
    out += "  \"lib_size\": " + std::to_string(report.lib_size) + ",\n";
    out += "  \"max_layer\": " + std::to_string(max_layer) + ",\n";
    out += "  \"mean_ops\": " + detail::format_double(report.mean_ops) + ",\n";
    out += "  \"layer_histogram\": {";
    bool first = true;
    for (auto& [layer, count] : report.layer_histogram) {
        if (!first) out += ", ";
        first = false;
        out += "\"" + std::to_string(layer) + "\": " + std::to_string(count);
    }
    out += "},\n";
    out += "  \"tools\": [";
    first = true;
    for (auto& [id, node] : graph.nodes()) {
        out += first ? "\n" : ",\n";
        first = false;
        out += "    {\"id\": " + std::to_string(id) + ", \"name\": \"" +
               detail::json_escape(node.name) + "\", \"layer\": " + std::to_string(node.layer) +
               ", \"ops\": " + std::to_string(report.per_tool_ops.at(id)) +
               ", \"cum_ops\": " + std::to_string(report.cum_ops.at(id)) +
               ", \"usage_total\": " + std::to_string(node.usage_total) + "}";
    }
    out += first ? "]\n" : "\n  ]\n";
    out += "}\n";
    return out;
}

} // namespace toolgraph
