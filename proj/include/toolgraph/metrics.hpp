#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "toolgraph/graph.hpp"
#include "toolgraph/tokenize.hpp"

namespace toolgraph {

namespace detail {

// The frozen operation-token classes. Token-class counting keeps the metric
// language-agnostic; the exact list is part of the artifact's contract.
inline bool is_operator_op(std::string_view text) {
    static constexpr std::array<std::string_view, 22> kOps = {
        "+", "-", "*", "/", "%", "**", "//", "==", "!=", "<", "<=", ">", ">=",
        "&", "|", "^", "<<", ">>", "+=", "-=", "*=", "/=",
    };
    for (auto op : kOps)
        if (op == text) return true;
    return false;
}

inline bool is_word_operator(std::string_view text) {
    return text == "and" || text == "or" || text == "not";
}

inline bool is_control_keyword(std::string_view text) {
    static constexpr std::array<std::string_view, 9> kControl = {
        "if", "elif", "else", "for", "while", "try", "except", "return", "with",
    };
    for (auto kw : kControl)
        if (kw == text) return true;
    return false;
}

inline bool counts_as_call(const std::vector<Token>& toks, size_t i) {
    if (toks[i].kind != TokenKind::identifier) return false;
    if (i + 1 >= toks.size() || toks[i + 1].kind != TokenKind::op || toks[i + 1].text != "(")
        return false;
    if (is_reserved_word(toks[i].text)) return false;
    if (i > 0 && toks[i - 1].kind == TokenKind::identifier &&
        (toks[i - 1].text == "def" || toks[i - 1].text == "function"))
        return false;
    return true;
}

} // namespace detail

// Operation count of one source text: operators, call sites, subscript
// openings, and control keywords. Plain `=` bindings and definitions do not
// count.
inline long count_ops(std::string_view source) {
    const std::vector<Token> toks = tokenize_source(source);
    long count = 0;
    for (size_t i = 0; i < toks.size(); ++i) {
        const Token& tok = toks[i];
        if (tok.kind == TokenKind::op) {
            if (detail::is_operator_op(tok.text)) {
                ++count;
            } else if (tok.text == "[" && i > 0 &&
                       (toks[i - 1].kind == TokenKind::identifier ||
                        (toks[i - 1].kind == TokenKind::op && toks[i - 1].text == ")"))) {
                ++count; // subscript opening
            }
            continue;
        }
        if (tok.kind != TokenKind::identifier) continue;
        if (detail::is_control_keyword(tok.text) || detail::is_word_operator(tok.text)) {
            ++count;
            continue;
        }
        if (detail::counts_as_call(toks, i)) ++count;
    }
    return count;
}

// Operation count with every call to a graph tool recursively expanded; two
// calls to the same tool expand twice. Acyclic deps make this well-defined;
// a textual back-reference created by renames contributes zero rather than
// recursing forever.
inline long cumulative_ops(const ToolGraph& graph, NodeId id) {
    if (!graph.contains(id))
        throw Error(ErrorCode::unknown_tool, "no node with id " + std::to_string(id));
    const auto names = known_names(graph);
    std::map<NodeId, long> memo;
    std::set<NodeId> visiting;

    auto walk = [&](auto&& self, NodeId current) -> long {
        auto it = memo.find(current);
        if (it != memo.end()) return it->second;
        if (!visiting.insert(current).second) return 0;
        const ToolNode& node = graph.node(current);
        long total = count_ops(node.source);
        for (const std::string& callee : call_sites(node.source)) {
            if (callee == node.name) continue;
            auto target = names.find(callee);
            if (target == names.end()) continue;
            total += self(self, target->second);
        }
        visiting.erase(current);
        memo[current] = total;
        return total;
    };
    return walk(walk, id);
}

struct ComplexityReport {
    std::map<NodeId, long> per_tool_ops;
    std::map<NodeId, long> cum_ops;
    std::map<int, long> layer_histogram;
    long lib_size = 0;     // number of composed tools
    double mean_ops = 0.0; // mean per-tool ops over composed tools
};

inline ComplexityReport complexity_report(const ToolGraph& graph) {
    ComplexityReport report;
    long composed_ops_sum = 0;
    for (auto& [id, node] : graph.nodes()) {
        report.per_tool_ops[id] = count_ops(node.source);
        report.cum_ops[id] = cumulative_ops(graph, id);
        ++report.layer_histogram[node.layer];
        if (node.kind == ToolKind::composed) {
            ++report.lib_size;
            composed_ops_sum += report.per_tool_ops[id];
        }
    }
    if (report.lib_size > 0)
        report.mean_ops = static_cast<double>(composed_ops_sum) / static_cast<double>(report.lib_size);
    return report;
}

} // namespace toolgraph
