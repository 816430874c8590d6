#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolgraph/errors.hpp"

namespace toolgraph {

struct NotebookBlockAction {
    std::string code;
    bool operator==(const NotebookBlockAction&) const = default;
};

struct ToolRequestAction {
    std::vector<std::string> requests;
    bool operator==(const ToolRequestAction&) const = default;
};

struct TerminateAction {
    std::string result;
    bool operator==(const TerminateAction&) const = default;
};

struct CreateToolAction {
    std::string name;
    std::string code;
    bool operator==(const CreateToolAction&) const = default;
};

struct EditToolAction {
    std::string name;
    std::string code;
    bool operator==(const EditToolAction&) const = default;
};

struct FeedbackAction {
    std::string feedback;
    bool passed = false;
    bool operator==(const FeedbackAction&) const = default;
};

struct ReturnToolAction {
    std::string tool_name;
    bool operator==(const ReturnToolAction&) const = default;
};

struct PythonFileAction {
    std::string path;
    std::string code;
    bool operator==(const PythonFileAction&) const = default;
};

using AgentAction = std::variant<NotebookBlockAction, ToolRequestAction, TerminateAction,
                                 CreateToolAction, EditToolAction, FeedbackAction,
                                 ReturnToolAction, PythonFileAction>;

struct ParsedResponse {
    std::optional<std::string> stage;
    std::string thought;
    AgentAction action;
};

inline std::string_view action_kind_name(const AgentAction& action) {
    struct Visitor {
        std::string_view operator()(const NotebookBlockAction&) { return "notebook_block"; }
        std::string_view operator()(const ToolRequestAction&) { return "tool_request"; }
        std::string_view operator()(const TerminateAction&) { return "terminate"; }
        std::string_view operator()(const CreateToolAction&) { return "create_tool"; }
        std::string_view operator()(const EditToolAction&) { return "edit_tool"; }
        std::string_view operator()(const FeedbackAction&) { return "feedback"; }
        std::string_view operator()(const ReturnToolAction&) { return "return_tool"; }
        std::string_view operator()(const PythonFileAction&) { return "python_file"; }
    };
    return std::visit(Visitor{}, action);
}

namespace detail {

inline std::string_view trim_view(std::string_view text) {
    while (!text.empty() && (std::isspace(static_cast<unsigned char>(text.front())) != 0))
        text.remove_prefix(1);
    while (!text.empty() && (std::isspace(static_cast<unsigned char>(text.back())) != 0))
        text.remove_suffix(1);
    return text;
}

inline std::string snippet_of(std::string_view text) {
    std::string_view t = trim_view(text);
    std::string out(t.substr(0, std::min<size_t>(t.size(), 80)));
    if (t.size() > 80) out += "...";
    return out;
}

inline void skip_spaces(std::string_view text, size_t& pos) {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
}

constexpr std::string_view kLeftTypoQuote = "\xe2\x80\x9c";
constexpr std::string_view kRightTypoQuote = "\xe2\x80\x9d";

// Reads a quoted value starting at pos. Accepts ", ', and typographic double
// quotes; backslash escapes \" and \\ inside straight quotes.
inline std::string read_quoted(std::string_view text, size_t& pos, std::string_view what) {
    std::string_view closer;
    if (pos < text.size() && (text[pos] == '"' || text[pos] == '\'')) {
        closer = text.substr(pos, 1);
        ++pos;
    } else if (text.substr(pos, 3) == kLeftTypoQuote) {
        closer = kRightTypoQuote;
        pos += 3;
    } else {
        throw Error(ErrorCode::unrecognized_action,
                    std::string(what) + " must be quoted: " + snippet_of(text.substr(pos)));
    }
    std::string value;
    while (pos < text.size()) {
        if (closer.size() == 1 && text[pos] == '\\' && pos + 1 < text.size() &&
            (text[pos + 1] == '\\' || text[pos + 1] == closer[0])) {
            value += text[pos + 1];
            pos += 2;
            continue;
        }
        if (text.substr(pos, closer.size()) == closer) {
            pos += closer.size();
            return value;
        }
        value += text[pos];
        ++pos;
    }
    throw Error(ErrorCode::unrecognized_action,
                "unterminated quote in " + std::string(what));
}

inline bool is_fence_line(std::string_view line) {
    return trim_view(line).substr(0, 3) == "```";
}

// Consumes a ```-fenced block beginning at the first nonblank line after pos.
// The language tag on the opening fence is discarded; interior lines are
// returned joined with newlines, whitespace preserved.
inline std::string read_fenced_block(std::string_view text, size_t pos) {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r' || text[pos] == '\n'))
        ++pos;
    if (text.substr(pos, 3) != "```")
        throw Error(ErrorCode::unterminated_fence,
                    "expected ``` fence, got: " + snippet_of(text.substr(pos)));
    size_t line_end = text.find('\n', pos);
    if (line_end == std::string_view::npos)
        throw Error(ErrorCode::unterminated_fence, "fence opened at end of input");
    pos = line_end + 1;

    std::vector<std::string_view> body;
    while (pos <= text.size()) {
        size_t next = text.find('\n', pos);
        std::string_view line = text.substr(pos, next == std::string_view::npos
                                                     ? text.size() - pos
                                                     : next - pos);
        std::string_view bare = line;
        if (!bare.empty() && bare.back() == '\r') bare.remove_suffix(1);
        if (trim_view(bare) == "```") {
            std::string joined;
            for (size_t i = 0; i < body.size(); ++i) {
                if (i > 0) joined += '\n';
                joined += body[i];
            }
            return joined;
        }
        if (next == std::string_view::npos) break;
        body.push_back(bare);
        pos = next + 1;
    }
    throw Error(ErrorCode::unterminated_fence, "fence is never closed");
}

// Matches `head` at pos followed by (), optional colon. Returns the position
// just past the header, or nullopt if the head keyword does not match.
inline std::optional<size_t> match_nullary_head(std::string_view text, size_t pos,
                                                std::string_view head) {
    if (text.substr(pos, head.size()) != head) return std::nullopt;
    pos += head.size();
    skip_spaces(text, pos);
    if (pos >= text.size() || text[pos] != '(') return std::nullopt;
    ++pos;
    skip_spaces(text, pos);
    if (pos >= text.size() || text[pos] != ')') return std::nullopt;
    ++pos;
    skip_spaces(text, pos);
    if (pos < text.size() && text[pos] == ':') ++pos;
    return pos;
}

// Matches `head(keyword=<quoted>)` with optional trailing colon. Returns the
// quoted value and the position past the header.
inline std::optional<std::pair<std::string, size_t>> match_keyword_head(std::string_view text,
                                                                        size_t pos,
                                                                        std::string_view head,
                                                                        std::string_view keyword) {
    if (text.substr(pos, head.size()) != head) return std::nullopt;
    pos += head.size();
    skip_spaces(text, pos);
    if (pos >= text.size() || text[pos] != '(') return std::nullopt;
    ++pos;
    skip_spaces(text, pos);
    if (text.substr(pos, keyword.size()) != keyword) return std::nullopt;
    pos += keyword.size();
    skip_spaces(text, pos);
    if (pos >= text.size() || text[pos] != '=') return std::nullopt;
    ++pos;
    skip_spaces(text, pos);
    std::string value = read_quoted(text, pos, keyword);
    skip_spaces(text, pos);
    if (pos >= text.size() || text[pos] != ')')
        throw Error(ErrorCode::unrecognized_action,
                    "missing ) after " + std::string(keyword) + " argument");
    ++pos;
    skip_spaces(text, pos);
    if (pos < text.size() && text[pos] == ':') ++pos;
    return std::make_pair(std::move(value), pos);
}

// Parses one JSON value from the head of text; trailing transcript prose
// after the closing brace is tolerated.
inline nlohmann::json parse_json_body(std::string_view text) {
    try {
        std::istringstream stream{std::string(text)};
        nlohmann::json body;
        stream >> body;
        return body;
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::malformed_json_body, e.what());
    }
}

inline AgentAction action_from_json(const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("action_name") || !body["action_name"].is_string())
        throw Error(ErrorCode::unrecognized_action, "object literal lacks action_name");
    const std::string name = body["action_name"].get<std::string>();
    if (!body.contains("argument") || !body["argument"].is_object())
        throw Error(ErrorCode::malformed_json_body, name + " action lacks an argument object");
    const nlohmann::json& arg = body["argument"];
    if (name == "tool_request") {
        if (!arg.contains("request") || !arg["request"].is_array() || arg["request"].empty())
            throw Error(ErrorCode::malformed_json_body,
                        "tool_request argument.request must be a non-empty list");
        ToolRequestAction action;
        for (const auto& item : arg["request"]) {
            if (!item.is_string())
                throw Error(ErrorCode::malformed_json_body,
                            "tool_request entries must be strings");
            action.requests.push_back(item.get<std::string>());
        }
        return action;
    }
    if (name == "Feedback") {
        if (!arg.contains("feedback") || !arg["feedback"].is_string() ||
            !arg.contains("passed") || !arg["passed"].is_boolean())
            throw Error(ErrorCode::malformed_json_body,
                        "Feedback argument needs a feedback string and a passed flag");
        return FeedbackAction{arg["feedback"].get<std::string>(), arg["passed"].get<bool>()};
    }
    throw Error(ErrorCode::unrecognized_action, "unknown action_name: " + name);
}

} // namespace detail

inline AgentAction parse_action(std::string_view text) {
    size_t pos = 0;
    while (pos < text.size() && (std::isspace(static_cast<unsigned char>(text[pos])) != 0))
        ++pos;
    if (pos >= text.size())
        throw Error(ErrorCode::unrecognized_action, "empty action text");

    if (auto after = detail::match_nullary_head(text, pos, "NotebookBlock"))
        return NotebookBlockAction{detail::read_fenced_block(text, *after)};
    if (auto head = detail::match_keyword_head(text, pos, "Python", "file_path"))
        return PythonFileAction{head->first, detail::read_fenced_block(text, head->second)};
    if (auto head = detail::match_keyword_head(text, pos, "Terminate", "result"))
        return TerminateAction{head->first};
    if (auto head = detail::match_keyword_head(text, pos, "Create_tool", "tool_name")) {
        if (head->first.empty())
            throw Error(ErrorCode::unrecognized_action, "Create_tool needs a nonempty name");
        return CreateToolAction{head->first, detail::read_fenced_block(text, head->second)};
    }
    if (auto head = detail::match_keyword_head(text, pos, "Edit_tool", "tool_name")) {
        if (head->first.empty())
            throw Error(ErrorCode::unrecognized_action, "Edit_tool needs a nonempty name");
        return EditToolAction{head->first, detail::read_fenced_block(text, head->second)};
    }
    if (text[pos] == '{')
        return detail::action_from_json(detail::parse_json_body(text.substr(pos)));
    if (text.substr(pos, 5) == "Tool:") {
        size_t brace = text.find('{', pos + 5);
        if (brace == std::string_view::npos)
            throw Error(ErrorCode::unrecognized_action, "Tool: without an object literal");
        nlohmann::json body = detail::parse_json_body(text.substr(brace));
        if (!body.is_object() || !body.contains("tool_name") || !body["tool_name"].is_string() ||
            body["tool_name"].get<std::string>().empty())
            throw Error(ErrorCode::malformed_json_body,
                        "Tool response needs a nonempty tool_name string");
        return ReturnToolAction{body["tool_name"].get<std::string>()};
    }
    throw Error(ErrorCode::unrecognized_action, detail::snippet_of(text.substr(pos)));
}

inline ParsedResponse parse_response(std::string_view text) {
    ParsedResponse parsed;
    std::optional<std::string> action_text;
    int action_markers = 0;
    bool in_thought = false;
    bool in_fence = false;
    std::string thought;

    size_t pos = 0;
    while (pos <= text.size()) {
        size_t next = text.find('\n', pos);
        std::string_view line = text.substr(pos, next == std::string_view::npos
                                                     ? text.size() - pos
                                                     : next - pos);
        std::string_view stripped = line;
        if (!stripped.empty() && stripped.back() == '\r') stripped.remove_suffix(1);

        if (action_text) {
            *action_text += '\n';
            *action_text += stripped;
        } else if (!in_fence && stripped.substr(0, 6) == "Stage:" && !parsed.stage) {
            parsed.stage = std::string(detail::trim_view(stripped.substr(6)));
            in_thought = false;
        } else if (!in_fence && stripped.substr(0, 8) == "Thought:") {
            thought = std::string(detail::trim_view(stripped.substr(8)));
            in_thought = true;
        } else if (!in_fence && stripped.substr(0, 7) == "Action:") {
            ++action_markers;
            action_text = std::string(stripped.substr(7));
            in_thought = false;
        } else if (!in_fence && stripped.substr(0, 5) == "Tool:") {
            ++action_markers;
            action_text = std::string(stripped);
            in_thought = false;
        } else if (in_thought) {
            thought += '\n';
            thought += stripped;
        }
        if (detail::is_fence_line(stripped)) in_fence = !in_fence;
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }

    if (action_text) {
        // A later marker inside the action body still violates the one-action
        // rule; rescan the collected body outside its fences.
        bool body_fence = false;
        size_t bpos = 0;
        const std::string& body = *action_text;
        bool first_line = true;
        while (bpos <= body.size()) {
            size_t bnext = body.find('\n', bpos);
            std::string_view bline(body.data() + bpos, bnext == std::string::npos
                                                            ? body.size() - bpos
                                                            : bnext - bpos);
            if (!first_line && !body_fence &&
                (bline.substr(0, 7) == "Action:" || bline.substr(0, 5) == "Tool:"))
                ++action_markers;
            if (detail::is_fence_line(bline)) body_fence = !body_fence;
            first_line = false;
            if (bnext == std::string::npos) break;
            bpos = bnext + 1;
        }
    }

    if (action_markers == 0)
        throw Error(ErrorCode::missing_action, "no Action in response");
    if (action_markers > 1)
        throw Error(ErrorCode::multiple_actions,
                    std::to_string(action_markers) + " actions in one response");
    parsed.thought = std::string(detail::trim_view(thought));
    parsed.action = parse_action(*action_text);
    return parsed;
}

namespace detail {

inline std::string escape_result(std::string_view value) {
    std::string out;
    for (char c : value) {
        if (c == '\\' || c == '"') out += '\\';
        out += c;
    }
    return out;
}

inline std::string fenced(std::string_view code) {
    std::string out = "```python\n";
    out += code;
    if (!code.empty()) out += '\n';
    out += "```";
    return out;
}

} // namespace detail

inline std::string render_action(const AgentAction& action) {
    struct Visitor {
        std::string operator()(const NotebookBlockAction& a) {
            return "NotebookBlock():\n" + detail::fenced(a.code);
        }
        std::string operator()(const ToolRequestAction& a) {
            nlohmann::json body = {
                {"action_name", "tool_request"},
                {"argument", {{"request", a.requests}}},
            };
            return body.dump(4);
        }
        std::string operator()(const TerminateAction& a) {
            return "Terminate(result=\"" + detail::escape_result(a.result) + "\")";
        }
        std::string operator()(const CreateToolAction& a) {
            return "Create_tool(tool_name=\"" + a.name + "\"):\n" + detail::fenced(a.code);
        }
        std::string operator()(const EditToolAction& a) {
            return "Edit_tool(tool_name=\"" + a.name + "\"):\n" + detail::fenced(a.code);
        }
        std::string operator()(const FeedbackAction& a) {
            nlohmann::json body = {
                {"action_name", "Feedback"},
                {"argument", {{"feedback", a.feedback}, {"passed", a.passed}}},
            };
            return body.dump(4);
        }
        std::string operator()(const ReturnToolAction& a) {
            nlohmann::json body = {{"tool_name", a.tool_name}};
            return "Tool: " + body.dump(4);
        }
        std::string operator()(const PythonFileAction& a) {
            return "Python(file_path=\"" + a.path + "\"):\n" + detail::fenced(a.code);
        }
    };
    return std::visit(Visitor{}, action);
}

struct RenderedTemplate {
    std::string text;
    std::vector<std::string> missing; // placeholder names left unreplaced
};

inline RenderedTemplate render_template(
    std::string_view tmpl, const std::map<std::string, std::string>& slots) {
    RenderedTemplate out;
    auto is_name_char = [](char c) {
        return (std::isalnum(static_cast<unsigned char>(c)) != 0) || c == '_';
    };
    size_t pos = 0;
    while (pos < tmpl.size()) {
        size_t open = tmpl.find("===", pos);
        if (open == std::string_view::npos) {
            out.text += tmpl.substr(pos);
            break;
        }
        out.text += tmpl.substr(pos, open - pos);
        size_t name_start = open + 3;
        size_t name_end = name_start;
        while (name_end < tmpl.size() && is_name_char(tmpl[name_end])) ++name_end;
        if (name_end > name_start && tmpl.substr(name_end, 3) == "===") {
            std::string name(tmpl.substr(name_start, name_end - name_start));
            auto slot = slots.find(name);
            if (slot != slots.end()) {
                out.text += slot->second;
            } else {
                out.text += tmpl.substr(open, name_end + 3 - open);
                if (std::find(out.missing.begin(), out.missing.end(), name) == out.missing.end())
                    out.missing.push_back(name);
            }
            pos = name_end + 3;
        } else {
            out.text += "===";
            pos = open + 3;
        }
    }
    return out;
}

} // namespace toolgraph
