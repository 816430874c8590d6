#pragma once

#include <cctype>
#include <chrono>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "toolgraph/errors.hpp"
#include "toolgraph/graph.hpp"

namespace toolgraph {

struct CheckResult {
    bool passed = false;
    std::string feedback;
};

// Two-step self-check: a principles review of the draft's shape, then a
// bug-free check of its behavior.
class Checker {
public:
    virtual ~Checker() = default;
    virtual CheckResult principles_review(const ToolDraft& draft, const ToolGraph& graph) = 0;
    virtual CheckResult bug_free(const ToolDraft& draft) = 0;
};

class NoopChecker final : public Checker {
public:
    CheckResult principles_review(const ToolDraft&, const ToolGraph&) override {
        return {true, ""};
    }
    CheckResult bug_free(const ToolDraft&) override { return {true, ""}; }
};

namespace detail {

inline bool is_identifier(std::string_view name) {
    if (name.empty()) return false;
    if (std::isalpha(static_cast<unsigned char>(name.front())) == 0 && name.front() != '_')
        return false;
    for (char c : name)
        if (std::isalnum(static_cast<unsigned char>(c)) == 0 && c != '_') return false;
    return true;
}

// Finds `def name(` or `function name(` and reports the declared name.
inline std::optional<std::string> declared_function_name(std::string_view source) {
    const std::vector<Token> toks = tokenize_source(source);
    for (size_t i = 0; i + 2 < toks.size(); ++i) {
        if (toks[i].kind != TokenKind::identifier) continue;
        if (toks[i].text != "def" && toks[i].text != "function") continue;
        if (toks[i + 1].kind == TokenKind::identifier && toks[i + 2].text == "(")
            return toks[i + 1].text;
    }
    return std::nullopt;
}

} // namespace detail

// Reviews the guiding principles statically: a clear identifier name, a
// docstring, an explicit parameter list, and resolvable dependencies.
class StaticChecker : public Checker {
public:
    CheckResult principles_review(const ToolDraft& draft, const ToolGraph& graph) override {
        std::vector<std::string> problems;
        if (!detail::is_identifier(draft.name))
            problems.push_back("name '" + draft.name + "' is not a valid identifier");
        if (draft.docstring.empty())
            problems.push_back("docstring is empty");
        auto declared = detail::declared_function_name(draft.source);
        if (!declared)
            problems.push_back("source declares no function, so no parameter list is visible");
        else if (*declared != draft.name)
            problems.push_back("source defines '" + *declared + "' but the tool is named '" +
                               draft.name + "'");
        const auto names = known_names(graph);
        for (const std::string& dep : draft.declared_deps)
            if (!names.contains(dep))
                problems.push_back("declared dependency '" + dep + "' is not in the library");
        if (problems.empty()) return {true, ""};
        std::string feedback;
        for (size_t i = 0; i < problems.size(); ++i) {
            if (i > 0) feedback += "; ";
            feedback += problems[i];
        }
        return {false, feedback};
    }

    CheckResult bug_free(const ToolDraft&) override { return {true, ""}; }
};

// Runs a configured shell command on the draft source; exit status 0 passes.
// The command template's {file} placeholder receives a temporary file path.
class CommandChecker final : public StaticChecker {
public:
    explicit CommandChecker(std::string command_template,
                            std::chrono::milliseconds timeout = std::chrono::seconds(20))
        : command_template_(std::move(command_template)), timeout_(timeout) {}

    CheckResult bug_free(const ToolDraft& draft) override {
        char path[] = "/tmp/toolgraph_check_XXXXXX";
        int fd = ::mkstemp(path);
        if (fd < 0)
            throw Error(ErrorCode::executor_unavailable, "cannot create temporary source file");
        const std::string& src = draft.source;
        size_t written = 0;
        while (written < src.size()) {
            ssize_t n = ::write(fd, src.data() + written, src.size() - written);
            if (n <= 0) {
                ::close(fd);
                ::unlink(path);
                throw Error(ErrorCode::executor_unavailable, "cannot write temporary source file");
            }
            written += static_cast<size_t>(n);
        }
        ::close(fd);
        CheckResult result = run_command(substitute(command_template_, path));
        ::unlink(path);
        return result;
    }

private:
    static std::string substitute(const std::string& tmpl, const std::string& file) {
        std::string out;
        size_t pos = 0;
        while (pos < tmpl.size()) {
            size_t hit = tmpl.find("{file}", pos);
            if (hit == std::string::npos) {
                out += tmpl.substr(pos);
                break;
            }
            out += tmpl.substr(pos, hit - pos);
            out += file;
            pos = hit + 6;
        }
        return out;
    }

    CheckResult run_command(const std::string& command) const {
        int pipe_fds[2];
        if (::pipe(pipe_fds) != 0)
            throw Error(ErrorCode::executor_unavailable, "cannot open checker pipe");
        pid_t pid = ::fork();
        if (pid < 0) {
            ::close(pipe_fds[0]);
            ::close(pipe_fds[1]);
            throw Error(ErrorCode::executor_unavailable, "cannot fork checker process");
        }
        if (pid == 0) {
            ::dup2(pipe_fds[1], STDOUT_FILENO);
            ::dup2(pipe_fds[1], STDERR_FILENO);
            ::close(pipe_fds[0]);
            ::close(pipe_fds[1]);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(pipe_fds[1]);

        std::string output;
        bool timed_out = false;
        const auto deadline = std::chrono::steady_clock::now() + timeout_;
        ::fcntl(pipe_fds[0], F_SETFL, O_NONBLOCK);
        int status = 0;
        bool exited = false;
        while (!exited) {
            char buf[1024];
            ssize_t n;
            while ((n = ::read(pipe_fds[0], buf, sizeof buf)) > 0)
                if (output.size() < kFeedbackLimit)
                    output.append(buf, buf + std::min<size_t>(static_cast<size_t>(n),
                                                              kFeedbackLimit - output.size()));
            pid_t done = ::waitpid(pid, &status, WNOHANG);
            if (done == pid) {
                exited = true;
                break;
            }
            if (std::chrono::steady_clock::now() > deadline) {
                ::kill(pid, SIGKILL);
                ::waitpid(pid, &status, 0);
                timed_out = true;
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        char buf[1024];
        ssize_t n;
        while ((n = ::read(pipe_fds[0], buf, sizeof buf)) > 0)
            if (output.size() < kFeedbackLimit)
                output.append(buf, buf + std::min<size_t>(static_cast<size_t>(n),
                                                          kFeedbackLimit - output.size()));
        ::close(pipe_fds[0]);

        if (timed_out) return {false, "checker timed out"};
        if (WIFEXITED(status) && WEXITSTATUS(status) == 127)
            throw Error(ErrorCode::executor_unavailable,
                        "checker command could not start: " + command);
        const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
        return {ok, output};
    }

    static constexpr size_t kFeedbackLimit = 4096;
    std::string command_template_;
    std::chrono::milliseconds timeout_;
};

} // namespace toolgraph
