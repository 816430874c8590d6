#pragma once

#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolgraph/align.hpp"
#include "toolgraph/checkers.hpp"
#include "toolgraph/embedding.hpp"
#include "toolgraph/errors.hpp"
#include "toolgraph/graph.hpp"
#include "toolgraph/rank.hpp"

namespace toolgraph {

struct ToolRequirement {
    std::string text;
    std::string task_id;
};

struct ReturnExisting {
    NodeId id = kNoNode;
};

struct CreateDecision {
    ToolDraft draft;
};

using Decision = std::variant<ReturnExisting, CreateDecision>;

// The creative side of the pipeline. Implementations answer three kinds of
// requests; scripted ones replay a recorded sequence deterministically.
class Synthesizer {
public:
    virtual ~Synthesizer() = default;
    virtual Decision decide(const ToolRequirement& req, const std::vector<RetrievedTool>& retrieved,
                            const ToolGraph& graph) = 0;
    virtual ToolDraft refine(const ToolDraft& draft, const std::string& feedback) = 0;
    virtual ToolDraft merge(const ToolDraft& draft,
                            const std::vector<MergeCandidate>& candidates,
                            const ToolGraph& graph) = 0;
};

struct PipelineConfig {
    int k = 5;
    double damping = kDefaultDamping;
    double merge_threshold = kDefaultMergeThreshold;
    int max_checks = 2;
    int prune_period = 40;
    AlignScoring scoring{};
    bool lifetime_usage = false; // prune on usage_total instead of usage_window
};

struct RequirementOutcome {
    enum class Kind { returned_existing, created, rejected };
    Kind kind = Kind::rejected;
    std::optional<NodeId> existing;     // returned_existing
    std::optional<ToolDraft> candidate; // created: validated, not yet inserted
    // Graph nodes the candidate absorbed in a merge, keyed by candidate name.
    RedundancyMap redundancy;
    std::vector<std::string> feedback_log;
    int refine_rounds = 0;
};

// One requirement through retrieve, return-or-create, merge scan, and the
// two-step self-check. The graph is read, never written; insertion and
// redundant removal happen in update_after_task once the task succeeds.
inline RequirementOutcome process_requirement(const ToolGraph& graph, const ToolRequirement& req,
                                              Synthesizer& synth, Checker& checker,
                                              EmbeddingProvider& provider,
                                              const PipelineConfig& config = {}) {
    if (req.text.empty())
        throw Error(ErrorCode::invalid_config, "requirement text is empty");
    if (config.max_checks < 1)
        throw Error(ErrorCode::invalid_config, "max_checks must be at least 1");

    std::vector<RetrievedTool> retrieved;
    if (!graph.empty())
        retrieved = retrieve(graph, req.text, config.k, config.damping, provider);

    Decision decision = synth.decide(req, retrieved, graph);
    RequirementOutcome outcome;

    if (std::holds_alternative<ReturnExisting>(decision)) {
        NodeId id = std::get<ReturnExisting>(decision).id;
        if (!graph.contains(id))
            throw Error(ErrorCode::synthesizer_error,
                        "decision returned unknown tool id " + std::to_string(id));
        outcome.kind = RequirementOutcome::Kind::returned_existing;
        outcome.existing = id;
        return outcome;
    }

    ToolDraft draft = std::get<CreateDecision>(decision).draft;
    if (draft.name.empty())
        throw Error(ErrorCode::synthesizer_error, "created tool has an empty name");

    auto candidates =
        scan_redundant_source(graph, draft.source, config.merge_threshold, config.scoring);
    if (!candidates.empty()) {
        draft = synth.merge(draft, candidates, graph);
        if (draft.name.empty())
            throw Error(ErrorCode::synthesizer_error, "merged tool has an empty name");
        std::set<NodeId>& absorbed = outcome.redundancy[draft.name];
        for (const MergeCandidate& c : candidates) absorbed.insert(c.existing_tool);
    }

    for (int attempt = 1; attempt <= config.max_checks; ++attempt) {
        CheckResult principles = checker.principles_review(draft, graph);
        CheckResult bugfree = principles.passed ? checker.bug_free(draft) : CheckResult{};
        if (principles.passed && bugfree.passed) {
            outcome.kind = RequirementOutcome::Kind::created;
            outcome.candidate = draft;
            return outcome;
        }
        std::string feedback = principles.passed ? bugfree.feedback : principles.feedback;
        outcome.feedback_log.push_back(feedback);
        if (attempt < config.max_checks) {
            draft = synth.refine(draft, feedback);
            ++outcome.refine_rounds;
        }
    }
    outcome.kind = RequirementOutcome::Kind::rejected;
    outcome.redundancy.clear();
    return outcome;
}

// Level-adaptive usage threshold: lambda(L) * log10(C) with
// lambda(L) = 1 / (1 + 0.8 * log2(L)).
inline double prune_threshold(int period, int layer) {
    if (period < 2)
        throw Error(ErrorCode::invalid_config, "prune period must be at least 2");
    if (layer < 1)
        throw Error(ErrorCode::invalid_config, "layer must be at least 1");
    return std::log10(static_cast<double>(period)) /
           (1.0 + 0.8 * std::log2(static_cast<double>(layer)));
}

struct PruneReport {
    std::vector<NodeId> removed;
    std::map<int, double> thresholds; // layer -> tau applied
    long survivors = 0;
    long at_iter = 0;
};

// Removes composed tools whose usage fell below the level-adaptive threshold,
// keeping every dependency of a kept node. Survivor windows reset.
inline PruneReport prune(ToolGraph& graph, int period, bool lifetime_usage = false) {
    PruneReport report;
    report.at_iter = graph.iter();

    std::set<NodeId> keep;
    for (auto& [id, node] : graph.nodes()) {
        if (node.kind == ToolKind::basic) {
            keep.insert(id);
            continue;
        }
        const double tau = prune_threshold(period, node.layer);
        report.thresholds.emplace(node.layer, tau);
        const long usage = lifetime_usage ? node.usage_total : node.usage_window;
        if (static_cast<double>(usage) >= tau) keep.insert(id);
    }
    std::set<NodeId> closed = keep;
    for (NodeId id : keep)
        for (NodeId dep : graph.dependency_closure(id)) closed.insert(dep);

    std::vector<ToolNode> kept_nodes;
    for (auto& [id, node] : graph.nodes()) {
        if (!closed.count(id)) {
            report.removed.push_back(id);
            continue;
        }
        ToolNode copy = node;
        copy.usage_window = 0;
        kept_nodes.push_back(std::move(copy));
    }

    EdgeSet kept_edges;
    for (const ToolNode& node : kept_nodes)
        for (NodeId dep : node.deps) kept_edges.insert(make_edge(node.id, dep));

    graph = ToolGraph::from_parts(std::move(kept_nodes), std::move(kept_edges), graph.iter(),
                                  graph.iter());
    report.survivors = static_cast<long>(graph.nodes().size());
    return report;
}

// Replay events.
struct TaskStartEvent {
    std::string task_id;
};
struct RequirementEvent {
    std::string text;
};
struct ScriptedStep {
    enum class Kind { return_existing, create, refine, merge };
    Kind kind = Kind::create;
    std::string name; // return_existing: tool name; otherwise draft name
    ToolDraft draft;
};
struct UseEvent {
    std::string name;
};
struct TaskEndEvent {
    bool correct = false;
};
using TraceEvent =
    std::variant<TaskStartEvent, RequirementEvent, ScriptedStep, UseEvent, TaskEndEvent>;

// Replays a recorded step sequence; every call consumes the next step and a
// kind mismatch means the trace and the pipeline got out of sync.
class ScriptedSynthesizer final : public Synthesizer {
public:
    void push(ScriptedStep step) { steps_.push_back(std::move(step)); }
    size_t remaining() const { return steps_.size(); }

    Decision decide(const ToolRequirement&, const std::vector<RetrievedTool>&,
                    const ToolGraph& graph) override {
        ScriptedStep step = pop("decide");
        if (step.kind == ScriptedStep::Kind::return_existing) {
            auto id = graph.find_by_name(step.name);
            if (!id)
                throw Error(ErrorCode::synthesizer_error,
                            "scripted return of unknown tool '" + step.name + "'");
            return ReturnExisting{*id};
        }
        if (step.kind == ScriptedStep::Kind::create) return CreateDecision{step.draft};
        throw Error(ErrorCode::synthesizer_error, "scripted step is not a decision");
    }

    ToolDraft refine(const ToolDraft&, const std::string&) override {
        ScriptedStep step = pop("refine");
        if (step.kind != ScriptedStep::Kind::refine)
            throw Error(ErrorCode::synthesizer_error, "scripted step is not a refinement");
        return step.draft;
    }

    ToolDraft merge(const ToolDraft&, const std::vector<MergeCandidate>&,
                    const ToolGraph&) override {
        ScriptedStep step = pop("merge");
        if (step.kind != ScriptedStep::Kind::merge)
            throw Error(ErrorCode::synthesizer_error, "scripted step is not a merge");
        return step.draft;
    }

private:
    ScriptedStep pop(const char* what) {
        if (steps_.empty())
            throw Error(ErrorCode::synthesizer_error,
                        std::string("script exhausted at ") + what + " call");
        ScriptedStep step = std::move(steps_.front());
        steps_.pop_front();
        return step;
    }

    std::deque<ScriptedStep> steps_;
};

// Builds the synthesizer a trace expects by collecting its scripted steps.
inline ScriptedSynthesizer scripted_from_events(const std::vector<TraceEvent>& events) {
    ScriptedSynthesizer synth;
    for (const TraceEvent& event : events)
        if (std::holds_alternative<ScriptedStep>(event)) synth.push(std::get<ScriptedStep>(event));
    return synth;
}

namespace detail {

inline ToolDraft draft_from_json(const nlohmann::json& j, size_t index) {
    ToolDraft draft;
    if (!j.contains("name") || !j["name"].is_string() || !j.contains("docstring") ||
        !j.contains("source"))
        throw Error(ErrorCode::malformed_trace,
                    "event " + std::to_string(index) + ": draft needs name/docstring/source");
    draft.name = j["name"].get<std::string>();
    draft.docstring = j["docstring"].get<std::string>();
    draft.source = j["source"].get<std::string>();
    if (j.contains("deps"))
        for (const auto& dep : j["deps"]) draft.declared_deps.push_back(dep.get<std::string>());
    return draft;
}

} // namespace detail

// Reads a JSON-lines trace. Each line is one event object with a `kind` tag.
inline std::vector<TraceEvent> parse_trace(std::istream& in) {
    std::vector<TraceEvent> events;
    std::string line;
    size_t index = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::malformed_trace,
                        "event " + std::to_string(index) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
            throw Error(ErrorCode::malformed_trace,
                        "event " + std::to_string(index) + ": missing kind tag");
        const std::string kind = j["kind"].get<std::string>();
        if (kind == "task_start") {
            if (!j.contains("task_id") || !j["task_id"].is_string())
                throw Error(ErrorCode::malformed_trace,
                            "event " + std::to_string(index) + ": task_start needs task_id");
            events.push_back(TaskStartEvent{j["task_id"].get<std::string>()});
        } else if (kind == "requirement") {
            if (!j.contains("text") || !j["text"].is_string() || j["text"].get<std::string>().empty())
                throw Error(ErrorCode::malformed_trace,
                            "event " + std::to_string(index) + ": requirement needs text");
            events.push_back(RequirementEvent{j["text"].get<std::string>()});
        } else if (kind == "decision") {
            if (!j.contains("type") || !j["type"].is_string())
                throw Error(ErrorCode::malformed_trace,
                            "event " + std::to_string(index) + ": decision needs type");
            const std::string type = j["type"].get<std::string>();
            ScriptedStep step;
            if (type == "return_existing") {
                step.kind = ScriptedStep::Kind::return_existing;
                if (!j.contains("name") || !j["name"].is_string())
                    throw Error(ErrorCode::malformed_trace,
                                "event " + std::to_string(index) + ": return_existing needs name");
                step.name = j["name"].get<std::string>();
            } else if (type == "create" || type == "refine" || type == "merge") {
                step.kind = type == "create"  ? ScriptedStep::Kind::create
                            : type == "refine" ? ScriptedStep::Kind::refine
                                               : ScriptedStep::Kind::merge;
                step.draft = detail::draft_from_json(j, index);
                step.name = step.draft.name;
            } else {
                throw Error(ErrorCode::malformed_trace,
                            "event " + std::to_string(index) + ": unknown decision type " + type);
            }
            events.push_back(step);
        } else if (kind == "use") {
            if (!j.contains("name") || !j["name"].is_string())
                throw Error(ErrorCode::malformed_trace,
                            "event " + std::to_string(index) + ": use needs name");
            events.push_back(UseEvent{j["name"].get<std::string>()});
        } else if (kind == "task_end") {
            if (!j.contains("correct") || !j["correct"].is_boolean())
                throw Error(ErrorCode::malformed_trace,
                            "event " + std::to_string(index) + ": task_end needs correct flag");
            events.push_back(TaskEndEvent{j["correct"].get<bool>()});
        } else {
            throw Error(ErrorCode::malformed_trace,
                        "event " + std::to_string(index) + ": unknown kind " + kind);
        }
        ++index;
    }
    return events;
}

inline std::vector<TraceEvent> load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open trace " + path);
    return parse_trace(in);
}

struct TaskReport {
    std::string task_id;
    bool correct = false;
    int requirements = 0;
    int returned_existing = 0;
    int created = 0;
    int rejected = 0;
    std::optional<UpdateReport> update;
};

struct TraceResult {
    std::vector<TaskReport> tasks;
    std::vector<PruneReport> prunes;
};

// Drives the whole loop: requirements advance the iteration counter, task
// success commits that task's used candidates, and pruning fires at task
// boundaries once a full period has elapsed.
inline TraceResult run_trace(ToolGraph& graph, const std::vector<TraceEvent>& events,
                             Synthesizer& synth, Checker& checker, EmbeddingProvider& provider,
                             const PipelineConfig& config = {}) {
    TraceResult result;
    bool in_task = false;
    TaskReport task;
    std::vector<UsedTool> used;
    std::map<std::string, ToolDraft> staged;   // validated drafts by name
    std::map<std::string, NodeId> returned;    // ReturnExisting results by name
    RedundancyMap redundancy;

    auto bad = [](size_t index, const std::string& why) -> Error {
        return Error(ErrorCode::malformed_trace, "event " + std::to_string(index) + ": " + why);
    };

    for (size_t i = 0; i < events.size(); ++i) {
        const TraceEvent& event = events[i];
        if (std::holds_alternative<ScriptedStep>(event)) continue;

        if (std::holds_alternative<TaskStartEvent>(event)) {
            if (in_task) throw bad(i, "task_start inside an open task");
            in_task = true;
            task = TaskReport{};
            task.task_id = std::get<TaskStartEvent>(event).task_id;
            used.clear();
            staged.clear();
            returned.clear();
            redundancy.clear();
            continue;
        }
        if (!in_task) throw bad(i, "event outside any task");

        if (std::holds_alternative<RequirementEvent>(event)) {
            graph.advance_iter();
            ++task.requirements;
            ToolRequirement req{std::get<RequirementEvent>(event).text, task.task_id};
            RequirementOutcome outcome =
                process_requirement(graph, req, synth, checker, provider, config);
            switch (outcome.kind) {
            case RequirementOutcome::Kind::returned_existing:
                ++task.returned_existing;
                returned[graph.node(*outcome.existing).name] = *outcome.existing;
                break;
            case RequirementOutcome::Kind::created:
                ++task.created;
                staged[outcome.candidate->name] = *outcome.candidate;
                for (auto& [name, ids] : outcome.redundancy)
                    redundancy[name].insert(ids.begin(), ids.end());
                break;
            case RequirementOutcome::Kind::rejected:
                ++task.rejected;
                break;
            }
            continue;
        }
        if (std::holds_alternative<UseEvent>(event)) {
            const std::string& name = std::get<UseEvent>(event).name;
            if (auto it = staged.find(name); it != staged.end()) {
                used.push_back(it->second);
            } else if (auto rit = returned.find(name); rit != returned.end()) {
                used.push_back(rit->second);
            } else if (auto id = graph.find_by_name(name)) {
                used.push_back(*id);
            } else {
                throw bad(i, "use of unknown tool '" + name + "'");
            }
            continue;
        }

        const auto& end = std::get<TaskEndEvent>(event);
        task.correct = end.correct;
        if (end.correct) task.update = update_after_task(graph, used, redundancy);
        result.tasks.push_back(task);
        in_task = false;
        if (graph.iter() - graph.last_prune_iter() >= config.prune_period)
            result.prunes.push_back(prune(graph, config.prune_period, config.lifetime_usage));
    }
    if (in_task) throw bad(events.size(), "trace ends inside an open task");
    return result;
}

} // namespace toolgraph
