#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <toolgraph/toolgraph.hpp>

namespace {

using namespace toolgraph;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::unique_ptr<EmbeddingProvider> make_provider(const Settings& settings) {
    if (settings.provider == "remote") {
        if (settings.remote_url.empty())
            throw Error(ErrorCode::invalid_config, "provider=remote needs remote_url");
        RemoteEndpoint endpoint;
        endpoint.url = settings.remote_url;
        endpoint.model = settings.remote_model;
        endpoint.api_key_env = settings.api_key_env;
        endpoint.timeout_ms = settings.remote_timeout_ms;
        endpoint.retries = settings.remote_retries;
        return std::make_unique<RemoteEmbeddingProvider>(endpoint);
    }
    return std::make_unique<StubEmbeddingProvider>();
}

std::unique_ptr<Checker> make_checker(const std::string& command) {
    if (command.empty()) return std::make_unique<NoopChecker>();
    return std::make_unique<CommandChecker>(command);
}

void cmd_init(const std::string& graph_path, const std::string& basics_path,
              const PipelineConfig& config) {
    ToolGraph graph;
    if (!basics_path.empty()) {
        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(read_file(basics_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::invalid_config,
                        std::string("basics manifest is not valid JSON: ") + e.what());
        }
        if (!manifest.is_array())
            throw Error(ErrorCode::invalid_config, "basics manifest must be a JSON array");
        for (const auto& entry : manifest) {
            graph.add_basic_tool(entry.at("name").get<std::string>(),
                                 entry.value("docstring", std::string{}),
                                 entry.value("source", std::string{}));
        }
    }
    save(graph, graph_path, config);
    std::cout << "initialized " << graph_path << " with " << graph.nodes().size()
              << " basic tools\n";
}

void cmd_add_basic(const std::string& graph_path, const std::string& name,
                   const std::string& docstring, const std::string& source_file) {
    LoadedDocument doc = load(graph_path);
    const std::string source = source_file.empty() ? std::string{} : read_file(source_file);
    NodeId id = doc.graph.add_basic_tool(name, docstring, source);
    save(doc.graph, graph_path, doc.config);
    std::cout << "added basic tool " << name << " as node " << id << "\n";
}

void cmd_retrieve(const std::string& graph_path, const std::string& query, int k, double d,
                  bool d_set, const Settings& settings) {
    LoadedDocument doc = load(graph_path);
    auto provider = make_provider(settings);
    const double damping = d_set ? d : doc.config.damping;
    auto results = retrieve(doc.graph, query, k, damping, *provider);
    for (const RetrievedTool& r : results)
        std::cout << doc.graph.node(r.id).name << "\t" << detail::format_double(r.score) << "\n";
}

void cmd_replay(const std::string& graph_path, const std::string& trace_path,
                const std::string& out_path, const Settings& settings) {
    LoadedDocument doc = load(graph_path);
    PipelineConfig config = settings.pipeline;
    auto provider = make_provider(settings);
    auto checker = make_checker(settings.checker_command);
    std::vector<TraceEvent> events = load_trace(trace_path);
    ScriptedSynthesizer synth = scripted_from_events(events);

    TraceResult result = run_trace(doc.graph, events, synth, *checker, *provider, config);

    int correct = 0, created = 0, returned = 0, rejected = 0, requirements = 0;
    for (const TaskReport& t : result.tasks) {
        if (t.correct) ++correct;
        requirements += t.requirements;
        created += t.created;
        returned += t.returned_existing;
        rejected += t.rejected;
    }
    long composed = 0;
    for (auto& [id, node] : doc.graph.nodes())
        if (node.kind == ToolKind::composed) ++composed;

    std::cout << "tasks: " << result.tasks.size() << " (correct " << correct << ")\n";
    std::cout << "requirements: " << requirements << " (created " << created << ", returned "
              << returned << ", rejected " << rejected << ")\n";
    std::cout << "prunes: " << result.prunes.size() << "\n";
    std::cout << "final nodes: " << doc.graph.nodes().size() << " (composed " << composed
              << ")\n";

    const std::string target = out_path.empty() ? graph_path : out_path;
    save(doc.graph, target, config);
}

void cmd_prune(const std::string& graph_path, int period, const Settings& settings) {
    LoadedDocument doc = load(graph_path);
    PruneReport report = prune(doc.graph, period, settings.pipeline.lifetime_usage);
    save(doc.graph, graph_path, doc.config);
    std::cout << "removed " << report.removed.size() << ", surviving " << report.survivors
              << "\n";
}

void cmd_merge_scan(const std::string& graph_path, const std::string& tool_name, double theta) {
    LoadedDocument doc = load(graph_path);
    auto id = doc.graph.find_by_name(tool_name);
    if (!id) throw Error(ErrorCode::unknown_tool, "no tool named " + tool_name);
    auto candidates = scan_redundant(doc.graph, *id, theta, doc.config.scoring);
    for (const MergeCandidate& c : candidates)
        std::cout << doc.graph.node(c.existing_tool).name << "\t"
                  << detail::format_double(c.similarity) << "\n";
}

void cmd_export_dot(const std::string& graph_path, const std::string& out_path,
                    bool exclude_basic) {
    LoadedDocument doc = load(graph_path);
    DotOptions options;
    options.exclude_basic = exclude_basic;
    const std::string dot = export_dot_string(doc.graph, options);
    if (out_path.empty()) {
        std::cout << dot;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw Error(ErrorCode::io_error, "cannot open " + out_path + " for writing");
        out << dot;
    }
}

nlohmann::json action_to_event(const AgentAction& action) {
    nlohmann::json j;
    if (const auto* a = std::get_if<ToolRequestAction>(&action)) {
        j = {{"kind", "action"}, {"type", "tool_request"}, {"requests", a->requests}};
    } else if (const auto* a = std::get_if<CreateToolAction>(&action)) {
        j = {{"kind", "decision"}, {"type", "create"}, {"name", a->name}, {"docstring", ""},
             {"source", a->code}};
    } else if (const auto* a = std::get_if<EditToolAction>(&action)) {
        j = {{"kind", "decision"}, {"type", "refine"}, {"name", a->name}, {"docstring", ""},
             {"source", a->code}};
    } else if (const auto* a = std::get_if<ReturnToolAction>(&action)) {
        j = {{"kind", "decision"}, {"type", "return_existing"}, {"name", a->tool_name}};
    } else if (const auto* a = std::get_if<NotebookBlockAction>(&action)) {
        j = {{"kind", "action"}, {"type", "notebook_block"}, {"code", a->code}};
    } else if (const auto* a = std::get_if<TerminateAction>(&action)) {
        j = {{"kind", "action"}, {"type", "terminate"}, {"result", a->result}};
    } else if (const auto* a = std::get_if<FeedbackAction>(&action)) {
        j = {{"kind", "action"}, {"type", "feedback"}, {"feedback", a->feedback},
             {"passed", a->passed}};
    } else if (const auto* a = std::get_if<PythonFileAction>(&action)) {
        j = {{"kind", "action"}, {"type", "python_file"}, {"path", a->path}, {"code", a->code}};
    }
    return j;
}

void cmd_parse_actions(const std::string& transcript_path) {
    const std::string text = read_file(transcript_path);

    // Responses separated by lines of exactly ---; a single-response file
    // needs no separator.
    std::vector<std::string> chunks;
    std::string current;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string bare = line;
        if (!bare.empty() && bare.back() == '\r') bare.pop_back();
        if (bare == "---") {
            chunks.push_back(current);
            current.clear();
        } else {
            current += bare;
            current += '\n';
        }
    }
    chunks.push_back(current);

    for (const std::string& chunk : chunks) {
        if (chunk.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        AgentAction action;
        nlohmann::json event;
        try {
            ParsedResponse parsed = parse_response(chunk);
            event = action_to_event(parsed.action);
            if (parsed.stage) event["stage"] = *parsed.stage;
            if (!parsed.thought.empty()) event["thought"] = parsed.thought;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::missing_action) throw;
            action = parse_action(chunk);
            event = action_to_event(action);
        }
        std::cout << event.dump() << "\n";
    }
}

void cmd_stats(const std::string& graph_path) {
    LoadedDocument doc = load(graph_path);
    std::cout << render_stats(doc.graph);
}

void cmd_serve(const std::string& graph_path, const std::string& addr,
               const Settings& settings) {
    auto provider = make_provider(settings);
    std::string host = addr;
    int port = 8080;
    if (size_t colon = addr.rfind(':'); colon != std::string::npos) {
        host = addr.substr(0, colon);
        try {
            port = std::stoi(addr.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error(ErrorCode::invalid_config, "bad port in address " + addr);
        }
    }
    GraphServer server(graph_path, *provider);
    std::cerr << "serving " << graph_path << " on " << host << ":" << port << "\n";
    if (!server.listen(host, port))
        throw Error(ErrorCode::transport_error, "cannot listen on " + host + ":" +
                                                    std::to_string(port));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"layered tool graph with ranked retrieval, merging, and pruning"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "key=value settings file");

    std::string graph_path, basics_path, query, trace_path, out_path, tool_name;
    std::string name, docstring, source_file, transcript_path, checker_cmd;
    std::string addr = "127.0.0.1:8080";
    int k = 5, period = 40;
    double d = kDefaultDamping, theta = kDefaultMergeThreshold;
    bool exclude_basic = false;

    auto* init = app.add_subcommand("init", "create a new graph file");
    init->add_option("--graph", graph_path, "graph file to create")->required();
    init->add_option("--basics", basics_path, "JSON array of basic tools");

    auto* add_basic = app.add_subcommand("add-basic", "add one basic tool");
    add_basic->add_option("--graph", graph_path)->required();
    add_basic->add_option("--name", name)->required();
    add_basic->add_option("--docstring", docstring);
    add_basic->add_option("--source-file", source_file);

    auto* retrieve_cmd = app.add_subcommand("retrieve", "rank tools for a query");
    retrieve_cmd->add_option("--graph", graph_path)->required();
    retrieve_cmd->add_option("--query", query)->required();
    retrieve_cmd->add_option("--k", k);
    auto* d_opt = retrieve_cmd->add_option("--d", d, "damping in [0,1)");

    auto* replay = app.add_subcommand("replay", "run a recorded trace");
    replay->add_option("--graph", graph_path)->required();
    replay->add_option("--trace", trace_path)->required();
    replay->add_option("--checker", checker_cmd, "bug-free checker command with {file}");
    replay->add_option("--out", out_path, "write result here instead of --graph");

    auto* prune_cmd = app.add_subcommand("prune", "apply the usage threshold now");
    prune_cmd->add_option("--graph", graph_path)->required();
    prune_cmd->add_option("--period", period);

    auto* merge_scan = app.add_subcommand("merge-scan", "list redundancy candidates");
    merge_scan->add_option("--graph", graph_path)->required();
    merge_scan->add_option("--tool", tool_name)->required();
    merge_scan->add_option("--theta", theta);

    auto* stats = app.add_subcommand("stats", "complexity and layer report");
    stats->add_option("--graph", graph_path)->required();

    auto* export_dot_cmd = app.add_subcommand("export-dot", "graph visualization text");
    export_dot_cmd->add_option("--graph", graph_path)->required();
    export_dot_cmd->add_option("--out", out_path, "output path (default stdout)");
    export_dot_cmd->add_flag("--exclude-basic", exclude_basic);

    auto* parse_actions_cmd = app.add_subcommand("parse-actions", "transcript to event lines");
    parse_actions_cmd->add_option("--transcript", transcript_path)->required();

    auto* serve = app.add_subcommand("serve", "read-only web API");
    serve->add_option("--graph", graph_path)->required();
    serve->add_option("--addr", addr, "host:port (default 127.0.0.1:8080)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "usage error: " << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    try {
        Settings settings;
        if (!config_path.empty()) settings = load_settings(config_path);

        if (init->parsed()) {
            cmd_init(graph_path, basics_path, settings.pipeline);
        } else if (add_basic->parsed()) {
            cmd_add_basic(graph_path, name, docstring, source_file);
        } else if (retrieve_cmd->parsed()) {
            cmd_retrieve(graph_path, query, k, d, d_opt->count() > 0, settings);
        } else if (replay->parsed()) {
            if (!checker_cmd.empty()) settings.checker_command = checker_cmd;
            cmd_replay(graph_path, trace_path, out_path, settings);
        } else if (prune_cmd->parsed()) {
            cmd_prune(graph_path, period, settings);
        } else if (merge_scan->parsed()) {
            cmd_merge_scan(graph_path, tool_name, theta);
        } else if (stats->parsed()) {
            cmd_stats(graph_path);
        } else if (export_dot_cmd->parsed()) {
            cmd_export_dot(graph_path, out_path, exclude_basic);
        } else if (parse_actions_cmd->parsed()) {
            cmd_parse_actions(transcript_path);
        } else if (serve->parsed()) {
            cmd_serve(graph_path, addr, settings);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
