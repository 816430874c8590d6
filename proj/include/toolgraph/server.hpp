#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include <httplib.h>

#include "toolgraph/embedding.hpp"
#include "toolgraph/errors.hpp"
#include "toolgraph/rank.hpp"
#include "toolgraph/serialize.hpp"

namespace toolgraph {

// Read-only retrieval service over a graph file. Requests run against an
// immutable snapshot; POST /reload swaps in a freshly loaded one atomically
// and keeps the old snapshot when loading fails.
class GraphServer {
public:
    GraphServer(std::string graph_path, EmbeddingProvider& provider)
        : graph_path_(std::move(graph_path)), provider_(provider) {
        swap_snapshot(build_snapshot());
        install_routes();
    }

    // Binds to an OS-assigned port; returns the port. For tests and local use.
    int bind_any(const std::string& host) {
        int port = http_.bind_to_any_port(host);
        if (port <= 0)
            throw Error(ErrorCode::transport_error, "cannot bind " + host);
        return port;
    }

    bool listen_after_bind() { return http_.listen_after_bind(); }

    bool listen(const std::string& host, int port) { return http_.listen(host, port); }

    void stop() { http_.stop(); }

private:
    struct Snapshot {
        ToolGraph graph;
        PipelineConfig config;
        std::string document; // canonical graph text
        std::string stats;    // stats report text
    };

    std::shared_ptr<const Snapshot> build_snapshot() {
        LoadedDocument loaded = load(graph_path_);
        auto snap = std::make_shared<Snapshot>();
        snap->graph = std::move(loaded.graph);
        snap->config = loaded.config;
        warm_embeddings(snap->graph, provider_);
        snap->document = save_string(snap->graph, snap->config);
        snap->stats = render_stats(snap->graph);
        return snap;
    }

    void swap_snapshot(std::shared_ptr<const Snapshot> next) {
        std::lock_guard<std::mutex> lock(mutex_);
        snapshot_ = std::move(next);
    }

    std::shared_ptr<const Snapshot> snapshot() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return snapshot_;
    }

    void install_routes() {
        http_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("ok", "text/plain");
        });

        http_.Get("/graph", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(snapshot()->document, "application/json");
        });

        http_.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(snapshot()->stats, "application/json");
        });

        http_.Get("/retrieve", [this](const httplib::Request& req, httplib::Response& res) {
            auto fail = [&res](const std::string& why) {
                res.status = 400;
                res.set_content(why + "\n", "text/plain");
            };
            if (!req.has_param("q") || req.get_param_value("q").empty())
                return fail("missing query param q");
            if (!req.has_param("k")) return fail("missing query param k");
            int k = 0;
            try {
                k = std::stoi(req.get_param_value("k"));
            } catch (const std::exception&) {
                return fail("k is not an integer");
            }
            if (k < 1) return fail("k must be at least 1");
            auto snap = snapshot();
            double d = snap->config.damping;
            if (req.has_param("d")) {
                try {
                    d = std::stod(req.get_param_value("d"));
                } catch (const std::exception&) {
                    return fail("d is not a number");
                }
                if (d < 0.0 || d >= 1.0) return fail("d must lie in [0, 1)");
            }
            const std::string query = req.get_param_value("q");
            try {
                auto results = retrieve(snap->graph, query, k, d, provider_);
                std::string body = "{\n  \"query\": \"" + detail::json_escape(query) +
                                   "\",\n  \"k\": " + std::to_string(k) +
                                   ",\n  \"d\": " + detail::format_double(d) +
                                   ",\n  \"results\": [";
                bool first = true;
                for (const RetrievedTool& r : results) {
                    body += first ? "\n" : ",\n";
                    first = false;
                    body += "    {\"id\": " + std::to_string(r.id) + ", \"name\": \"" +
                            detail::json_escape(snap->graph.node(r.id).name) +
                            "\", \"score\": " + detail::format_double(r.score) + "}";
                }
                body += first ? "]\n}\n" : "\n  ]\n}\n";
                res.set_content(body, "application/json");
            } catch (const Error& e) {
                fail(e.what());
            }
        });

        http_.Post("/reload", [this](const httplib::Request&, httplib::Response& res) {
            try {
                swap_snapshot(build_snapshot());
                res.set_content("reloaded\n", "text/plain");
            } catch (const std::exception& e) {
                res.status = 503;
                res.set_content(std::string(e.what()) + "\n", "text/plain");
            }
        });
    }

    std::string graph_path_;
    EmbeddingProvider& provider_;
    httplib::Server http_;
    mutable std::mutex mutex_;
    std::shared_ptr<const Snapshot> snapshot_;
};

} // namespace toolgraph
