#pragma once

// HTTP/JSON front end: asynchronous optimization jobs on a bounded worker
// pool, ruling validation and plane-chain extension for interactive design.

#include "devruled/io.hpp"
#include "devruled/jobs.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace devruled {

inline constexpr int kDefaultPort = 8080;
inline constexpr const char* kPortEnvironment = "DEVRULED_PORT";

/// Port from the environment, or the built-in default.
inline int default_port() {
    if (const char* env = std::getenv(kPortEnvironment)) {
        try {
            const int p = std::stoi(env);
            if (p > 0 && p < 65536) return p;
        } catch (const std::exception&) {
        }
    }
    return kDefaultPort;
}

enum class JobStatus { Queued, Running, Done, Failed };

inline const char* to_string(JobStatus s) noexcept {
    switch (s) {
        case JobStatus::Queued: return "queued";
        case JobStatus::Running: return "running";
        case JobStatus::Done: return "done";
        case JobStatus::Failed: return "failed";
    }
    return "unknown";
}

/// Snapshot of a job, safe to read while the job runs.
struct JobView {
    std::string id;
    JobStatus status = JobStatus::Queued;
    std::string error;
    std::optional<MetricsDocument> metrics;
    std::vector<ExportedDocument> documents;
};

class JobService {
public:
    explicit JobService(unsigned workers = std::max(1u, std::thread::hardware_concurrency())) {
        for (unsigned i = 0; i < std::max(1u, workers); ++i) {
            workers_.emplace_back([this](std::stop_token st) { work(st); });
        }
    }

    ~JobService() {
        for (auto& w : workers_) w.request_stop();
        cv_.notify_all();
    }

    JobService(const JobService&) = delete;
    JobService& operator=(const JobService&) = delete;

    std::string submit(JobSpec spec) {
        spec.validate();
        std::lock_guard lock(mutex_);
        const std::string id = "job-" + std::to_string(++counter_);
        jobs_[id] = JobView{id};
        queue_.push_back({id, std::move(spec)});
        cv_.notify_one();
        return id;
    }

    [[nodiscard]] std::optional<JobView> get(const std::string& id) const {
        std::lock_guard lock(mutex_);
        const auto it = jobs_.find(id);
        if (it == jobs_.end()) return std::nullopt;
        return it->second;
    }

private:
    struct Pending {
        std::string id;
        JobSpec spec;
    };

    void work(std::stop_token st) {
        while (true) {
            Pending job;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return st.stop_requested() || !queue_.empty(); });
                if (st.stop_requested()) return;
                job = std::move(queue_.front());
                queue_.pop_front();
                jobs_[job.id].status = JobStatus::Running;
            }
            JobView done{job.id};
            try {
                JobOutcome out = run_job(job.spec);
                done.status = JobStatus::Done;
                done.metrics = metrics_document(out.result);
                done.documents = std::move(out.documents);
            } catch (const std::exception& e) {
                done.status = JobStatus::Failed;
                done.error = e.what();
            }
            std::lock_guard lock(mutex_);
            jobs_[job.id] = std::move(done);
        }
    }

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Pending> queue_;
    std::map<std::string, JobView> jobs_;
    std::uint64_t counter_ = 0;
    std::vector<std::jthread> workers_;
};

namespace detail {

inline void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2), "application/json");
}

inline void reply_error(httplib::Response& res, int status, const std::string& msg, const std::string& field = "",
                        std::size_t line = 0) {
    json body{{"error", msg}};
    if (!field.empty()) body["field"] = field;
    if (line > 0) body["line"] = line;
    reply(res, status, body);
}

inline json job_view_to_json(const JobView& v) {
    json j{{"id", v.id}, {"status", to_string(v.status)}};
    if (!v.error.empty()) j["error"] = v.error;
    if (v.metrics) j["metrics"] = metrics_to_json(*v.metrics);
    if (!v.documents.empty()) {
        json ex = json::object();
        for (const auto& d : v.documents) {
            // JSON documents are embedded as objects, the mesh as text.
            ex[to_string(d.kind)] = d.kind == ExportKind::Mesh ? json(d.text) : json::parse(d.text);
        }
        j["exports"] = std::move(ex);
    }
    return j;
}

template <class Handler>
void guarded(httplib::Response& res, Handler&& h) {
    try {
        h();
    } catch (const SchemaError& e) {
        reply_error(res, 400, e.what(), e.field(), e.line());
    } catch (const InvalidInput& e) {
        reply_error(res, 400, e.what());
    } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
    }
}

}  // namespace detail

/// Register all endpoints on `server`. `jobs` must outlive the server.
inline void install_routes(httplib::Server& server, JobService& jobs) {
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        detail::reply(res, 200, {{"status", "ok"}});
    });

    server.Post("/jobs", [&jobs](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            const std::string id = jobs.submit(parse_job(req.body));
            detail::reply(res, 202, {{"id", id}, {"status", "queued"}});
        });
    });

    server.Get(R"(/jobs/([A-Za-z0-9\-]+))", [&jobs](const httplib::Request& req, httplib::Response& res) {
        const auto view = jobs.get(req.matches[1]);
        if (!view) {
            detail::reply_error(res, 404, "unknown job " + std::string(req.matches[1]));
            return;
        }
        detail::reply(res, 200, detail::job_view_to_json(*view));
    });

    server.Post("/validate-rulings", [](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            const RulingsDocument doc = parse_rulings(req.body);
            double worst = 0.0;
            for (double d : doc.planarity_defects) worst = std::max(worst, d);
            detail::reply(res, 200,
                          {{"count", doc.rulings.size()},
                           {"planarity_defects", doc.planarity_defects},
                           {"max_defect", worst}});
        });
    });

    // Body: {"rulings": <rulings document with one anchor per ruling, or one
    // fewer plus "anchor">, "anchor": {"A","B"}, "Q": [..], "P": [..],
    // "tolerance": number}
    server.Post("/extend-chain", [](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            const json body = detail::parse_json(req.body);
            RulingsDocument doc = [&] {
                try {
                    return rulings_from_json(detail::field(body, "rulings", ""));
                } catch (const SchemaError& e) {
                    throw SchemaError("/rulings" + e.field() + ": " + e.what(), "/rulings" + e.field());
                }
            }();
            PlaneChain chain = doc.chain.value_or(PlaneChain{});
            if (const auto it = body.find("anchor"); it != body.end()) {
                chain.anchors.push_back({detail::vec3(detail::field(*it, "A", "/anchor"), "/anchor/A"),
                                         detail::vec3(detail::field(*it, "B", "/anchor"), "/anchor/B")});
            }
            const Vec3 q = detail::vec3(detail::field(body, "Q", ""), "/Q");
            const Vec3 p = detail::vec3(detail::field(body, "P", ""), "/P");
            double tol = kDefaultSnapTolerance;
            if (const auto it = body.find("tolerance"); it != body.end()) tol = detail::number(*it, "/tolerance");
            try {
                RulingSequence next = extend_chain(chain, doc.rulings, q, p, tol);
                RulingsDocument out{next, doc.unit, chain};
                detail::reply(res, 200,
                              {{"accepted", true},
                               {"rulings", rulings_to_json(out)},
                               {"planarity_defects", strip_planarity_defect(next)}});
            } catch (const PlaneSnapError& e) {
                detail::reply(res, 422,
                              {{"accepted", false},
                               {"error", e.what()},
                               {"distance", e.distance()},
                               {"q_distance", e.q_distance()},
                               {"p_distance", e.p_distance()}});
            }
        });
    });
}

}  // namespace devruled
