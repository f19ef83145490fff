#pragma once

// Job specifications shared by the command line and the HTTP service, and
// the single entry point that runs them.

#include "devruled/io.hpp"
#include "devruled/pipelines.hpp"

#include <optional>
#include <string>
#include <vector>

namespace devruled {

inline constexpr const char* kJobFormat = "devruled.job";

inline const char* to_string(Mode m) noexcept { return m == Mode::FixedBoundary ? "fixed-boundary" : "relaxed"; }

inline const char* to_string(ClosenessForm f) noexcept {
    return f == ClosenessForm::Symmetric ? "symmetric" : "literal";
}

inline Weights default_weights(Mode m) {
    return m == Mode::FixedBoundary ? Weights::fixed_boundary_defaults() : Weights::relaxed_defaults();
}

struct JobSpec {
    Mode mode = Mode::Relaxed;
    std::optional<RulingsDocument> rulings;
    /// Required in fixed-boundary mode: the curve named "c0", or the first curve.
    std::optional<ControlNetDocument> curve;
    Weights weights = Weights::relaxed_defaults();
    PipelineOptions options;
    std::vector<ExportKind> exports{ExportKind::Metrics};
    MeshOptions mesh;

    void validate() const {
        if (!rulings) throw SchemaError("/rulings: missing required field", "/rulings");
        if (mode == Mode::FixedBoundary && !curve) {
            throw SchemaError("/curve: fixed-boundary mode requires a fixed curve", "/curve");
        }
        weights.validate();
        options.solver.validate();
        if (options.M < 1) throw SchemaError("/M: must be >= 1", "/M");
        if (options.degree < 2) throw SchemaError("/degree: must be >= 2", "/degree");
        if (options.metric_samples < 2) throw SchemaError("/metric_samples: must be >= 2", "/metric_samples");
        if (options.outer.max_outer < 1) throw SchemaError("/outer/max_outer: must be >= 1", "/outer/max_outer");
    }

    friend bool operator==(const JobSpec& a, const JobSpec& b) {
        return a.mode == b.mode && a.rulings == b.rulings && a.curve == b.curve && a.weights == b.weights &&
               a.options.degree == b.options.degree && a.options.M == b.options.M &&
               a.options.metric_samples == b.options.metric_samples && a.options.solver == b.options.solver &&
               a.options.outer == b.options.outer && a.options.closeness_form == b.options.closeness_form &&
               a.exports == b.exports && a.mesh == b.mesh;
    }
};

inline json job_to_json(const JobSpec& s) {
    json j;
    j["format"] = kJobFormat;
    j["version"] = kFormatVersion;
    j["mode"] = to_string(s.mode);
    if (s.rulings) j["rulings"] = rulings_to_json(*s.rulings);
    if (s.curve) j["curve"] = control_net_to_json(*s.curve);
    j["weights"] = {{"energy", s.weights.energy},
                    {"width", s.weights.width},
                    {"interior", s.weights.interior},
                    {"closeness", s.weights.closeness},
                    {"unit", s.weights.unit}};
    j["degree"] = s.options.degree;
    j["M"] = s.options.M;
    j["metric_samples"] = s.options.metric_samples;
    j["closeness_form"] = to_string(s.options.closeness_form);
    const auto& so = s.options.solver;
    j["solver"] = {{"memory", so.memory},
                   {"max_iterations", so.max_iterations},
                   {"gradient_tolerance", so.gradient_tolerance},
                   {"step_tolerance", so.step_tolerance}};
    const auto& oo = s.options.outer;
    j["outer"] = {{"max_outer", oo.max_outer}, {"rel_improve_tol", oo.rel_improve_tol}, {"beta_target", oo.beta_target}};
    json ex = json::array();
    for (auto k : s.exports) ex.push_back(to_string(k));
    j["exports"] = std::move(ex);
    j["mesh"] = {{"t_segments", s.mesh.t_segments}, {"s_segments", s.mesh.s_segments}};
    return j;
}

inline std::string write_job(const JobSpec& s) { return job_to_json(s).dump(2) + "\n"; }

inline JobSpec job_from_json(const json& j) {
    using detail::field;
    detail::check_header(j, kJobFormat);
    JobSpec s;
    const std::string mode = detail::text(field(j, "mode", ""), "/mode");
    if (mode == "fixed-boundary") {
        s.mode = Mode::FixedBoundary;
    } else if (mode != "relaxed") {
        detail::schema_fail("/mode", "expected \"fixed-boundary\" or \"relaxed\"");
    }
    s.weights = default_weights(s.mode);

    auto nested = [](const json& sub, const char* where, auto&& parse) {
        try {
            return parse(sub);
        } catch (const SchemaError& e) {
            throw SchemaError(std::string(where) + e.field() + ": " + e.what(), std::string(where) + e.field());
        }
    };
    s.rulings = nested(field(j, "rulings", ""), "/rulings", rulings_from_json);
    if (const auto it = j.find("curve"); it != j.end()) s.curve = nested(*it, "/curve", control_net_from_json);

    auto opt_number = [&](const json& obj, const char* key, const std::string& path, double& out) {
        if (const auto it = obj.find(key); it != obj.end()) out = detail::number(*it, path + "/" + key);
    };
    auto opt_int = [&](const json& obj, const char* key, const std::string& path, int& out) {
        if (const auto it = obj.find(key); it != obj.end()) out = detail::integer(*it, path + "/" + key);
    };
    if (const auto it = j.find("weights"); it != j.end()) {
        if (!it->is_object()) detail::schema_fail("/weights", "expected an object");
        opt_number(*it, "energy", "/weights", s.weights.energy);
        opt_number(*it, "width", "/weights", s.weights.width);
        opt_number(*it, "interior", "/weights", s.weights.interior);
        opt_number(*it, "closeness", "/weights", s.weights.closeness);
        opt_number(*it, "unit", "/weights", s.weights.unit);
    }
    opt_int(j, "degree", "", s.options.degree);
    opt_int(j, "M", "", s.options.M);
    opt_int(j, "metric_samples", "", s.options.metric_samples);
    if (const auto it = j.find("closeness_form"); it != j.end()) {
        const std::string f = detail::text(*it, "/closeness_form");
        if (f == "literal") {
            s.options.closeness_form = ClosenessForm::Literal;
        } else if (f != "symmetric") {
            detail::schema_fail("/closeness_form", "expected \"symmetric\" or \"literal\"");
        }
    }
    if (const auto it = j.find("solver"); it != j.end()) {
        if (!it->is_object()) detail::schema_fail("/solver", "expected an object");
        opt_int(*it, "memory", "/solver", s.options.solver.memory);
        opt_int(*it, "max_iterations", "/solver", s.options.solver.max_iterations);
        opt_number(*it, "gradient_tolerance", "/solver", s.options.solver.gradient_tolerance);
        opt_number(*it, "step_tolerance", "/solver", s.options.solver.step_tolerance);
    }
    if (const auto it = j.find("outer"); it != j.end()) {
        if (!it->is_object()) detail::schema_fail("/outer", "expected an object");
        opt_int(*it, "max_outer", "/outer", s.options.outer.max_outer);
        opt_number(*it, "rel_improve_tol", "/outer", s.options.outer.rel_improve_tol);
        opt_number(*it, "beta_target", "/outer", s.options.outer.beta_target);
    }
    if (const auto it = j.find("exports"); it != j.end()) {
        if (!it->is_array()) detail::schema_fail("/exports", "expected an array");
        s.exports.clear();
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string p = "/exports/" + std::to_string(i);
            const auto k = parse_export_kind(detail::text((*it)[i], p));
            if (!k) detail::schema_fail(p, "expected \"control-net\", \"mesh\" or \"metrics\"");
            s.exports.push_back(*k);
        }
    }
    if (const auto it = j.find("mesh"); it != j.end()) {
        if (!it->is_object()) detail::schema_fail("/mesh", "expected an object");
        opt_int(*it, "t_segments", "/mesh", s.mesh.t_segments);
        opt_int(*it, "s_segments", "/mesh", s.mesh.s_segments);
    }
    try {
        s.validate();
    } catch (const SchemaError&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaError(e.what(), "");
    }
    return s;
}

inline JobSpec parse_job(std::string_view text) { return job_from_json(detail::parse_json(text)); }

struct JobOutcome {
    PipelineResult result;
    std::vector<ExportedDocument> documents;
};

/// Run a validated job through the matching pipeline.
inline JobOutcome run_job(const JobSpec& spec) {
    spec.validate();
    const RulingSequence& rulings = spec.rulings->rulings;
    auto result = [&] {
        if (spec.mode == Mode::FixedBoundary) {
            const SplineCurve* c0 = spec.curve->find("c0");
            if (!c0) c0 = &spec.curve->curves.front().curve;
            return fit_fixed_boundary(*c0, rulings, spec.weights, spec.options);
        }
        return fit_relaxed(rulings, spec.weights, spec.options);
    }();
    auto docs = export_result(result, spec.exports, spec.mesh);
    return {std::move(result), std::move(docs)};
}

}  // namespace devruled
