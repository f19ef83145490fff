#pragma once

// Document formats: `.rul` ruling files, control nets, metrics documents and
// PLY meshes with a per-vertex warp-angle channel. All JSON documents carry a
// "format" tag and a "version".

#include "devruled/common.hpp"
#include "devruled/pipelines.hpp"
#include "devruled/splines.hpp"
#include "devruled/surface.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace devruled {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kRulingsFormat = "devruled.rulings";
inline constexpr const char* kControlNetFormat = "devruled.control-net";
inline constexpr const char* kMetricsFormat = "devruled.metrics";

/// Document that does not match its schema. `line` is set for syntax errors,
/// `field` (a JSON pointer) for structural ones.
class SchemaError : public InvalidInput {
public:
    SchemaError(const std::string& what, std::string field, std::size_t line = 0)
        : InvalidInput(what), field_(std::move(field)), line_(line) {}
    [[nodiscard]] const std::string& field() const noexcept { return field_; }
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::string field_;
    std::size_t line_;
};

namespace detail {

inline json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') ++line;
        }
        std::ostringstream os;
        os << "line " << line << ": malformed JSON (" << e.what() << ")";
        throw SchemaError(os.str(), "", line);
    }
}

[[noreturn]] inline void schema_fail(const std::string& field, const std::string& msg) {
    throw SchemaError(field + ": " + msg, field);
}

inline const json& field(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) schema_fail(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end()) schema_fail(path + "/" + key, "missing required field");
    return *it;
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) schema_fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) schema_fail(path, "number is not finite");
    return v;
}

inline int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) schema_fail(path, "expected an integer");
    return j.get<int>();
}

inline std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) schema_fail(path, "expected a string");
    return j.get<std::string>();
}

inline Vec3 vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) schema_fail(path, "expected [x, y, z]");
    return {number(j[0], path + "/0"), number(j[1], path + "/1"), number(j[2], path + "/2")};
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline std::vector<double> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) schema_fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "/" + std::to_string(i)));
    return out;
}

inline void check_header(const json& j, const char* format) {
    if (text(field(j, "format", ""), "/format") != format) {
        schema_fail("/format", std::string("expected \"") + format + "\"");
    }
    if (integer(field(j, "version", ""), "/version") != kFormatVersion) schema_fail("/version", "unsupported version");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Rulings

struct RulingsDocument {
    RulingSequence rulings;
    std::string unit = "unitless";
    /// Present when the strip was designed plane by plane.
    std::optional<PlaneChain> chain;
    /// Per adjacent pair, filled on parse; not serialized.
    std::vector<double> planarity_defects;

    friend bool operator==(const RulingsDocument& a, const RulingsDocument& b) {
        const bool chains = a.chain.has_value() == b.chain.has_value() &&
                            (!a.chain || a.chain->anchors == b.chain->anchors);
        return a.rulings == b.rulings && a.unit == b.unit && chains;
    }
};

inline json rulings_to_json(const RulingsDocument& doc) {
    json j;
    j["format"] = kRulingsFormat;
    j["version"] = kFormatVersion;
    j["unit"] = doc.unit;
    json arr = json::array();
    for (const auto& r : doc.rulings.rulings()) arr.push_back({{"Q", detail::to_json(r.Q)}, {"P", detail::to_json(r.P)}});
    j["rulings"] = std::move(arr);
    if (doc.chain) {
        json an = json::array();
        for (const auto& a : doc.chain->anchors) an.push_back({{"A", detail::to_json(a.A)}, {"B", detail::to_json(a.B)}});
        j["anchors"] = std::move(an);
    }
    return j;
}

inline std::string write_rulings(const RulingsDocument& doc) { return rulings_to_json(doc).dump(2) + "\n"; }

inline std::string write_rulings(const RulingSequence& rulings) { return write_rulings(RulingsDocument{rulings}); }

inline RulingsDocument rulings_from_json(const json& j) {
    detail::check_header(j, kRulingsFormat);
    const json& arr = detail::field(j, "rulings", "");
    if (!arr.is_array()) detail::schema_fail("/rulings", "expected an array");
    if (arr.size() < 2) detail::schema_fail("/rulings", "at least two rulings are required");
    std::vector<Ruling> rs;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "/rulings/" + std::to_string(i);
        Ruling r{detail::vec3(detail::field(arr[i], "Q", path), path + "/Q"),
                 detail::vec3(detail::field(arr[i], "P", path), path + "/P")};
        if (!(r.length() > kMinRulingLength)) {
            throw SchemaError("degenerate ruling at index " + std::to_string(i) + " (Q and P coincide)", path);
        }
        if (i > 0 && r == rs.back()) {
            throw SchemaError("ruling " + std::to_string(i) + " repeats the previous ruling", path);
        }
        rs.push_back(r);
    }
    RulingsDocument doc{RulingSequence(std::move(rs))};
    if (const auto it = j.find("unit"); it != j.end()) doc.unit = detail::text(*it, "/unit");
    if (const auto it = j.find("anchors"); it != j.end()) {
        if (!it->is_array()) detail::schema_fail("/anchors", "expected an array");
        PlaneChain chain;
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string path = "/anchors/" + std::to_string(i);
            chain.anchors.push_back({detail::vec3(detail::field((*it)[i], "A", path), path + "/A"),
                                     detail::vec3(detail::field((*it)[i], "B", path), path + "/B")});
        }
        doc.chain = std::move(chain);
    }
    doc.planarity_defects = strip_planarity_defect(doc.rulings);
    return doc;
}

inline RulingsDocument parse_rulings(std::string_view text) { return rulings_from_json(detail::parse_json(text)); }

// ---------------------------------------------------------------------------
// Control nets

struct NamedCurve {
    std::string name;
    SplineCurve curve;
    friend bool operator==(const NamedCurve&, const NamedCurve&) = default;
};

struct ControlNetDocument {
    std::vector<NamedCurve> curves;

    [[nodiscard]] const SplineCurve* find(std::string_view name) const {
        for (const auto& c : curves) {
            if (c.name == name) return &c.curve;
        }
        return nullptr;
    }
    friend bool operator==(const ControlNetDocument&, const ControlNetDocument&) = default;
};

inline ControlNetDocument control_net_of(const RuledSurface& s) { return {{{"c0", s.c0()}, {"c1", s.c1()}}}; }

inline json control_net_to_json(const ControlNetDocument& doc) {
    json j;
    j["format"] = kControlNetFormat;
    j["version"] = kFormatVersion;
    json curves = json::array();
    for (const auto& [name, c] : doc.curves) {
        json cps = json::array();
        for (const auto& p : c.control_points()) cps.push_back(detail::to_json(p));
        curves.push_back({{"name", name}, {"degree", c.degree()}, {"knots", c.knots()}, {"control_points", cps}});
    }
    j["curves"] = std::move(curves);
    return j;
}

inline std::string write_control_net(const ControlNetDocument& doc) { return control_net_to_json(doc).dump(2) + "\n"; }

inline ControlNetDocument control_net_from_json(const json& j) {
    detail::check_header(j, kControlNetFormat);
    const json& arr = detail::field(j, "curves", "");
    if (!arr.is_array() || arr.empty()) detail::schema_fail("/curves", "expected a nonempty array");
    ControlNetDocument doc;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "/curves/" + std::to_string(i);
        const json& cj = arr[i];
        const std::string name = detail::text(detail::field(cj, "name", path), path + "/name");
        const int degree = detail::integer(detail::field(cj, "degree", path), path + "/degree");
        std::vector<double> knots = detail::numbers(detail::field(cj, "knots", path), path + "/knots");
        const json& cpj = detail::field(cj, "control_points", path);
        if (!cpj.is_array()) detail::schema_fail(path + "/control_points", "expected an array");
        Points cps;
        for (std::size_t k = 0; k < cpj.size(); ++k) {
            cps.push_back(detail::vec3(cpj[k], path + "/control_points/" + std::to_string(k)));
        }
        try {
            doc.curves.push_back({name, SplineCurve(degree, std::move(knots), std::move(cps))});
        } catch (const InvalidInput& e) {
            detail::schema_fail(path, e.what());
        }
    }
    return doc;
}

inline ControlNetDocument parse_control_net(std::string_view text) {
    return control_net_from_json(detail::parse_json(text));
}

// ---------------------------------------------------------------------------
// Metrics

struct SolverSummary {
    int iterations = 0;
    int evaluations = 0;
    std::string reason;
    double initial_value = 0.0;
    double final_value = 0.0;
    friend bool operator==(const SolverSummary&, const SolverSummary&) = default;
};

struct MetricsDocument {
    MetricsReport metrics;
    MetricsReport initial;
    std::vector<OuterRecord> outer_trace;
    std::vector<SolverSummary> solver;
    std::string termination;
    friend bool operator==(const MetricsDocument&, const MetricsDocument&) = default;
};

inline MetricsDocument metrics_document(const PipelineResult& r) {
    MetricsDocument doc{r.metrics, r.initial_metrics, r.outer_trace, {}, r.termination};
    for (const auto& t : r.solver_traces) {
        doc.solver.push_back({static_cast<int>(t.iterations.size()), t.evaluations, to_string(t.reason),
                              t.initial_value, t.iterations.empty() ? t.initial_value : t.iterations.back().value});
    }
    return doc;
}

namespace detail {
inline json report_to_json(const MetricsReport& m) {
    return {{"beta_max", m.beta_max}, {"beta_avg", m.beta_avg}, {"d_max", m.d_max},
            {"d_avg", m.d_avg},       {"sample_count", m.sample_count}, {"defects", m.defects}};
}
inline MetricsReport report_from_json(const json& j, const std::string& path) {
    MetricsReport m;
    m.beta_max = number(field(j, "beta_max", path), path + "/beta_max");
    m.beta_avg = number(field(j, "beta_avg", path), path + "/beta_avg");
    m.d_max = number(field(j, "d_max", path), path + "/d_max");
    m.d_avg = number(field(j, "d_avg", path), path + "/d_avg");
    m.sample_count = integer(field(j, "sample_count", path), path + "/sample_count");
    m.defects = numbers(field(j, "defects", path), path + "/defects");
    return m;
}
}  // namespace detail

inline json metrics_to_json(const MetricsDocument& doc) {
    json j = detail::report_to_json(doc.metrics);
    j["format"] = kMetricsFormat;
    j["version"] = kFormatVersion;
    j["initial"] = detail::report_to_json(doc.initial);
    json trace = json::array();
    for (const auto& o : doc.outer_trace) {
        trace.push_back({{"beta_max", o.beta_max}, {"beta_avg", o.beta_avg}, {"objective", o.objective}});
    }
    j["outer_trace"] = std::move(trace);
    json solver = json::array();
    for (const auto& s : doc.solver) {
        solver.push_back({{"iterations", s.iterations},
                          {"evaluations", s.evaluations},
                          {"reason", s.reason},
                          {"initial_value", s.initial_value},
                          {"final_value", s.final_value}});
    }
    j["solver"] = std::move(solver);
    j["termination"] = doc.termination;
    return j;
}

inline std::string write_metrics(const MetricsDocument& doc) { return metrics_to_json(doc).dump(2) + "\n"; }

inline MetricsDocument metrics_from_json(const json& j) {
    detail::check_header(j, kMetricsFormat);
    MetricsDocument doc;
    doc.metrics = detail::report_from_json(j, "");
    doc.initial = detail::report_from_json(detail::field(j, "initial", ""), "/initial");
    const json& trace = detail::field(j, "outer_trace", "");
    if (!trace.is_array()) detail::schema_fail("/outer_trace", "expected an array");
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const std::string p = "/outer_trace/" + std::to_string(i);
        doc.outer_trace.push_back({detail::number(detail::field(trace[i], "beta_max", p), p + "/beta_max"),
                                   detail::number(detail::field(trace[i], "beta_avg", p), p + "/beta_avg"),
                                   detail::number(detail::field(trace[i], "objective", p), p + "/objective")});
    }
    const json& solver = detail::field(j, "solver", "");
    if (!solver.is_array()) detail::schema_fail("/solver", "expected an array");
    for (std::size_t i = 0; i < solver.size(); ++i) {
        const std::string p = "/solver/" + std::to_string(i);
        const json& s = solver[i];
        doc.solver.push_back({detail::integer(detail::field(s, "iterations", p), p + "/iterations"),
                              detail::integer(detail::field(s, "evaluations", p), p + "/evaluations"),
                              detail::text(detail::field(s, "reason", p), p + "/reason"),
                              detail::number(detail::field(s, "initial_value", p), p + "/initial_value"),
                              detail::number(detail::field(s, "final_value", p), p + "/final_value")});
    }
    doc.termination = detail::text(detail::field(j, "termination", ""), "/termination");
    return doc;
}

inline MetricsDocument parse_metrics(std::string_view text) { return metrics_from_json(detail::parse_json(text)); }

// ---------------------------------------------------------------------------
// Mesh

struct MeshOptions {
    int t_segments = 100;
    int s_segments = 10;
    friend bool operator==(const MeshOptions&, const MeshOptions&) = default;
};

/// ASCII PLY tessellation of the surface. Each vertex carries the warp angle
/// (degrees) of its ruling in the `warp` property; -1 marks a degenerate normal.
inline std::string write_mesh(const RuledSurface& surface, const MeshOptions& opt = {}) {
    if (opt.t_segments < 1 || opt.s_segments < 1) throw InvalidInput("mesh grid needs at least one segment");
    const int nt = opt.t_segments + 1, ns = opt.s_segments + 1;
    std::ostringstream os;
    os << "ply\nformat ascii 1.0\ncomment devruled ruled surface, warp angle in degrees\n"
       << "element vertex " << nt * ns << "\nproperty double x\nproperty double y\nproperty double z\n"
       << "property double warp\n"
       << "element face " << opt.t_segments * opt.s_segments << "\nproperty list uchar int vertex_indices\n"
       << "end_header\n";
    char buf[128];
    for (int i = 0; i < nt; ++i) {
        const double t = i == nt - 1 ? 1.0 : static_cast<double>(i) / opt.t_segments;
        double warp = -1.0;
        try {
            warp = warp_angle(surface, t);
        } catch (const DegenerateNormal&) {
        }
        for (int j = 0; j < ns; ++j) {
            const double s = j == ns - 1 ? 1.0 : static_cast<double>(j) / opt.s_segments;
            const Vec3 p = eval_surface(surface, t, s);
            std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", p.x(), p.y(), p.z(), warp);
            os << buf;
        }
    }
    for (int i = 0; i < opt.t_segments; ++i) {
        for (int j = 0; j < opt.s_segments; ++j) {
            const int a = i * ns + j;
            os << "4 " << a << ' ' << a + ns << ' ' << a + ns + 1 << ' ' << a + 1 << '\n';
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Result export

enum class ExportKind { ControlNet, Mesh, Metrics };

inline const char* to_string(ExportKind k) noexcept {
    switch (k) {
        case ExportKind::ControlNet: return "control-net";
        case ExportKind::Mesh: return "mesh";
        case ExportKind::Metrics: return "metrics";
    }
    return "unknown";
}

inline std::optional<ExportKind> parse_export_kind(std::string_view s) {
    if (s == "control-net") return ExportKind::ControlNet;
    if (s == "mesh") return ExportKind::Mesh;
    if (s == "metrics") return ExportKind::Metrics;
    return std::nullopt;
}

struct ExportedDocument {
    ExportKind kind;
    std::string text;
};

inline std::vector<ExportedDocument> export_result(const PipelineResult& result, std::span<const ExportKind> formats,
                                                   const MeshOptions& mesh = {}) {
    std::vector<ExportedDocument> out;
    for (ExportKind k : formats) {
        switch (k) {
            case ExportKind::ControlNet:
                out.push_back({k, write_control_net(control_net_of(result.surface))});
                break;
            case ExportKind::Mesh: out.push_back({k, write_mesh(result.surface, mesh)}); break;
            case ExportKind::Metrics: out.push_back({k, write_metrics(metrics_document(result))}); break;
        }
    }
    return out;
}

}  // namespace devruled
