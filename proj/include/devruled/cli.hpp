#pragma once

// Command line front end. Exit status: 0 success, 2 usage or validation
// error, 1 solver failure.

#include "devruled/io.hpp"
#include "devruled/jobs.hpp"
#include "devruled/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace devruled {

inline constexpr int kExitOk = 0;
inline constexpr int kExitSolver = 1;
inline constexpr int kExitUsage = 2;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path);
    out << text;
    if (!out) throw InvalidInput("cannot write " + path);
}

namespace detail {

struct FitFlags {
    std::string rulings, curve, metrics, control_net, mesh;
    std::optional<double> energy, width, interior, closeness, unit;
    int M = kDefaultNormalSamples;
    int max_iterations = SolverOptions{}.max_iterations;
    int max_outer = OuterOptions{}.max_outer;
    int samples = kDefaultMetricSamples;
    int t_segments = MeshOptions{}.t_segments;
    int s_segments = MeshOptions{}.s_segments;
    std::string closeness_form = "symmetric";
};

inline void add_fit_flags(CLI::App& cmd, FitFlags& f, bool fixed) {
    cmd.add_option("--rulings", f.rulings, "Input .rul document")->required();
    if (fixed) cmd.add_option("--curve", f.curve, "Control-net document holding the fixed curve c0");
    cmd.add_option("--metrics", f.metrics, "Write the metrics document here");
    cmd.add_option("--control-net", f.control_net, "Write the fitted control nets here");
    cmd.add_option("--mesh", f.mesh, "Write a PLY tessellation with warp angles here");
    cmd.add_option("--energy", f.energy, "Bending energy weight");
    cmd.add_option("--width", f.width, "Width weight");
    cmd.add_option("--interior", f.interior, "Interior ruling weight");
    cmd.add_option("--closeness", f.closeness, "Boundary closeness weight");
    cmd.add_option("--unit", f.unit, "Unit-normal penalty weight");
    cmd.add_option("-M,--normals", f.M, "Number of normal samples")->check(CLI::PositiveNumber);
    cmd.add_option("--max-iterations", f.max_iterations, "L-BFGS iteration cap")->check(CLI::PositiveNumber);
    if (!fixed) cmd.add_option("--max-outer", f.max_outer, "Outer iteration cap")->check(CLI::PositiveNumber);
    cmd.add_option("--samples", f.samples, "Metric sample count")->check(CLI::Range(2, 1 << 20));
    cmd.add_option("--t-segments", f.t_segments, "Mesh segments along the rulings' parameter")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--s-segments", f.s_segments, "Mesh segments across the strip")->check(CLI::PositiveNumber);
    cmd.add_option("--closeness-form", f.closeness_form, "symmetric or literal")
        ->check(CLI::IsMember({"symmetric", "literal"}));
}

inline JobSpec job_from_flags(const FitFlags& f, Mode mode) {
    JobSpec s;
    s.mode = mode;
    s.rulings = parse_rulings(read_file(f.rulings));
    if (mode == Mode::FixedBoundary) s.curve = parse_control_net(read_file(f.curve));
    s.weights = default_weights(mode);
    if (f.energy) s.weights.energy = *f.energy;
    if (f.width) s.weights.width = *f.width;
    if (f.interior) s.weights.interior = *f.interior;
    if (f.closeness) s.weights.closeness = *f.closeness;
    if (f.unit) s.weights.unit = *f.unit;
    s.options.M = f.M;
    s.options.metric_samples = f.samples;
    s.options.solver.max_iterations = f.max_iterations;
    s.options.outer.max_outer = f.max_outer;
    s.options.closeness_form = f.closeness_form == "literal" ? ClosenessForm::Literal : ClosenessForm::Symmetric;
    s.mesh = {f.t_segments, f.s_segments};
    s.exports.clear();
    if (!f.metrics.empty()) s.exports.push_back(ExportKind::Metrics);
    if (!f.control_net.empty()) s.exports.push_back(ExportKind::ControlNet);
    if (!f.mesh.empty()) s.exports.push_back(ExportKind::Mesh);
    return s;
}

inline void write_exports(const FitFlags& f, const JobOutcome& out, std::ostream& os) {
    for (const auto& d : out.documents) {
        switch (d.kind) {
            case ExportKind::Metrics: write_file(f.metrics, d.text); break;
            case ExportKind::ControlNet: write_file(f.control_net, d.text); break;
            case ExportKind::Mesh: write_file(f.mesh, d.text); break;
        }
    }
    const auto& m = out.result.metrics;
    os << "beta_max " << m.beta_max << " deg, beta_avg " << m.beta_avg << " deg, d_max " << m.d_max << ", d_avg "
       << m.d_avg << ", termination " << out.result.termination << "\n";
}

}  // namespace detail

/// Runs one command line. `args` excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Developable ruled-surface fitting", "devruled"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML or INI file with default flag values");

    detail::FitFlags fixed_flags, relaxed_flags;
    auto* fit_fixed = app.add_subcommand("fit-fixed", "Fit c1 to the rulings with c0 held fixed");
    detail::add_fit_flags(*fit_fixed, fixed_flags, true);
    auto* fit_relaxed = app.add_subcommand("fit-relaxed", "Fit both boundary curves to the rulings");
    detail::add_fit_flags(*fit_relaxed, relaxed_flags, false);

    std::string m_rulings, m_net, m_out;
    int m_samples = kDefaultMetricSamples;
    auto* metrics = app.add_subcommand("metrics", "Evaluate a control-net pair against rulings");
    metrics->add_option("--rulings", m_rulings, "Input .rul document")->required();
    metrics->add_option("--control-net", m_net, "Control-net document with curves c0 and c1")->required();
    metrics->add_option("--out", m_out, "Write the metrics document here instead of stdout");
    metrics->add_option("--samples", m_samples, "Metric sample count")->check(CLI::Range(2, 1 << 20));

    std::string g_kind = "coplanar-chain", g_out;
    int g_count = 11;
    double g_perturbation = 0.0;
    std::uint64_t g_seed = 1;
    auto* gen = app.add_subcommand("gen-strip", "Generate a synthetic ruling strip");
    gen->add_option("--kind", g_kind, "planar, cylinder, cone, coplanar-chain or perturbed")
        ->check(CLI::IsMember({"planar", "cylinder", "cone", "coplanar-chain", "perturbed"}));
    gen->add_option("--count", g_count, "Number of rulings")->check(CLI::Range(2, 100000));
    gen->add_option("--perturbation", g_perturbation, "Noise amplitude for perturbed strips")
        ->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", g_seed, "Random seed");
    gen->add_option("--out", g_out, "Write the .rul document here instead of stdout");

    int s_port = default_port();
    unsigned s_workers = std::max(1u, std::thread::hardware_concurrency());
    std::string s_host = "127.0.0.1";
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--port", s_port, std::string("Listen port (default from ") + kPortEnvironment + ")")
        ->check(CLI::Range(1, 65535));
    serve->add_option("--host", s_host, "Bind address");
    serve->add_option("--workers", s_workers, "Worker threads")->check(CLI::PositiveNumber);

    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*fit_fixed) {
            if (fixed_flags.curve.empty()) {
                err << "error: fit-fixed requires --curve (the fixed boundary curve)\n\n" << fit_fixed->help();
                return kExitUsage;
            }
            const JobOutcome res = run_job(detail::job_from_flags(fixed_flags, Mode::FixedBoundary));
            detail::write_exports(fixed_flags, res, out);
        } else if (*fit_relaxed) {
            const JobOutcome res = run_job(detail::job_from_flags(relaxed_flags, Mode::Relaxed));
            detail::write_exports(relaxed_flags, res, out);
        } else if (*metrics) {
            const RulingsDocument rd = parse_rulings(read_file(m_rulings));
            const ControlNetDocument net = parse_control_net(read_file(m_net));
            const SplineCurve* c0 = net.find("c0");
            const SplineCurve* c1 = net.find("c1");
            if (!c0 || !c1) throw SchemaError("/curves: curves named \"c0\" and \"c1\" are required", "/curves");
            // Distances are reported in unit-box units of the rulings.
            Points all = rd.rulings.q_points();
            for (const auto& p : rd.rulings.p_points()) all.push_back(p);
            const UnitBox box = UnitBox::enclosing(all);
            const RuledSurface unit(box.to_unit(*c0), box.to_unit(*c1));
            MetricsDocument doc;
            doc.metrics = compute_metrics(unit, box.to_unit(rd.rulings), m_samples);
            doc.initial = doc.metrics;
            doc.termination = "evaluated";
            const std::string text = write_metrics(doc);
            if (m_out.empty()) {
                out << text;
            } else {
                write_file(m_out, text);
            }
        } else if (*gen) {
            const RulingSequence strip =
                gen_strip(*parse_strip_kind(g_kind), g_count - 1, g_perturbation, g_seed);
            const std::string text = write_rulings(strip);
            if (g_out.empty()) {
                out << text;
            } else {
                write_file(g_out, text);
            }
        } else if (*serve) {
            JobService jobs(s_workers);
            httplib::Server server;
            install_routes(server, jobs);
            out << "listening on " << s_host << ":" << s_port << std::endl;
            if (!server.listen(s_host, s_port)) {
                err << "error: cannot listen on " << s_host << ":" << s_port << "\n";
                return kExitUsage;
            }
        }
    } catch (const SchemaError& e) {
        err << "error: " << e.what();
        if (e.line() > 0) err << " (line " << e.line() << ")";
        err << "\n";
        return kExitUsage;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitOk;
}

}  // namespace devruled
