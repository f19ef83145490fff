#include "devruled/io.hpp"
#include "devruled/jobs.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace devruled;

namespace {

PipelineResult small_result() {
    PipelineOptions o;
    o.solver.max_iterations = 40;
    o.outer.max_outer = 2;
    return fit_relaxed(gen_strip(StripKind::Perturbed, 5, 0.03, 11), Weights::relaxed_defaults(), o);
}

std::string minimal_rulings(const std::string& second) {
    return R"({"format": "devruled.rulings", "version": 1, "unit": "mm", "rulings": [
        {"Q": [0, 0, 0], "P": [0, 1, 0]},
        )" + second + "]}";
}

}  // namespace

TEST(Rulings, MinimalDocument) {
    const RulingsDocument d = parse_rulings(minimal_rulings(R"({"Q": [1, 0, 0], "P": [1, 1, 0]})"));
    EXPECT_EQ(d.rulings.size(), 2u);
    EXPECT_EQ(d.unit, "mm");
    ASSERT_EQ(d.planarity_defects.size(), 1u);
    EXPECT_EQ(d.planarity_defects[0], 0.0);
}

TEST(Rulings, RoundTripIsBitExact) {
    const RulingSequence strip = gen_strip(StripKind::CoplanarChain, 9, 0.0, 77);
    RulingsDocument doc{strip, "m", PlaneChain{{{strip[0].Q, strip[0].Q + Vec3(1e-3, 0.1, 1.0 / 3.0)}}}};
    const std::string text = write_rulings(doc);
    const RulingsDocument back = parse_rulings(text);
    EXPECT_EQ(back, doc);
    EXPECT_EQ(write_rulings(back), text);
    for (std::size_t i = 0; i < strip.size(); ++i) {
        EXPECT_EQ(back.rulings[i].Q, strip[i].Q);
        EXPECT_EQ(back.rulings[i].P, strip[i].P);
    }
}

TEST(Rulings, DegenerateRulingNamesIndex) {
    std::string text = R"({"format": "devruled.rulings", "version": 1, "rulings": [)";
    for (int i = 0; i < 5; ++i) {
        if (i) text += ",";
        const std::string p = i == 3 ? "[3, 0, 0]" : "[" + std::to_string(i) + ", 1, 0]";
        text += R"({"Q": [)" + std::to_string(i) + ", 0, 0], \"P\": " + p + "}";
    }
    text += "]}";
    try {
        (void)parse_rulings(text);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.field(), "/rulings/3");
        EXPECT_NE(std::string(e.what()).find("index 3"), std::string::npos);
    }
}

TEST(Rulings, SchemaViolations) {
    auto field_of = [](const std::string& text) {
        try {
            (void)parse_rulings(text);
        } catch (const SchemaError& e) {
            return e.field();
        }
        return std::string("<accepted>");
    };
    EXPECT_EQ(field_of(minimal_rulings(R"({"Q": [1, 0], "P": [1, 1, 0]})")), "/rulings/1/Q");
    EXPECT_EQ(field_of(minimal_rulings(R"({"Q": [1, 0, "x"], "P": [1, 1, 0]})")), "/rulings/1/Q/2");
    EXPECT_EQ(field_of(minimal_rulings(R"({"P": [1, 1, 0]})")), "/rulings/1/Q");
    EXPECT_EQ(field_of(R"({"format": "devruled.rulings", "version": 2, "rulings": []})"), "/version");
    EXPECT_EQ(field_of(R"({"format": "other", "version": 1, "rulings": []})"), "/format");
    EXPECT_EQ(field_of(R"({"format": "devruled.rulings", "version": 1, "rulings": [{"Q": [0,0,0], "P": [0,0,1]}]})"),
              "/rulings");
}

TEST(Rulings, SyntaxErrorReportsLine) {
    try {
        (void)parse_rulings("{\n  \"format\": \"devruled.rulings\",\n  \"version\": 1,\n  \"rulings\": [ ,\n]}");
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.line(), 4u);
    }
}

TEST(ControlNet, RoundTripIsBitExact) {
    const PipelineResult r = small_result();
    const ControlNetDocument doc = control_net_of(r.surface);
    const std::string text = write_control_net(doc);
    const ControlNetDocument back = parse_control_net(text);
    EXPECT_EQ(back, doc);
    EXPECT_EQ(write_control_net(back), text);
    ASSERT_NE(back.find("c1"), nullptr);
    EXPECT_EQ(*back.find("c1"), r.surface.c1());
}

TEST(ControlNet, InvalidCurveReported) {
    const std::string text = R"({"format": "devruled.control-net", "version": 1, "curves": [
        {"name": "c0", "degree": 3, "knots": [0, 0, 1, 1], "control_points": [[0,0,0],[1,0,0]]}]})";
    try {
        (void)parse_control_net(text);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.field(), "/curves/0");
    }
}

TEST(Metrics, RoundTripIsBitExact) {
    const PipelineResult r = small_result();
    const MetricsDocument doc = metrics_document(r);
    EXPECT_EQ(doc.metrics, r.metrics);
    const std::string text = write_metrics(doc);
    const MetricsDocument back = parse_metrics(text);
    EXPECT_EQ(back, doc);
    EXPECT_EQ(write_metrics(back), text);
}

TEST(Mesh, VerticesLieOnSurface) {
    const PipelineResult r = small_result();
    const MeshOptions opt{12, 4};
    const std::string ply = write_mesh(r.surface, opt);
    std::istringstream in(ply);
    std::string line;
    int vertices = 0, faces = 0;
    while (std::getline(in, line) && line != "end_header") {
        if (line.rfind("element vertex", 0) == 0) vertices = std::stoi(line.substr(15));
        if (line.rfind("element face", 0) == 0) faces = std::stoi(line.substr(13));
    }
    ASSERT_EQ(vertices, 13 * 5);
    ASSERT_EQ(faces, 12 * 4);
    for (int i = 0; i <= 12; ++i) {
        for (int j = 0; j <= 4; ++j) {
            double x, y, z, w;
            in >> x >> y >> z >> w;
            const Vec3 ref = eval_surface(r.surface, i / 12.0, j / 4.0);
            EXPECT_LT((Vec3(x, y, z) - ref).norm(), 1e-12);
            EXPECT_NEAR(w, warp_angle(r.surface, i / 12.0), 1e-12);
        }
    }
    int n, a, b, c, d;
    in >> n >> a >> b >> c >> d;
    EXPECT_EQ(n, 4);
    EXPECT_EQ(b, a + 5);
}

TEST(Mesh, PlanarResultHasZeroWarp) {
    const PipelineResult r = fit_relaxed(gen_strip(StripKind::Planar, 5, 0.0, 3));
    std::istringstream in(write_mesh(r.surface));
    std::string line;
    while (std::getline(in, line) && line != "end_header") {
    }
    for (int v = 0; v < 101 * 11; ++v) {
        double x, y, z, w;
        in >> x >> y >> z >> w;
        EXPECT_LT(w, 1e-6);
        EXPECT_GE(w, 0.0);
    }
}

TEST(Export, SelectedDocumentsOnly) {
    const PipelineResult r = small_result();
    const std::vector<ExportKind> kinds{ExportKind::Metrics, ExportKind::ControlNet};
    const auto docs = export_result(r, kinds);
    ASSERT_EQ(docs.size(), 2u);
    EXPECT_EQ(docs[0].kind, ExportKind::Metrics);
    EXPECT_EQ(parse_metrics(docs[0].text).metrics, r.metrics);
    EXPECT_EQ(parse_control_net(docs[1].text), control_net_of(r.surface));
}

TEST(JobSpec, RoundTripIsExact) {
    JobSpec s;
    s.mode = Mode::FixedBoundary;
    const RulingSequence strip = gen_strip(StripKind::Cylinder, 6, 0.0, 3);
    s.rulings = RulingsDocument{strip};
    s.curve = ControlNetDocument{{{"c0", initial_interpolation(strip).first.c0()}}};
    s.weights = {0.1, 0.2, 0.3, 0.0, 1.0 / 3.0};
    s.options.M = 37;
    s.options.solver.max_iterations = 12;
    s.options.outer.rel_improve_tol = 1e-4;
    s.options.closeness_form = ClosenessForm::Literal;
    s.exports = {ExportKind::Mesh, ExportKind::Metrics};
    s.mesh = {20, 3};
    const std::string text = write_job(s);
    const JobSpec back = parse_job(text);
    EXPECT_EQ(back, s);
    EXPECT_EQ(write_job(back), text);
}

TEST(JobSpec, MissingWeightsUseModeDefaults) {
    const RulingSequence strip = gen_strip(StripKind::Planar, 3, 0.0, 1);
    json j{{"format", "devruled.job"}, {"version", 1}, {"mode", "relaxed"}, {"rulings", rulings_to_json({strip})}};
    EXPECT_EQ(job_from_json(j).weights, Weights::relaxed_defaults());
    j["weights"] = {{"energy", 0.5}};
    Weights w = Weights::relaxed_defaults();
    w.energy = 0.5;
    EXPECT_EQ(job_from_json(j).weights, w);
}

TEST(JobSpec, FixedModeRequiresCurve) {
    const RulingSequence strip = gen_strip(StripKind::Planar, 3, 0.0, 1);
    const json j{{"format", "devruled.job"},
                 {"version", 1},
                 {"mode", "fixed-boundary"},
                 {"rulings", rulings_to_json({strip})}};
    try {
        (void)job_from_json(j);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.field(), "/curve");
    }
}

TEST(JobSpec, NestedFieldsArePrefixed) {
    json j{{"format", "devruled.job"}, {"version", 1}, {"mode", "relaxed"}};
    j["rulings"] = json::parse(minimal_rulings(R"({"Q": [1, 0, 0], "P": [1, 0, 0]})"));
    try {
        (void)job_from_json(j);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.field(), "/rulings/rulings/1");
    }
    j["rulings"] = json::parse(minimal_rulings(R"({"Q": [1, 0, 0], "P": [1, 1, 0]})"));
    j["exports"] = {"pdf"};
    try {
        (void)job_from_json(j);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.field(), "/exports/0");
    }
}
