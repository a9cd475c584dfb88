#include "fixtures.hpp"

#include "ivrepro/error.hpp"
#include "ivrepro/report/report.hpp"

#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace ivrepro;
using namespace ivrepro::report;
using diagnostics::DiagnosticsBundle;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Values chosen by hand so every rounding in the golden file can be checked on paper.
DiagnosticsBundle hand_bundle(int index) {
    DiagnosticsBundle b;
    b.spec_index = index;
    b.spec = {{"outcome", "e_vote_buying"},
              {"treatment", "lm_pob_mesa"},
              {"instruments", {"lz_pob_mesa_f"}},
              {"controls", {"l4.margin_index2", "l.nbi_i"}},
              {"fixed_effects", nlohmann::json::array()},
              {"cluster_vars", {"muni_code"}},
              {"weight", nullptr},
              {"if_condition", "e(sample)"},
              {"software", "stata"},
              {"source_file", "main.do"},
              {"line", 12},
              {"command", "ivreg2 e_vote_buying l4.margin_index2 l.nbi_i (lm_pob_mesa = lz_pob_mesa_f) if e(sample), first cluster(muni_code)"},
              {"table_ref", "Table 2"},
              {"estimator", "ivreg2"}};
    b.tsls = {-1.46049, 0.21251, -6.8726, 0.0000004, -1.87762, -1.04336, 4352, 1098, 1097, 4};
    b.ols = {-0.62551, 0.09049, -6.9124, 0.0000003, -0.80306, -0.44796, 4352, 1098, 1097, 4};
    b.pi = Eigen::VectorXd::Constant(1, 0.812);
    b.conventional_F = 1103.24;
    b.effective_F = 827.16;
    b.bootstrap_F = 925.54;
    b.ar = diagnostics::ARResult{48.3512, 0.000012, 1, 1097};
    b.ar_ci = diagnostics::ARInterval{-1.9, -1.05, false, false, false};
    b.tf.applicable = true;
    b.tf.adjusted_critical = 1.96;
    b.tf.pass_at_5pct = true;
    diagnostics::BootstrapResult bs;
    bs.boot_c = {-1.8912, -1.0405};
    bs.boot_t = {-1.9124, -1.0086};
    bs.iters = 4;
    bs.seed = 42;
    bs.unit = "cluster";
    bs.taus = {-1.5, -1.25, -1.75, -1.375};
    bs.t_stats = {-0.18, 0.99, -1.4, 0.4};
    b.bootstrap = bs;
    diagnostics::JackknifeResult jk;
    jk.min = -1.5321;
    jk.max = -1.3987;
    jk.most_influential = "11001";
    jk.delta = 0.0716;
    jk.relative_shift = 0.049;
    jk.unit = "cluster";
    jk.ids = {"11001", "5001", "76001"};
    jk.estimates = {-1.5321, -1.3987, -1.4650};
    b.jackknife = jk;
    b.rho = 0.4126;
    b.ratio = 2.3349;
    diagnostics::evaluate(b);
    return b;
}

acquire::StudyInfo study() {
    return {"Small Aggregates, Big Manipulation", "Miguel R. Rueda", "2017", "American Journal Of Political Science",
            "http://dx.doi.org/10.7910/DVN/K6ZOOW"};
}

}  // namespace

TEST_CASE("fixed formatting") {
    CHECK(fixed(-1.46049, 3) == "-1.460");
    CHECK(fixed(827.16, 1) == "827.2");
    CHECK(fixed(-0.0004, 3) == "0.000");
    CHECK(fixed(std::nan(""), 3) == "n/a");
}

TEST_CASE("report matches the golden file") {
    const auto a = hand_bundle(1);
    auto c = hand_bundle(2);
    c.ar->p_value = 0.0731;
    c.jackknife->relative_shift = 0.58;
    diagnostics::evaluate(c);
    REQUIRE(c.rating == diagnostics::Rating::Moderate);
    const auto text = render_report({a, c}, study());
    CHECK(text == slurp(IVREPRO_FIXTURES "/report/golden_report.md"));
    CHECK(render_report({a, c}, study()) == text);
}

TEST_CASE("summary rows follow the bundles") {
    auto a = hand_bundle(1), b = hand_bundle(2), c = hand_bundle(3);
    b.ar->p_value = 0.2;
    b.jackknife->relative_shift = 0.5;
    diagnostics::evaluate(b);
    const auto text = render_report({a, b, c}, study());
    CHECK(text.find("| 1 | `e_vote_buying` | `lm_pob_mesa` | -1.460 | 827.2 | 0 | HIGH |") != std::string::npos);
    CHECK(text.find("| 2 | `e_vote_buying` | `lm_pob_mesa` | -1.460 | 827.2 | 2 | MODERATE |") != std::string::npos);
    CHECK(text.find("| 3 | `e_vote_buying` | `lm_pob_mesa` | -1.460 | 827.2 | 0 | HIGH |") != std::string::npos);
    CHECK(text.find("## Specification 1") < text.find("## Specification 2"));
    CHECK(text.find("## Specification 2") < text.find("## Specification 3"));
}

TEST_CASE("nonlinear models carry the approximation flag") {
    auto a = hand_bundle(1);
    a.nonlinear = true;
    CHECK(render_report({a}, study()).find("Non-Linear Model Approximation") != std::string::npos);
    CHECK(render_report({hand_bundle(1)}, study()).find("Non-Linear") == std::string::npos);
}

TEST_CASE("empty report is rejected") {
    try {
        render_report({}, study());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoSpecs);
    }
}

TEST_CASE("report numbers come from diagnostics JSON") {
    // rendering from the serialized bundle gives the same document
    const auto a = hand_bundle(1);
    const auto back = diagnostics::diagnostics_from_json(nlohmann::json::parse(diagnostics::to_json(a).dump()));
    CHECK(render_report({back}, study()) == render_report({a}, study()));
}

TEST_CASE("coefficient figure has OLS and five intervals") {
    const auto f = figure_data(hand_bundle(1), FigureKind::CoefComparison);
    REQUIRE(f.series.size() == 6);
    CHECK(f.series[0].label == "OLS");
    CHECK(figure_csv(f) == slurp(IVREPRO_FIXTURES "/report/golden_coef.csv"));
    std::set<std::string> labels;
    for (const auto& s : f.series) labels.insert(s.label);
    CHECK(labels.size() == 6);
}

TEST_CASE("figures are written deterministically") {
    const auto dir = std::filesystem::temp_directory_path() / "ivrepro_fig_test";
    std::filesystem::remove_all(dir);
    const auto b = hand_bundle(1);
    const auto first = emit_figures(b, dir / "a");
    const auto second = emit_figures(b, dir / "b");
    REQUIRE(first.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(first[i].svg.filename() == second[i].svg.filename());
        CHECK(slurp(first[i].svg) == slurp(second[i].svg));
        CHECK(slurp(first[i].csv) == slurp(second[i].csv));
        CHECK(slurp(first[i].svg).rfind("<svg ", 0) == 0);
    }
    CHECK(first[0].svg.filename() == "spec1_coef_comparison.svg");
    CHECK(first[3].csv.filename() == "spec1_jackknife_distribution.csv");
    std::filesystem::remove_all(dir);
}

TEST_CASE("jackknife figure on five clusters matches the leave-one-out loop") {
    const auto s = testfx::simulate(100, 1, 1, 17, 5);
    const auto bundle = testfx::bundle_of(s);
    diagnostics::DiagnosticsConfig cfg;
    cfg.iters = 50;
    const auto d = diagnostics::run_diagnostics(bundle, cfg, 1);
    const auto f = figure_data(d, FigureKind::JackknifeDistribution);
    REQUIRE(f.series.size() == 5);
    for (const auto& pt : f.series) {
        std::vector<Eigen::Index> keep;
        for (int i = 0; i < 100; ++i)
            if (s.cluster[static_cast<std::size_t>(i)] != pt.label) keep.push_back(i);
        testfx::Sim t;
        t.y = s.y(keep);
        t.d = s.d(keep);
        t.Z = s.Z(keep, Eigen::all);
        t.X = s.X(keep, Eigen::all);
        CHECK(pt.values[0] == doctest::Approx(estimate::fit_2sls(testfx::bundle_of(t)).second.coefficient).epsilon(1e-10));
    }
    const auto boot = figure_data(d, FigureKind::BootDistribution);
    CHECK(boot.series.size() == 50);
}
