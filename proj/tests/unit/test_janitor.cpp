#include "ivrepro/error.hpp"
#include "ivrepro/janitor/janitor.hpp"
#include "ivrepro/parser/iv.hpp"

#include <doctest.h>

#include <fstream>
#include <set>

using namespace ivrepro;
using namespace ivrepro::janitor;
using parser::Language;
using parser::SourceScript;

namespace {

SourceScript stata(std::string text) { return {"analysis.do", Language::Stata, std::move(text)}; }
SourceScript rscript(std::string text) { return {"analysis.R", Language::R, std::move(text)}; }
SourceScript py(std::string text) { return {"analysis.py", Language::Python, std::move(text)}; }

RepairResult repair(const SourceScript& s, const RepairConfig& c = {}) { return apply_repair_rules(s, c); }

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto nl = s.find('\n', pos);
        out.push_back(s.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos));
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return out;
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("rule ids are unique") {
    std::set<std::string> ids;
    for (const auto& r : rule_registry()) {
        CHECK(ids.insert(r.id).second);
        CHECK(r.error_class >= 1);
        CHECK(r.error_class <= 10);
    }
}

TEST_CASE("absolute cd is commented") {
    const auto r = repair(stata("cd \"C:\\Users\\john\\data\"\nuse survey, clear\n"));
    CHECK(r.text == "// cd \"C:\\Users\\john\\data\"\nuse survey, clear\n");
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].rule_id == "path.cd");
    CHECK(r.log[0].line == 1);
    CHECK(r.log[0].original == "cd \"C:\\Users\\john\\data\"");
    CHECK(repair(stata("cd data\n")).log.empty());
}

TEST_CASE("legacy merge gains a match type") {
    const auto r = repair(stata("merge cow year using \"file.dta\"\n"));
    CHECK(r.text == "merge m:1 cow year using \"file.dta\"\n");
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].rule_id == "merge.legacy");
    CHECK(repair(stata("merge 1:1 cow year using \"file.dta\"\n")).log.empty());
    CHECK(repair(stata("merge using \"file.dta\"\n")).text == "merge 1:1 _n using \"file.dta\"\n");
}

TEST_CASE("global path macros are inlined and their definition commented") {
    const std::string src = "global datadir \"C:\\Users\\john\\data\"\nuse \"$datadir/survey.dta\", clear\nsave \"${datadir}/out.dta\", replace\n";
    auto r = repair(stata(src));
    CHECK(r.text == "// global datadir \"C:\\Users\\john\\data\"\nuse \"survey.dta\", clear\nsave \"out.dta\", replace\n");
    CHECK(r.log.size() == 3);
    for (const auto& e : r.log) CHECK(e.rule_id == "path.global");

    RepairConfig c;
    c.package_files = {"data/survey.dta"};
    r = repair(stata(src), c);
    CHECK(split_lines(r.text)[1] == "use \"data/survey.dta\", clear");
}

TEST_CASE("absolute paths in file commands become package relative") {
    RepairConfig c;
    c.package_files = {"raw/panel.dta"};
    const auto r = repair(stata("use \"/home/author/project/raw/panel.dta\", clear\ndisplay \"/home/author/x\"\n"), c);
    CHECK(r.text == "use \"raw/panel.dta\", clear\ndisplay \"/home/author/x\"\n");
    CHECK(r.log.size() == 1);
    CHECK(r.log[0].rule_id == "path.absolute");
}

TEST_CASE("graphics, interactive and output commands are commented") {
    const std::string src =
        "regress y x\n"
        "graph twoway scatter y x\n"
        "tw line y x, ///\n"
        "    title(\"a\")\n"
        "graph export \"fig.png\", replace\n"
        "pause\n"
        "esttab using \"t.tex\"\n"
        "capture log close\n"
        "display \"graph twoway\"\n";
    const auto r = repair(stata(src));
    CHECK(r.text ==
          "regress y x\n"
          "// graph twoway scatter y x\n"
          "// tw line y x, ///\n"
          "    // title(\"a\")\n"
          "// graph export \"fig.png\", replace\n"
          "// pause\n"
          "// esttab using \"t.tex\"\n"
          "// capture log close\n"
          "display \"graph twoway\"\n");
    CHECK(r.log.size() == 6);
}

TEST_CASE("commands sharing a line are wrapped in a block comment") {
    const auto r = repair(stata("#delimit ;\nregress y x; graph twoway scatter y x;\n#delimit cr\n"));
    CHECK(r.text == "#delimit ;\nregress y x; /* graph twoway scatter y x; */\n#delimit cr\n");
}

TEST_CASE("a function whose name contains plot is left alone") {
    const std::string src = "estimate_plot_data <- function(d) d\nres <- estimate_plot_data(df)\nplot(res)\nmy.plot(res)\n";
    const auto r = repair(rscript(src));
    CHECK(r.text == "estimate_plot_data <- function(d) d\nres <- estimate_plot_data(df)\n# plot(res)\nmy.plot(res)\n");
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].rule_id == "graphics.command");
}

TEST_CASE("R repairs") {
    const std::string src =
        "setwd(\"/home/author/replication\")\n"
        "library(rgdal)\n"
        "library(sf)\n"
        "df <- read.csv(\"/home/author/replication/data/main.csv\")\n"
        "p <- ggplot(df, aes(x, y)) +\n"
        "  geom_point()\n"
        "View(df)\n"
        "stargazer(m1)\n"
        "msg <- \"plot(x) in a string\"\n";
    RepairConfig c;
    c.package_files = {"data/main.csv"};
    const auto r = repair(rscript(src), c);
    CHECK(r.text ==
          "# setwd(\"/home/author/replication\")\n"
          "# library(rgdal)\n"
          "library(sf)\n"
          "df <- read.csv(\"data/main.csv\")\n"
          "# p <- ggplot(df, aes(x, y)) +\n"
          "  # geom_point()\n"
          "# View(df)\n"
          "# stargazer(m1)\n"
          "msg <- \"plot(x) in a string\"\n");
    std::vector<std::string> rules;
    for (const auto& e : r.log) rules.push_back(e.rule_id);
    CHECK(rules == std::vector<std::string>{"path.cd", "package.deprecated", "path.absolute", "graphics.command",
                                            "interactive.command", "output.command"});
}

TEST_CASE("Python calls are replaced without breaking blocks") {
    const auto r = repair(py("if show:\n    plt.show()\nx = input_data(1)\n"));
    CHECK(r.text == "if show:\n    pass  # plt.show()\nx = input_data(1)\n");
}

TEST_CASE("deprecated packages come from the config file") {
    const auto path = std::filesystem::temp_directory_path() / "ivrepro_janitor_cfg.json";
    {
        std::ofstream out(path);
        out << R"({"deprecated_packages": ["ri"]})";
    }
    const auto c = load_repair_config(path);
    CHECK(c.deprecated_packages == std::vector<std::string>{"ri"});
    CHECK(repair(rscript("library(ri)\nlibrary(rgdal)\n"), c).text == "# library(ri)\nlibrary(rgdal)\n");
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_repair_config(path), Error);
}

TEST_CASE("Dataverse tab files are imported as delimited text") {
    const auto r = repair(stata("use \"votes.tab\", clear\n"));
    CHECK(r.text == "import delimited using \"votes.tab\", delimiter(tab) varnames(1) clear\n");
    RepairConfig c;
    c.package_files = {"votes.tab"};
    CHECK(repair(stata("use votes, clear\n"), c).text == "import delimited using \"votes.tab\", delimiter(tab) varnames(1) clear\n");
    c.package_files = {"votes.tab", "votes.dta"};
    CHECK(repair(stata("use votes, clear\n"), c).log.empty());
}

TEST_CASE("misnamed do-files are found by stem") {
    RepairConfig c;
    c.package_files = {"code/script_rep.do", "code/other.do"};
    const auto r = repair(stata("do script.do\n"), c);
    CHECK(r.text == "do code/script_rep.do\n");
    CHECK(r.log[0].rule_id == "path.do_stem");
}

TEST_CASE("parmest blocks are commented as a unit") {
    const std::string src = "preserve\nparmest, norestore\nkeep if parm == \"x\"\nsave est, replace\nrestore\nsummarize y\n";
    const auto r = repair(stata(src));
    CHECK(r.text == "preserve\n// parmest, norestore\n// keep if parm == \"x\"\n// save est, replace\n// restore\nsummarize y\n");
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].rule_id == "block.parmest");
}

TEST_CASE("capture drop before gen keeps a backup") {
    const std::string src = "capture drop vb\ngen vb = a + b\n";
    const auto r = rewrite_capture_drop(stata(src));
    const std::string golden =
        "capture confirm variable vb, exact\n"
        "if !_rc {\n"
        "    rename vb __jbk_vb\n"
        "}\n"
        "capture noisily gen vb = a + b\n"
        "if _rc {\n"
        "    capture confirm variable __jbk_vb, exact\n"
        "    if !_rc {\n"
        "        capture drop vb\n"
        "        rename __jbk_vb vb\n"
        "    }\n"
        "}\n"
        "else {\n"
        "    capture drop __jbk_vb\n"
        "}\n";
    CHECK(r.text == golden);
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].rule_id == "gen.backup");
    CHECK(rewrite_capture_drop(stata(r.text)).text == r.text);
    CHECK(rewrite_capture_drop(stata("gen vb = 1\n")).text == "gen vb = 1\n");
    CHECK(rewrite_capture_drop(stata("capture drop vb\ngen other = 1\n")).log.empty());

    const auto semi = rewrite_capture_drop(stata("#delimit ;\ncapture drop vb;\ngen vb = a\n  + b;\n"));
    CHECK(semi.text.find("#delimit cr\ncapture confirm variable vb, exact\n") != std::string::npos);
    CHECK(semi.text.find("capture noisily gen vb = a + b\n") != std::string::npos);
    CHECK(semi.text.find("}\n#delimit ;\n") != std::string::npos);
}

TEST_CASE("the repair pass is idempotent") {
    const std::string src =
        "global root \"/Users/me/proj\"\n"
        "cd \"$root\"\n"
        "use \"$root/data.dta\", clear\n"
        "capture drop z\n"
        "gen z = x^2\n"
        "merge id using \"$root/extra.dta\"\n"
        "#delimit ;\n"
        "graph twoway (scatter y x)\n"
        "   (lfit y x);\n"
        "ivreg2 y (d = z), cluster(id);\n"
        "#delimit cr\n"
        "histogram y\n";
    const auto once = repair(stata(src));
    const auto twice = repair(stata(once.text));
    CHECK(twice.text == once.text);
    CHECK(twice.log.empty());

    const std::string rsrc = "setwd('/home/a/b')\nlibrary(maptools)\nplot(1)\nx <- read.csv('/home/a/b/x.csv')\n";
    const auto r1 = repair(rscript(rsrc));
    CHECK(repair(rscript(r1.text)).text == r1.text);
}

TEST_CASE("every changed line is covered by exactly one log entry") {
    const std::string src =
        "cd \"C:/work\"\n"
        "use panel, clear\n"
        "merge id year using extra\n"
        "graph twoway scatter y x, ///\n"
        "   title(\"t\")\n"
        "regress y x\n"
        "pause\n"
        "display \"done\"\n";
    const auto r = repair(stata(src));
    const auto before = split_lines(src);
    const auto after = split_lines(r.text);
    REQUIRE(before.size() == after.size());
    std::set<std::size_t> changed;
    for (std::size_t i = 0; i < before.size(); ++i)
        if (before[i] != after[i]) changed.insert(i + 1);
    std::multiset<std::size_t> covered;
    for (const auto& e : r.log) {
        CHECK(e.original != e.replacement);
        for (std::size_t k = 0; k < split_lines(e.original).size(); ++k) covered.insert(static_cast<std::size_t>(e.line) + k);
    }
    CHECK(std::set<std::size_t>(covered.begin(), covered.end()) == changed);
    CHECK(covered.size() == changed.size());
    const auto j = to_json(r.log);
    CHECK(j.size() == r.log.size());
    CHECK(j[0].contains("rule_id"));
}

TEST_CASE("e(sample) plans") {
    const std::string src =
        "use panel, clear\n"
        "regress e_vote_buying l4.margin_index2 l.nbi_i, cluster(muni_code)\n"
        "ivreg2 e_vote_buying l4.margin_index2 l.nbi_i ///\n"
        "     (lm_pob_mesa = lz_pob_mesa_f) if e(sample), ///\n"
        "     first cluster(muni_code)\n";
    const auto script = stata(src);
    const auto specs = parser::extract_specifications({script}).specs;
    REQUIRE(specs.size() == 1);
    const auto plan = plan_esample(script, specs[0], 1);
    CHECK(plan.mode == ExportMode::EsampleFullPanel);
    CHECK(plan.flag_column == "janitor_esample");
    REQUIRE(plan.reestimation);
    CHECK(*plan.reestimation == "quietly regress e_vote_buying l4.margin_index2 l.nbi_i, cluster(muni_code)");
    CHECK_FALSE(plan.restore_before);
    CHECK(plan.anchor.rfind("ivreg2 e_vote_buying", 0) == 0);
    CHECK(plan.anchor.find("first cluster(muni_code)") != std::string::npos);

    const std::string captured =
        "regress y x if year > 2000\n"
        "capture noisily ivreg2 y (d = w)\n"
        "ivreg2 y (d = z) if e(sample)\n";
    const auto cs = stata(captured);
    auto spec = parser::extract_specifications({cs}).specs;
    REQUIRE(spec.size() == 2);
    const auto& target = spec[0].line == 3 ? spec[0] : spec[1];
    const auto p2 = plan_esample(cs, target, 2);
    CHECK(p2.restore_before);
    CHECK(*p2.reestimation == "quietly ivreg2 y (d = w)");

    parser::IVSpecification plain = target;
    plain.if_condition.reset();
    const auto p3 = plan_esample(cs, plain, 3);
    CHECK(p3.mode == ExportMode::PostCommand);
    CHECK_FALSE(p3.flag_column);

    const auto lone = stata("ivreg2 y (d = z) if e(sample)\n");
    auto lone_spec = parser::extract_specifications({lone}).specs.at(0);
    try {
        plan_esample(lone, lone_spec, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EsampleSourceNotFound);
    }
}

TEST_CASE("export block lands after the whole continued command") {
    const std::string src = "ivreg2 y x ///\n   (d = z), ///\n   cluster(g)\nsummarize y\n";
    ExportPlan plan;
    plan.spec_index = 1;
    plan.anchor = "ivreg2 y x ///\n   (d = z), ///\n   cluster(g)";
    plan.treatment = "d";
    const auto out = inject_export(src, plan);
    const auto lines = split_lines(out);
    CHECK(lines[2] == "   cluster(g)");
    CHECK(lines[3] == "* ##REPRO_EXPORT spec=1");
    CHECK(lines[4] ==
          "display \"##REPRO_MARKER spec=1 coef=\" strtrim(string(_b[d], \"%21.0g\")) \" se=\" strtrim(string(_se[d], \"%21.0g\")) \" N=\" "
          "strtrim(string(e(N), \"%21.0g\")) \"##\"");
    CHECK(lines[5] == "export delimited using \"analysis_data_spec_1.csv\", nolabel replace");
    CHECK(lines[6] == "summarize y");
    CHECK(inject_export(out, plan) == out);
}

TEST_CASE("injection inside a semicolon region switches delimiters") {
    const std::string src = "#delimit ;\nivreg2 y (d = z)\n   , cluster(g);\nsummarize y;\n";
    ExportPlan plan;
    plan.spec_index = 2;
    plan.anchor = "ivreg2 y (d = z)\n   , cluster(g);";
    plan.treatment = "d";
    plan.mode = ExportMode::EsampleFullPanel;
    plan.flag_column = "janitor_esample";
    plan.reestimation = "quietly regress y x";
    const auto out = inject_export(src, plan);
    const std::string expected =
        "#delimit ;\nivreg2 y (d = z)\n   , cluster(g);\n"
        "#delimit cr\n"
        "* ##REPRO_EXPORT spec=2\n"
        "display \"##REPRO_MARKER spec=2 coef=\" strtrim(string(_b[d], \"%21.0g\")) \" se=\" strtrim(string(_se[d], \"%21.0g\")) \" N=\" "
        "strtrim(string(e(N), \"%21.0g\")) \"##\"\n"
        "capture drop janitor_esample\n"
        "quietly regress y x\n"
        "generate byte janitor_esample = e(sample)\n"
        "export delimited using \"analysis_data_spec_2.csv\", nolabel replace\n"
        "capture drop janitor_esample\n"
        "#delimit ;\n"
        "\nsummarize y;\n";
    CHECK(out == expected);
    // the result still parses into the same commands plus the block
    const auto cmds = parser::segment_stata(out).commands;
    CHECK(cmds.back().text == "summarize y");
    CHECK(cmds.back().mode == parser::DelimiterMode::Semicolon);
}

TEST_CASE("re-estimation goes before the target when the stored sample was invalidated") {
    const std::string src = "capture noisily regress y x\nivreg2 y (d = z) if e(sample)\n";
    ExportPlan plan;
    plan.spec_index = 1;
    plan.anchor = "ivreg2 y (d = z) if e(sample)";
    plan.treatment = "d";
    plan.mode = ExportMode::EsampleFullPanel;
    plan.flag_column = "janitor_esample";
    plan.reestimation = "quietly regress y x";
    plan.restore_before = true;
    const auto lines = split_lines(inject_export(src, plan));
    CHECK(lines[0] == "capture noisily regress y x");
    CHECK(lines[1] == "quietly regress y x");
    CHECK(lines[2] == "ivreg2 y (d = z) if e(sample)");
}

TEST_CASE("two plans on one script use content anchors") {
    const std::string src = "ivreg2 y1 (d = z)\nsummarize y1\nivreg2 y2 (d = z)\n";
    ExportPlan a, b;
    a.spec_index = 1;
    a.anchor = "ivreg2 y1 (d = z)";
    a.treatment = "d";
    b.spec_index = 2;
    b.anchor = "ivreg2 y2 (d = z)";
    b.treatment = "d";
    const auto out = inject_export(inject_export(src, a), b);
    const auto lines = split_lines(out);
    CHECK(lines[0] == "ivreg2 y1 (d = z)");
    CHECK(lines[1] == "* ##REPRO_EXPORT spec=1");
    CHECK(lines[4] == "summarize y1");
    CHECK(lines[5] == "ivreg2 y2 (d = z)");
    CHECK(lines[6] == "* ##REPRO_EXPORT spec=2");
    CHECK(count(out, "##REPRO_EXPORT spec=1\n") == 1);
    CHECK(count(out, "##REPRO_EXPORT spec=2\n") == 1);
    // injection keeps every original statement in order
    const auto orig = parser::segment_stata(src).commands;
    std::vector<std::string> kept;
    for (const auto& c : parser::segment_stata(out).commands)
        if (c.verb != "display" && c.verb != "export") kept.push_back(c.text);
    REQUIRE(kept.size() == orig.size());
    for (std::size_t i = 0; i < orig.size(); ++i) CHECK(kept[i] == orig[i].text);
}

TEST_CASE("anchor errors") {
    ExportPlan plan;
    plan.spec_index = 1;
    plan.treatment = "d";
    plan.anchor = "ivreg2 y (d = z)";
    try {
        inject_export("ivreg2 y (d = z)\nivreg2 y (d = z)\n", plan);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AnchorAmbiguous);
    }
    try {
        inject_export("summarize y\n", plan);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AnchorNotFound);
    }
}

TEST_CASE("R and Python export blocks") {
    const auto rs = rscript("library(AER)\nm1 <- ivreg(y ~ d + x | z + x,\n            data = dat)\nsummary(m1)\n");
    auto specs = parser::extract_specifications({rs}).specs;
    REQUIRE(specs.size() == 1);
    const auto plan = plan_esample(rs, specs[0], 1);
    CHECK(plan.model_object == "m1");
    CHECK(plan.data_object == "dat");
    const auto lines = split_lines(inject_export(rs.text, plan));
    CHECK(lines[2] == "            data = dat)");
    CHECK(lines[3] == "# ##REPRO_EXPORT spec=1");
    CHECK(lines[4] == ".repro_fit <- m1");
    CHECK(lines[9] == "write.csv(dat, \"analysis_data_spec_1.csv\", row.names = FALSE)");
    CHECK(lines[10] == "summary(m1)");

    const auto ps = py("res = IV2SLS.from_formula('y ~ 1 + x + [d ~ z]', df).fit(cov_type='clustered', clusters=df.g)\nprint(res)\n");
    auto pspecs = parser::extract_specifications({ps}).specs;
    REQUIRE(pspecs.size() == 1);
    const auto pplan = plan_esample(ps, pspecs[0], 1);
    CHECK(pplan.model_object == "res");
    CHECK(pplan.data_object == "df");
    const auto plines = split_lines(inject_export(ps.text, pplan));
    CHECK(plines[2] == "_repro_fit = res");
    CHECK(plines[5] == "df.to_csv(\"analysis_data_spec_1.csv\", index=False)");
    CHECK(plines[6] == "print(res)");
}

TEST_CASE("captured non-target IV commands are commented") {
    const auto s = stata("capture noisily ivreg2 y (d = w)\nivreg2 y (d = z)\ncapture ivreg2 y2 (d = z)\n");
    const auto r = comment_nontarget_iv(s, {"ivreg2 y (d = z)"});
    CHECK(r.text == "// capture noisily ivreg2 y (d = w)\nivreg2 y (d = z)\n// capture ivreg2 y2 (d = z)\n");
    CHECK(r.log.size() == 2);
    CHECK(r.log[0].rule_id == "iv.nontarget");
}
