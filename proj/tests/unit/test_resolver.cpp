#include "ivrepro/error.hpp"
#include "ivrepro/resolve/resolver.hpp"

#include <doctest.h>

#include <cmath>

using namespace ivrepro;
using namespace ivrepro::resolve;
using data::DataTable;

namespace {

DataTable csv(const std::string& text) { return data::parse_delimited(text, ','); }

bool same_with_missing(const Eigen::VectorXd& a, const std::vector<double>& b) {
    if (a.size() != static_cast<Eigen::Index>(b.size())) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[static_cast<std::size_t>(i)];
        if (std::isnan(x) != std::isnan(y)) return false;
        if (!std::isnan(x) && std::abs(x - y) > 1e-12) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("column tiers") {
    const auto cat = ColumnCatalog::of_names({"lcri_euc1_r", "incumbvotesmajorpercent", "year", "Pop", "gdp"});
    auto r = resolve_column("lcri_euac1_r", cat);
    CHECK(r.tier == Tier::EditDistance);
    CHECK(r.distance == 1);
    CHECK(*r.column == "lcri_euc1_r");

    r = resolve_column("incumbvotes", cat);
    CHECK(r.tier == Tier::Prefix);
    CHECK(*r.column == "incumbvotesmajorpercent");

    r = resolve_column("year", cat);
    CHECK(r.tier == Tier::Exact);
    CHECK_FALSE(r.distance);

    r = resolve_column("pop", cat);
    CHECK(r.tier == Tier::CaseInsensitive);

    r = resolve_column("`gdp`", cat);
    CHECK(r.tier == Tier::Exact);
    CHECK(*r.column == "gdp");

    CHECK(resolve_column("nothing_like_it", cat).tier == Tier::Unresolved);
}

TEST_CASE("exact match shadows near names") {
    const auto cat = ColumnCatalog::of_names({"margin1", "margin", "margins"});
    const auto r = resolve_column("margin", cat);
    CHECK(r.tier == Tier::Exact);
    CHECK(*r.column == "margin");
}

TEST_CASE("ties are not guessed") {
    const auto cat = ColumnCatalog::of_names({"abcd1", "abcd2"});
    const auto r = resolve_column("abcd3", cat);
    CHECK(r.tier == Tier::Unresolved);
    CHECK_FALSE(r.column);
    CHECK(r.note.find("ambiguous") != std::string::npos);

    const auto closer = ColumnCatalog::of_names({"abcdef", "abxdyf"});
    CHECK(*resolve_column("abcdex", closer).column == "abcdef");
}

TEST_CASE("truncated names") {
    const std::string full = "a_rather_long_variable_name_that_goes";
    const auto cat = ColumnCatalog::of_names({full, "other"});
    const auto r = resolve_column(full.substr(0, 31) + "~", cat);
    CHECK(r.tier == Tier::Prefix);
    CHECK(*r.column == full);
    const auto two = ColumnCatalog::of_names({full, full + "2"});
    CHECK(resolve_column(full.substr(0, 31) + "~", two).tier == Tier::Unresolved);
}

TEST_CASE("resolution is deterministic") {
    const auto cat = ColumnCatalog::of_names({"alpha", "alphb", "beta"});
    const auto a = resolve_column("alphz", cat);
    const auto b = resolve_column("alphz", cat);
    CHECK(to_json(a) == to_json(b));
}

TEST_CASE("time-series operator grammar") {
    const auto p = parse_ts_term("L2D.x");
    REQUIRE(p);
    CHECK(p->second == "x");
    REQUIRE(p->first.size() == 2);
    CHECK(p->first[0] == TsOp{'D', 1});
    CHECK(p->first[1] == TsOp{'L', 2});
    CHECK_FALSE(parse_ts_term("plain"));
    CHECK_FALSE(parse_ts_term("i.year"));
}

TEST_CASE("lag terms find realized encodings") {
    const auto cat = ColumnCatalog::of_names({"l4margin_index2", "margin_index2", "l_gdp", "gdp"});
    auto r = resolve_ts_term("l4.margin_index2", cat, std::nullopt);
    CHECK(r.tier == Tier::Exact);
    CHECK(*r.column == "l4margin_index2");
    CHECK(r.note == "dot-stripped");
    r = resolve_ts_term("L.gdp", cat, std::nullopt);
    CHECK(*r.column == "l_gdp");
    CHECK(resolve_ts_term("year", ColumnCatalog::of_names({"year"}), std::nullopt).tier == Tier::Exact);
}

TEST_CASE("lag recipe matches a per-unit shift") {
    auto t = csv("id,t,nbi_i\n1,1,10\n1,2,11\n1,3,12\n2,1,20\n2,2,21\n2,3,22\n");
    const PanelSpec panel{"id", "t"};
    const auto r = resolve_ts_term("l.nbi_i", ColumnCatalog::of(t), panel, &t);
    REQUIRE(r.recipe);
    CHECK(r.tier == Tier::Derived);
    CHECK(r.recipe->describe() == "shift(nbi_i, 1)");
    const double na = std::nan("");
    CHECK(same_with_missing(apply_recipe(*r.recipe, t, panel), {na, 10, 11, na, 20, 21}));
    CHECK(same_with_missing(apply_recipe(TsRecipe{"nbi_i", {{'F', 1}}}, t, panel), {11, 12, na, 21, 22, na}));
    CHECK(same_with_missing(apply_recipe(TsRecipe{"nbi_i", {{'D', 1}, {'L', 1}}}, t, panel), {na, na, 1, na, na, 1}));
    CHECK_THROWS_AS(resolve_ts_term("l.nbi_i", ColumnCatalog::of(t), std::nullopt, &t), Error);
}

TEST_CASE("lag recipe respects time gaps and row order") {
    auto t = csv("id,t,x\n2,3,5\n1,1,1\n1,4,4\n1,2,2\n2,2,3\n");
    const double na = std::nan("");
    CHECK(same_with_missing(apply_recipe(TsRecipe{"x", {{'L', 1}}}, t, PanelSpec{"id", "t"}), {3, na, na, 1, na}));
}

TEST_CASE("a lag column with extra missing values is recomputed") {
    auto t = csv("id,t,x,lx\n1,1,1,\n1,2,2,\n1,3,3,2\n2,1,4,\n2,2,5,4\n2,3,6,5\n");
    const auto r = resolve_ts_term("L.x", ColumnCatalog::of(t), PanelSpec{"id", "t"}, &t);
    CHECK(r.tier == Tier::Derived);
    REQUIRE(r.recipe);
    auto ok = csv("id,t,x,lx\n1,1,1,\n1,2,2,1\n1,3,3,2\n2,1,4,\n2,2,5,4\n2,3,6,5\n");
    const auto kept = resolve_ts_term("L.x", ColumnCatalog::of(ok), PanelSpec{"id", "t"}, &ok);
    CHECK(kept.tier == Tier::Exact);
    CHECK(*kept.column == "lx");
}

TEST_CASE("factor expansion") {
    auto t = csv("year,_Iyear_2000,_Iyear_2001,_Iyear_2002,_Iyear_2003,_Iyear_2004,y\n2000,1,0,0,0,0,1\n");
    CHECK(expand_factor("i.year", t).size() == 5);

    auto r = csv("region,y\nnorth,1\nsouth,2\neast,3\nnorth,4\n,5\nsouth,6\n");
    const auto cols = expand_factor("i.region", r);
    REQUIRE(cols.size() == 2);
    CHECK(cols[0] == "_Iregion_north");
    CHECK(cols[1] == "_Iregion_south");
    double north = 0, south = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        if (!std::isnan(r.column(cols[0]).values[i])) north += r.column(cols[0]).values[i];
        if (!std::isnan(r.column(cols[1]).values[i])) south += r.column(cols[1]).values[i];
    }
    CHECK(north == 2);
    CHECK(south == 2);
    CHECK(std::isnan(r.column(cols[0]).values[4]));

    auto c = csv("constant,y\n1,1\n1,2\n");
    CHECK_THROWS_AS(expand_factor("i.constant", c), Error);
}

TEST_CASE("computed expressions") {
    auto t = csv("infeels,outfeels,x\n5,1,1\n3,2,2.718281828459045\n9,0,7.38905609893065\n");
    const auto name = materialize_expression("zero1(infeels-outfeels)", t);
    const auto& z = t.column(name).values;
    CHECK(z.minCoeff() == doctest::Approx(0.0));
    CHECK(z.maxCoeff() == doctest::Approx(1.0));
    const auto lx = materialize_expression("log(x)", t);
    CHECK(t.column(lx).values[0] == doctest::Approx(0.0));
    CHECK(t.column(lx).values[1] == doctest::Approx(1.0));
    CHECK(t.column(lx).values[2] == doctest::Approx(2.0));
    CHECK_THROWS_AS(materialize_expression("x", t), Error);
    try {
        materialize_expression("log(missing_col)", t);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnresolvedOperand);
    }
}

TEST_CASE("cluster strings") {
    const auto cat = ColumnCatalog::of_names({"ccode", "year", "muni_code"});
    CHECK(split_cluster_spec("ccode year", cat) == std::vector<std::string>{"ccode", "year"});
    CHECK(split_cluster_spec("ccode.year", cat) == std::vector<std::string>{"ccode", "year"});
    CHECK(split_cluster_spec("muni_code", cat) == std::vector<std::string>{"muni_code"});
    CHECK(split_cluster_spec("a.b", cat) == std::vector<std::string>{"a.b"});
}

TEST_CASE("term dispatch") {
    auto t = csv("id,t,a,b,g\n1,1,1,2,x\n1,2,2,3,y\n2,1,3,4,x\n2,2,4,5,z\n");
    std::vector<Resolution> audit;
    const PanelSpec panel{"id", "t"};
    CHECK(resolve_term("c.a#c.b", t, panel, audit) == std::vector<std::string>{"a#b"});
    CHECK(t.column("a#b").values[3] == 20);
    CHECK(resolve_term("a:b", t, panel, audit) == std::vector<std::string>{"a#b"});
    CHECK(resolve_term("L.a", t, panel, audit) == std::vector<std::string>{"L.a"});
    CHECK(std::isnan(t.column("L.a").values[0]));
    CHECK(t.column("L.a").values[1] == 1);
    CHECK(resolve_term("i.g", t, panel, audit).size() == 2);
    CHECK(resolve_term("i.g#c.a", t, panel, audit).size() == 2);
    CHECK(resolve_term("log(b)", t, panel, audit) == std::vector<std::string>{"log(b)"});
    CHECK(resolve_term("A", t, panel, audit) == std::vector<std::string>{"a"});
    CHECK_THROWS_AS(resolve_term("nowhere_q", t, panel, audit), Error);
    CHECK_FALSE(audit.empty());
}
