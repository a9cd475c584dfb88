#include "ivrepro/error.hpp"
#include "ivrepro/estimate/design.hpp"
#include "ivrepro/estimate/fit.hpp"

#include <doctest.h>

using namespace ivrepro;
using namespace ivrepro::estimate;

namespace {

parser::IVSpecification basic_spec() {
    parser::IVSpecification s;
    s.outcome = "y";
    s.treatment = "d";
    s.instruments = {"z"};
    s.controls = {"x"};
    return s;
}

const char* kTen =
    "id,year,region,y,d,z,x\n"
    "1,1998,1,1.0,0.5,0.1,3\n"
    "2,1999,1,2.1,1.1,0.9,1\n"
    "3,2000,1,2.9,1.4,1.6,4\n"
    "4,2001,2,4.2,2.2,1.9,1\n"
    "5,2002,1,5.1,2.4,2.8,5\n"
    "6,2003,1,5.8,3.1,3.1,9\n"
    "7,2000,2,7.2,3.4,3.9,2\n"
    "8,2004,1,8.1,4.2,4.4,6\n"
    "9,2005,3,8.8,4.4,5.2,5\n"
    "10,2006,1,10.3,5.3,5.4,3\n";

}  // namespace

TEST_CASE("if condition filters to the hand-picked rows") {
    auto spec = basic_spec();
    spec.if_condition = "year >= 2000 & region == 1";
    const auto built = build_design(data::parse_delimited(kTen, ','), spec);
    // ids 3, 5, 6, 8, 10
    CHECK(built.bundle.source_rows == std::vector<Eigen::Index>{2, 4, 5, 7, 9});
    CHECK(built.bundle.n() == 5);
    CHECK(built.rows_condition_out == 5);
    CHECK(built.bundle.X.col(0).isOnes());
    CHECK(built.bundle.x_names == std::vector<std::string>{"_cons", "x"});
}

TEST_CASE("R conditions use the R missing-value rule") {
    auto spec = basic_spec();
    spec.software = parser::Language::R;
    spec.if_condition = "region != 2";
    auto t = data::parse_delimited("y,d,z,x,region\n1,1,1,1,1\n2,2,1,3,\n3,1,2,2,2\n4,3,3,1,1\n5,4,3,6,3\n6,4,5,2,1\n", ',');
    const auto built = build_design(t, spec);
    CHECK(built.bundle.source_rows == std::vector<Eigen::Index>{0, 3, 4, 5});
    spec.software = parser::Language::Stata;
    // Stata treats missing as larger than any number, so region != 2 holds
    CHECK(build_design(t, spec).bundle.source_rows == std::vector<Eigen::Index>{0, 1, 3, 4, 5});
}

TEST_CASE("malformed conditions are reported") {
    auto spec = basic_spec();
    spec.if_condition = "year >= (2000";
    try {
        build_design(data::parse_delimited(kTen, ','), spec);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConditionParseError);
    }
}

TEST_CASE("rows with missing required fields never change the estimate") {
    const auto spec = basic_spec();
    const auto base = fit_2sls(build_design(data::parse_delimited(kTen, ','), spec).bundle).second;
    for (const char* extra : {"11,2007,1,,1,1,1\n", "11,2007,1,3,.,1,1\n", "11,2007,1,3,1,NA,1\n", "11,2007,1,3,1,2,\n"}) {
        const auto more = build_design(data::parse_delimited(std::string(kTen) + extra, ','), spec);
        CHECK(more.rows_missing_out == 1);
        const auto fit = fit_2sls(more.bundle).second;
        CHECK(fit.coefficient == base.coefficient);
        CHECK(fit.std_error == base.std_error);
    }
}

TEST_CASE("an all-ones esample flag changes nothing") {
    auto spec = basic_spec();
    spec.if_condition = "e(sample)";
    std::string flagged = "id,year,region,y,d,z,x,janitor_esample\n";
    std::string text = kTen;
    for (std::size_t pos = text.find('\n') + 1; pos < text.size();) {
        const auto eol = text.find('\n', pos);
        flagged += text.substr(pos, eol - pos) + ",1\n";
        pos = eol + 1;
    }
    const auto with = build_design(data::parse_delimited(flagged, ','), spec).bundle;
    const auto without = build_design(data::parse_delimited(kTen, ','), basic_spec()).bundle;
    CHECK(with.y == without.y);
    CHECK(with.Z == without.Z);
    CHECK(with.X == without.X);
    CHECK(fit_2sls(with).second.coefficient == fit_2sls(without).second.coefficient);
}

TEST_CASE("the esample flag is applied after lags are built") {
    auto spec = basic_spec();
    spec.controls = {"L.x"};
    spec.panel = parser::PanelDecl{"id", "t"};
    spec.if_condition = "e(sample)";
    auto t = data::parse_delimited(
        "id,t,y,d,z,x,janitor_esample\n"
        "1,1,1,1,1,10,0\n1,2,2,2,1,11,1\n1,3,3,2,2,12,1\n1,4,5,3,2,13,1\n"
        "2,1,2,1,0,20,0\n2,2,4,3,3,21,1\n2,3,5,4,2,22,1\n2,4,7,5,4,23,1\n",
        ',');
    const auto b = build_design(t, spec).bundle;
    CHECK(b.n() == 6);
    CHECK(b.X(0, 1) == 10);
    CHECK(b.X(3, 1) == 20);
}

TEST_CASE("clusters, absorbed effects and weights are carried over") {
    auto spec = basic_spec();
    spec.cluster_vars = {"region"};
    spec.fixed_effects = {"year"};
    spec.weight = parser::Weight{parser::WeightKind::AWeight, "x"};
    const auto b = build_design(data::parse_delimited(kTen, ','), spec).bundle;
    CHECK(b.G() == 3);
    REQUIRE(b.fixed_effects.size() == 1);
    CHECK(b.fixed_effects[0].levels() == 9);
    REQUIRE(b.weights);
    CHECK((*b.weights)[0] == 3);
}

TEST_CASE("unknown terms and empty samples") {
    auto spec = basic_spec();
    spec.instruments = {"instrument_not_there"};
    try {
        build_design(data::parse_delimited(kTen, ','), spec);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnresolvedTerm);
    }
    spec = basic_spec();
    spec.if_condition = "year > 3000";
    try {
        build_design(data::parse_delimited(kTen, ','), spec);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptySample);
    }
}
