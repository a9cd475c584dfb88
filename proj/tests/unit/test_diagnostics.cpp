#include "fixtures.hpp"

#include "ivrepro/diagnostics/diagnostics.hpp"
#include "ivrepro/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace ivrepro;
using namespace ivrepro::diagnostics;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Heteroskedasticity-robust Wald test on the Z block of y - b0*d regressed on [Z X], written out longhand.
double ar_oracle(const testfx::Sim& s, double b0) {
    const auto n = s.y.size();
    MatrixXd W(n, s.Z.cols() + s.X.cols());
    W << s.Z, s.X;
    const VectorXd e = s.y - b0 * s.d;
    const MatrixXd WtW_inv = (W.transpose() * W).inverse();
    const VectorXd beta = WtW_inv * W.transpose() * e;
    const VectorXd r = e - W * beta;
    MatrixXd meat = MatrixXd::Zero(W.cols(), W.cols());
    for (Eigen::Index i = 0; i < n; ++i) meat += r[i] * r[i] * W.row(i).transpose() * W.row(i);
    const double K = static_cast<double>(W.cols());
    const MatrixXd V = static_cast<double>(n) / (static_cast<double>(n) - K) * WtW_inv * meat * WtW_inv;
    const auto m = s.Z.cols();
    const VectorXd p = beta.head(m);
    return p.dot(V.topLeftCorner(m, m).inverse() * p) / static_cast<double>(m);
}

}  // namespace

TEST_CASE("AR statistic matches a longhand reduced-form Wald test") {
    for (int m : {1, 3}) {
        const auto s = testfx::simulate(300, m, 2, 11 + m);
        const auto b = testfx::bundle_of(s);
        for (double b0 : {0.0, -1.5, 2.0}) {
            const auto r = ar_test(b, b0);
            CHECK(r.statistic == doctest::Approx(ar_oracle(s, b0)).epsilon(1e-9));
            CHECK(r.df1 == m);
            CHECK(r.df2 == doctest::Approx(300 - m - 3));
        }
    }
}

TEST_CASE("AR statistic is zero at the just-identified estimate") {
    const auto b = testfx::bundle_of(testfx::simulate(200, 1, 2, 5));
    const double tau = estimate::fit_2sls(b).second.coefficient;
    const auto r = ar_test(b, tau);
    CHECK(r.statistic == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("AR confidence set contains the estimate") {
    const auto b = testfx::bundle_of(testfx::simulate(400, 1, 1, 8));
    const auto fit = estimate::fit_2sls(b).second;
    const auto ci = ar_confidence_interval(b, fit.coefficient, fit.std_error);
    REQUIRE(ci.low);
    REQUIRE(ci.high);
    CHECK(*ci.low < fit.coefficient);
    CHECK(*ci.high > fit.coefficient);
    CHECK_FALSE(ci.disjoint);
}

TEST_CASE("effective F equals the conventional F under the classical covariance") {
    for (int m : {1, 2, 4}) {
        const auto b = testfx::bundle_of(testfx::simulate(250, m, 2, 21 + m));
        const auto first = estimate::fit_2sls(b).first;
        CHECK(effective_f(first.pi, first.vcov_classic, first.Qzz) == doctest::Approx(first.conventional_F).epsilon(1e-9));
    }
}

TEST_CASE("effective F follows its formula with three instruments") {
    const auto b = testfx::bundle_of(testfx::simulate(300, 3, 1, 31, 30));
    const auto first = estimate::fit_2sls(b).first;
    const double num = first.pi.dot(first.Qzz * first.pi);
    const double den = (first.vcov * first.Qzz).trace();
    CHECK(effective_f(first) == doctest::Approx(num / den));
    VectorXd pi(1);
    pi << 2.0;
    MatrixXd V(1, 1), Q(1, 1);
    V << 0.25;
    Q << 7.0;
    CHECK(effective_f(pi, V, Q) == doctest::Approx(16.0));
}

TEST_CASE("bootstrap does not depend on the number of workers") {
    const auto b = testfx::bundle_of(testfx::simulate(200, 1, 1, 3, 20));
    const auto one = bootstrap_suite(b, 60, 42, 1);
    const auto four = bootstrap_suite(b, 60, 42, 4);
    CHECK(one.taus == four.taus);
    CHECK(one.boot_c.low == four.boot_c.low);
    CHECK(one.boot_t.high == four.boot_t.high);
    CHECK(one.bootstrap_F == four.bootstrap_F);
    CHECK(one.unit == "cluster");
    const auto other = bootstrap_suite(b, 60, 43, 1);
    CHECK(other.taus != one.taus);
}

TEST_CASE("bootstrap intervals collapse without noise") {
    auto s = testfx::simulate(150, 1, 1, 4, 0, 0.0);
    s.y = -1.5 * s.d + 0.5 * s.X.rowwise().sum();
    const auto r = bootstrap_suite(testfx::bundle_of(s), 50, 7, 1);
    CHECK(r.boot_c.high - r.boot_c.low == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r.boot_c.low == doctest::Approx(-1.5));
    CHECK(r.unit == "observation");
}

TEST_CASE("bootstrap percentile interval uses type 7 quantiles") {
    CHECK(quantile_type7({1, 2, 3, 4, 5}, 0.25) == doctest::Approx(2.0));
    CHECK(quantile_type7({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_type7({10, 20}, 0.975) == doctest::Approx(19.75));
    const auto b = testfx::bundle_of(testfx::simulate(120, 1, 1, 9));
    const auto r = bootstrap_suite(b, 80, 1, 1);
    CHECK(r.boot_c.low == quantile_type7(r.taus, 0.025));
    CHECK(r.boot_c.high == quantile_type7(r.taus, 0.975));
}

TEST_CASE("cluster jackknife matches a leave-one-cluster-out loop") {
    const auto s = testfx::simulate(100, 1, 1, 17, 5);
    const auto b = testfx::bundle_of(s);
    const double tau = estimate::fit_2sls(b).second.coefficient;
    const auto jk = jackknife(b, tau);
    REQUIRE(jk.unit == "cluster");
    REQUIRE(jk.estimates.size() == 5);
    double worst = -1;
    std::string who;
    for (int g = 0; g < 5; ++g) {
        std::vector<Eigen::Index> keep;
        for (int i = 0; i < 100; ++i)
            if (s.cluster[static_cast<std::size_t>(i)] != "c" + std::to_string(g)) keep.push_back(i);
        testfx::Sim t;
        t.y = s.y(keep);
        t.d = s.d(keep);
        t.Z = s.Z(keep, Eigen::all);
        t.X = s.X(keep, Eigen::all);
        const double est = estimate::fit_2sls(testfx::bundle_of(t)).second.coefficient;
        CHECK(jk.estimates[static_cast<std::size_t>(g)] == doctest::Approx(est).epsilon(1e-10));
        if (std::abs(est - tau) > worst) {
            worst = std::abs(est - tau);
            who = "c" + std::to_string(g);
        }
    }
    CHECK(jk.most_influential == who);
    CHECK(jk.delta == doctest::Approx(worst));
    CHECK(jk.relative_shift == doctest::Approx(worst / std::abs(tau)));
}

TEST_CASE("jackknife over identical clusters is flat") {
    auto s = testfx::simulate(30, 1, 0, 2);
    testfx::Sim big;
    const int copies = 4;
    big.y.resize(30 * copies);
    big.d.resize(30 * copies);
    big.Z.resize(30 * copies, 1);
    big.X.resize(30 * copies, 1);
    for (int c = 0; c < copies; ++c) {
        big.y.segment(c * 30, 30) = s.y;
        big.d.segment(c * 30, 30) = s.d;
        big.Z.block(c * 30, 0, 30, 1) = s.Z;
        big.X.block(c * 30, 0, 30, 1) = s.X;
        for (int i = 0; i < 30; ++i) big.cluster.push_back("k" + std::to_string(c));
    }
    const auto b = testfx::bundle_of(big);
    const double tau = estimate::fit_2sls(b).second.coefficient;
    const auto jk = jackknife(b, tau);
    CHECK(jk.max - jk.min == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(jk.relative_shift == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("observation jackknife samples rows reproducibly") {
    const auto b = testfx::bundle_of(testfx::simulate(500, 1, 1, 6));
    const double tau = estimate::fit_2sls(b).second.coefficient;
    const auto a = jackknife(b, tau, 2000, 50, 42);
    const auto c = jackknife(b, tau, 2000, 50, 42);
    CHECK(a.unit == "observation");
    CHECK(a.ids.size() == 50);
    CHECK(a.ids == c.ids);
    CHECK(a.ids.front().rfind("row ", 0) == 0);
}

TEST_CASE("first-stage rho") {
    const auto b = testfx::bundle_of(testfx::simulate(300, 1, 1, 13));
    const auto first = estimate::fit_2sls(b).first;
    const double rho = first_stage_rho(b, first);
    CHECK(rho > 0);
    CHECK(rho <= 1);
    // with one instrument the fitted value is proportional to the partialled instrument
    const VectorXd zt = estimate::partial_out(b.Z, b.X);
    const VectorXd dt = estimate::partial_out(b.d, b.X);
    const double corr = std::abs(zt.dot(dt)) / (zt.norm() * dt.norm());
    CHECK(rho == doctest::Approx(corr));
    auto exact = b;
    exact.d = b.Z.col(0) * 2.0 + b.X.col(1);
    CHECK(first_stage_rho(exact, estimate::fit_2sls(exact).first) == doctest::Approx(1.0));
}

TEST_CASE("cap leaves small samples alone and keeps whole clusters") {
    const auto b = testfx::bundle_of(testfx::simulate(200, 1, 1, 14, 20));
    const auto same = cap_sample(b, 1000, 1);
    CHECK_FALSE(same.capped);
    CHECK(same.bundle.n() == 200);
    CHECK(same.bundle.y == b.y);
    const auto cut = cap_sample(b, 95, 1);
    CHECK(cut.capped);
    CHECK(cut.original_n == 200);
    CHECK(cut.bundle.n() == 90);
    CHECK(cut.bundle.G() == 9);
    const auto again = cap_sample(b, 95, 1);
    CHECK(again.bundle.y == cut.bundle.y);
    const auto other = cap_sample(b, 95, 2);
    CHECK(other.bundle.y != cut.bundle.y);
}

TEST_CASE("rating table") {
    CHECK(rating_for(0) == Rating::High);
    CHECK(rating_for(1) == Rating::Moderate);
    CHECK(rating_for(2) == Rating::Moderate);
    CHECK(rating_for(3) == Rating::Low);
    CHECK(rating_for(4) == Rating::Low);
    CHECK(rating_for(5) == Rating::VeryLow);
    CHECK(to_string(Rating::VeryLow) == "VERY_LOW");
}

TEST_CASE("warning rules") {
    DiagnosticsBundle d;
    d.tsls.coefficient = 1.0;
    d.tsls.p_value = 0.01;
    d.ols.coefficient = -0.5;
    d.ols.p_value = 0.01;
    d.effective_F = 9.99;
    d.ar = ARResult{1.0, 0.05, 1, 100};
    d.jackknife = JackknifeResult{};
    d.jackknife->relative_shift = 0.21;
    d.bootstrap = BootstrapResult{};
    d.bootstrap->boot_c = {-0.1, 2.0};
    evaluate(d);
    CHECK(d.warnings.size() == 5);
    CHECK(d.rating == Rating::VeryLow);

    d.effective_F = 10.0;
    d.ar->p_value = 0.049;
    d.jackknife->relative_shift = 0.20;
    d.bootstrap->boot_c = {0.1, 2.0};
    d.ols.p_value = 0.2;
    evaluate(d);
    CHECK(d.warnings.empty());
    CHECK(d.rating == Rating::High);
    CHECK(d.incomplete.empty());

    DiagnosticsBundle partial;
    partial.effective_F = 3.0;
    evaluate(partial);
    CHECK(partial.warnings.size() == 1);
    CHECK(partial.incomplete.size() == 3);
}

TEST_CASE("tF critical values") {
    CHECK(tf_critical_value(104.7) == doctest::Approx(1.96));
    CHECK(tf_critical_value(500) == doctest::Approx(1.96));
    CHECK(tf_critical_value(10.0) == doctest::Approx(3.43).epsilon(0.005));
    CHECK(tf_critical_value(3.85) == doctest::Approx(79.6739));
    CHECK_THROWS_AS(tf_critical_value(3.84), Error);
    double prev = 1e9;
    for (double f = 3.9; f < 110; f += 0.37) {
        const double c = tf_critical_value(f);
        CHECK(c <= prev);
        prev = c;
    }
    const auto floor = tf_test(2.0, 0.5, 3.0);
    CHECK(floor.below_floor);
    CHECK_FALSE(floor.pass_at_5pct);
    CHECK(tf_test(4.0, 1.0, 10.0).pass_at_5pct);
    CHECK_FALSE(tf_test(3.0, 1.0, 10.0).pass_at_5pct);
    CHECK_FALSE(tf_test(3.0, 1.0, 10.0, 2).applicable);
}

TEST_CASE("diagnostics are scale equivariant") {
    const auto s = testfx::simulate(200, 1, 1, 19, 20);
    const auto b = testfx::bundle_of(s);
    auto scaled = b;
    scaled.y *= 3.0;
    DiagnosticsConfig cfg;
    cfg.iters = 40;
    const auto a = run_diagnostics(b, cfg, 0);
    const auto c = run_diagnostics(scaled, cfg, 0);
    CHECK(c.tsls.coefficient == doctest::Approx(3 * a.tsls.coefficient));
    CHECK(c.tsls.std_error == doctest::Approx(3 * a.tsls.std_error));
    CHECK(*c.effective_F == doctest::Approx(*a.effective_F));
    CHECK(c.ar->statistic == doctest::Approx(a.ar->statistic));
    CHECK(c.bootstrap->boot_c.low == doctest::Approx(3 * a.bootstrap->boot_c.low));
    CHECK(c.jackknife->relative_shift == doctest::Approx(a.jackknife->relative_shift));
    CHECK(c.warnings == a.warnings);
}

TEST_CASE("diagnostics JSON round trip") {
    const auto b = testfx::bundle_of(testfx::simulate(150, 1, 1, 23, 15));
    DiagnosticsConfig cfg;
    cfg.iters = 30;
    const auto d = run_diagnostics(b, cfg, 2);
    const auto j = to_json(d);
    const auto back = diagnostics_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(j["rating"].is_string());
    CHECK(j["bootstrap"]["iters"] == 30);
    CHECK_THROWS_AS(diagnostics_from_json(nlohmann::json::object()), Error);
}
