#include <doctest.h>

#include "fixtures.hpp"
#include "ivrepro/error.hpp"
#include "ivrepro/estimate/fit.hpp"

#include <cmath>

using namespace ivrepro;
using namespace ivrepro::estimate;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// Brute force: explicit inverses and a per-cluster loop.
struct Oracle {
    VectorXd beta;
    MatrixXd vcov;
};

Oracle iv_oracle(const VectorXd& y, const MatrixXd& R, const MatrixXd& W, const std::vector<std::string>& cluster, Eigen::Index extra_k = 0) {
    const MatrixXd P = W * (W.transpose() * W).inverse() * W.transpose();
    const MatrixXd A = (R.transpose() * P * R).inverse();
    Oracle o;
    o.beta = A * R.transpose() * P * y;
    const VectorXd e = y - R * o.beta;
    const MatrixXd Rh = P * R;
    const auto n = static_cast<double>(y.size());
    const double K = static_cast<double>(R.cols() + extra_k);
    MatrixXd meat = MatrixXd::Zero(R.cols(), R.cols());
    if (cluster.empty()) {
        for (Eigen::Index i = 0; i < y.size(); ++i) meat += Rh.row(i).transpose() * Rh.row(i) * e[i] * e[i];
        o.vcov = n / (n - K) * A * meat * A;
    } else {
        std::vector<std::string> ids = cluster;
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        for (const auto& g : ids) {
            VectorXd s = VectorXd::Zero(R.cols());
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                if (cluster[static_cast<std::size_t>(i)] == g) s += Rh.row(i).transpose() * e[i];
            }
            meat += s * s.transpose();
        }
        const double G = static_cast<double>(ids.size());
        o.vcov = G / (G - 1) * (n - 1) / (n - K) * A * meat * A;
    }
    return o;
}

MatrixXd with_d(const VectorXd& d, const MatrixXd& X) {
    MatrixXd R(d.size(), 1 + X.cols());
    R << d, X;
    return R;
}

}  // namespace

TEST_CASE("just-identified 2SLS equals the Wald ratio") {
    DesignMatrixBundle b;
    b.Z = MatrixXd(4, 1);
    b.Z << 0, 0, 1, 1;
    b.d = VectorXd(4);
    b.d << 1, 2, 3, 4;
    b.y = VectorXd(4);
    b.y << 2, 4, 7, 9;
    b.X = MatrixXd::Ones(4, 1);
    // covariances computed directly
    const double zbar = b.Z.mean(), dbar = b.d.mean(), ybar = b.y.mean();
    double czy = 0, czd = 0;
    for (int i = 0; i < 4; ++i) {
        czy += (b.Z(i, 0) - zbar) * (b.y[i] - ybar);
        czd += (b.Z(i, 0) - zbar) * (b.d[i] - dbar);
    }
    CHECK(czy / czd == doctest::Approx(2.5));
    const auto r = fit_2sls(b);
    CHECK(rel_close(r.second.coefficient, czy / czd, 1e-10));
}

TEST_CASE("OLS matches the normal equations") {
    for (unsigned seed : {1u, 2u, 3u}) {
        const auto s = testfx::simulate(40, 1, 2, seed);
        const auto b = testfx::bundle_of(s);
        const MatrixXd R = with_d(s.d, s.X);
        const VectorXd beta = (R.transpose() * R).inverse() * R.transpose() * s.y;
        const auto r = fit_ols(b);
        CHECK(rel_close(r.coefficient, beta[0], 1e-8));
        const auto o = iv_oracle(s.y, R, R, {});
        CHECK(rel_close(r.std_error, std::sqrt(o.vcov(0, 0)), 1e-8));
    }
}

TEST_CASE("2SLS and cluster sandwich match brute force") {
    for (int m : {1, 3}) {
        const auto s = testfx::simulate(48, m, 2, 10u + static_cast<unsigned>(m), 8);
        const auto b = testfx::bundle_of(s);
        MatrixXd W(s.Z.rows(), s.Z.cols() + s.X.cols());
        W << s.Z, s.X;
        const auto o = iv_oracle(s.y, with_d(s.d, s.X), W, s.cluster);
        const auto r = fit_2sls(b);
        CHECK(rel_close(r.second.coefficient, o.beta[0], 1e-8));
        CHECK(rel_close(r.second.std_error, std::sqrt(o.vcov(0, 0)), 1e-8));
        CHECK(r.second.dof == doctest::Approx(7));
        CHECK(r.second.G == 8);
    }
}

TEST_CASE("instrumenting with itself reproduces OLS") {
    auto s = testfx::simulate(30, 1, 2, 5u, 6);
    s.Z = s.d;
    const auto b = testfx::bundle_of(s);
    const auto iv = fit_2sls(b).second;
    const auto ols = fit_ols(b);
    CHECK(rel_close(iv.coefficient, ols.coefficient, 1e-10));
    CHECK(rel_close(iv.std_error, ols.std_error, 1e-10));
}

TEST_CASE("exact fit has zero standard error") {
    DesignMatrixBundle b;
    b.d = VectorXd::LinSpaced(10, 1, 10);
    b.y = 2 * b.d;
    b.Z = b.d;
    b.X = MatrixXd::Ones(10, 1);
    const auto r = fit_ols(b);
    CHECK(r.coefficient == doctest::Approx(2.0));
    CHECK(r.std_error == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("absorbed fixed effects match the dummy regression") {
    // 12 rows, two crossed factors
    const auto s = testfx::simulate(12, 1, 1, 77u);
    std::vector<std::string> a, t;
    for (int i = 0; i < 12; ++i) {
        a.push_back("a" + std::to_string(i % 3));
        t.push_back("t" + std::to_string((i / 3) % 2));
    }
    auto b = testfx::bundle_of(s);
    b.fixed_effects = {make_grouping("a", a), make_grouping("t", t)};
    const auto absorbed = fit_2sls(b).second;

    // dummies: intercept + 2 for a + 1 for t
    MatrixXd X(12, 2 + 2 + 1);
    for (int i = 0; i < 12; ++i) {
        X(i, 0) = 1;
        X(i, 1) = s.X(i, 1);
        X(i, 2) = (i % 3) == 1;
        X(i, 3) = (i % 3) == 2;
        X(i, 4) = ((i / 3) % 2) == 1;
    }
    MatrixXd W(12, 1 + X.cols());
    W << s.Z, X;
    const auto o = iv_oracle(s.y, with_d(s.d, X), W, {});
    CHECK(rel_close(absorbed.coefficient, o.beta[0], 1e-8));
    CHECK(rel_close(absorbed.std_error, std::sqrt(o.vcov(0, 0)), 1e-8));

    // one factor: one sweep, equal to groupwise demeaning
    auto one = testfx::bundle_of(s);
    one.fixed_effects = {make_grouping("a", a)};
    const auto ab = absorb_fixed_effects(one);
    CHECK(ab.absorb_sweeps == 1);
    CHECK(ab.absorbed_dof == 3);
    for (int g = 0; g < 3; ++g) {
        double sum = 0;
        for (int i = 0; i < 12; ++i) {
            if (i % 3 == g) sum += ab.y[i];
        }
        CHECK(std::abs(sum) < 1e-12);
    }
    // no FE: identity
    const auto none = absorb_fixed_effects(testfx::bundle_of(s));
    CHECK(none.y == s.y);
    CHECK_FALSE(none.absorbed);
}

TEST_CASE("three crossed factors converge to the dummy regression") {
    const auto s = testfx::simulate(36, 1, 1, 91u);
    std::vector<std::string> a, t, c;
    MatrixXd X(36, 2 + 3 + 2 + 1);
    for (int i = 0; i < 36; ++i) {
        a.push_back(std::to_string(i % 4));
        t.push_back(std::to_string((i / 4) % 3));
        c.push_back(std::to_string((i * 7 / 5) % 2));
        X(i, 0) = 1;
        X(i, 1) = s.X(i, 1);
        for (int l = 1; l < 4; ++l) X(i, 1 + l) = (i % 4) == l;
        for (int l = 1; l < 3; ++l) X(i, 4 + l) = ((i / 4) % 3) == l;
        X(i, 7) = ((i * 7 / 5) % 2) == 1;
    }
    auto b = testfx::bundle_of(s);
    b.fixed_effects = {make_grouping("a", a), make_grouping("t", t), make_grouping("c", c)};
    const auto absorbed = fit_ols(b);
    const auto o = iv_oracle(s.y, with_d(s.d, X), with_d(s.d, X), {});
    CHECK(rel_close(absorbed.coefficient, o.beta[0], 1e-8));
}

TEST_CASE("scaling weights leaves estimates unchanged") {
    const auto s = testfx::simulate(40, 1, 2, 8u, 10);
    auto b = testfx::bundle_of(s);
    VectorXd w(40);
    for (int i = 0; i < 40; ++i) w[i] = 1.0 + (i % 5);
    b.weights = w;
    const auto r1 = fit_2sls(b).second;
    b.weights = 3.7 * w;
    const auto r2 = fit_2sls(b).second;
    CHECK(rel_close(r1.coefficient, r2.coefficient, 1e-12));
    CHECK(rel_close(r1.std_error, r2.std_error, 1e-10));

    // weighted estimate equals the oracle on sqrt(w)-scaled rows
    const VectorXd sw = w.cwiseSqrt();
    MatrixXd W(40, 1 + s.X.cols());
    W << s.Z, s.X;
    const auto o = iv_oracle(sw.asDiagonal() * s.y, sw.asDiagonal() * with_d(s.d, s.X), sw.asDiagonal() * W, s.cluster);
    CHECK(rel_close(r1.coefficient, o.beta[0], 1e-8));
    CHECK(rel_close(r1.std_error, std::sqrt(o.vcov(0, 0)), 1e-8));
}

TEST_CASE("collinear control is dropped, collinear treatment is rejected") {
    auto s = testfx::simulate(30, 1, 2, 4u);
    auto b = testfx::bundle_of(s);
    b.X.col(2) = 2 * b.X.col(1);
    const auto p = prepare(b);
    CHECK(p.X.cols() == 2);
    CHECK(p.notes.size() == 1);
    b.d = b.X.col(1);
    CHECK_THROWS_AS(fit_2sls(b), Error);
}

TEST_CASE("tolerance rule") {
    CHECK(compare_estimates(-2.2420, -2.2419).pass);
    CHECK_FALSE(compare_estimates(-2.24, 2.15).pass);
    const auto same = compare_estimates(1.5, 1.5);
    CHECK(same.pass);
    CHECK(std::abs(same.reference - same.candidate) == 0);
    CHECK(compare_estimates(0.0, 5e-7).tolerance == doctest::Approx(1e-6));
}
