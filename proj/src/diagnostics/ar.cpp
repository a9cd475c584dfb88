#include "ivrepro/diagnostics/diagnostics.hpp"

#include "ivrepro/error.hpp"

#include <boost/math/distributions/fisher_f.hpp>

#include <cmath>

namespace ivrepro::diagnostics {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Reduced-form pieces that make the AR statistic a quadratic in beta0.
struct ARSystem {
    Index m = 0;
    VectorXd b_y, b_d;
    MatrixXd bread;
    MatrixXd A, B, C;
    double factor = 0;
    double dof = 0;
};

ARSystem build_system(const DesignMatrixBundle& bundle) {
    const DesignMatrixBundle b = estimate::prepare(bundle);
    const estimate::Weighted w = estimate::weighted(b);
    const Index n = b.n();
    MatrixXd W(n, b.m() + b.k());
    W << w.Z, w.X;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(W);
    ARSystem s;
    s.m = b.m();
    s.b_y = qr.solve(w.y);
    s.b_d = qr.solve(w.d);
    const VectorXd e_y = w.y - W * s.b_y;
    const VectorXd e_d = w.d - W * s.b_d;
    s.bread = (W.transpose() * W).inverse();
    const Index K = W.cols() + b.absorbed_dof;
    if (n - K <= 0) fail(ErrorCode::RankDeficient, "not enough observations for the reduced form");
    MatrixXd Sy, Sd;
    if (b.clustered()) {
        const auto& g = b.clusters.front();
        Sy = MatrixXd::Zero(g.levels(), W.cols());
        Sd = MatrixXd::Zero(g.levels(), W.cols());
        for (Index i = 0; i < n; ++i) {
            Sy.row(g.codes[i]) += e_y[i] * W.row(i);
            Sd.row(g.codes[i]) += e_d[i] * W.row(i);
        }
        const double G = static_cast<double>(g.levels());
        s.factor = G / (G - 1) * (static_cast<double>(n) - 1) / static_cast<double>(n - K);
        s.dof = G - 1;
    } else {
        Sy = W.array().colwise() * e_y.array();
        Sd = W.array().colwise() * e_d.array();
        s.factor = static_cast<double>(n) / static_cast<double>(n - K);
        s.dof = static_cast<double>(n - K);
    }
    s.A = Sy.transpose() * Sy;
    s.B = Sy.transpose() * Sd;
    s.C = Sd.transpose() * Sd;
    return s;
}

ARResult evaluate_at(const ARSystem& s, double beta0) {
    ARResult r;
    r.df1 = static_cast<double>(s.m);
    r.df2 = s.dof;
    const VectorXd pi = (s.b_y - beta0 * s.b_d).head(s.m);
    const MatrixXd meat = s.A - beta0 * (s.B + s.B.transpose()) + beta0 * beta0 * s.C;
    const MatrixXd V = (s.factor * s.bread * meat * s.bread).topLeftCorner(s.m, s.m);
    Eigen::LDLT<MatrixXd> ldlt(V);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0).all()) {
        r.statistic = pi.norm() == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
        r.statistic = pi.dot(ldlt.solve(pi)) / r.df1;
    }
    if (!std::isfinite(r.statistic)) {
        r.p_value = 0;
    } else {
        boost::math::fisher_f dist(r.df1, r.df2);
        r.p_value = std::clamp(boost::math::cdf(boost::math::complement(dist, std::max(0.0, r.statistic))), 0.0, 1.0);
    }
    return r;
}

}  // namespace

ARResult ar_test(const DesignMatrixBundle& bundle, double beta0) { return evaluate_at(build_system(bundle), beta0); }

ARInterval ar_confidence_interval(const DesignMatrixBundle& bundle, double tau, double se, double level) {
    ARInterval out;
    const ARSystem s = build_system(bundle);
    const double alpha = 1 - level;
    const double step = se > 0 ? se / 100 : 0;
    const int half = se > 0 ? 600 : 0;
    std::vector<bool> accepted;
    std::vector<double> grid;
    for (int i = -half; i <= half; ++i) {
        const double b0 = tau + i * step;
        grid.push_back(b0);
        accepted.push_back(evaluate_at(s, b0).p_value >= alpha);
    }
    int first = -1, last = -1;
    for (int i = 0; i < static_cast<int>(grid.size()); ++i) {
        if (accepted[static_cast<std::size_t>(i)]) {
            if (first < 0) first = i;
            last = i;
        }
    }
    if (first < 0) return out;
    out.low = grid[static_cast<std::size_t>(first)];
    out.high = grid[static_cast<std::size_t>(last)];
    out.open_low = first == 0 && half > 0;
    out.open_high = last == static_cast<int>(grid.size()) - 1 && half > 0;
    for (int i = first; i <= last; ++i) {
        if (!accepted[static_cast<std::size_t>(i)]) out.disjoint = true;
    }
    return out;
}

}  // namespace ivrepro::diagnostics
