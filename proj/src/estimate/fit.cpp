#include "ivrepro/estimate/fit.hpp"

#include "ivrepro/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>

namespace ivrepro::estimate {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double student_t_quantile(double p, double dof) {
    if (!(dof > 0)) return std::numeric_limits<double>::quiet_NaN();
    boost::math::students_t dist(dof);
    return boost::math::quantile(dist, p);
}

double student_t_two_sided_p(double t, double dof) {
    if (!std::isfinite(t) || !(dof > 0)) return std::isinf(t) ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    boost::math::students_t dist(dof);
    return std::clamp(2 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

MatrixXd partial_out(const MatrixXd& M, const MatrixXd& X) {
    if (X.cols() == 0) return M;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
    return M - X * qr.solve(M);
}

DesignMatrixBundle absorb_fixed_effects(const DesignMatrixBundle& bundle, double tolerance, int max_sweeps) {
    DesignMatrixBundle out = bundle;
    if (bundle.fixed_effects.empty() || bundle.absorbed) return out;
    const Index n = bundle.n();

    // drop the intercept: it lies in the span of any fixed effect
    std::vector<Index> keep;
    for (Index j = 0; j < bundle.X.cols(); ++j) {
        const auto& col = bundle.X.col(j);
        const bool constant = (col.array() == col[0]).all() && n > 0;
        if (!constant) keep.push_back(j);
    }
    MatrixXd X(n, static_cast<Index>(keep.size()));
    std::vector<std::string> x_names;
    for (std::size_t j = 0; j < keep.size(); ++j) {
        X.col(static_cast<Index>(j)) = bundle.X.col(keep[j]);
        if (keep[j] < static_cast<Index>(bundle.x_names.size())) x_names.push_back(bundle.x_names[static_cast<std::size_t>(keep[j])]);
    }

    const Index cols = 2 + bundle.Z.cols() + X.cols();
    MatrixXd M(n, cols);
    M.col(0) = bundle.y;
    M.col(1) = bundle.d;
    M.middleCols(2, bundle.Z.cols()) = bundle.Z;
    M.rightCols(X.cols()) = X;
    const VectorXd w = bundle.weights ? *bundle.weights : VectorXd::Ones(n);

    auto demean_once = [&](const Grouping& g) {
        MatrixXd sums = MatrixXd::Zero(g.levels(), cols);
        VectorXd wsum = VectorXd::Zero(g.levels());
        for (Index i = 0; i < n; ++i) {
            sums.row(g.codes[i]) += w[i] * M.row(i);
            wsum[g.codes[i]] += w[i];
        }
        for (Index l = 0; l < g.levels(); ++l) {
            if (wsum[l] > 0) sums.row(l) /= wsum[l];
        }
        for (Index i = 0; i < n; ++i) M.row(i) -= sums.row(g.codes[i]);
    };

    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    int sweeps = 0;
    if (bundle.fixed_effects.size() == 1) {
        demean_once(bundle.fixed_effects.front());
        sweeps = 1;
    } else {
        bool converged = false;
        while (sweeps < max_sweeps) {
            const MatrixXd before = M;
            for (const auto& g : bundle.fixed_effects) demean_once(g);
            ++sweeps;
            if ((M - before).cwiseAbs().maxCoeff() <= tolerance * scale) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            fail(ErrorCode::NonConvergence, "fixed-effect absorption did not converge after " + std::to_string(sweeps) + " sweeps");
        }
    }

    out.y = M.col(0);
    out.d = M.col(1);
    out.Z = M.middleCols(2, bundle.Z.cols());
    out.X = M.rightCols(X.cols());
    out.x_names = x_names;
    Index levels = 0;
    for (const auto& g : bundle.fixed_effects) levels += g.levels();
    out.absorbed_dof = levels - static_cast<Index>(bundle.fixed_effects.size() - 1);
    out.absorbed = true;
    out.absorb_sweeps = sweeps;
    return out;
}

namespace {

Index rank_of(const MatrixXd& A) {
    if (A.cols() == 0) return 0;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    return qr.rank();
}

}  // namespace

DesignMatrixBundle prepare(const DesignMatrixBundle& bundle) {
    DesignMatrixBundle b = (!bundle.fixed_effects.empty() && !bundle.absorbed) ? absorb_fixed_effects(bundle) : bundle;
    const Index n = b.n();
    if (b.weights && ((*b.weights).array() <= 0).any()) fail(ErrorCode::ValidationError, "weights must be positive");

    // drop collinear controls, keeping the earlier column
    if (rank_of(b.X) < b.X.cols()) {
        std::vector<Index> keep;
        MatrixXd kept(n, 0);
        for (Index j = 0; j < b.X.cols(); ++j) {
            MatrixXd trial(n, kept.cols() + 1);
            trial << kept, b.X.col(j);
            if (rank_of(trial) == trial.cols()) {
                kept = trial;
                keep.push_back(j);
            } else {
                const std::string name = j < static_cast<Index>(b.x_names.size()) ? b.x_names[static_cast<std::size_t>(j)] : std::to_string(j);
                b.notes.push_back("dropped collinear control " + name);
            }
        }
        std::vector<std::string> names;
        for (auto j : keep) {
            if (j < static_cast<Index>(b.x_names.size())) names.push_back(b.x_names[static_cast<std::size_t>(j)]);
        }
        b.X = kept;
        b.x_names = names;
    }

    const Weighted w = weighted(b);
    const VectorXd d_tilde = partial_out(w.d, w.X);
    if (d_tilde.norm() <= 1e-10 * std::max(1.0, w.d.norm())) {
        fail(ErrorCode::RankDeficient, "treatment is collinear with the controls");
    }
    const MatrixXd z_tilde = partial_out(w.Z, w.X);
    if (rank_of(z_tilde) < b.Z.cols()) fail(ErrorCode::WeakRankInstrument, "instruments are collinear after partialling controls");
    return b;
}

Weighted weighted(const DesignMatrixBundle& b) {
    Weighted w{b.y, b.d, b.Z, b.X};
    if (b.weights) {
        const VectorXd s = b.weights->cwiseSqrt();
        w.y = w.y.cwiseProduct(s);
        w.d = w.d.cwiseProduct(s);
        w.Z = s.asDiagonal() * w.Z;
        w.X = s.asDiagonal() * w.X;
    }
    return w;
}

LinearFit fit_linear(const VectorXd& y, const MatrixXd& R, const MatrixXd& W, const DesignMatrixBundle& ctx) {
    const Index n = y.size();
    const Index p = R.cols();
    if (W.cols() < p) fail(ErrorCode::WeakRankInstrument, "fewer instruments than regressors");

    MatrixXd Rhat = R;
    const bool iv = !(W.cols() == R.cols() && W.isApprox(R, 0.0));
    if (iv) {
        Eigen::HouseholderQR<MatrixXd> qw(W);
        const MatrixXd Q = qw.householderQ() * MatrixXd::Identity(n, W.cols());
        Rhat = Q * (Q.transpose() * R);
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Rhat);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) fail(ErrorCode::RankDeficient, "design matrix is rank deficient");

    LinearFit fit;
    fit.beta = qr.solve(y);
    fit.residuals = y - R * fit.beta;
    fit.n = n;
    fit.K = p + ctx.absorbed_dof;
    if (n - fit.K <= 0) fail(ErrorCode::RankDeficient, "not enough observations for the number of parameters");

    const MatrixXd bread = (Rhat.transpose() * Rhat).inverse();
    const MatrixXd scores = Rhat.array().colwise() * fit.residuals.array();
    MatrixXd meat;
    double factor = 0;
    if (ctx.clustered()) {
        const Grouping& g = ctx.clusters.front();
        MatrixXd S = MatrixXd::Zero(g.levels(), p);
        for (Index i = 0; i < n; ++i) S.row(g.codes[i]) += scores.row(i);
        meat = S.transpose() * S;
        const double G = static_cast<double>(g.levels());
        if (G < 2) fail(ErrorCode::SingularVcov, "cluster-robust variance needs at least two clusters");
        factor = G / (G - 1) * (static_cast<double>(n) - 1) / static_cast<double>(n - fit.K);
        fit.dof = G - 1;
    } else {
        meat = scores.transpose() * scores;
        factor = static_cast<double>(n) / static_cast<double>(n - fit.K);
        fit.dof = static_cast<double>(n - fit.K);
    }
    fit.vcov = factor * bread * meat * bread;
    return fit;
}

namespace {

EstimateResult summarize(const LinearFit& fit, const DesignMatrixBundle& b) {
    EstimateResult r;
    r.coefficient = fit.beta[0];
    r.std_error = std::sqrt(std::max(0.0, fit.vcov(0, 0)));
    r.n = fit.n;
    r.G = b.G();
    r.dof = fit.dof;
    r.K = fit.K;
    if (r.std_error > 0) {
        r.t_stat = r.coefficient / r.std_error;
        r.p_value = student_t_two_sided_p(r.t_stat, r.dof);
    } else {
        r.t_stat = r.coefficient == 0 ? 0 : std::copysign(std::numeric_limits<double>::infinity(), r.coefficient);
        r.p_value = r.coefficient == 0 ? 1.0 : 0.0;
    }
    const double crit = student_t_quantile(0.975, r.dof);
    r.ci_low = r.coefficient - crit * r.std_error;
    r.ci_high = r.coefficient + crit * r.std_error;
    return r;
}

MatrixXd hcat(const VectorXd& a, const MatrixXd& B) {
    MatrixXd out(a.size(), 1 + B.cols());
    out << a, B;
    return out;
}

}  // namespace

EstimateResult fit_ols(const DesignMatrixBundle& bundle) {
    const DesignMatrixBundle b = prepare(bundle);
    const Weighted w = weighted(b);
    const MatrixXd R = hcat(w.d, w.X);
    return summarize(fit_linear(w.y, R, R, b), b);
}

TwoStageResult fit_2sls(const DesignMatrixBundle& bundle) {
    const DesignMatrixBundle b = prepare(bundle);
    if (b.m() < 1) fail(ErrorCode::WeakRankInstrument, "no instruments");
    const Weighted w = weighted(b);
    const Index n = b.n();

    MatrixXd W(n, b.m() + b.k());
    W << w.Z, w.X;
    TwoStageResult out;
    out.second = summarize(fit_linear(w.y, hcat(w.d, w.X), W, b), b);

    const LinearFit first = fit_linear(w.d, W, W, b);
    FirstStageResult& fs = out.first;
    fs.pi = first.beta.head(b.m());
    fs.vcov = first.vcov.topLeftCorner(b.m(), b.m());
    const double s2 = first.residuals.squaredNorm() / static_cast<double>(n - first.K);
    const MatrixXd WtW_inv = (W.transpose() * W).inverse();
    fs.vcov_classic = s2 * WtW_inv.topLeftCorner(b.m(), b.m());
    fs.fitted = W * first.beta;
    const MatrixXd z_tilde = partial_out(w.Z, w.X);
    fs.Qzz = z_tilde.transpose() * z_tilde;
    fs.conventional_F = fs.pi.dot(fs.vcov_classic.ldlt().solve(fs.pi)) / static_cast<double>(b.m());
    fs.n = n;
    return out;
}

MatchReport compare_estimates(double reference, double candidate) {
    MatchReport r;
    r.reference = reference;
    r.candidate = candidate;
    r.tolerance = std::max(0.01 * std::abs(reference), 1e-6);
    r.pass = std::abs(reference - candidate) <= r.tolerance;
    return r;
}

}  // namespace ivrepro::estimate
