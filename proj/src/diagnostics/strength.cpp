#include "ivrepro/diagnostics/diagnostics.hpp"

#include "ivrepro/error.hpp"
#include "tf_table.hpp"

#include <algorithm>
#include <cmath>

namespace ivrepro::diagnostics {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double effective_f(const VectorXd& pi, const MatrixXd& vcov, const MatrixXd& Q) {
    const double denom = (vcov * Q).trace();
    if (!(denom > 0) || !std::isfinite(denom)) fail(ErrorCode::SingularVcov, "first-stage covariance has zero trace");
    return pi.dot(Q * pi) / denom;
}

double effective_f(const FirstStageResult& first) { return effective_f(first.pi, first.vcov, first.Qzz); }

double tf_critical_value(double F) {
    const auto& table = detail::kTfTable;
    if (!(F > 3.84)) fail(ErrorCode::FBelowTableFloor, "first-stage F " + std::to_string(F) + " is at or below 3.84");
    if (F >= table.back().F) return 1.96;
    if (F <= table.front().F) {
        // between 3.84 and the first row the value diverges; hold the first row
        return table.front().c;
    }
    const auto hi = std::lower_bound(table.begin(), table.end(), F, [](const detail::TfRow& r, double f) { return r.F < f; });
    const auto lo = hi - 1;
    const double w = (F - lo->F) / (hi->F - lo->F);
    return std::max(1.96, lo->c + w * (hi->c - lo->c));
}

TFResult tf_test(double tau, double se, double first_stage_F, Eigen::Index instruments) {
    TFResult r;
    if (instruments != 1) return r;
    r.applicable = true;
    try {
        const double c = tf_critical_value(first_stage_F);
        r.adjusted_critical = c;
        r.pass_at_5pct = se > 0 ? std::abs(tau / se) >= c : tau != 0;
    } catch (const Error&) {
        r.below_floor = true;
        r.pass_at_5pct = false;
    }
    return r;
}

double first_stage_rho(const DesignMatrixBundle& bundle, const FirstStageResult& first) {
    const DesignMatrixBundle b = estimate::prepare(bundle);
    const estimate::Weighted w = estimate::weighted(b);
    VectorXd d = estimate::partial_out(w.d, w.X);
    VectorXd dh = estimate::partial_out(first.fitted, w.X);
    d.array() -= d.mean();
    dh.array() -= dh.mean();
    const double sd = d.norm();
    const double sh = dh.norm();
    if (sd <= 0 || sh <= 0) fail(ErrorCode::ZeroVariance, "treatment or fitted treatment has zero variance");
    return std::min(1.0, std::abs(d.dot(dh)) / (sd * sh));
}

}  // namespace ivrepro::diagnostics
