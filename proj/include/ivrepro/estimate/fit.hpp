#pragma once

#include "ivrepro/estimate/bundle.hpp"

#include <Eigen/Dense>

#include <string>

namespace ivrepro::estimate {

inline constexpr const char* kVcovConvention =
    "cluster-robust sandwich x G/(G-1) x (n-1)/(n-K), t(G-1); HC1 x n/(n-K), t(n-K) without clusters";

struct EstimateResult {
    double coefficient = 0;
    double std_error = 0;
    double t_stat = 0;
    double p_value = 1;
    double ci_low = 0;
    double ci_high = 0;
    Eigen::Index n = 0;
    Eigen::Index G = 0;
    double dof = 0;
    Eigen::Index K = 0;
};

struct FirstStageResult {
    Eigen::VectorXd pi;
    Eigen::MatrixXd vcov;          // robust / cluster-robust
    Eigen::MatrixXd vcov_classic;  // s^2 (W'W)^-1 block
    Eigen::VectorXd fitted;        // in the weighted, within-transformed space
    Eigen::MatrixXd Qzz;           // Z'Z after partialling X
    double conventional_F = 0;
    Eigen::Index n = 0;
};

struct TwoStageResult {
    EstimateResult second;
    FirstStageResult first;
};

struct MatchReport {
    double reference = 0;
    double candidate = 0;
    double tolerance = 0;
    bool pass = false;
};

/// Within-transforms y, d, Z, X by alternating weighted demeaning (tolerance
/// 1e-8, at most 1000 sweeps) and drops the intercept column.
DesignMatrixBundle absorb_fixed_effects(const DesignMatrixBundle& bundle, double tolerance = 1e-8, int max_sweeps = 1000);

/// Absorbs fixed effects when present and drops collinear controls.
DesignMatrixBundle prepare(const DesignMatrixBundle& bundle);

EstimateResult fit_ols(const DesignMatrixBundle& bundle);
TwoStageResult fit_2sls(const DesignMatrixBundle& bundle);

/// Coefficients and covariance of a linear IV/OLS fit, exposed for diagnostics.
struct LinearFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd vcov;
    Eigen::VectorXd residuals;
    Eigen::Index n = 0;
    Eigen::Index K = 0;
    double dof = 0;
};

/// Regresses y on R with instruments W (W = R for OLS). Inputs must already be
/// weighted and within-transformed.
LinearFit fit_linear(const Eigen::VectorXd& y, const Eigen::MatrixXd& R, const Eigen::MatrixXd& W,
                     const DesignMatrixBundle& context);

/// y, d, Z, X multiplied row-wise by sqrt(weights).
struct Weighted {
    Eigen::VectorXd y;
    Eigen::VectorXd d;
    Eigen::MatrixXd Z;
    Eigen::MatrixXd X;
};
Weighted weighted(const DesignMatrixBundle& prepared);

/// Residuals of the columns of M after least squares on X.
Eigen::MatrixXd partial_out(const Eigen::MatrixXd& M, const Eigen::MatrixXd& X);

MatchReport compare_estimates(double reference, double candidate);

double student_t_quantile(double p, double dof);
double student_t_two_sided_p(double t, double dof);

}  // namespace ivrepro::estimate
