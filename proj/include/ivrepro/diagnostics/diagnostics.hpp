#pragma once

#include "ivrepro/estimate/bundle.hpp"
#include "ivrepro/estimate/fit.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ivrepro::diagnostics {

using estimate::DesignMatrixBundle;
using estimate::EstimateResult;
using estimate::FirstStageResult;

struct Interval {
    double low = 0;
    double high = 0;
};

/// pi' Q pi / tr(V Q). With one instrument this is pi^2 / V.
double effective_f(const Eigen::VectorXd& pi, const Eigen::MatrixXd& vcov, const Eigen::MatrixXd& Q);
/// Uses the robust first-stage covariance.
double effective_f(const FirstStageResult& first);

struct ARResult {
    double statistic = 0;
    double p_value = 1;
    double df1 = 0;
    double df2 = 0;
};

/// Anderson-Rubin test of beta = beta0 from the regression of y - beta0*d on Z and X.
ARResult ar_test(const DesignMatrixBundle& bundle, double beta0 = 0);

struct ARInterval {
    std::optional<double> low;  // empty when the accepted set is empty
    std::optional<double> high;
    bool open_low = false;   // grid boundary accepted: the set extends beyond it
    bool open_high = false;
    bool disjoint = false;   // accepted points are not contiguous on the grid
};

/// Inverts the AR test over tau +- 6*se in steps of se/100.
ARInterval ar_confidence_interval(const DesignMatrixBundle& bundle, double tau, double se, double level = 0.95);

struct BootstrapResult {
    Interval boot_c;
    Interval boot_t;
    double bootstrap_F = 0;
    int iters = 0;
    int redraws = 0;
    std::uint64_t seed = 0;
    std::string unit;  // "cluster" or "observation"
    std::vector<double> taus;
    std::vector<double> t_stats;
};

/// Pairs bootstrap resampling clusters (or rows). Replicate r draws from a
/// generator seeded by seed ^ r, so results do not depend on `workers`.
BootstrapResult bootstrap_suite(const DesignMatrixBundle& bundle, int iters, std::uint64_t seed, int workers = 1);

struct TFResult {
    bool applicable = false;
    bool pass_at_5pct = false;
    std::optional<double> adjusted_critical;
    bool below_floor = false;
};

/// 5% critical value for |t| given the first-stage F. Throws FBelowTableFloor
/// at or below F = 3.84.
double tf_critical_value(double F);
TFResult tf_test(double tau, double se, double first_stage_F, Eigen::Index instruments = 1);

struct JackknifeResult {
    double min = 0;
    double max = 0;
    std::string most_influential;
    double delta = 0;
    double relative_shift = 0;
    std::string unit;  // "cluster" or "observation"
    std::vector<std::string> ids;
    std::vector<double> estimates;
    int skipped = 0;
};

JackknifeResult jackknife(const DesignMatrixBundle& bundle, double tau, int cluster_limit = 2000, int obs_sample = 200,
                          std::uint64_t seed = 42, int workers = 1);

/// |corr(D, D-hat)| after partialling controls and fixed effects out of both.
double first_stage_rho(const DesignMatrixBundle& bundle, const FirstStageResult& first);

struct CapResult {
    DesignMatrixBundle bundle;
    bool capped = false;
    Eigen::Index original_n = 0;
};

/// Row cap for resampling diagnostics; whole clusters are kept together.
CapResult cap_sample(const DesignMatrixBundle& bundle, Eigen::Index max_obs = 100000, std::uint64_t seed = 42);

enum class WarningFlag { WeakInstrument, ARInsignificant, JackknifeSensitive, BootCIncludesZero, SignDisagreement };
enum class Rating { High, Moderate, Low, VeryLow };

std::string_view to_string(WarningFlag flag) noexcept;
std::string_view to_string(Rating rating) noexcept;
Rating rating_for(std::size_t warnings) noexcept;

struct DiagnosticsBundle {
    int spec_index = 0;
    nlohmann::json spec;  // descriptor as written to metadata.json
    EstimateResult tsls;
    EstimateResult ols;
    Eigen::VectorXd pi;
    double conventional_F = 0;
    std::optional<double> effective_F;
    std::optional<double> bootstrap_F;
    std::optional<ARResult> ar;
    std::optional<ARInterval> ar_ci;
    TFResult tf;
    std::optional<BootstrapResult> bootstrap;
    std::optional<JackknifeResult> jackknife;
    std::optional<double> rho;
    std::optional<double> ratio;
    std::vector<WarningFlag> warnings;
    Rating rating = Rating::High;
    std::vector<std::string> incomplete;  // template statistics that could not be computed
    std::vector<std::string> notes;
    bool nonlinear = false;
    bool capped = false;
    Eigen::Index cap_original_n = 0;
    Eigen::Index cap_n = 0;
    nlohmann::json resolution = nlohmann::json::array();
    std::optional<nlohmann::json> reference;  // estimate read from the author's log
};

/// tau +- c_tF * se. Empty when the tF procedure does not apply.
std::optional<Interval> tf_interval(const DiagnosticsBundle& b);

/// Sets warnings and rating from the statistics present in the bundle.
void evaluate(DiagnosticsBundle& bundle);

struct DiagnosticsConfig {
    int iters = 1000;
    std::uint64_t seed = 42;
    Eigen::Index max_obs = 100000;
    int cluster_limit = 2000;
    int obs_sample = 200;
    int workers = 1;
};

/// Runs the full template on one specification.
DiagnosticsBundle run_diagnostics(const DesignMatrixBundle& bundle, const DiagnosticsConfig& config, int spec_index);

nlohmann::json to_json(const DiagnosticsBundle& b);
DiagnosticsBundle diagnostics_from_json(const nlohmann::json& j);

/// R type 7 sample quantile of unsorted data.
double quantile_type7(std::vector<double> values, double p);

}  // namespace ivrepro::diagnostics
