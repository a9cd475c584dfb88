#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ivrepro::estimate {

/// Integer codes 0..levels-1 for one grouping variable, plus the label of each code.
struct Grouping {
    std::string name;
    Eigen::VectorXi codes;
    std::vector<std::string> labels;

    [[nodiscard]] Eigen::Index levels() const noexcept { return static_cast<Eigen::Index>(labels.size()); }
};

/// Numeric inputs to one IV regression after listwise deletion.
struct DesignMatrixBundle {
    Eigen::VectorXd y;
    Eigen::VectorXd d;
    Eigen::MatrixXd Z;
    Eigen::MatrixXd X;  // exogenous regressors; includes the intercept until FE are absorbed
    std::optional<Eigen::VectorXd> weights;
    std::vector<Grouping> clusters;  // the first drives inference
    std::vector<Grouping> fixed_effects;

    std::string y_name;
    std::string d_name;
    std::vector<std::string> z_names;
    std::vector<std::string> x_names;

    bool absorbed = false;
    Eigen::Index absorbed_dof = 0;
    int absorb_sweeps = 0;
    std::vector<Eigen::Index> source_rows;  // rows of the analysis table
    std::vector<std::string> notes;

    [[nodiscard]] Eigen::Index n() const noexcept { return y.size(); }
    [[nodiscard]] Eigen::Index m() const noexcept { return Z.cols(); }
    [[nodiscard]] Eigen::Index k() const noexcept { return X.cols(); }
    [[nodiscard]] bool clustered() const noexcept { return !clusters.empty(); }
    [[nodiscard]] Eigen::Index G() const noexcept { return clusters.empty() ? 0 : clusters.front().levels(); }
};

/// Rows `rows` of the bundle in order. Groupings are re-coded densely; with
/// `distinct_cluster_draws`, every entry of `draw_of_row` becomes its own cluster.
DesignMatrixBundle subset_rows(const DesignMatrixBundle& b, const std::vector<Eigen::Index>& rows,
                               const std::vector<int>* draw_of_row = nullptr);

/// Dense codes for arbitrary labels, ordered by first appearance.
Grouping make_grouping(std::string name, const std::vector<std::string>& labels);

}  // namespace ivrepro::estimate
