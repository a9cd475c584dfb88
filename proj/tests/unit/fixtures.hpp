#pragma once

#include "ivrepro/estimate/bundle.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

namespace testfx {

// Simulated IV data: d = z*pi + x*g + v, y = tau*d + x*b + u with corr(u, v) > 0.
struct Sim {
    Eigen::VectorXd y, d;
    Eigen::MatrixXd Z, X;
    std::vector<std::string> cluster;
};

inline Sim simulate(int n, int m, int k, unsigned seed, int clusters = 0, double noise = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    Sim s;
    s.Z.resize(n, m);
    s.X.resize(n, k + 1);
    s.d.resize(n);
    s.y.resize(n);
    for (int i = 0; i < n; ++i) {
        s.X(i, 0) = 1.0;
        for (int j = 1; j <= k; ++j) s.X(i, j) = N(rng);
        for (int j = 0; j < m; ++j) s.Z(i, j) = N(rng);
        const double common = N(rng);
        const double v = common + N(rng);
        const double u = noise * (common + N(rng));
        s.d[i] = s.Z.row(i).sum() * 0.8 + 0.3 * s.X.row(i).sum() + v;
        s.y[i] = -1.5 * s.d[i] + 0.5 * s.X.row(i).sum() + u;
        if (clusters > 0) s.cluster.push_back("c" + std::to_string(i % clusters));
    }
    return s;
}

inline ivrepro::estimate::DesignMatrixBundle bundle_of(const Sim& s) {
    ivrepro::estimate::DesignMatrixBundle b;
    b.y = s.y;
    b.d = s.d;
    b.Z = s.Z;
    b.X = s.X;
    b.y_name = "y";
    b.d_name = "d";
    for (int j = 0; j < s.Z.cols(); ++j) b.z_names.push_back("z" + std::to_string(j));
    b.x_names.push_back("_cons");
    for (int j = 1; j < s.X.cols(); ++j) b.x_names.push_back("x" + std::to_string(j));
    if (!s.cluster.empty()) b.clusters.push_back(ivrepro::estimate::make_grouping("g", s.cluster));
    return b;
}

}  // namespace testfx
