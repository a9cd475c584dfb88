#include "ivrepro/estimate/bundle.hpp"

#include <unordered_map>

namespace ivrepro::estimate {

Grouping make_grouping(std::string name, const std::vector<std::string>& labels) {
    Grouping g;
    g.name = std::move(name);
    g.codes.resize(static_cast<Eigen::Index>(labels.size()));
    std::unordered_map<std::string, int> index;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = index.emplace(labels[i], static_cast<int>(g.labels.size()));
        if (inserted) g.labels.push_back(labels[i]);
        g.codes[static_cast<Eigen::Index>(i)] = it->second;
    }
    return g;
}

namespace {

Grouping recode(const Grouping& g, const std::vector<Eigen::Index>& rows) {
    std::vector<std::string> labels;
    labels.reserve(rows.size());
    for (auto r : rows) labels.push_back(g.labels[static_cast<std::size_t>(g.codes[r])]);
    return make_grouping(g.name, labels);
}

}  // namespace

DesignMatrixBundle subset_rows(const DesignMatrixBundle& b, const std::vector<Eigen::Index>& rows,
                               const std::vector<int>* draw_of_row) {
    DesignMatrixBundle out;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.y.resize(n);
    out.d.resize(n);
    out.Z.resize(n, b.Z.cols());
    out.X.resize(n, b.X.cols());
    if (b.weights) out.weights = Eigen::VectorXd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = rows[static_cast<std::size_t>(i)];
        out.y[i] = b.y[r];
        out.d[i] = b.d[r];
        out.Z.row(i) = b.Z.row(r);
        out.X.row(i) = b.X.row(r);
        if (b.weights) (*out.weights)[i] = (*b.weights)[r];
    }
    for (std::size_t c = 0; c < b.clusters.size(); ++c) {
        if (c == 0 && draw_of_row) {
            Grouping g;
            g.name = b.clusters[0].name;
            g.codes.resize(n);
            int levels = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                g.codes[i] = (*draw_of_row)[static_cast<std::size_t>(i)];
                levels = std::max(levels, g.codes[i] + 1);
            }
            for (int k = 0; k < levels; ++k) g.labels.push_back(std::to_string(k));
            out.clusters.push_back(std::move(g));
        } else {
            out.clusters.push_back(recode(b.clusters[c], rows));
        }
    }
    for (const auto& fe : b.fixed_effects) out.fixed_effects.push_back(recode(fe, rows));
    out.y_name = b.y_name;
    out.d_name = b.d_name;
    out.z_names = b.z_names;
    out.x_names = b.x_names;
    out.absorbed = false;
    if (b.absorbed) out.notes.push_back("subset of an absorbed bundle");
    for (auto r : rows) {
        out.source_rows.push_back(b.source_rows.empty() ? r : b.source_rows[static_cast<std::size_t>(r)]);
    }
    return out;
}

}  // namespace ivrepro::estimate
