#pragma once

#include "ivrepro/data/table.hpp"
#include "ivrepro/estimate/bundle.hpp"
#include "ivrepro/parser/spec.hpp"
#include "ivrepro/resolve/resolver.hpp"

#include <string>
#include <vector>

namespace ivrepro::estimate {

inline constexpr const char* kEsampleColumn = "janitor_esample";

struct DesignBuild {
    DesignMatrixBundle bundle;
    std::vector<resolve::Resolution> audit;
    Eigen::Index rows_in = 0;
    Eigen::Index rows_flagged_out = 0;  // esample flag == 0
    Eigen::Index rows_condition_out = 0;
    Eigen::Index rows_missing_out = 0;
};

/// Resolves every term, materializes derived columns, then applies the
/// esample flag, the if condition and listwise deletion, in that order.
/// Throws UnresolvedTerm, EmptySample or ConditionParseError.
DesignBuild build_design(data::DataTable table, const parser::IVSpecification& spec);

}  // namespace ivrepro::estimate
