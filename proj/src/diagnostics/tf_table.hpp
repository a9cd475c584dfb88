#pragma once

#include <vector>

namespace ivrepro::diagnostics::detail {

struct TfRow {
    double F;
    double c;
};

extern const std::vector<TfRow> kTfTable;

}  // namespace ivrepro::diagnostics::detail
