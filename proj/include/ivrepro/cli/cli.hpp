#pragma once

#include <iosfwd>

namespace ivrepro::cli {

/// 0 on success, 1 when a stage fails, 2 on a usage error (help goes to err).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ivrepro::cli
