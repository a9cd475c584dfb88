#pragma once

namespace ivrepro {

// Stamped into every stage log and every emitted artifact. Bump when any
// rule, default, or numerical convention changes.
inline constexpr const char* kPipelineVersion = "1.0.0";

}  // namespace ivrepro
