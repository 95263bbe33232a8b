#pragma once

#include <string>

#include "memforge/arch.hpp"
#include "memforge/layout.hpp"

namespace memforge {

/// Lowers the kernel in place and renders the canonical text: tiled arrays
/// get explicit tile loops (when the split is a clean 1-D strip-mine) or an
/// in-place transfer statement at their governing loop, and every access is
/// annotated with its storage component and bank expression.  Kernels that
/// already carry transfer statements are only re-annotated, so lowering is a
/// fixed point.
std::string emit_lowered_ir(Kernel& k, const MemoryArchitecture& arch,
                            const TilingPlan& tiling);

}  // namespace memforge
