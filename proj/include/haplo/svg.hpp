// Deterministic top-down SVG ray diagram of an assembled bench: rails,
// lenses, beamsplitters, eyes, and the traced chief and marginal rays.

#pragma once

#include <string>

#include "haplo/bench.hpp"

namespace haplo {

struct RenderOptions {
    // Panel offset of the two marginal field rays on either side of the
    // crosshair, meters. The default clears the design eye pupil.
    double marginal_offset_m = 0.0025;
};

struct SvgScene {
    std::string xml;
    bool fold_warning = false;  // a chief ray failed to reach its eye
};

/// Identical benches render to identical bytes. Fold failures draw the
/// partial ray path with a warning annotation instead of failing.
SvgScene render_svg(const Bench& bench, const RenderOptions& options = {});

}  // namespace haplo
