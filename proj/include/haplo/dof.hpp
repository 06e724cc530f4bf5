// Registry of every adjustable bench degree of freedom: the configuration
// field it lives in, the calibration step that observes it, and the scales
// and bounds the solver and perturbation machinery work in.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "haplo/bench.hpp"

namespace haplo {

enum class DofUnit { meters, degrees, diopters };

/// Short unit label: "m", "deg", "D".
const char* dof_unit_name(DofUnit unit);

struct DofInfo {
    std::string path;  // e.g. "wings.left.beamsplitter.yaw_deg"
    DofUnit unit = DofUnit::meters;
    // First checklist step whose residuals react to this DOF. 0 means no
    // step observes it (the accommodation lens is set per trial, not
    // calibrated on the bench).
    int check_step = 0;
    // False for DOFs with an identically zero residual response: the
    // beamsplitter roll spins the plate about its own normal and the
    // accommodation power and spacing are invisible to the checklist.
    // The solver reports these as null directions instead of inverting them.
    bool observable = false;
    // Solver bound half-widths, native units, relative to the start value.
    double max_deviation = 0.0;
    // Native units per normalized solver unit (1 mm, 1 deg, 0.1 D).
    double scale = 1.0;
    std::function<double&(BenchConfig&)> resolve;
};

/// All degrees of freedom in a fixed documented order (table, ipd, then
/// left and right wing blocks).
const std::vector<DofInfo>& dof_registry();

/// Lookup by exact path; nullptr when the path names no degree of freedom.
const DofInfo* find_dof(const std::string& path);

inline double& dof_value(BenchConfig& config, const DofInfo& dof) {
    return dof.resolve(config);
}
inline double dof_value(const BenchConfig& config, const DofInfo& dof) {
    return dof.resolve(const_cast<BenchConfig&>(config));
}

}  // namespace haplo
