// The five-step bench checklist as executable checks with residuals, a
// flattened residual vector for optimization, a damped least-squares
// auto-calibration solver, and perturbation-driven tolerance analysis.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "haplo/bench.hpp"
#include "haplo/dof.hpp"

namespace haplo {

// ---------------------------------------------------------------------------
// Checklist.

/// Pass thresholds for every checklist residual. Values are deliberate
/// defaults (documented in docs/config_schema.md); override via a
/// [tolerances] file.
struct Tolerances {
    double level_deg = 0.05;
    double parallelism_deg = 0.05;
    double centering_m = 0.0005;
    double squareness_deg = 0.1;
    double collimation_diopters = 0.05;
    double beamsplitter_angle_deg = 1.0 / 60.0;
    double beamsplitter_offset_m = 0.0005;
    double axis_distance_m = 0.0005;
    double ipd_m = 0.0005;
};

/// Applies overrides from a [tolerances] section; unknown keys or negative
/// values raise ConfigError.
Tolerances parse_tolerances(const std::string& text);

struct CheckResult {
    int step = 0;
    std::string name;
    std::vector<std::string> labels;   // one per residual, with unit suffix
    std::vector<double> residuals;     // signed where a sign is meaningful
    std::vector<double> tolerances;    // aligned with residuals
    bool pass = false;                 // every |residual| <= tolerance
    std::vector<std::string> notes;    // sentinel / miss / upstream flags

    double residual(const std::string& label) const;
};

/// Step 1: table levelness against gravity and wing-plane parallelism.
CheckResult check_table_level(const Bench& bench, const Tolerances& tol = {});

/// Step 2: rail-relative centering of each lens and the monitor crosshair,
/// plus lens squareness to the rail axis.
CheckResult check_element_centering(const Bench& bench, const Tolerances& tol = {});

/// Step 3: virtual dioptometer reading of each wing's display pipeline
/// (monitor through minimization and collimating lenses).
CheckResult check_collimation(const Bench& bench, const Tolerances& tol = {});

/// Step 4: laser along each gaze axis into the beamsplitter; alignment of
/// the reflected beam with the rail axis and the crosshair station, and
/// centering of the splitter on the gaze axis.
CheckResult check_beamsplitter(const Bench& bench, const Tolerances& tol = {});

/// Step 5: each wing's folded viewing axis against the calibration-target
/// line for a user of the given ipd, plus the ipd setting itself.
CheckResult check_ipd(const Bench& bench, double user_ipd_m,
                      const Tolerances& tol = {});

struct CalibrationReport {
    std::vector<CheckResult> checks;  // steps 1..5 in order
    bool overall_pass = false;
    double user_ipd_m = 0.0;
    std::string fingerprint;  // content hash of the bench config
};

/// All five checks in step order. Later checks run regardless of earlier
/// failures but carry an upstream-failed note, since assembly errors
/// compound downstream.
CalibrationReport run_checklist(const Bench& bench, double user_ipd_m,
                                const Tolerances& tol = {});

// ---------------------------------------------------------------------------
// Residual vector: every checklist measurement as one signed, normalized,
// deterministically ordered vector. Offsets are in millimeters, angles in
// milliradians, dioptric readings in tenths of a diopter; unmeasurable
// entries (beam missed the splitter or pupil) take a large finite penalty.

std::vector<double> residual_vector(const Bench& bench, double user_ipd_m);

/// Label per entry, stable across runs; documented in docs/config_schema.md.
const std::vector<std::string>& residual_labels();

/// Checklist step each residual entry belongs to, aligned with the labels.
const std::vector<int>& residual_steps();

inline constexpr double residual_penalty = 1e6;

// ---------------------------------------------------------------------------
// Auto-calibration solver.

struct AdjustableDof {
    std::string path;
    double lower = 0.0;  // absolute bounds on the config value
    double upper = 0.0;
};

struct AdjustableSet {
    std::vector<AdjustableDof> dofs;
};

/// Bounds each path at its registry deviation limit around the given
/// configuration's current value. Unknown paths raise invalid_argument.
AdjustableSet make_adjustable(const std::vector<std::string>& paths,
                              const BenchConfig& around);

struct SolveOptions {
    double tol = 1e-10;   // residual norm target, normalized units
    int max_iters = 100;
};

struct SolveResult {
    Bench bench;              // best-found bench, converged or not
    bool converged = false;
    int iterations = 0;
    std::vector<double> residual_norms;  // initial, then one per iteration
    // Directions the residuals never responded to: checklist-unobservable
    // DOFs and locally rank-deficient columns. Left at their start values.
    std::vector<std::string> null_dofs;
    std::string message;
};

/// Damped least squares on the residual vector over the adjustable DOFs,
/// central-difference Jacobian, bounds enforced by projection. Accepted
/// iterates never increase the norm; deterministic for identical inputs.
SolveResult solve_calibration(const Bench& bench, double user_ipd_m,
                              const AdjustableSet& adjust,
                              const SolveOptions& options = {});

// ---------------------------------------------------------------------------
// Perturbation and Monte Carlo tolerance analysis.

struct PerturbationEntry {
    std::string dof_path;
    bool gaussian = true;  // false = uniform over +-magnitude
    double magnitude = 0.0;  // sigma or half-width, native DOF units
};

struct PerturbationSpec {
    std::vector<PerturbationEntry> entries;
};

/// Reads a [perturbations] section of `dof.path = gaussian(sigma)` or
/// `dof.path = uniform(half_width)` lines.
PerturbationSpec parse_perturbation_spec(const std::string& text);

/// Counter-based random stream: every draw is a pure function of
/// (seed, trial, dof index, draw index), so trial results are independent
/// of evaluation order and thread schedule.
class RandomStream {
  public:
    RandomStream(std::uint64_t seed, std::uint64_t trial)
        : seed_(seed), trial_(trial) {}

    /// Uniform in (-1, 1), one draw per dof per trial.
    double uniform_symmetric(std::uint64_t dof_index) const;
    /// Standard normal, one draw per dof per trial.
    double gaussian(std::uint64_t dof_index) const;

  private:
    std::uint64_t word(std::uint64_t dof_index, std::uint64_t draw) const;
    std::uint64_t seed_ = 0;
    std::uint64_t trial_ = 0;
};

/// A perturbation draw made the configuration structurally invalid; the
/// caller counts the rejection rather than clamping the draw.
struct PerturbationRejected : std::runtime_error {
    explicit PerturbationRejected(const std::string& what)
        : std::runtime_error(what) {}
};

/// Offsets every listed DOF by an independent draw and reassembles; throws
/// PerturbationRejected when the result violates a bench invariant.
Bench apply_perturbation(const Bench& bench, const PerturbationSpec& spec,
                         const RandomStream& stream);

struct MetricStats {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
    double p5 = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
};

struct ToleranceStats {
    MetricStats focal_error_diopters;
    MetricStats vergence_error_deg;
    MetricStats vertical_disparity_deg;
    MetricStats lateral_image_shift_deg;
    int requested_trials = 0;
    int trial_count = 0;    // requested minus failures below
    int fold_failures = 0;  // chief ray missed the splitter or pupil
    int rejected_draws = 0; // perturbation violated a bench invariant
    std::uint64_t seed = 0;
};

/// Every trial ended in a fold failure or rejected draw.
struct EmptyStats : std::runtime_error {
    explicit EmptyStats(const std::string& what) : std::runtime_error(what) {}
};

/// n independently perturbed copies of the bench, each simulated against
/// the intended user's eyes and scored against the intended stimulus. The
/// reported errors are deviations from the unperturbed bench's baseline
/// mismatch, isolating the perturbations' contribution. Results are a pure
/// function of (bench, spec, n, seed); the thread count only affects wall
/// time.
ToleranceStats monte_carlo_tolerance(const Bench& bench,
                                     const PerturbationSpec& spec, int n,
                                     std::uint64_t seed, int threads = 1);

}  // namespace haplo
