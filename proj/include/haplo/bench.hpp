// The assembled two-wing haploscope bench: declarative configuration,
// world-space wing geometry, the folded chief-ray trace, and end-to-end
// stimulus simulation against a schematic eye pair.
//
// Bench layout (top view, nominal): eye centers (wing pivots) at
// (+-ipd/2, 0, 0); each wing's gaze axis runs along +z to a 45-degree
// beamsplitter that folds it outward (+x on the right wing, -x on the
// left) onto the element rail carrying, in order of distance from the
// pivot: accommodation lens, collimating lens, minimization lens, monitor.
// Axial positions are measured in meters from the pivot along the folded
// path. Rotating a wing about the vertical axis through its pivot
// (rail_azimuth) converges the two gaze axes.

#pragma once

#include <string>
#include <vector>

#include "haplo/geometry.hpp"
#include "haplo/kvdoc.hpp"
#include "haplo/paraxial.hpp"

namespace haplo {

// ---------------------------------------------------------------------------
// Declarative configuration (the text-file schema, exact field inventory in
// docs/config_schema.md).

struct StimulusConfig {
    double focal_distance_m = infinite_distance;     // inf = collimated
    double vergence_distance_m = infinite_distance;  // inf = parallel gaze
};

struct EyeConfig {
    double nodal_offset_m = 0.006;  // nodal point forward of rotation center
    double pupil_offset_m = 0.003;  // entrance pupil forward of nodal point
    double pupil_radius_m = 0.004;
};

struct TableConfig {
    double pitch_deg = 0.0;  // about +x, gravity-referenced
    double roll_deg = 0.0;   // about +z, gravity-referenced
};

struct LensConfig {
    std::string name;  // section name; roles are assigned by axial order
    double power_diopters = 0.0;
    double axial_position_m = 0.0;   // from pivot along the folded path
    double lateral_offset_m = 0.0;   // along the wing forward axis
    double height_offset_m = 0.0;    // along the wing up axis
    double tilt_deg = 0.0;           // lens axis yawed about the wing up axis
    double aperture_radius_m = 0.035;
};

struct MonitorConfig {
    std::string name;
    double axial_position_m = 0.0;
    double lateral_offset_m = 0.0;
    double height_offset_m = 0.0;
    double pixel_pitch_m = 0.00025;
};

struct BeamsplitterConfig {
    double yaw_deg = 0.0;        // about the wing up axis
    double tilt_deg = 0.0;       // about the in-plane 45-degree bisector
    double roll_deg = 0.0;       // about the mirror normal (optically inert)
    double axial_offset_m = 0.0;    // along the gaze axis
    double lateral_offset_m = 0.0;  // along the rail (outward) axis
    double height_offset_m = 0.0;   // along the wing up axis
    double half_extent_m = 0.04;
    double reflectance = 0.5;
};

struct WingConfig {
    double rail_azimuth_deg = 0.0;  // + rotates the gaze axis toward +x
    double cant_deg = 0.0;          // wing roll about its own gaze axis
    double fold_distance_m = 0.106; // pivot to rail/gaze junction
    BeamsplitterConfig beamsplitter;
    LensConfig accommodation;  // roles in axial order: accommodation,
    LensConfig collimating;    // collimating, minimization, then monitor
    LensConfig minimization;
    MonitorConfig monitor;
};

struct BenchConfig {
    StimulusConfig stimulus;
    double ipd_m = 0.064;
    EyeConfig eye;
    TableConfig table;
    WingConfig left;
    WingConfig right;
};

inline constexpr double min_ipd_m = 0.04;
inline constexpr double max_ipd_m = 0.08;

/// Configuration or invariant failure; carries the full diagnostic list.
struct ConfigError : std::runtime_error {
    std::vector<Diagnostic> diagnostics;
    explicit ConfigError(std::vector<Diagnostic> diags);
};

/// Strict parse of the bench description format. Throws ConfigError listing
/// every syntax error, unknown field, unit violation, and invariant
/// violation found, each with a line number and field path.
BenchConfig parse_bench_config(const std::string& text);

/// Canonical serialization: fixed section and key order, shortest
/// round-trip number formatting. parse(serialize(c)) == c.
std::string serialize_bench_config(const BenchConfig& config);

/// FNV-1a 64-bit hash of the canonical serialization, as 16 hex digits.
std::string config_fingerprint(const BenchConfig& config);

/// Structural validation shared by parsing and assembly; returns every
/// violated invariant (element ordering, ranges, one-monitor rule).
std::vector<Diagnostic> validate_bench_config(const BenchConfig& config);

// ---------------------------------------------------------------------------
// Assembled world-space geometry.

enum class Side { left, right };
const char* side_name(Side side);

struct WingLens {
    std::string name;
    OpticalPower power;
    Vec3 center;
    Vec3 axis;  // unit, pointing from the rail toward the beamsplitter
    double aperture_radius = 0.0;
    double axial_position = 0.0;
};

struct WingMonitor {
    Vec3 crosshair;    // panel center
    Vec3 normal;       // unit, facing the beamsplitter
    Vec3 lateral_dir;  // unit, in-panel horizontal (wing forward)
    Vec3 up_dir;       // unit, in-panel vertical
    double pixel_pitch = 0.0;
    double axial_position = 0.0;
};

struct Wing {
    Side side = Side::left;
    Vec3 pivot;            // modeled eye center of rotation
    double rail_azimuth_deg = 0.0;
    Vec3 forward;          // unit gaze axis
    Vec3 up;               // unit wing up
    Vec3 outward;          // unit rail axis, away from the nose
    Vec3 fold_point;       // nominal rail/gaze junction
    double fold_distance = 0.0;
    PlaneMirror beamsplitter;
    double beamsplitter_reflectance = 0.5;
    std::vector<WingLens> lenses;  // rail order: accommodation first
    WingMonitor monitor;

    Wing() : beamsplitter({0, 0, 0}, {0, 0, 1}, 1.0) {}

    /// The wing rigidly rotated about its pivot; used for invariance checks.
    Wing rotated(const Mat3& rotation) const;
};

struct Bench {
    BenchConfig config;  // parameter source of truth for this assembly
    Mat3 table_rotation;
    Vec3 table_normal;   // unit, nominal +y
    double ipd = 0.0;
    Wing left;
    Wing right;
    std::vector<Ray3> laser_rig;  // [left rail, right rail, left gaze, right gaze]

    const Wing& wing(Side side) const { return side == Side::left ? left : right; }
};

/// Builds world-space geometry from a validated configuration. Throws
/// ConfigError when any invariant fails.
Bench assemble_bench(const BenchConfig& config);

/// The paper-design bench: -10 D minimization lens 0.10 m from the monitor,
/// +10 D collimating lens 0.05 m further, accommodation lens powered for
/// focal_distance over the default 0.15 m lens-to-eye path, wings rotated
/// inward for vergence_distance. Infinite distances give a collimated,
/// parallel-gaze setup.
Bench assemble_nominal(double ipd_m, double focal_distance_m,
                       double vergence_distance_m);

/// Re-fits an assembled bench to a new user: pivots to +-ipd/2, wings
/// rotated to the inward angle for vergence_distance_m, every rail-relative
/// placement preserved rigidly.
Bench configure_for_user(const Bench& bench, double ipd_m,
                         double vergence_distance_m);

/// Repowers both accommodation lenses for a new focal distance using each
/// wing's actual lens-to-nodal-point path length.
Bench configure_focal_distance(const Bench& bench, double focal_distance_m);

/// Eye whose center of rotation sits on the wing pivot and whose gaze
/// follows the wing's forward axis (the design fixation condition).
EyeModel design_eye(const Bench& bench, Side side);

// ---------------------------------------------------------------------------
// Folded chief-ray trace and stimulus simulation.

struct FoldFailure : std::runtime_error {
    Side side;
    FoldFailure(Side side_, const std::string& what);
};

/// Chief-ray path through one wing: from the monitor crosshair, aimed at the
/// first (minimization) lens center, refracted first-order at each lens
/// plane, reflected at the beamsplitter, checked against the eye pupil, and
/// ended on the nodal plane.
struct FoldTrace {
    std::vector<Vec3> points;      // crosshair, lens hits, mirror hit, nodal hit
    Vec3 exit_direction;           // unit, at the nodal plane
    std::vector<double> gaps;      // 3D path lengths between optical surfaces
    std::vector<double> powers;    // lens powers in encounter order
    bool vignetted = false;        // some lens aperture was exceeded
    bool completed = false;        // false = fold failure; points hold the partial path
    std::string failure;           // reason when not completed
};

/// Never throws; fold failures are reported in the result (renderers draw
/// the partial path).
FoldTrace trace_fold(const Wing& wing, const EyeModel& eye);

/// Same trace started from an arbitrary panel point (still aimed at the
/// first lens center); renderers use this for marginal field rays.
FoldTrace trace_fold(const Wing& wing, const EyeModel& eye, const Vec3& source);

/// Linear monitor-to-eye train whose gaps are the true 3D path lengths
/// along the folded chief ray, lens powers monitor-first. Throws
/// FoldFailure when the chief ray misses the beamsplitter or eye pupil.
OpticalTrain unfolded_train(const Wing& wing, const EyeModel& eye);

struct EyeStimulus {
    double focal_demand_diopters = 0.0;  // eye-plane vergence; <= 0 presentable
    Vec3 gaze_direction;                 // unit, eye center toward image center
    double image_center_offset_deg = 0.0;  // image center vs design gaze axis
    double horizontal_offset_deg = 0.0;    // signed, + toward the wing's right
    double vertical_offset_deg = 0.0;      // signed, + up
    double angular_magnification = 0.0;    // vs unaided viewing over the same path
    bool vignetted = false;
};

struct PerceivedStimulus {
    EyeStimulus left;
    EyeStimulus right;
    const EyeStimulus& eye(Side side) const {
        return side == Side::left ? left : right;
    }
};

/// Traces both wings onto the given eyes. Eye placement is taken as given
/// (tolerance studies deliberately pair a perturbed bench with the intended
/// user's eyes). Throws FoldFailure when a chief ray cannot reach an eye.
PerceivedStimulus simulate_stimulus(const Bench& bench, const EyeModel& eye_left,
                                    const EyeModel& eye_right);

struct IntendedStimulus {
    double focal_distance_m = infinite_distance;
    double vergence_distance_m = infinite_distance;
    double ipd_m = 0.064;
};

/// The intended stimulus a bench was configured for (from its config).
IntendedStimulus intended_stimulus(const Bench& bench);

struct MismatchMetrics {
    double focal_error_diopters = 0.0;   // mean eye demand minus intended
    double vergence_error_deg = 0.0;     // gaze-ray angle minus intended vergence
    double vertical_disparity_deg = 0.0; // left minus right vertical offset
    double lateral_image_shift_deg = 0.0;  // mean signed horizontal offset
};

MismatchMetrics stimulus_mismatch(const PerceivedStimulus& actual,
                                  const IntendedStimulus& intended);

}  // namespace haplo
