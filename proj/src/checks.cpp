#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "haplo/calibration.hpp"

namespace haplo {

namespace {

constexpr double mm = 1e3;    // residual weight, meters -> millimeters
constexpr double mrad = 1e3;  // residual weight, radians -> milliradians
constexpr double dD = 10.0;   // residual weight, diopters -> tenths

struct LevelMeasure {
    double pitch_rad = 0.0;     // signed components of the table normal
    double roll_rad = 0.0;
    double parallel_rad = 0.0;  // signed dihedral between the wing planes
    double level_deg = 0.0;     // unsigned summary angles
    double parallelism_deg = 0.0;
};

LevelMeasure measure_level(const Bench& bench) {
    LevelMeasure out;
    const Vec3 n = bench.table_normal;
    out.pitch_rad = std::atan2(n.z, n.y);
    out.roll_rad = std::atan2(-n.x, n.y);
    out.level_deg = rad_to_deg(angle_between(n, {0.0, 1.0, 0.0}));
    const Vec3 up_l = bench.left.up;
    const Vec3 up_r = bench.right.up;
    const Vec3 table_z = bench.table_rotation.apply({0.0, 0.0, 1.0});
    out.parallel_rad = std::atan2(up_l.cross(up_r).dot(table_z), up_l.dot(up_r));
    out.parallelism_deg = rad_to_deg(angle_between(up_l, up_r));
    return out;
}

struct WingCentering {
    double lens_lateral[3] = {};  // accommodation, collimating, minimization
    double lens_height[3] = {};
    double lens_tilt_rad[3] = {};
    double monitor_lateral = 0.0;  // crosshair vs the rail-axis station
    double monitor_height = 0.0;
};

WingCentering measure_centering(const Wing& wing) {
    WingCentering out;
    for (int i = 0; i < 3; ++i) {
        const WingLens& lens = wing.lenses[static_cast<size_t>(i)];
        const Vec3 d = lens.center - wing.fold_point;
        out.lens_lateral[i] = d.dot(wing.forward);
        out.lens_height[i] = d.dot(wing.up);
        // Signed rotation of the lens axis about the wing up axis; the
        // square-on axis points inboard, opposite the rail direction.
        out.lens_tilt_rad[i] =
            std::atan2(lens.axis.dot(wing.forward), -lens.axis.dot(wing.outward));
    }
    const Vec3 d = wing.monitor.crosshair - wing.fold_point;
    out.monitor_lateral = d.dot(wing.forward);
    out.monitor_height = d.dot(wing.up);
    return out;
}

struct WingCollimation {
    double reading_diopters = 0.0;
    bool sentinel = false;
};

WingCollimation measure_collimation(const Wing& wing) {
    // The dioptometer sees the display pipeline only: monitor through the
    // minimization and collimating lenses. The accommodation lens is set per
    // stimulus and is excluded from bench collimation.
    const WingLens& minimization = wing.lenses[2];
    const WingLens& collimating = wing.lenses[1];
    const double gap_monitor = wing.monitor.axial_position - minimization.axial_position;
    const double gap_lenses = minimization.axial_position - collimating.axial_position;
    const OpticalTrain train = OpticalTrain::make(
        0.0,
        {TrainElement::gap(gap_monitor),
         TrainElement::lens(minimization.power, minimization.aperture_radius),
         TrainElement::gap(gap_lenses),
         TrainElement::lens(collimating.power, collimating.aperture_radius)});
    const Vergence v = collimation_error(train);
    WingCollimation out;
    out.sentinel = std::isinf(v.diopters);
    out.reading_diopters = v.diopters;
    return out;
}

struct WingSplitter {
    bool miss = false;
    std::string miss_reason;
    double angle_h_rad = 0.0;  // reflected beam vs rail axis, signed
    double angle_v_rad = 0.0;
    double offset_fwd = 0.0;   // reflection point vs rail axis, signed, m
    double offset_up = 0.0;
    double panel_lateral = 0.0;  // round trip vs the crosshair station, m
    double panel_height = 0.0;
    double center_out = 0.0;   // splitter center vs gaze axis, signed, m
    double center_up = 0.0;
    double angle_deg = 0.0;    // unsigned summary values for the check
    double axis_offset_m = 0.0;
    double crosshair_miss_m = 0.0;
    double center_offset_m = 0.0;
};

WingSplitter measure_splitter(const Wing& wing) {
    WingSplitter out;
    const Vec3 center_d = wing.beamsplitter.point - wing.pivot;
    const Vec3 center_perp = center_d - wing.forward * center_d.dot(wing.forward);
    out.center_out = center_perp.dot(wing.outward);
    out.center_up = center_perp.dot(wing.up);
    out.center_offset_m = center_perp.norm();

    const Ray3 gaze_laser(wing.pivot, wing.forward);
    try {
        const Ray3 reflected = reflect_ray(gaze_laser, wing.beamsplitter);
        out.angle_h_rad =
            std::atan2(reflected.direction.dot(wing.forward),
                       reflected.direction.dot(wing.outward));
        out.angle_v_rad = std::atan2(reflected.direction.dot(wing.up),
                                     reflected.direction.dot(wing.outward));
        out.angle_deg = rad_to_deg(angle_between(reflected.direction, wing.outward));
        const Vec3 w = reflected.origin - wing.fold_point;
        out.offset_fwd = w.dot(wing.forward);
        out.offset_up = w.dot(wing.up);
        const Ray3 rail(wing.fold_point, wing.outward);
        out.axis_offset_m = line_line_distance(reflected, rail);

        const PlaneMirror panel(wing.monitor.crosshair, wing.monitor.normal, 1e6);
        const PlaneHit hit = intersect_ray_plane(reflected, panel);
        const PlaneHit station = intersect_ray_plane(rail, panel);
        const Vec3 miss = hit.point - station.point;
        out.panel_lateral = miss.dot(wing.monitor.lateral_dir);
        out.panel_height = miss.dot(wing.monitor.up_dir);
        out.crosshair_miss_m = (miss - wing.monitor.normal * miss.dot(wing.monitor.normal)).norm();
    } catch (const std::runtime_error& e) {
        out.miss = true;
        out.miss_reason = e.what();
    }
    return out;
}

struct WingTarget {
    double miss_x = 0.0;  // table-frame horizontal, m
    double miss_y = 0.0;  // table-frame vertical, m
    bool degenerate = false;
};

WingTarget measure_target(const Bench& bench, Side side, double user_ipd) {
    // The calibration target is mounted on the table, so everything is
    // measured in the table frame: the wing's viewing axis must cross the
    // target where the user's own axis would.
    const Wing& wing = bench.wing(side);
    const Mat3 to_table = bench.table_rotation.transposed();
    const Vec3 p = to_table.apply(wing.pivot);
    const Vec3 g = to_table.apply(wing.forward);
    const double sign = side == Side::left ? -1.0 : 1.0;
    const double vergence = bench.config.stimulus.vergence_distance_m;
    // Finite vergence: the target mark is the midline fixation point.
    // Infinite: axes must run straight ahead from the user's eye; compare
    // at a 1 m projection plane.
    const double plane_z = std::isinf(vergence) ? 1.0 : vergence;
    const Vec3 mark = std::isinf(vergence)
                          ? Vec3{sign * user_ipd / 2.0, 0.0, plane_z}
                          : Vec3{0.0, 0.0, plane_z};
    WingTarget out;
    if (g.z < 1e-6) {
        out.degenerate = true;
        return out;
    }
    const double t = (plane_z - p.z) / g.z;
    const Vec3 crossing = p + g * t;
    out.miss_x = crossing.x - mark.x;
    out.miss_y = crossing.y - mark.y;
    return out;
}

bool all_within(const std::vector<double>& residuals,
                const std::vector<double>& tolerances) {
    for (size_t i = 0; i < residuals.size(); ++i) {
        if (!(std::abs(residuals[i]) <= tolerances[i])) return false;
    }
    return true;
}

void finish(CheckResult& result) { result.pass = all_within(result.residuals, result.tolerances); }

const char* lens_role(int i) {
    return i == 0 ? "accommodation" : (i == 1 ? "collimating" : "minimization");
}

}  // namespace

double CheckResult::residual(const std::string& label) const {
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return residuals[i];
    }
    throw std::out_of_range("no residual named " + label + " in " + name);
}

CheckResult check_table_level(const Bench& bench, const Tolerances& tol) {
    const LevelMeasure m = measure_level(bench);
    CheckResult r;
    r.step = 1;
    r.name = "table level";
    r.labels = {"level_deg", "parallelism_deg"};
    r.residuals = {m.level_deg, m.parallelism_deg};
    r.tolerances = {tol.level_deg, tol.parallelism_deg};
    finish(r);
    return r;
}

CheckResult check_element_centering(const Bench& bench, const Tolerances& tol) {
    CheckResult r;
    r.step = 2;
    r.name = "element centering";
    for (Side side : {Side::left, Side::right}) {
        const std::string s = side_name(side);
        const WingCentering m = measure_centering(bench.wing(side));
        for (int i = 0; i < 3; ++i) {
            const std::string base = s + "_" + lens_role(i);
            r.labels.push_back(base + "_lateral_m");
            r.residuals.push_back(m.lens_lateral[i]);
            r.tolerances.push_back(tol.centering_m);
            r.labels.push_back(base + "_height_m");
            r.residuals.push_back(m.lens_height[i]);
            r.tolerances.push_back(tol.centering_m);
            r.labels.push_back(base + "_tilt_deg");
            r.residuals.push_back(rad_to_deg(m.lens_tilt_rad[i]));
            r.tolerances.push_back(tol.squareness_deg);
        }
        r.labels.push_back(s + "_monitor_lateral_m");
        r.residuals.push_back(m.monitor_lateral);
        r.tolerances.push_back(tol.centering_m);
        r.labels.push_back(s + "_monitor_height_m");
        r.residuals.push_back(m.monitor_height);
        r.tolerances.push_back(tol.centering_m);
        r.labels.push_back(s + "_crosshair_miss_m");
        r.residuals.push_back(std::hypot(m.monitor_lateral, m.monitor_height));
        r.tolerances.push_back(tol.centering_m);
    }
    finish(r);
    return r;
}

CheckResult check_collimation(const Bench& bench, const Tolerances& tol) {
    CheckResult r;
    r.step = 3;
    r.name = "collimation";
    for (Side side : {Side::left, Side::right}) {
        const std::string s = side_name(side);
        const WingCollimation m = measure_collimation(bench.wing(side));
        r.labels.push_back(s + "_collimation_diopters");
        r.residuals.push_back(m.reading_diopters);
        r.tolerances.push_back(tol.collimation_diopters);
        if (m.sentinel) {
            r.notes.push_back(s + " wing: dioptometer reading is not finite "
                              "(image at the lens focal plane)");
        }
    }
    finish(r);
    return r;
}

CheckResult check_beamsplitter(const Bench& bench, const Tolerances& tol) {
    CheckResult r;
    r.step = 4;
    r.name = "beamsplitter alignment";
    for (Side side : {Side::left, Side::right}) {
        const std::string s = side_name(side);
        const WingSplitter m = measure_splitter(bench.wing(side));
        const double inf = std::numeric_limits<double>::infinity();
        r.labels.push_back(s + "_reflection_angle_deg");
        r.residuals.push_back(m.miss ? inf : m.angle_deg);
        r.tolerances.push_back(tol.beamsplitter_angle_deg);
        r.labels.push_back(s + "_axis_offset_m");
        r.residuals.push_back(m.miss ? inf : m.axis_offset_m);
        r.tolerances.push_back(tol.beamsplitter_offset_m);
        r.labels.push_back(s + "_crosshair_miss_m");
        r.residuals.push_back(m.miss ? inf : m.crosshair_miss_m);
        r.tolerances.push_back(tol.beamsplitter_offset_m);
        r.labels.push_back(s + "_center_offset_m");
        r.residuals.push_back(m.center_offset_m);
        r.tolerances.push_back(tol.beamsplitter_offset_m);
        if (m.miss) {
            r.notes.push_back(s + " wing: laser did not return (" + m.miss_reason + ")");
        }
    }
    finish(r);
    return r;
}

CheckResult check_ipd(const Bench& bench, double user_ipd_m, const Tolerances& tol) {
    if (!(user_ipd_m > 0.0) || !std::isfinite(user_ipd_m)) {
        throw std::invalid_argument("check_ipd: user ipd must be positive and finite");
    }
    CheckResult r;
    r.step = 5;
    r.name = "ipd and viewing axes";
    for (Side side : {Side::left, Side::right}) {
        const std::string s = side_name(side);
        const WingTarget m = measure_target(bench, side, user_ipd_m);
        const double inf = std::numeric_limits<double>::infinity();
        r.labels.push_back(s + "_axis_distance_m");
        r.residuals.push_back(m.degenerate ? inf : std::hypot(m.miss_x, m.miss_y));
        r.tolerances.push_back(tol.axis_distance_m);
        if (m.degenerate) {
            r.notes.push_back(s + " wing: viewing axis does not reach the target");
        }
    }
    r.labels.push_back("ipd_error_m");
    r.residuals.push_back(bench.ipd - user_ipd_m);
    r.tolerances.push_back(tol.ipd_m);
    finish(r);
    return r;
}

CalibrationReport run_checklist(const Bench& bench, double user_ipd_m,
                                const Tolerances& tol) {
    CalibrationReport report;
    report.user_ipd_m = user_ipd_m;
    report.fingerprint = config_fingerprint(bench.config);
    report.checks = {check_table_level(bench, tol), check_element_centering(bench, tol),
                     check_collimation(bench, tol), check_beamsplitter(bench, tol),
                     check_ipd(bench, user_ipd_m, tol)};
    report.overall_pass = true;
    int first_failed = 0;
    for (CheckResult& check : report.checks) {
        if (first_failed != 0) {
            check.notes.push_back("step " + std::to_string(first_failed) +
                                  " failed upstream; these residuals may include "
                                  "compounded error");
        }
        if (!check.pass) {
            report.overall_pass = false;
            if (first_failed == 0) first_failed = check.step;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Residual vector.

namespace {

struct ResidualLayout {
    std::vector<std::string> labels;
    std::vector<int> steps;
};

ResidualLayout build_layout() {
    ResidualLayout out;
    auto add = [&out](int step, const std::string& label) {
        out.labels.push_back(label);
        out.steps.push_back(step);
    };
    add(1, "table_pitch_mrad");
    add(1, "table_roll_mrad");
    add(1, "wing_parallelism_mrad");
    for (const char* s : {"left", "right"}) {
        const std::string side(s);
        for (int i = 0; i < 3; ++i) {
            const std::string base = side + "_" + lens_role(i);
            add(2, base + "_lateral_mm");
            add(2, base + "_height_mm");
            add(2, base + "_tilt_mrad");
        }
        add(2, side + "_crosshair_lateral_mm");
        add(2, side + "_crosshair_height_mm");
    }
    for (const char* s : {"left", "right"}) {
        add(3, std::string(s) + "_collimation_deciD");
    }
    for (const char* s : {"left", "right"}) {
        const std::string side(s);
        add(4, side + "_splitter_angle_h_mrad");
        add(4, side + "_splitter_angle_v_mrad");
        add(4, side + "_splitter_offset_fwd_mm");
        add(4, side + "_splitter_offset_up_mm");
        add(4, side + "_splitter_panel_lateral_mm");
        add(4, side + "_splitter_panel_height_mm");
        add(4, side + "_splitter_center_out_mm");
        add(4, side + "_splitter_center_up_mm");
    }
    for (const char* s : {"left", "right"}) {
        const std::string side(s);
        add(5, side + "_target_miss_x_mm");
        add(5, side + "_target_miss_y_mm");
    }
    add(5, "ipd_error_mm");
    return out;
}

const ResidualLayout& layout() {
    static const ResidualLayout l = build_layout();
    return l;
}

}  // namespace

const std::vector<std::string>& residual_labels() { return layout().labels; }
const std::vector<int>& residual_steps() { return layout().steps; }

std::vector<double> residual_vector(const Bench& bench, double user_ipd_m) {
    std::vector<double> r;
    r.reserve(residual_labels().size());
    const LevelMeasure level = measure_level(bench);
    r.push_back(level.pitch_rad * mrad);
    r.push_back(level.roll_rad * mrad);
    r.push_back(level.parallel_rad * mrad);
    for (Side side : {Side::left, Side::right}) {
        const WingCentering m = measure_centering(bench.wing(side));
        for (int i = 0; i < 3; ++i) {
            r.push_back(m.lens_lateral[i] * mm);
            r.push_back(m.lens_height[i] * mm);
            r.push_back(m.lens_tilt_rad[i] * mrad);
        }
        r.push_back(m.monitor_lateral * mm);
        r.push_back(m.monitor_height * mm);
    }
    for (Side side : {Side::left, Side::right}) {
        const WingCollimation m = measure_collimation(bench.wing(side));
        r.push_back(m.sentinel ? residual_penalty : m.reading_diopters * dD);
    }
    for (Side side : {Side::left, Side::right}) {
        const WingSplitter m = measure_splitter(bench.wing(side));
        if (m.miss) {
            for (int i = 0; i < 8; ++i) r.push_back(residual_penalty);
            continue;
        }
        r.push_back(m.angle_h_rad * mrad);
        r.push_back(m.angle_v_rad * mrad);
        r.push_back(m.offset_fwd * mm);
        r.push_back(m.offset_up * mm);
        r.push_back(m.panel_lateral * mm);
        r.push_back(m.panel_height * mm);
        r.push_back(m.center_out * mm);
        r.push_back(m.center_up * mm);
    }
    for (Side side : {Side::left, Side::right}) {
        const WingTarget m = measure_target(bench, side, user_ipd_m);
        r.push_back(m.degenerate ? residual_penalty : m.miss_x * mm);
        r.push_back(m.degenerate ? residual_penalty : m.miss_y * mm);
    }
    r.push_back((bench.ipd - user_ipd_m) * mm);
    return r;
}

// ---------------------------------------------------------------------------
// Tolerance overrides.

Tolerances parse_tolerances(const std::string& text) {
    KvParseResult parsed = parse_kv_document(text);
    std::vector<Diagnostic> diags = std::move(parsed.diagnostics);
    Tolerances tol;
    SectionReader reader(parsed.doc, "tolerances", diags);
    if (reader.section_exists()) {
        struct Row {
            const char* key;
            double* value;
        };
        const Row rows[] = {
            {"level_deg", &tol.level_deg},
            {"parallelism_deg", &tol.parallelism_deg},
            {"centering_m", &tol.centering_m},
            {"squareness_deg", &tol.squareness_deg},
            {"collimation_diopters", &tol.collimation_diopters},
            {"beamsplitter_angle_deg", &tol.beamsplitter_angle_deg},
            {"beamsplitter_offset_m", &tol.beamsplitter_offset_m},
            {"axis_distance_m", &tol.axis_distance_m},
            {"ipd_m", &tol.ipd_m},
        };
        for (const Row& row : rows) {
            *row.value = reader.optional_number(row.key, *row.value);
            if (!(*row.value >= 0.0)) {
                diags.push_back({reader.section_line(),
                                 "tolerances." + std::string(row.key),
                                 "invariant violation: tolerance must be >= 0"});
            }
        }
    }
    report_unknown_entries(parsed.doc, diags);
    if (!diags.empty()) throw ConfigError(std::move(diags));
    return tol;
}

}  // namespace haplo
