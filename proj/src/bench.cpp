#include <cmath>

#include "haplo/bench.hpp"

namespace haplo {

namespace {

const Vec3 x_axis{1.0, 0.0, 0.0};
const Vec3 y_axis{0.0, 1.0, 0.0};
const Vec3 z_axis{0.0, 0.0, 1.0};

Mat3 rot(const Vec3& axis, double deg) {
    return Mat3::axis_angle(axis, deg_to_rad(deg));
}

Wing build_wing(const BenchConfig& config, Side side, const Mat3& table_rotation) {
    const WingConfig& wc = side == Side::left ? config.left : config.right;
    const double out_sign = side == Side::left ? -1.0 : 1.0;

    Wing wing;
    wing.side = side;
    wing.rail_azimuth_deg = wc.rail_azimuth_deg;
    wing.pivot = table_rotation.apply({out_sign * config.ipd_m / 2.0, 0.0, 0.0});

    // Cant rolls the wing about its own gaze axis, then the azimuth swings
    // the whole wing about the vertical through the pivot.
    const Mat3 orientation =
        table_rotation * rot(y_axis, wc.rail_azimuth_deg) * rot(z_axis, wc.cant_deg);
    wing.forward = orientation.apply(z_axis);
    wing.up = orientation.apply(y_axis);
    wing.outward = orientation.apply(x_axis * out_sign);
    wing.fold_distance = wc.fold_distance_m;
    wing.fold_point = wing.pivot + wing.forward * wc.fold_distance_m;

    const auto& bs = wc.beamsplitter;
    const Vec3 nominal_normal = (wing.forward - wing.outward).normalized();
    const Vec3 bisector = (wing.forward + wing.outward).normalized();
    const Mat3 adjust = rot(wing.up, bs.yaw_deg) * rot(bisector, bs.tilt_deg) *
                        rot(nominal_normal, bs.roll_deg);
    const Vec3 center = wing.fold_point + wing.forward * bs.axial_offset_m +
                        wing.outward * bs.lateral_offset_m + wing.up * bs.height_offset_m;
    wing.beamsplitter = PlaneMirror(center, adjust.apply(nominal_normal), bs.half_extent_m);
    wing.beamsplitter_reflectance = bs.reflectance;

    for (const LensConfig* lc : {&wc.accommodation, &wc.collimating, &wc.minimization}) {
        WingLens lens;
        lens.name = lc->name;
        lens.power = OpticalPower(lc->power_diopters);
        lens.center = wing.fold_point +
                      wing.outward * (lc->axial_position_m - wc.fold_distance_m) +
                      wing.forward * lc->lateral_offset_m + wing.up * lc->height_offset_m;
        lens.axis = rot(wing.up, lc->tilt_deg).apply(-wing.outward);
        lens.aperture_radius = lc->aperture_radius_m;
        lens.axial_position = lc->axial_position_m;
        wing.lenses.push_back(std::move(lens));
    }

    const auto& mc = wc.monitor;
    wing.monitor.crosshair = wing.fold_point +
                             wing.outward * (mc.axial_position_m - wc.fold_distance_m) +
                             wing.forward * mc.lateral_offset_m + wing.up * mc.height_offset_m;
    wing.monitor.normal = -wing.outward;
    wing.monitor.lateral_dir = wing.forward;
    wing.monitor.up_dir = wing.up;
    wing.monitor.pixel_pitch = mc.pixel_pitch_m;
    wing.monitor.axial_position = mc.axial_position_m;
    return wing;
}

}  // namespace

Wing Wing::rotated(const Mat3& rotation) const {
    auto point = [&](const Vec3& p) { return pivot + rotation.apply(p - pivot); };
    auto dir = [&](const Vec3& d) { return rotation.apply(d); };

    Wing w = *this;
    w.forward = dir(forward);
    w.up = dir(up);
    w.outward = dir(outward);
    w.fold_point = point(fold_point);
    w.beamsplitter = PlaneMirror(point(beamsplitter.point), dir(beamsplitter.normal),
                                 beamsplitter.half_extent);
    for (WingLens& lens : w.lenses) {
        lens.center = point(lens.center);
        lens.axis = dir(lens.axis);
    }
    w.monitor.crosshair = point(monitor.crosshair);
    w.monitor.normal = dir(monitor.normal);
    w.monitor.lateral_dir = dir(monitor.lateral_dir);
    w.monitor.up_dir = dir(monitor.up_dir);
    return w;
}

Bench assemble_bench(const BenchConfig& config) {
    auto diags = validate_bench_config(config);
    if (!diags.empty()) throw ConfigError(std::move(diags));

    Bench bench;
    bench.config = config;
    bench.table_rotation = rot(z_axis, config.table.roll_deg) * rot(x_axis, config.table.pitch_deg);
    bench.table_normal = bench.table_rotation.apply(y_axis);
    bench.ipd = config.ipd_m;
    bench.left = build_wing(config, Side::left, bench.table_rotation);
    bench.right = build_wing(config, Side::right, bench.table_rotation);

    // Alignment lasers: one down each rail from the monitor station, one
    // along each gaze axis from the pivot.
    for (const Wing* w : {&bench.left, &bench.right}) {
        const Vec3 rail_start =
            w->fold_point + w->outward * (w->monitor.axial_position - w->fold_distance);
        bench.laser_rig.emplace_back(rail_start, -w->outward);
    }
    for (const Wing* w : {&bench.left, &bench.right}) {
        bench.laser_rig.emplace_back(w->pivot, w->forward);
    }
    return bench;
}

namespace {

// Nominal rail stations from the design: the fold sits nodal_offset +
// 0.10 m from the pivot, the accommodation lens 0.05 m outward of the fold
// (0.15 m of path from the nodal point), then 0.05 m gaps to the
// collimating and minimization lenses and 0.10 m to the monitor.
WingConfig nominal_wing_config(double azimuth_deg, double accommodation_power) {
    WingConfig w;
    w.rail_azimuth_deg = azimuth_deg;
    w.cant_deg = 0.0;
    w.fold_distance_m = 0.106;
    w.accommodation.name = "accommodation";
    w.accommodation.power_diopters = accommodation_power;
    w.accommodation.axial_position_m = 0.156;
    w.collimating.name = "collimating";
    w.collimating.power_diopters = 10.0;
    w.collimating.axial_position_m = 0.206;
    w.minimization.name = "minimization";
    w.minimization.power_diopters = -10.0;
    w.minimization.axial_position_m = 0.256;
    w.monitor.name = "monitor";
    w.monitor.axial_position_m = 0.356;
    return w;
}

}  // namespace

Bench assemble_nominal(double ipd_m, double focal_distance_m, double vergence_distance_m) {
    BenchConfig config;
    config.ipd_m = ipd_m;
    config.stimulus.focal_distance_m = focal_distance_m;
    config.stimulus.vergence_distance_m = vergence_distance_m;

    const double path_to_eye =
        0.156 - config.eye.nodal_offset_m;  // accommodation lens to nodal point
    const double accommodation =
        accommodation_power_for(focal_distance_m, path_to_eye).diopters;
    const double inward = vergence_geometry(ipd_m, vergence_distance_m).inward_rotation_deg;
    config.left = nominal_wing_config(inward, accommodation);
    config.right = nominal_wing_config(-inward, accommodation);
    return assemble_bench(config);
}

Bench configure_for_user(const Bench& bench, double ipd_m, double vergence_distance_m) {
    if (!(ipd_m >= min_ipd_m && ipd_m <= max_ipd_m)) {
        throw std::invalid_argument("configure_for_user: ipd " + format_number(ipd_m) +
                                    " outside [" + format_number(min_ipd_m) + ", " +
                                    format_number(max_ipd_m) + "] m");
    }
    if (std::isnan(vergence_distance_m) || vergence_distance_m <= 0.0) {
        throw std::invalid_argument("configure_for_user: vergence distance must be > 0");
    }
    BenchConfig config = bench.config;
    config.ipd_m = ipd_m;
    config.stimulus.vergence_distance_m = vergence_distance_m;
    const double inward = vergence_geometry(ipd_m, vergence_distance_m).inward_rotation_deg;
    config.left.rail_azimuth_deg = inward;
    config.right.rail_azimuth_deg = -inward;
    return assemble_bench(config);
}

Bench configure_focal_distance(const Bench& bench, double focal_distance_m) {
    BenchConfig config = bench.config;
    config.stimulus.focal_distance_m = focal_distance_m;
    for (WingConfig* w : {&config.left, &config.right}) {
        const double path_to_eye =
            w->accommodation.axial_position_m - config.eye.nodal_offset_m;
        w->accommodation.power_diopters =
            accommodation_power_for(focal_distance_m, path_to_eye).diopters;
    }
    return assemble_bench(config);
}

EyeModel design_eye(const Bench& bench, Side side) {
    const Wing& wing = bench.wing(side);
    return EyeModel(wing.pivot, bench.config.eye.nodal_offset_m,
                    bench.config.eye.pupil_offset_m, wing.forward,
                    bench.config.eye.pupil_radius_m);
}

FoldFailure::FoldFailure(Side side_, const std::string& what)
    : std::runtime_error(std::string(side_name(side_)) + " wing: " + what), side(side_) {}

FoldTrace trace_fold(const Wing& wing, const EyeModel& eye) {
    return trace_fold(wing, eye, wing.monitor.crosshair);
}

FoldTrace trace_fold(const Wing& wing, const EyeModel& eye, const Vec3& source) {
    FoldTrace tr;
    Vec3 q = source;
    tr.points.push_back(q);

    // Lenses in encounter order from the monitor (outermost first); the
    // chief ray is aimed at the first lens's aperture center.
    std::vector<const WingLens*> lenses;
    for (auto it = wing.lenses.rbegin(); it != wing.lenses.rend(); ++it) {
        lenses.push_back(&*it);
    }
    Vec3 d = (lenses.front()->center - q).normalized();

    auto fail = [&](const std::string& why) {
        tr.completed = false;
        tr.failure = why;
        return tr;
    };
    auto advance = [&](const Vec3& hit) {
        tr.gaps.push_back((hit - q).norm());
        q = hit;
        tr.points.push_back(q);
    };

    for (const WingLens* lens : lenses) {
        PlaneHit hit;
        try {
            hit = intersect_ray_plane(Ray3(q, d),
                                      PlaneMirror(lens->center, lens->axis,
                                                  lens->aperture_radius));
        } catch (const NoIntersection&) {
            return fail("chief ray parallel to the " + lens->name + " lens plane");
        }
        if (hit.t <= 0.0) {
            return fail("chief ray moves away from the " + lens->name + " lens");
        }
        if (!hit.within_extent) tr.vignetted = true;

        // First-order refraction in 3D: reduce the direction to a slope
        // relative to the lens axis, bend by power * transverse offset,
        // and rebuild the direction.
        const Vec3 axis = lens->axis * (d.dot(lens->axis) > 0.0 ? 1.0 : -1.0);
        const Vec3 slope = d / d.dot(axis) - axis;
        Vec3 transverse = hit.point - lens->center;
        transverse = transverse - axis * transverse.dot(axis);
        const Vec3 bent = slope - transverse * lens->power.diopters;
        advance(hit.point);
        d = (axis + bent).normalized();
        tr.powers.push_back(lens->power.diopters);
    }

    Ray3 folded(q, d);
    try {
        folded = reflect_ray(Ray3(q, d), wing.beamsplitter);
    } catch (const MirrorMiss& miss) {
        return fail(std::string("chief ray misses the beamsplitter (") + miss.what() + ")");
    }
    const double to_mirror = (folded.origin - q).norm();
    tr.points.push_back(folded.origin);

    const PlaneMirror pupil_plane(eye.pupil_point(), eye.gaze, eye.pupil_radius);
    PlaneHit pupil_hit;
    try {
        pupil_hit = intersect_ray_plane(folded, pupil_plane);
    } catch (const NoIntersection&) {
        return fail("folded chief ray parallel to the pupil plane");
    }
    if (pupil_hit.t <= 0.0) {
        return fail("folded chief ray moves away from the eye");
    }
    if (!pupil_hit.within_extent) {
        return fail("folded chief ray misses the eye pupil by " +
                    format_number((pupil_hit.point - eye.pupil_point()).norm()) + " m");
    }

    const PlaneMirror nodal_plane(eye.nodal_point(), eye.gaze, 1e6);
    PlaneHit nodal_hit;
    try {
        nodal_hit = intersect_ray_plane(folded, nodal_plane);
    } catch (const NoIntersection&) {
        return fail("folded chief ray parallel to the nodal plane");
    }
    tr.gaps.push_back(to_mirror + nodal_hit.t);
    tr.points.push_back(nodal_hit.point);
    tr.exit_direction = folded.direction;
    tr.completed = true;
    return tr;
}

namespace {

OpticalTrain train_from_trace(const FoldTrace& tr, const Wing& wing) {
    std::vector<TrainElement> elements;
    // Apertures travel with the powers, monitor-first.
    std::vector<double> apertures;
    for (auto it = wing.lenses.rbegin(); it != wing.lenses.rend(); ++it) {
        apertures.push_back(it->aperture_radius);
    }
    for (size_t i = 0; i < tr.powers.size(); ++i) {
        elements.push_back(TrainElement::gap(tr.gaps[i]));
        elements.push_back(TrainElement::lens(tr.powers[i], apertures[i]));
    }
    elements.push_back(TrainElement::gap(tr.gaps.back()));
    return OpticalTrain::make(0.0, std::move(elements));
}

EyeStimulus simulate_eye(const Wing& wing, const EyeModel& eye) {
    const FoldTrace tr = trace_fold(wing, eye);
    if (!tr.completed) throw FoldFailure(wing.side, tr.failure);

    const OpticalTrain train = train_from_trace(tr, wing);
    const Vergence at_eye = collimation_error(train);
    if (at_eye.is_sentinel()) {
        throw NonPhysicalStimulus("image plane coincides with the eye");
    }

    EyeStimulus out;
    out.focal_demand_diopters = at_eye.diopters;
    out.vignetted = tr.vignetted;

    const Vec3 nodal_crossing = tr.points.back();
    Vec3 toward_image;
    if (at_eye.diopters < 0.0) {
        const Vec3 image = nodal_crossing + tr.exit_direction * (1.0 / at_eye.diopters);
        toward_image = (image - eye.nodal_point()).normalized();
    } else {
        // Collimated or converging light has no image point in front of the
        // eye; the perceived direction is the reversed nodal ray. This is
        // also the limit of the branch above as the vergence approaches zero,
        // so roundoff around a collimated stimulus cannot flip the direction.
        toward_image = -tr.exit_direction;
    }
    out.gaze_direction = toward_image;
    out.image_center_offset_deg = rad_to_deg(angle_between(toward_image, eye.gaze));

    Vec3 up = wing.up - eye.gaze * wing.up.dot(eye.gaze);
    up = up.normalized();
    const Vec3 right = up.cross(eye.gaze);
    const double along = toward_image.dot(eye.gaze);
    out.horizontal_offset_deg = rad_to_deg(std::atan2(toward_image.dot(right), along));
    out.vertical_offset_deg = rad_to_deg(std::atan2(toward_image.dot(up), along));

    const RayTransferMatrix system = compose_train(train);
    out.angular_magnification = train.total_length() / system.b;
    return out;
}

}  // namespace

OpticalTrain unfolded_train(const Wing& wing, const EyeModel& eye) {
    const FoldTrace tr = trace_fold(wing, eye);
    if (!tr.completed) throw FoldFailure(wing.side, tr.failure);
    return train_from_trace(tr, wing);
}

PerceivedStimulus simulate_stimulus(const Bench& bench, const EyeModel& eye_left,
                                    const EyeModel& eye_right) {
    PerceivedStimulus stimulus;
    stimulus.left = simulate_eye(bench.left, eye_left);
    stimulus.right = simulate_eye(bench.right, eye_right);
    return stimulus;
}

IntendedStimulus intended_stimulus(const Bench& bench) {
    return {bench.config.stimulus.focal_distance_m,
            bench.config.stimulus.vergence_distance_m, bench.config.ipd_m};
}

MismatchMetrics stimulus_mismatch(const PerceivedStimulus& actual,
                                  const IntendedStimulus& intended) {
    MismatchMetrics m;
    const double intended_demand =
        std::isinf(intended.focal_distance_m) ? 0.0 : -1.0 / intended.focal_distance_m;
    m.focal_error_diopters =
        0.5 * (actual.left.focal_demand_diopters + actual.right.focal_demand_diopters) -
        intended_demand;

    const VergenceGeometry vg =
        vergence_geometry(intended.ipd_m, intended.vergence_distance_m);
    const double actual_angle_deg =
        rad_to_deg(angle_between(actual.left.gaze_direction, actual.right.gaze_direction));
    m.vergence_error_deg = actual_angle_deg - vg.full_vergence_deg;

    m.vertical_disparity_deg =
        actual.left.vertical_offset_deg - actual.right.vertical_offset_deg;
    m.lateral_image_shift_deg =
        0.5 * (actual.left.horizontal_offset_deg + actual.right.horizontal_offset_deg);
    return m;
}

}  // namespace haplo
