#include "haplo/geometry.hpp"

#include <algorithm>

namespace haplo {

namespace {

void require_finite(const Vec3& v, const char* what) {
    if (!v.finite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite components");
    }
}

}  // namespace

Vec3 Vec3::normalized() const {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw std::invalid_argument("Vec3::normalized: zero or non-finite vector");
    }
    return *this / n;
}

double angle_between(const Vec3& a, const Vec3& b) {
    // atan2 of the parallelogram area over the dot product keeps full
    // precision for tiny angles, where acos of a clamped dot product loses it.
    const double cross_norm = a.cross(b).norm();
    const double dot = a.dot(b);
    return std::atan2(cross_norm, dot);
}

Mat3 Mat3::axis_angle(const Vec3& unit_axis, double angle_rad) {
    const Vec3 u = unit_axis;
    if (std::abs(u.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("Mat3::axis_angle: axis must be unit length");
    }
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    const double t = 1.0 - c;
    Mat3 r;
    r.m[0][0] = c + u.x * u.x * t;
    r.m[0][1] = u.x * u.y * t - u.z * s;
    r.m[0][2] = u.x * u.z * t + u.y * s;
    r.m[1][0] = u.y * u.x * t + u.z * s;
    r.m[1][1] = c + u.y * u.y * t;
    r.m[1][2] = u.y * u.z * t - u.x * s;
    r.m[2][0] = u.z * u.x * t - u.y * s;
    r.m[2][1] = u.z * u.y * t + u.x * s;
    r.m[2][2] = c + u.z * u.z * t;
    return r;
}

Mat3 Mat3::operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j] + m[i][2] * o.m[2][j];
        }
    }
    return r;
}

Mat3 Mat3::transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            r.m[i][j] = m[j][i];
        }
    }
    return r;
}

double Mat3::determinant() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

double Mat3::orthonormality_defect() const {
    const Mat3 g = transposed() * (*this);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double target = (i == j) ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(g.m[i][j] - target));
        }
    }
    return worst;
}

Ray3::Ray3(const Vec3& origin_, const Vec3& direction_)
    : origin(origin_), direction(direction_.normalized()) {
    require_finite(origin, "Ray3 origin");
}

PlaneMirror::PlaneMirror(const Vec3& point_, const Vec3& normal_, double half_extent_)
    : point(point_), normal(normal_.normalized()), half_extent(half_extent_) {
    require_finite(point, "PlaneMirror point");
    if (!(half_extent > 0.0) || !std::isfinite(half_extent)) {
        throw std::invalid_argument("PlaneMirror: half_extent must be > 0");
    }
}

Pose::Pose(const Mat3& rotation_, const Vec3& translation_)
    : rotation(rotation_), translation(translation_) {
    require_finite(translation, "Pose translation");
    if (rotation.orthonormality_defect() > 1e-10) {
        throw std::invalid_argument("Pose: rotation is not orthonormal");
    }
    if (rotation.determinant() < 0.0) {
        throw std::invalid_argument("Pose: rotation must be proper (det +1)");
    }
}

EyeModel::EyeModel(const Vec3& center, double nodal_offset_, double pupil_offset_,
                   const Vec3& gaze_, double pupil_radius_)
    : center_of_rotation(center),
      nodal_offset(nodal_offset_),
      pupil_offset(pupil_offset_),
      pupil_radius(pupil_radius_),
      gaze(gaze_.normalized()) {
    require_finite(center, "EyeModel center");
    if (nodal_offset < 0.0 || pupil_offset < 0.0) {
        throw std::invalid_argument("EyeModel: nodal/pupil offsets must be >= 0");
    }
    if (!(pupil_radius > 0.0)) {
        throw std::invalid_argument("EyeModel: pupil_radius must be > 0");
    }
}

PlaneHit intersect_ray_plane(const Ray3& ray, const PlaneMirror& mirror) {
    const double denom = ray.direction.dot(mirror.normal);
    if (std::abs(denom) <= 1e-12) {
        throw NoIntersection("ray is parallel to the mirror plane");
    }
    const double t = (mirror.point - ray.origin).dot(mirror.normal) / denom;
    PlaneHit hit;
    hit.t = t;
    hit.point = ray.at(t);
    hit.within_extent = (hit.point - mirror.point).norm() <= mirror.half_extent;
    return hit;
}

Ray3 reflect_ray(const Ray3& ray, const PlaneMirror& mirror) {
    PlaneHit hit;
    try {
        hit = intersect_ray_plane(ray, mirror);
    } catch (const NoIntersection&) {
        throw MirrorMiss("reflect_ray: ray parallel to mirror");
    }
    if (hit.t <= 0.0) {
        throw MirrorMiss("reflect_ray: mirror is behind the ray origin");
    }
    if (!hit.within_extent) {
        throw MirrorMiss("reflect_ray: hit outside mirror extent");
    }
    const Vec3 d = ray.direction;
    const Vec3 n = mirror.normal;
    const Vec3 reflected = d - n * (2.0 * d.dot(n));
    return Ray3(hit.point, reflected);
}

Pose rotate_about_pivot(const Pose& pose, const Vec3& pivot, const Vec3& axis,
                        double angle_deg) {
    const Mat3 r = Mat3::axis_angle(axis.normalized(), deg_to_rad(angle_deg));
    return Pose(r * pose.rotation, pivot + r.apply(pose.translation - pivot));
}

Vec3 rotate_point_about(const Vec3& p, const Vec3& pivot, const Vec3& axis,
                        double angle_deg) {
    const Mat3 r = Mat3::axis_angle(axis.normalized(), deg_to_rad(angle_deg));
    return pivot + r.apply(p - pivot);
}

VergenceGeometry vergence_geometry(double ipd_m, double target_distance_m) {
    if (!(ipd_m > 0.0) || !std::isfinite(ipd_m)) {
        throw std::invalid_argument("vergence_geometry: ipd must be positive and finite");
    }
    if (!(target_distance_m > 0.0)) {
        throw std::invalid_argument("vergence_geometry: target distance must be positive");
    }
    VergenceGeometry g;
    if (std::isinf(target_distance_m)) {
        g.alpha_from_baseline_deg = 90.0;
        g.inward_rotation_deg = 0.0;
        g.full_vergence_deg = 0.0;
        return g;
    }
    // atan2 of the complementary angle keeps precision for distant targets;
    // alpha is then derived so alpha + inward == 90 holds exactly.
    g.inward_rotation_deg = rad_to_deg(std::atan2(ipd_m / 2.0, target_distance_m));
    g.alpha_from_baseline_deg = 90.0 - g.inward_rotation_deg;
    g.full_vergence_deg = 2.0 * g.inward_rotation_deg;
    return g;
}

Ray3 eye_gaze_ray(const EyeModel& eye) {
    return Ray3(eye.nodal_point(), eye.gaze);
}

double line_line_distance(const Ray3& a, const Ray3& b) {
    const Vec3 w = b.origin - a.origin;
    const Vec3 cx = a.direction.cross(b.direction);
    const double cx_norm = cx.norm();
    if (cx_norm < 1e-12) {
        // Parallel lines: distance of b's origin from line a.
        return w.cross(a.direction).norm();
    }
    return std::abs(w.dot(cx / cx_norm));
}

double point_line_distance(const Vec3& p, const Ray3& line) {
    return (p - line.origin).cross(line.direction).norm();
}

}  // namespace haplo
