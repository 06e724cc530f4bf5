// 3D rigid geometry for the folded optical system: vectors, rays, plane
// mirrors, pivot rotations, the schematic eye, and binocular vergence angles.
//
// Frame convention: right-handed, origin at the midpoint between the two eye
// centers, +x toward the user's right along the baseline, +y opposing
// gravity, +z straight ahead toward the scene. Angles cross the public API
// in degrees; internal math is in radians.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace haplo {

inline constexpr double pi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * (pi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / pi); }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const;
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Unsigned angle between two vectors, radians. Robust near 0 and pi.
double angle_between(const Vec3& a, const Vec3& b);

struct Mat3 {
    // Row-major.
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

    static Mat3 identity() { return {}; }
    static Mat3 axis_angle(const Vec3& unit_axis, double angle_rad);

    Vec3 apply(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    Mat3 operator*(const Mat3& o) const;
    Mat3 transposed() const;
    double determinant() const;
    /// Max abs entry of R^T R - I; 0 for perfectly orthonormal.
    double orthonormality_defect() const;
};

/// Ray with a unit direction. Construction normalizes and validates.
struct Ray3 {
    Vec3 origin;
    Vec3 direction;

    Ray3(const Vec3& origin_, const Vec3& direction_);
    Vec3 at(double t) const { return origin + direction * t; }
};

/// Finite circular front-surface mirror: point on plane, unit normal,
/// disc radius half_extent.
struct PlaneMirror {
    Vec3 point;
    Vec3 normal;
    double half_extent = 0.0;

    PlaneMirror(const Vec3& point_, const Vec3& normal_, double half_extent_);
};

/// Rigid transform: p -> rotation * p + translation.
struct Pose {
    Mat3 rotation;
    Vec3 translation;

    Pose() = default;
    Pose(const Mat3& rotation_, const Vec3& translation_);
    Vec3 apply(const Vec3& p) const { return rotation.apply(p) + translation; }
};

/// Schematic eye: center of rotation, nodal point, and pupil collinear
/// along the gaze direction.
struct EyeModel {
    Vec3 center_of_rotation;
    double nodal_offset = 0.0;  // nodal point forward of center along gaze, m
    double pupil_offset = 0.0;  // pupil forward of nodal point, m
    double pupil_radius = 0.004;
    Vec3 gaze{0.0, 0.0, 1.0};

    EyeModel(const Vec3& center, double nodal_offset_, double pupil_offset_,
             const Vec3& gaze_, double pupil_radius_ = 0.004);

    Vec3 nodal_point() const { return center_of_rotation + gaze * nodal_offset; }
    Vec3 pupil_point() const { return nodal_point() + gaze * pupil_offset; }
};

/// Binocular rotation angles for a midline fixation target.
///
/// alpha_from_baseline is the angle between gaze and the interocular axis
/// (90 deg at infinity); inward_rotation = 90 - alpha is the rotation from
/// straight-ahead that wing actuators need. Both views are kept because
/// they are complementary readings of the same geometry.
struct VergenceGeometry {
    double alpha_from_baseline_deg = 90.0;
    double inward_rotation_deg = 0.0;
    double full_vergence_deg = 0.0;  // binocular angle, 2x inward for midline
};

struct NoIntersection : std::runtime_error {
    explicit NoIntersection(const std::string& what) : std::runtime_error(what) {}
};
struct MirrorMiss : std::runtime_error {
    explicit MirrorMiss(const std::string& what) : std::runtime_error(what) {}
};

struct PlaneHit {
    Vec3 point;
    double t = 0.0;           // ray parameter of the hit
    bool within_extent = false;
};

/// Ray/plane intersection. Throws NoIntersection when the ray is parallel
/// to the plane (|d.n| <= 1e-12).
PlaneHit intersect_ray_plane(const Ray3& ray, const PlaneMirror& mirror);

/// Specular reflection off the mirror. The returned ray originates at the
/// intersection point. Throws MirrorMiss when the ray is parallel, hits
/// behind its origin, or lands outside the mirror extent.
Ray3 reflect_ray(const Ray3& ray, const PlaneMirror& mirror);

/// Rigid rotation of a pose about the line (pivot, axis); the pivot is a
/// fixed point of the transform.
Pose rotate_about_pivot(const Pose& pose, const Vec3& pivot, const Vec3& axis,
                        double angle_deg);

/// Point form of the same rotation.
Vec3 rotate_point_about(const Vec3& p, const Vec3& pivot, const Vec3& axis,
                        double angle_deg);

/// Eq.-1 style vergence angles for an interocular distance and a midline
/// target distance (meters; +infinity accepted for parallel gaze).
VergenceGeometry vergence_geometry(double ipd_m, double target_distance_m);

/// Gaze ray of a schematic eye: origin at the nodal point, along gaze.
Ray3 eye_gaze_ray(const EyeModel& eye);

/// Minimum distance between two lines given as rays (extent ignored).
double line_line_distance(const Ray3& a, const Ray3& b);

/// Distance from a point to the line carrying the ray.
double point_line_distance(const Vec3& p, const Ray3& line);

}  // namespace haplo
