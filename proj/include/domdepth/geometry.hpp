#pragma once

#include <array>
#include <optional>

#include "domdepth/image.hpp"

namespace domdepth {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const;
};

struct Mat3 {
    // Row-major.
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return Mat3{}; }
    static Mat3 axis_angle(const Vec3& axis_times_angle);

    double at(int r, int c) const { return m[r * 3 + c]; }
    double& at(int r, int c) { return m[r * 3 + c]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 operator*(const Mat3& o) const;
    Mat3 transposed() const;
    double det() const;
};

struct CameraIntrinsics {
    double fx = 0.0, fy = 0.0;  // focal lengths, pixels
    double cx = 0.0, cy = 0.0;  // principal point, pixels
    int width = 0, height = 0;

    void validate() const;
};

/// Rigid map p -> R*p + t. Poses in pipelines are target->source maps:
/// they take points expressed in the target (reference, time t) camera frame to
/// the source camera frame.
struct RigidPose {
    Mat3 rotation;
    Vec3 translation;

    static RigidPose identity() { return RigidPose{}; }
    static RigidPose translate(const Vec3& t) { return RigidPose{Mat3::identity(), t}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    RigidPose inverse() const;
    /// compose(a, b) maps p -> a(b(p)).
    static RigidPose compose(const RigidPose& a, const RigidPose& b);

    void validate() const;  // orthonormality and det(+1) within 1e-9
};

struct PixelCoord {
    double u = 0.0, v = 0.0;
};

struct Projection {
    PixelCoord pixel;
    double depth = 0.0;  // z-component of the camera-frame point
};

/// Pinhole projection. Pixel centers sit at integer coordinates, u in [0, W-1].
/// Throws std::domain_error when the point is at or behind the camera plane.
Projection project(const Vec3& point, const CameraIntrinsics& intr);

/// Inverse of project: pixel + metric depth -> camera-frame point.
/// Throws std::domain_error for depth <= 0.
Vec3 backproject(const PixelCoord& pixel, double depth, const CameraIntrinsics& intr);

inline Vec3 transform(const RigidPose& pose, const Vec3& p) { return pose.apply(p); }

struct WarpResult {
    ImageBuffer image;   // zero outside valid
    Mask valid;          // in source frustum, in front of camera, no invalid tap
    Mask hit_invalid;    // some nonzero-weight bilinear tap touched source_invalid
};

/// Inverse warp: for each target pixel, backproject by target_depth, map with
/// pose_target_to_source, project into source and sample bilinearly.
/// Invalid pixels are flagged, never thrown; sampled values use zero extension
/// outside the frustum. A tap with exactly zero bilinear weight is ignored.
WarpResult warp_image(const ImageBuffer& source,
                      const DepthMap& target_depth,
                      const RigidPose& pose_target_to_source,
                      const CameraIntrinsics& intr,
                      const Mask* source_invalid = nullptr);

/// Bilinear sample at (u, v); returns false when outside [0,W-1]x[0,H-1].
bool sample_bilinear(const ImageBuffer& img, double u, double v, double* out_channels);

}  // namespace domdepth
