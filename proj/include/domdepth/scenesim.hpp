#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "domdepth/geometry.hpp"

namespace domdepth {

/// Seeded multi-octave value noise; kind "constant" is the flat fallback that
/// SceneSpec validation rejects unless allow_textureless is set.
struct TextureSpec {
    std::string kind = "noise";  // noise | constant
    std::uint64_t seed = 1;
    double scale = 2.0;  // coarsest wavelength, meters
    int levels = 3;

    void validate(bool allow_textureless) const;
};

/// Evaluates the texture at local surface coordinates (s, t) in meters.
/// Channels use decorrelated seeds; output stays inside [0.1, 0.9] for noise.
double sample_texture(const TextureSpec& tex, int channel, double s, double t);

struct PlaneSpec {
    double depth = 0.0;  // z of the plane point on the optical axis, meters
    double tilt_x = 0.0, tilt_y = 0.0;  // radians, rotating the plane normal
    TextureSpec texture;
};

/// Fronto-parallel billboard rectangle; world trajectory sampled per frame.
struct ObjectSpec {
    double width = 0.0, height = 0.0;  // meters
    Vec3 pos_prev, pos_t, pos_next;    // center world position at t-1, t, t+1
    TextureSpec texture;
};

struct PriorSpec {
    std::string mode = "exact";  // exact | noise | bias
    double sigma = 0.0;          // multiplicative noise amplitude
    double beta = 0.0;           // constant relative bias
    std::uint64_t seed = 1;

    void validate() const;
};

/// Camera-to-world poses of the reference-adjacent cameras; the time-t camera
/// frame is the world frame.
struct CameraSpec {
    CameraIntrinsics intr;
    RigidPose cam_to_world_prev = RigidPose::identity();
    RigidPose cam_to_world_next = RigidPose::identity();
};

struct SceneSpec {
    int spec_version = 1;
    CameraSpec camera;
    std::vector<PlaneSpec> background;
    std::vector<ObjectSpec> objects;
    PriorSpec prior;
    bool allow_textureless = false;

    void validate() const;
};

struct FrameTriplet {
    ImageBuffer image_prev, image_t, image_next;
    DepthMap gt_prev, gt_t, gt_next;
    Mask mask_prev, mask_t, mask_next;  // dynamic-object masks S
    RigidPose pose_t_to_prev, pose_t_to_next;
    CameraIntrinsics intr;
};

/// Analytic ray-cast of the layered scene; deterministic given the spec.
/// Throws ValidationError when a ray escapes the background.
FrameTriplet render(const SceneSpec& spec);

enum class PriorMode { Exact, MultiplicativeNoise, ConstantBias };

/// Corrupted copy of the ground truth standing in for the depth prior.
DepthMap make_prior(const DepthMap& gt, PriorMode mode, double param, std::uint64_t seed);
DepthMap make_prior(const DepthMap& gt, const PriorSpec& spec);

/// Plain-text scene config (key = value with [section] blocks). Parse errors
/// carry the offending line number; missing required keys are named.
SceneSpec parse_scene_spec(const std::string& text);
SceneSpec load_scene_spec(const std::string& path);
std::string format_scene_spec(const SceneSpec& spec);

}  // namespace domdepth
