#pragma once

#include "domdepth/domd.hpp"
#include "domdepth/geometry.hpp"

namespace domdepth {

/// Depth hypotheses, strictly increasing, spaced linearly in inverse depth.
struct DepthHypotheses {
    std::vector<double> values;   // depths, meters
    std::vector<double> inverse;  // 1/depth, uniform spacing
    double d_min = 0.0, d_max = 0.0;

    static DepthHypotheses inverse_linear(double d_min, double d_max, int count);

    int size() const { return static_cast<int>(values.size()); }
    double inverse_step() const { return inverse[0] - inverse[1]; }  // > 0
    /// Nearest bin to a metric depth, measured in inverse depth.
    int nearest_bin(double depth) const;

    void validate() const;
};

enum class VoxelState : std::uint8_t { Invalid = 0, Valid = 1, Filled = 2 };

struct CostVolume {
    int bins = 0, height = 0, width = 0;
    std::vector<double> cost;
    std::vector<VoxelState> state;

    CostVolume() = default;
    CostVolume(int p, int h, int w)
        : bins(p), height(h), width(w),
          cost(static_cast<size_t>(p) * h * w, 0.0),
          state(static_cast<size_t>(p) * h * w, VoxelState::Invalid) {}

    size_t index(int p, int y, int x) const {
        return (static_cast<size_t>(p) * height + y) * width + x;
    }
    double at(int p, int y, int x) const { return cost[index(p, y, x)]; }
    VoxelState state_at(int p, int y, int x) const { return state[index(p, y, x)]; }
    bool usable(int p, int y, int x) const { return state_at(p, y, x) != VoxelState::Invalid; }
};

/// Plane-sweep of the disentangled reference over every hypothesis; costs are
/// channel-mean L1 differences, voxels that sampled the occluded set O or left
/// the frustum are flagged invalid.
CostVolume build_cost_volume(const ImageBuffer& f_t, const DisentangledFrame& ref,
                             const RigidPose& pose_t_to_ref, const CameraIntrinsics& intr,
                             const DepthHypotheses& hyp);

/// Replaces each invalid voxel with the nearest originally-valid voxel along
/// the hypothesis axis within +-window_r bins (distance ties: smaller index).
/// Valid voxels are never modified; unreachable voxels stay invalid.
CostVolume fill_occlusions(const CostVolume& cv, int window_r);

/// Winner-take-all over usable voxels with parabolic refinement in inverse
/// depth; pixels whose column is fully invalid come back invalid.
DepthMap extract_depth(const CostVolume& cv, const DepthHypotheses& hyp);

}  // namespace domdepth
