#pragma once

#include "domdepth/geometry.hpp"

namespace domdepth {

/// O: reference-frame pixels left with no source data after disentanglement
/// (revealed background, painted black). V is the complement.
struct OcclusionMasks {
    Mask occluded;
    Mask visible;
};

struct DisentangledFrame {
    ImageBuffer image;
    OcclusionMasks masks;
    Mask repainted;  // pixels covered by the re-projected object appearance
};

struct DomdOptions {
    /// One-pixel morphological closing of the repainted region; forward
    /// splatting at magnification leaves cracks that this closes.
    bool close_pinholes = true;
};

/// Re-projects the time-t object appearance into the reference view through
/// the depth prior and replaces the old object appearance with it. All dynamic
/// objects are splatted together in one pass; z-buffer ties are broken by the
/// smaller linear source pixel index.
DisentangledFrame disentangle(const ImageBuffer& ref_image, const ImageBuffer& t_image,
                              const Mask& ref_mask, const Mask& t_mask,
                              const DepthMap& prior, const RigidPose& pose_t_to_ref,
                              const CameraIntrinsics& intr, const DomdOptions& opts = {});

/// Wraps a raw reference frame as a DisentangledFrame with empty masks
/// (the no-DOMD pipeline path).
DisentangledFrame passthrough_frame(const ImageBuffer& ref_image);

}  // namespace domdepth
