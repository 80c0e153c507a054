#pragma once

#include <cstdint>
#include <vector>

#include "domdepth/image.hpp"

namespace domdepth {

struct PhotometricParams {
    double gamma = 0.85;       // SSIM weight
    int ssim_window = 3;       // odd, >= 3
    double ssim_c1 = 1e-4;
    double ssim_c2 = 9e-4;

    void validate() const;
};

/// Per-pixel photometric error: (gamma/2)(1-SSIM) + (1-gamma)|a-b|_1, channel
/// means, SSIM over a box window with reflected borders. Returns a 1-channel map.
ImageBuffer photometric_error(const ImageBuffer& a, const ImageBuffer& b,
                              const PhotometricParams& params);

/// Same, but the target is painted black on O_a first so occluded samples do
/// not leak into neighbors through the SSIM window. Exclusion of O_a pixels
/// from aggregation happens in the occlusion-aware reduction, not here.
ImageBuffer masked_photometric(const ImageBuffer& target, const ImageBuffer& warped,
                               const Mask& occluded_target, const PhotometricParams& params);

/// Plain mean of (E_prev + E_next)/2 over all pixels.
double reprojection_loss(const ImageBuffer& e_prev, const ImageBuffer& e_next);

/// Per-pixel minimum baseline: mean over pixels of min(E_prev, E_next).
double min_reprojection_loss(const ImageBuffer& e_prev, const ImageBuffer& e_next);

enum class SourceChoice : std::uint8_t { Prev = 0, Next = 1, Min = 2, None = 3 };

struct OcclusionAwareResult {
    double loss = 0.0;
    ImageBuffer e_or;                   // switched per-pixel error map
    std::vector<SourceChoice> choice;   // per-pixel rule taken
    bool empty_support = false;         // both masks claimed full occlusion
};

/// Four-case source switching: visible sources win over the per-pixel minimum,
/// doubly-occluded pixels contribute zero and leave the normalization count.
OcclusionAwareResult occlusion_aware_loss(const ImageBuffer& e_prev, const ImageBuffer& e_next,
                                          const Mask& occ_prev, const Mask& vis_prev,
                                          const Mask& occ_next, const Mask& vis_next);

/// Pixels (restricted to mask) whose relative depth gap exceeds the threshold:
/// |D - D_pr| / min(D, D_pr) > threshold. Both maps must be valid and positive
/// on the mask.
Mask cycle_inconsistent_mask(const DepthMap& depth, const DepthMap& prior, const Mask& mask,
                             double threshold = 1.0);

/// Mean |D - D_pr| over the inconsistent subset of the mask; 0 when empty.
double cycle_consistency(const DepthMap& depth, const DepthMap& prior, const Mask& mask,
                         double threshold = 1.0);

/// Edge-aware smoothness of mean-normalized inverse depth, forward differences,
/// last row/column excluded; invalid depth pixels drop out of mean and gradients.
double smoothness(const DepthMap& depth, const ImageBuffer& image);

struct LossWeights {
    double cycle = 1.0, reprojection = 1.0, smooth = 1.0;
};

struct LossReport {
    double l_c = 0.0, l_or = 0.0, l_s = 0.0, l_total = 0.0;
    ImageBuffer e_prev, e_next;        // per-source error maps
    ImageBuffer e_or_map;              // switched map
    std::vector<SourceChoice> source_choice;
    bool empty_support = false;
};

/// L = L_c + L_or + L_s, a plain sum at the default unit weights.
LossReport total_loss(double l_c, double l_or, double l_s, const LossWeights& weights = {});

}  // namespace domdepth
