#include "domdepth/costvol.hpp"

#include <algorithm>
#include <cmath>

#include "domdepth/parallel.hpp"

namespace domdepth {

DepthHypotheses DepthHypotheses::inverse_linear(double d_min, double d_max, int count) {
    if (!(d_min > 0.0) || !(d_max > d_min)) throw ValidationError("hypotheses: require 0 < d_min < d_max");
    if (count < 2) throw ValidationError("hypotheses: need at least 2 bins");
    DepthHypotheses hyp;
    hyp.d_min = d_min;
    hyp.d_max = d_max;
    double u0 = 1.0 / d_min;
    double step = (u0 - 1.0 / d_max) / (count - 1);
    hyp.values.resize(count);
    hyp.inverse.resize(count);
    for (int i = 0; i < count; ++i) {
        double u = u0 - i * step;
        hyp.inverse[i] = u;
        hyp.values[i] = 1.0 / u;
    }
    return hyp;
}

int DepthHypotheses::nearest_bin(double depth) const {
    double u = 1.0 / depth;
    double step = inverse_step();
    int i = static_cast<int>(std::lround((inverse[0] - u) / step));
    return std::clamp(i, 0, size() - 1);
}

void DepthHypotheses::validate() const {
    if (values.size() < 2 || values.size() != inverse.size())
        throw ValidationError("hypotheses: need at least 2 bins");
    for (size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0)) throw ValidationError("hypotheses: depths must be positive");
        if (i > 0 && !(values[i] > values[i - 1]))
            throw ValidationError("hypotheses: depths must be strictly increasing");
    }
}

CostVolume build_cost_volume(const ImageBuffer& f_t, const DisentangledFrame& ref,
                             const RigidPose& pose_t_to_ref, const CameraIntrinsics& intr,
                             const DepthHypotheses& hyp) {
    hyp.validate();
    if (!f_t.same_shape(ref.image)) throw ValidationError("cost volume: frame shapes differ");
    if (f_t.height != intr.height || f_t.width != intr.width)
        throw ValidationError("cost volume: frames do not match intrinsics");

    const int h = f_t.height, w = f_t.width, ch = f_t.channels;
    CostVolume cv(hyp.size(), h, w);
    for (int p = 0; p < hyp.size(); ++p) {
        DepthMap layer_depth = DepthMap::constant(h, w, hyp.values[p]);
        WarpResult warped = warp_image(ref.image, layer_depth, pose_t_to_ref, intr,
                                       &ref.masks.occluded);
        parallel_for(h, [&, p](int y) {
            for (int x = 0; x < w; ++x) {
                if (!warped.valid.at(y, x)) continue;
                double acc = 0.0;
                for (int c = 0; c < ch; ++c) acc += std::abs(f_t.at(y, x, c) - warped.image.at(y, x, c));
                size_t idx = cv.index(p, y, x);
                cv.cost[idx] = acc / ch;
                cv.state[idx] = VoxelState::Valid;
            }
        });
    }
    return cv;
}

CostVolume fill_occlusions(const CostVolume& cv, int window_r) {
    if (window_r < 0) throw ValidationError("fill_occlusions: window must be non-negative");
    CostVolume out = cv;
    parallel_for(cv.height, [&](int y) {
        for (int x = 0; x < cv.width; ++x) {
            for (int p = 0; p < cv.bins; ++p) {
                if (cv.state_at(p, y, x) != VoxelState::Invalid) continue;
                for (int dp = 1; dp <= window_r; ++dp) {
                    int donor = -1;
                    if (p - dp >= 0 && cv.state_at(p - dp, y, x) == VoxelState::Valid) donor = p - dp;
                    else if (p + dp < cv.bins && cv.state_at(p + dp, y, x) == VoxelState::Valid) donor = p + dp;
                    if (donor >= 0) {
                        size_t idx = out.index(p, y, x);
                        out.cost[idx] = cv.at(donor, y, x);
                        out.state[idx] = VoxelState::Filled;
                        break;
                    }
                }
            }
        }
    });
    return out;
}

DepthMap extract_depth(const CostVolume& cv, const DepthHypotheses& hyp) {
    hyp.validate();
    if (hyp.size() != cv.bins) throw ValidationError("extract_depth: hypothesis count mismatch");
    DepthMap out(cv.height, cv.width);
    const double step = hyp.inverse_step();
    parallel_for(cv.height, [&](int y) {
        for (int x = 0; x < cv.width; ++x) {
            int best = -1;
            double best_cost = 0.0;
            for (int p = 0; p < cv.bins; ++p) {
                if (!cv.usable(p, y, x)) continue;
                double c = cv.at(p, y, x);
                // Exact ties (fill copies share their donor's cost) resolve to
                // the farther hypothesis: holes are cast by nearer occluders,
                // so the surface being recovered lies on the far side.
                if (best < 0 || c <= best_cost) {
                    best = p;
                    best_cost = c;
                }
            }
            if (best < 0) continue;  // fully invalid column
            double u = hyp.inverse[best];
            // Sub-bin refinement only between original (unfilled) neighbors.
            if (best > 0 && best + 1 < cv.bins && cv.state_at(best - 1, y, x) == VoxelState::Valid &&
                cv.state_at(best + 1, y, x) == VoxelState::Valid) {
                double cl = cv.at(best - 1, y, x), cr = cv.at(best + 1, y, x);
                double denom = cl - 2.0 * best_cost + cr;
                if (denom > 0.0) {
                    double offset = std::clamp(0.5 * (cl - cr) / denom, -0.5, 0.5);
                    u = hyp.inverse[best] - offset * step;
                }
            }
            out.set(y, x, 1.0 / u);
        }
    });
    return out;
}

}  // namespace domdepth
