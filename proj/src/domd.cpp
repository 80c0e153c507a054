#include "domdepth/domd.hpp"

#include <cmath>
#include <limits>

namespace domdepth {

namespace {

Mask dilate3x3(const Mask& m) {
    Mask out(m.height, m.width, false);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(y, x)) continue;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    int ny = y + dy, nx = x + dx;
                    if (ny >= 0 && ny < m.height && nx >= 0 && nx < m.width) out.set(ny, nx, true);
                }
        }
    return out;
}

Mask erode3x3(const Mask& m) {
    Mask out(m.height, m.width, false);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            bool all = true;
            for (int dy = -1; dy <= 1 && all; ++dy)
                for (int dx = -1; dx <= 1 && all; ++dx) {
                    int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width || !m.at(ny, nx))
                        all = false;
                }
            out.set(y, x, all);
        }
    return out;
}

}  // namespace

DisentangledFrame disentangle(const ImageBuffer& ref_image, const ImageBuffer& t_image,
                              const Mask& ref_mask, const Mask& t_mask,
                              const DepthMap& prior, const RigidPose& pose_t_to_ref,
                              const CameraIntrinsics& intr, const DomdOptions& opts) {
    if (!ref_image.same_shape(t_image))
        throw ValidationError("disentangle: frame shapes differ");
    if (ref_image.height != intr.height || ref_image.width != intr.width)
        throw ValidationError("disentangle: frames do not match intrinsics");
    if (ref_mask.height != ref_image.height || ref_mask.width != ref_image.width ||
        t_mask.height != ref_image.height || t_mask.width != ref_image.width)
        throw ValidationError("disentangle: mask shapes differ from frames");
    if (prior.height != ref_image.height || prior.width != ref_image.width)
        throw ValidationError("disentangle: prior shape differs from frames");
    pose_t_to_ref.validate();

    const int h = ref_image.height, w = ref_image.width, ch = ref_image.channels;
    const double inf = std::numeric_limits<double>::infinity();

    // Forward splat of the time-t object pixels into the reference view,
    // nearest pixel, z-buffered on splat depth. Serial scan in linear source
    // order makes the strict < comparison the documented tie-break.
    std::vector<double> zbuf(static_cast<size_t>(h) * w, inf);
    ImageBuffer splat_value(h, w, ch, 0.0);
    Mask splatted(h, w, false);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!t_mask.at(y, x)) continue;
            if (!prior.is_valid(y, x))
                throw ValidationError("disentangle: prior has no depth on a dynamic-object pixel");
            double d = prior.at(y, x);
            Vec3 p{d * (x - intr.cx) / intr.fx, d * (y - intr.cy) / intr.fy, d};
            Vec3 q = pose_t_to_ref.apply(p);
            if (!(q.z > 0.0)) continue;
            double u = intr.fx * q.x / q.z + intr.cx;
            double v = intr.fy * q.y / q.z + intr.cy;
            int tx = static_cast<int>(std::lround(u));
            int ty = static_cast<int>(std::lround(v));
            if (tx < 0 || tx >= w || ty < 0 || ty >= h) continue;
            size_t idx = static_cast<size_t>(ty) * w + tx;
            if (q.z < zbuf[idx]) {
                zbuf[idx] = q.z;
                splatted.set(ty, tx, true);
                for (int c = 0; c < ch; ++c) splat_value.at(ty, tx, c) = t_image.at(y, x, c);
            }
        }
    }

    Mask repainted = splatted;
    if (opts.close_pinholes) {
        Mask closed = erode3x3(dilate3x3(splatted));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (splatted.at(y, x) || !closed.at(y, x)) continue;
                // Crack pixel: take the average of splatted 8-neighbors.
                double acc[3] = {0, 0, 0};
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        int ny = y + dy, nx = x + dx;
                        if (ny < 0 || ny >= h || nx < 0 || nx >= w || !splatted.at(ny, nx)) continue;
                        for (int c = 0; c < ch; ++c) acc[c] += splat_value.at(ny, nx, c);
                        ++n;
                    }
                if (n == 0) continue;
                for (int c = 0; c < ch; ++c) splat_value.at(y, x, c) = acc[c] / n;
                repainted.set(y, x, true);
            }
    }

    DisentangledFrame out;
    out.image = ref_image;
    out.repainted = repainted;
    out.masks.occluded = Mask(h, w, false);
    out.masks.visible = Mask(h, w, true);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (repainted.at(y, x)) {
                for (int c = 0; c < ch; ++c) out.image.at(y, x, c) = splat_value.at(y, x, c);
            } else if (ref_mask.at(y, x)) {
                // Old object pixel with nothing painted over it: a hole.
                for (int c = 0; c < ch; ++c) out.image.at(y, x, c) = 0.0;
                out.masks.occluded.set(y, x, true);
                out.masks.visible.set(y, x, false);
            }
        }
    return out;
}

DisentangledFrame passthrough_frame(const ImageBuffer& ref_image) {
    DisentangledFrame out;
    out.image = ref_image;
    out.masks.occluded = Mask(ref_image.height, ref_image.width, false);
    out.masks.visible = Mask(ref_image.height, ref_image.width, true);
    out.repainted = Mask(ref_image.height, ref_image.width, false);
    return out;
}

}  // namespace domdepth
