#include "domdepth/losses.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "domdepth/parallel.hpp"

namespace domdepth {

namespace {

int reflect_index(int i, int n) {
    // Symmetric reflection including the edge sample: -1 -> 0, n -> n-1.
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

/// Row-partial sums combined in row order: bitwise independent of threading.
double mean_by_rows(int height, int width, const std::function<double(int, int)>& term,
                    const std::function<bool(int, int)>& include, size_t* count_out = nullptr) {
    std::vector<double> row_sum(height, 0.0);
    std::vector<size_t> row_count(height, 0);
    parallel_for(height, [&](int y) {
        double s = 0.0;
        size_t n = 0;
        for (int x = 0; x < width; ++x) {
            if (!include(y, x)) continue;
            s += term(y, x);
            ++n;
        }
        row_sum[y] = s;
        row_count[y] = n;
    });
    double total = 0.0;
    size_t count = 0;
    for (int y = 0; y < height; ++y) {
        total += row_sum[y];
        count += row_count[y];
    }
    if (count_out) *count_out = count;
    return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace

void PhotometricParams::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("photometric: gamma must be in [0,1]");
    if (ssim_window < 3 || ssim_window % 2 == 0)
        throw ValidationError("photometric: ssim_window must be odd and >= 3");
    if (!(ssim_c1 > 0.0) || !(ssim_c2 > 0.0))
        throw ValidationError("photometric: SSIM stabilizers must be positive");
}

ImageBuffer photometric_error(const ImageBuffer& a, const ImageBuffer& b,
                              const PhotometricParams& params) {
    params.validate();
    if (!a.same_shape(b)) throw ValidationError("photometric_error: shapes differ");
    const int h = a.height, w = a.width, ch = a.channels;
    const int r = params.ssim_window / 2;
    const double inv_n = 1.0 / (params.ssim_window * params.ssim_window);

    ImageBuffer out(h, w, 1, 0.0);
    parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            double ssim_sum = 0.0, l1_sum = 0.0;
            for (int c = 0; c < ch; ++c) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int dy = -r; dy <= r; ++dy) {
                    int yy = reflect_index(y + dy, h);
                    for (int dx = -r; dx <= r; ++dx) {
                        int xx = reflect_index(x + dx, w);
                        double va = a.at(yy, xx, c), vb = b.at(yy, xx, c);
                        mx += va;
                        my += vb;
                        mxx += va * va;
                        myy += vb * vb;
                        mxy += va * vb;
                    }
                }
                mx *= inv_n;
                my *= inv_n;
                double sx = mxx * inv_n - mx * mx;
                double sy = myy * inv_n - my * my;
                double sxy = mxy * inv_n - mx * my;
                double ssim = ((2.0 * mx * my + params.ssim_c1) * (2.0 * sxy + params.ssim_c2)) /
                              ((mx * mx + my * my + params.ssim_c1) * (sx + sy + params.ssim_c2));
                ssim_sum += ssim;
                l1_sum += std::abs(a.at(y, x, c) - b.at(y, x, c));
            }
            double ssim_term = 0.5 * params.gamma * (1.0 - ssim_sum / ch);
            double l1_term = (1.0 - params.gamma) * (l1_sum / ch);
            out.at(y, x, 0) = ssim_term + l1_term;
        }
    });
    return out;
}

ImageBuffer masked_photometric(const ImageBuffer& target, const ImageBuffer& warped,
                               const Mask& occluded_target, const PhotometricParams& params) {
    if (occluded_target.height != target.height || occluded_target.width != target.width)
        throw ValidationError("masked_photometric: mask shape differs");
    ImageBuffer painted = target;
    for (int y = 0; y < target.height; ++y)
        for (int x = 0; x < target.width; ++x)
            if (occluded_target.at(y, x))
                for (int c = 0; c < target.channels; ++c) painted.at(y, x, c) = 0.0;
    return photometric_error(painted, warped, params);
}

double reprojection_loss(const ImageBuffer& e_prev, const ImageBuffer& e_next) {
    if (!e_prev.same_shape(e_next)) throw ValidationError("reprojection_loss: shapes differ");
    return mean_by_rows(
        e_prev.height, e_prev.width,
        [&](int y, int x) { return 0.5 * (e_prev.at(y, x, 0) + e_next.at(y, x, 0)); },
        [](int, int) { return true; });
}

double min_reprojection_loss(const ImageBuffer& e_prev, const ImageBuffer& e_next) {
    if (!e_prev.same_shape(e_next)) throw ValidationError("min_reprojection_loss: shapes differ");
    return mean_by_rows(
        e_prev.height, e_prev.width,
        [&](int y, int x) { return std::min(e_prev.at(y, x, 0), e_next.at(y, x, 0)); },
        [](int, int) { return true; });
}

OcclusionAwareResult occlusion_aware_loss(const ImageBuffer& e_prev, const ImageBuffer& e_next,
                                          const Mask& occ_prev, const Mask& vis_prev,
                                          const Mask& occ_next, const Mask& vis_next) {
    if (!e_prev.same_shape(e_next)) throw ValidationError("occlusion_aware_loss: map shapes differ");
    const int h = e_prev.height, w = e_prev.width;
    for (const Mask* m : {&occ_prev, &vis_prev, &occ_next, &vis_next})
        if (m->height != h || m->width != w)
            throw ValidationError("occlusion_aware_loss: mask shape differs");
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (occ_prev.at(y, x) == vis_prev.at(y, x) || occ_next.at(y, x) == vis_next.at(y, x))
                throw ValidationError("occlusion_aware_loss: masks must partition the frame");

    OcclusionAwareResult res;
    res.e_or = ImageBuffer(h, w, 1, 0.0);
    res.choice.assign(static_cast<size_t>(h) * w, SourceChoice::None);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            size_t i = static_cast<size_t>(y) * w + x;
            bool op = occ_prev.at(y, x), on = occ_next.at(y, x);
            double ep = e_prev.at(y, x, 0), en = e_next.at(y, x, 0);
            if (!op && on) {
                res.e_or.at(y, x, 0) = ep;
                res.choice[i] = SourceChoice::Prev;
            } else if (op && !on) {
                res.e_or.at(y, x, 0) = en;
                res.choice[i] = SourceChoice::Next;
            } else if (!op && !on) {
                res.e_or.at(y, x, 0) = std::min(ep, en);
                res.choice[i] = SourceChoice::Min;
            }  // both occluded: zero error, None
        }

    // Normalization counts every pixel not occluded in both sources.
    size_t support = 0;
    double acc = mean_by_rows(
        h, w, [&](int y, int x) { return res.e_or.at(y, x, 0); },
        [&](int y, int x) { return !(occ_prev.at(y, x) && occ_next.at(y, x)); }, &support);
    if (support == 0) {
        res.empty_support = true;
        res.loss = 0.0;
    } else {
        res.loss = acc;
    }
    return res;
}

Mask cycle_inconsistent_mask(const DepthMap& depth, const DepthMap& prior, const Mask& mask,
                             double threshold) {
    if (depth.height != prior.height || depth.width != prior.width ||
        mask.height != depth.height || mask.width != depth.width)
        throw ValidationError("cycle_consistency: shapes differ");
    Mask out(depth.height, depth.width, false);
    for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x) {
            if (!mask.at(y, x)) continue;
            if (!depth.is_valid(y, x) || !prior.is_valid(y, x))
                throw std::domain_error("cycle_consistency: depth missing on a masked pixel");
            double d = depth.at(y, x), p = prior.at(y, x);
            if (!(d > 0.0) || !(p > 0.0))
                throw std::domain_error("cycle_consistency: non-positive depth");
            if (std::abs(d - p) / std::min(d, p) > threshold) out.set(y, x, true);
        }
    return out;
}

double cycle_consistency(const DepthMap& depth, const DepthMap& prior, const Mask& mask,
                         double threshold) {
    Mask active = cycle_inconsistent_mask(depth, prior, mask, threshold);
    double sum = 0.0;
    size_t n = 0;
    for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x)
            if (active.at(y, x)) {
                sum += std::abs(depth.at(y, x) - prior.at(y, x));
                ++n;
            }
    return n ? sum / static_cast<double>(n) : 0.0;
}

double smoothness(const DepthMap& depth, const ImageBuffer& image) {
    if (depth.height != image.height || depth.width != image.width)
        throw ValidationError("smoothness: shapes differ");
    const int h = depth.height, w = depth.width, ch = image.channels;

    // Mean-normalized inverse depth over valid pixels.
    double inv_sum = 0.0;
    size_t n_valid = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (depth.is_valid(y, x)) {
                inv_sum += 1.0 / depth.at(y, x);
                ++n_valid;
            }
    if (n_valid == 0) return 0.0;
    double inv_mean = inv_sum / static_cast<double>(n_valid);
    if (inv_mean == 0.0) return 0.0;

    auto dstar = [&](int y, int x) { return (1.0 / depth.at(y, x)) / inv_mean; };
    auto img_grad_x = [&](int y, int x) {
        double g = 0.0;
        for (int c = 0; c < ch; ++c) g += std::abs(image.at(y, x + 1, c) - image.at(y, x, c));
        return g / ch;
    };
    auto img_grad_y = [&](int y, int x) {
        double g = 0.0;
        for (int c = 0; c < ch; ++c) g += std::abs(image.at(y + 1, x, c) - image.at(y, x, c));
        return g / ch;
    };

    return mean_by_rows(
        h - 1, w - 1,
        [&](int y, int x) {
            double tx = std::abs(dstar(y, x + 1) - dstar(y, x)) * std::exp(-img_grad_x(y, x));
            double ty = std::abs(dstar(y + 1, x) - dstar(y, x)) * std::exp(-img_grad_y(y, x));
            return tx + ty;
        },
        [&](int y, int x) {
            return depth.is_valid(y, x) && depth.is_valid(y, x + 1) && depth.is_valid(y + 1, x);
        });
}

LossReport total_loss(double l_c, double l_or, double l_s, const LossWeights& weights) {
    LossReport report;
    report.l_c = l_c;
    report.l_or = l_or;
    report.l_s = l_s;
    report.l_total = weights.cycle * l_c + weights.reprojection * l_or + weights.smooth * l_s;
    return report;
}

}  // namespace domdepth
