#include "domdepth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace domdepth {

MetricReport compute_metrics(const DepthMap& pred, const DepthMap& gt, const Mask* mask,
                             const MetricOptions& opts) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ValidationError("metrics: shapes differ");
    if (mask && (mask->height != gt.height || mask->width != gt.width))
        throw ValidationError("metrics: mask shape differs");
    if (!(opts.clip_max > 0.0)) throw ValidationError("metrics: clip_max must be positive");

    std::vector<std::pair<double, double>> samples;  // (pred, gt)
    samples.reserve(gt.pixel_count());
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if (!pred.is_valid(y, x) || !gt.is_valid(y, x)) continue;
            if (mask && !mask->at(y, x)) continue;
            samples.emplace_back(pred.at(y, x), gt.at(y, x));
        }
    if (samples.empty()) throw ValidationError("metrics: empty support");

    if (opts.median_scale) {
        std::vector<double> ratios;
        ratios.reserve(samples.size());
        for (const auto& [p, g] : samples) ratios.push_back(g / p);
        size_t mid = ratios.size() / 2;
        std::nth_element(ratios.begin(), ratios.begin() + mid, ratios.end());
        double scale = ratios[mid];
        for (auto& [p, g] : samples) p *= scale;
    }

    MetricReport r;
    r.n_pixels = samples.size();
    double sum_abs = 0, sum_sq = 0, sum_se = 0, sum_log = 0;
    size_t d1 = 0, d2 = 0, d3 = 0;
    const double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
    for (const auto& [p_raw, g] : samples) {
        double p = std::min(p_raw, opts.clip_max);
        double diff = p - g;
        sum_abs += std::abs(diff) / g;
        sum_sq += diff * diff / g;
        sum_se += diff * diff;
        double dl = std::log(p) - std::log(g);
        sum_log += dl * dl;
        double thresh = std::max(g / p, p / g);
        d1 += thresh < t1;
        d2 += thresh < t2;
        d3 += thresh < t3;
    }
    double n = static_cast<double>(r.n_pixels);
    r.abs_rel = sum_abs / n;
    r.sq_rel = sum_sq / n;
    r.rmse = std::sqrt(sum_se / n);
    r.rmse_log = std::sqrt(sum_log / n);
    r.delta1 = d1 / n;
    r.delta2 = d2 / n;
    r.delta3 = d3 / n;
    return r;
}

ImageBuffer error_map(const DepthMap& pred, const DepthMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ValidationError("error_map: shapes differ");
    ImageBuffer out(gt.height, gt.width, 3, 0.5);
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if (!pred.is_valid(y, x) || !gt.is_valid(y, x)) continue;  // stays gray
            double abs_rel = std::abs(pred.at(y, x) - gt.at(y, x)) / gt.at(y, x);
            double t = std::clamp(abs_rel / 0.5, 0.0, 1.0);
            out.at(y, x, 0) = 1.0;
            out.at(y, x, 1) = 1.0 - t;
            out.at(y, x, 2) = 1.0 - t;
        }
    return out;
}

std::string metrics_csv_header() {
    return "scene_id,variant,region,abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3,n_pixels";
}

std::string metrics_csv_row(const std::string& scene_id, const std::string& variant,
                            const std::string& region, const MetricReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%zu",
                  scene_id.c_str(), variant.c_str(), region.c_str(), r.abs_rel, r.sq_rel, r.rmse,
                  r.rmse_log, r.delta1, r.delta2, r.delta3, r.n_pixels);
    return buf;
}

}  // namespace domdepth
