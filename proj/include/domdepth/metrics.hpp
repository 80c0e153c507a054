#pragma once

#include <string>

#include "domdepth/image.hpp"

namespace domdepth {

struct MetricReport {
    double abs_rel = 0.0, sq_rel = 0.0, rmse = 0.0, rmse_log = 0.0;
    double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;
    std::size_t n_pixels = 0;
};

struct MetricOptions {
    double clip_max = 80.0;     // predictions are clipped here before evaluation
    bool median_scale = false;  // monocular-eval parity flag; off because the solver is metric
};

/// The seven standard depth metrics over valid(pred) ∩ valid(gt) ∩ mask.
/// Throws ValidationError on empty support.
MetricReport compute_metrics(const DepthMap& pred, const DepthMap& gt,
                             const Mask* mask = nullptr, const MetricOptions& opts = {});

/// Per-pixel abs-rel through a fixed ramp: 0 -> white, >= 0.5 -> saturated red,
/// linear in between; pixels without both depths -> mid gray.
ImageBuffer error_map(const DepthMap& pred, const DepthMap& gt);

/// CSV row schema: scene_id,variant,region,abs_rel,sq_rel,rmse,rmse_log,
/// delta1,delta2,delta3,n_pixels.
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& scene_id, const std::string& variant,
                            const std::string& region, const MetricReport& report);

}  // namespace domdepth
