#include "domdepth/solver.hpp"

#include <chrono>
#include <cmath>

#include "domdepth/metrics.hpp"

namespace domdepth {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// S ∩ valid(D) ∩ valid(D_pr): the support the cycle loss is evaluated on.
Mask cycle_support(const DepthMap& depth, const DepthMap& prior, const Mask& dynamic) {
    Mask out(dynamic.height, dynamic.width, false);
    for (int y = 0; y < dynamic.height; ++y)
        for (int x = 0; x < dynamic.width; ++x)
            out.set(y, x, dynamic.at(y, x) && depth.is_valid(y, x) && prior.is_valid(y, x));
    return out;
}

}  // namespace

SolveResult solve(const FrameTriplet& triplet, const DepthMap& prior, const SolverConfig& cfg) {
    if (prior.height != triplet.intr.height || prior.width != triplet.intr.width)
        throw ValidationError("solve: prior does not match the triplet resolution");
    DepthHypotheses hyp = cfg.hypotheses();

    SolveResult res;
    res.updated_prior = prior;

    auto t0 = Clock::now();
    if (cfg.toggles.use_domd) {
        res.ref_prev = disentangle(triplet.image_prev, triplet.image_t, triplet.mask_prev,
                                   triplet.mask_t, prior, triplet.pose_t_to_prev, triplet.intr,
                                   cfg.domd);
        res.ref_next = disentangle(triplet.image_next, triplet.image_t, triplet.mask_next,
                                   triplet.mask_t, prior, triplet.pose_t_to_next, triplet.intr,
                                   cfg.domd);
    } else {
        res.ref_prev = passthrough_frame(triplet.image_prev);
        res.ref_next = passthrough_frame(triplet.image_next);
    }
    res.timings.push_back({"domd", seconds_since(t0)});

    t0 = Clock::now();
    CostVolume cv = build_cost_volume(triplet.image_t, res.ref_prev, triplet.pose_t_to_prev,
                                      triplet.intr, hyp);
    res.timings.push_back({"cost_volume", seconds_since(t0)});

    if (cfg.toggles.use_cv_fill) {
        t0 = Clock::now();
        cv = fill_occlusions(cv, cfg.fill_window);
        res.timings.push_back({"fill", seconds_since(t0)});
    }

    t0 = Clock::now();
    res.depth = extract_depth(cv, hyp);
    res.cost_volume = std::move(cv);
    res.timings.push_back({"extract", seconds_since(t0)});

    t0 = Clock::now();
    WarpResult warp_prev = warp_image(res.ref_prev.image, res.depth, triplet.pose_t_to_prev,
                                      triplet.intr, &res.ref_prev.masks.occluded);
    WarpResult warp_next = warp_image(res.ref_next.image, res.depth, triplet.pose_t_to_next,
                                      triplet.intr, &res.ref_next.masks.occluded);
    // Target-frame occlusion masks: everything the warp could not source.
    Mask occ_prev = ~warp_prev.valid;
    Mask occ_next = ~warp_next.valid;

    ImageBuffer e_prev = cfg.toggles.loss_masking
                             ? masked_photometric(triplet.image_t, warp_prev.image, occ_prev,
                                                  cfg.photometric)
                             : photometric_error(triplet.image_t, warp_prev.image, cfg.photometric);
    ImageBuffer e_next = cfg.toggles.loss_masking
                             ? masked_photometric(triplet.image_t, warp_next.image, occ_next,
                                                  cfg.photometric)
                             : photometric_error(triplet.image_t, warp_next.image, cfg.photometric);

    double l_or = 0.0;
    LossReport report;
    if (cfg.toggles.loss_switching) {
        OcclusionAwareResult oar = occlusion_aware_loss(e_prev, e_next, occ_prev, ~occ_prev,
                                                        occ_next, ~occ_next);
        l_or = oar.loss;
        report.e_or_map = std::move(oar.e_or);
        report.source_choice = std::move(oar.choice);
        report.empty_support = oar.empty_support;
    } else {
        l_or = min_reprojection_loss(e_prev, e_next);
    }

    double l_c = 0.0;
    if (cfg.toggles.use_cycle) {
        Mask support = cycle_support(res.depth, prior, triplet.mask_t);
        l_c = cycle_consistency(res.depth, prior, support, cfg.cycle_threshold);
    }
    double l_s = smoothness(res.depth, triplet.image_t);

    LossReport totals = total_loss(l_c, l_or, l_s, cfg.weights);
    report.l_c = totals.l_c;
    report.l_or = totals.l_or;
    report.l_s = totals.l_s;
    report.l_total = totals.l_total;
    report.e_prev = std::move(e_prev);
    report.e_next = std::move(e_next);
    res.loss_per_iteration.push_back(std::move(report));
    res.timings.push_back({"losses", seconds_since(t0)});
    res.iterations_run = 1;
    return res;
}

SolveResult refine_prior_loop(const FrameTriplet& triplet, const DepthMap& prior0,
                              const SolverConfig& cfg) {
    if (cfg.refine_iterations < 1)
        throw ValidationError("refine_prior_loop: needs at least one iteration");

    DepthMap prior = prior0;
    SolveResult last;
    std::vector<LossReport> all_reports;
    std::vector<StageTiming> all_timings;
    double prev_obj_abs_rel = 0.0;
    int rising_streak = 0;
    bool have_prev_metric = false;
    int iterations = 0;
    bool diverged = false;

    for (int iter = 0; iter < cfg.refine_iterations; ++iter) {
        last = solve(triplet, prior, cfg);
        ++iterations;
        for (auto& r : last.loss_per_iteration) all_reports.push_back(std::move(r));
        for (auto& t : last.timings) all_timings.push_back(std::move(t));

        Mask support = cycle_support(last.depth, prior, triplet.mask_t);
        double l_c = cycle_consistency(last.depth, prior, support, cfg.cycle_threshold);

        // Divergence guard: object-area Abs Rel rising 3 iterations running.
        if (triplet.mask_t.count() > 0) {
            Mask metric_support = cycle_support(last.depth, triplet.gt_t, triplet.mask_t);
            if (metric_support.count() > 0) {
                MetricReport m = compute_metrics(last.depth, triplet.gt_t, &metric_support);
                if (have_prev_metric && m.abs_rel > prev_obj_abs_rel) ++rising_streak;
                else rising_streak = 0;
                prev_obj_abs_rel = m.abs_rel;
                have_prev_metric = true;
                if (rising_streak >= 3) {
                    diverged = true;
                    break;
                }
            }
        }

        if (l_c == 0.0) break;

        // Move the prior toward the prediction on the inconsistent dynamic set.
        Mask active = cycle_inconsistent_mask(last.depth, prior, support, cfg.cycle_threshold);
        for (int y = 0; y < prior.height; ++y)
            for (int x = 0; x < prior.width; ++x)
                if (active.at(y, x)) {
                    double d = last.depth.at(y, x);
                    double p = prior.at(y, x);
                    prior.set(y, x, (1.0 - cfg.prior_update_lambda) * p + cfg.prior_update_lambda * d);
                }
    }

    last.loss_per_iteration = std::move(all_reports);
    last.timings = std::move(all_timings);
    last.updated_prior = std::move(prior);
    last.iterations_run = iterations;
    last.diverged = diverged;
    return last;
}

GradCheckReport grad_check(const FrameTriplet& triplet, const DepthMap& depth,
                           const std::vector<std::pair<int, int>>& pixels, double eps_rel) {
    if (!(eps_rel > 0.0)) throw ValidationError("grad_check: eps must be positive");
    const CameraIntrinsics& intr = triplet.intr;
    const ImageBuffer& source = triplet.image_prev;
    const ImageBuffer& target = triplet.image_t;
    const RigidPose& pose = triplet.pose_t_to_prev;
    const int ch = source.channels;

    GradCheckReport report;
    for (auto [px, py] : pixels) {
        GradCheckEntry entry;
        entry.x = px;
        entry.y = py;
        if (px < 0 || px >= intr.width || py < 0 || py >= intr.height || !depth.is_valid(py, px)) {
            entry.skipped = true;
            report.entries.push_back(entry);
            ++report.skipped;
            continue;
        }
        double d = depth.at(py, px);
        double eps = eps_rel * d;

        // One bilinear-cell evaluation of the residual and its depth derivative.
        Vec3 ray{(px - intr.cx) / intr.fx, (py - intr.cy) / intr.fy, 1.0};
        Vec3 r = pose.rotation * ray;  // point(d) = d*r + t
        const Vec3& t = pose.translation;

        auto sample_pos = [&](double dd, double* u, double* v, double* z) {
            double X = dd * r.x + t.x, Y = dd * r.y + t.y, Z = dd * r.z + t.z;
            *z = Z;
            *u = intr.fx * X / Z + intr.cx;
            *v = intr.fy * Y / Z + intr.cy;
        };
        double u0, v0, z0, um, vm, zm, up, vp, zp;
        sample_pos(d, &u0, &v0, &z0);
        sample_pos(d - eps, &um, &vm, &zm);
        sample_pos(d + eps, &up, &vp, &zp);
        bool in_frustum = z0 > 0 && zm > 0 && zp > 0 && um >= 0 && up >= 0 && u0 >= 0 &&
                          um <= intr.width - 1 && up <= intr.width - 1 && u0 <= intr.width - 1 &&
                          vm >= 0 && vp >= 0 && v0 >= 0 && vm <= intr.height - 1 &&
                          vp <= intr.height - 1 && v0 <= intr.height - 1;
        if (!in_frustum) {
            entry.skipped = true;
            report.entries.push_back(entry);
            ++report.skipped;
            continue;
        }
        int x0 = static_cast<int>(std::floor(u0)), y0 = static_cast<int>(std::floor(v0));
        bool same_cell = static_cast<int>(std::floor(um)) == x0 &&
                         static_cast<int>(std::floor(up)) == x0 &&
                         static_cast<int>(std::floor(vm)) == y0 &&
                         static_cast<int>(std::floor(vp)) == y0 && x0 + 1 < intr.width &&
                         y0 + 1 < intr.height;
        if (!same_cell) {
            entry.skipped = true;
            report.entries.push_back(entry);
            ++report.skipped;
            continue;
        }

        auto residuals = [&](double u, double v, double* out) {
            double s[3];
            sample_bilinear(source, u, v, s);
            for (int c = 0; c < ch; ++c) out[c] = target.at(py, px, c) - s[c];
        };
        double res0[3], resm[3], resp[3];
        residuals(u0, v0, res0);
        residuals(um, vm, resm);
        residuals(up, vp, resp);

        // Residual must keep its sign across the stencil in every channel.
        bool sign_ok = true;
        for (int c = 0; c < ch; ++c) {
            if (std::abs(res0[c]) < 1e-12 || res0[c] * resm[c] <= 0 || res0[c] * resp[c] <= 0)
                sign_ok = false;
        }
        double f0 = 0, fm = 0, fp = 0;
        for (int c = 0; c < ch; ++c) {
            f0 += std::abs(res0[c]);
            fm += std::abs(resm[c]);
            fp += std::abs(resp[c]);
        }
        f0 /= ch;
        fm /= ch;
        fp /= ch;

        // Analytic: d|res|/dd = -sign(res) * (dW/du * du/dd + dW/dv * dv/dd).
        double fu = u0 - x0, fv = v0 - y0;
        double Z = z0;
        double dudd = intr.fx * (r.x * Z - (d * r.x + t.x) * r.z) / (Z * Z);
        double dvdd = intr.fy * (r.y * Z - (d * r.y + t.y) * r.z) / (Z * Z);
        double analytic = 0.0;
        double texture_grad = 0.0;
        for (int c = 0; c < ch; ++c) {
            double p00 = source.at(y0, x0, c), p10 = source.at(y0, x0 + 1, c);
            double p01 = source.at(y0 + 1, x0, c), p11 = source.at(y0 + 1, x0 + 1, c);
            double dWdu = (1 - fv) * (p10 - p00) + fv * (p11 - p01);
            double dWdv = (1 - fu) * (p01 - p00) + fu * (p11 - p10);
            double sign = res0[c] > 0 ? 1.0 : -1.0;
            analytic += -sign * (dWdu * dudd + dWdv * dvdd);
            texture_grad += std::abs(dWdu) + std::abs(dWdv);
        }
        analytic /= ch;
        texture_grad /= ch;

        entry.analytic = analytic;
        entry.numeric = (fp - fm) / (2.0 * eps);
        if (!sign_ok || texture_grad < 1e-12 || std::abs(analytic) < 1e-12) {
            entry.skipped = true;
            ++report.skipped;
        } else {
            entry.rel_err = std::abs(entry.analytic - entry.numeric) /
                            std::max(std::abs(entry.analytic), std::abs(entry.numeric));
            report.max_rel_err = std::max(report.max_rel_err, entry.rel_err);
            ++report.checked;
        }
        report.entries.push_back(entry);
    }
    return report;
}

}  // namespace domdepth
