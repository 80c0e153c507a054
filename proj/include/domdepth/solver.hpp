#pragma once

#include <utility>

#include "domdepth/costvol.hpp"
#include "domdepth/domd.hpp"
#include "domdepth/losses.hpp"
#include "domdepth/scenesim.hpp"

namespace domdepth {

struct SolverToggles {
    bool use_domd = true;
    bool use_cv_fill = true;
    bool loss_switching = true;
    bool loss_masking = true;
    bool use_cycle = true;
};

struct SolverConfig {
    SolverToggles toggles;
    double d_min = 1.0, d_max = 40.0;
    int num_hypotheses = 96;
    int fill_window = 8;
    int refine_iterations = 0;          // N for refine_prior_loop
    double prior_update_lambda = 1.0;   // 1 = replace, 0.5 = damped step
    double cycle_threshold = 1.0;       // Eq-membership gate, configurable for sensitivity runs
    PhotometricParams photometric;
    LossWeights weights;
    DomdOptions domd;

    DepthHypotheses hypotheses() const {
        return DepthHypotheses::inverse_linear(d_min, d_max, num_hypotheses);
    }
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct SolveResult {
    DepthMap depth;
    DepthMap updated_prior;                  // prior map after the loop; solve() returns it unchanged
    std::vector<LossReport> loss_per_iteration;
    std::vector<StageTiming> timings;
    int iterations_run = 0;
    bool diverged = false;
    DisentangledFrame ref_prev, ref_next;    // last disentangled references (for dumps)
    CostVolume cost_volume;                  // post-fill volume of the last iteration
};

/// One pass: prior -> DOMD -> cost volume -> fill -> depth -> losses.
SolveResult solve(const FrameTriplet& triplet, const DepthMap& prior, const SolverConfig& cfg);

/// Inference-time cycle iteration: re-solves while replacing the prior with the
/// prediction on cycle-inconsistent dynamic pixels; stops at N iterations, at
/// L_c = 0, or when the guard sees object-area Abs Rel rise 3 iterations running.
SolveResult refine_prior_loop(const FrameTriplet& triplet, const DepthMap& prior0,
                              const SolverConfig& cfg);

struct GradCheckEntry {
    int x = 0, y = 0;
    double analytic = 0.0, numeric = 0.0, rel_err = 0.0;
    bool skipped = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;  // over non-skipped entries
    std::size_t checked = 0, skipped = 0;
};

/// Compares the analytic derivative of the per-pixel L1 photometric term with
/// central finite differences of step eps_rel*depth, through the warp
/// resampling of frame t-1 into t. Degenerate pixels (zero texture gradient,
/// bilinear cell changes, sign flips of the residual) are skipped and counted.
GradCheckReport grad_check(const FrameTriplet& triplet, const DepthMap& depth,
                           const std::vector<std::pair<int, int>>& pixels, double eps_rel);

}  // namespace domdepth
