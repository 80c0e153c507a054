#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "domdepth/image_io.hpp"
#include "domdepth/metrics.hpp"
#include "domdepth/solver.hpp"
#include "run_support.hpp"

namespace fs = std::filesystem;
using namespace domdepth;
using cli::LoadedScene;
using cli::RunManifest;

namespace {

std::string fmtv(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct SolveFlags {
    bool no_domd = false, no_fill = false, no_switching = false, no_masking = false,
         no_cycle = false, no_closing = false;
    int iters = 0;
    double d_min = 1.0, d_max = 40.0;
    int bins = 96;
    int fill_window = 8;
    double lambda = 1.0;
    double cycle_threshold = 1.0;
    double gamma = 0.85;

    SolverConfig to_config() const {
        SolverConfig cfg;
        cfg.toggles.use_domd = !no_domd;
        cfg.toggles.use_cv_fill = !no_fill;
        cfg.toggles.loss_switching = !no_switching;
        cfg.toggles.loss_masking = !no_masking;
        cfg.toggles.use_cycle = !no_cycle;
        cfg.domd.close_pinholes = !no_closing;
        cfg.refine_iterations = iters;
        cfg.d_min = d_min;
        cfg.d_max = d_max;
        cfg.num_hypotheses = bins;
        cfg.fill_window = fill_window;
        cfg.prior_update_lambda = lambda;
        cfg.cycle_threshold = cycle_threshold;
        cfg.photometric.gamma = gamma;
        return cfg;
    }

    std::string canonical() const {
        std::ostringstream out;
        out << "domd=" << !no_domd << " fill=" << !no_fill << " switching=" << !no_switching
            << " masking=" << !no_masking << " cycle=" << !no_cycle << " closing=" << !no_closing
            << " iters=" << iters << " d_min=" << fmtv(d_min) << " d_max=" << fmtv(d_max)
            << " bins=" << bins << " fill_window=" << fill_window << " lambda=" << fmtv(lambda)
            << " cycle_threshold=" << fmtv(cycle_threshold) << " gamma=" << fmtv(gamma) << "\n";
        return out.str();
    }
};

void add_solver_flags(CLI::App* cmd, SolveFlags* flags) {
    cmd->add_flag("--no-domd", flags->no_domd, "Disable dynamic object motion disentanglement");
    cmd->add_flag("--no-fill", flags->no_fill, "Disable cost-volume occlusion filling");
    cmd->add_flag("--no-switching", flags->no_switching, "Disable occlusion-aware source switching");
    cmd->add_flag("--no-masking", flags->no_masking, "Disable occlusion masking in the photometric error");
    cmd->add_flag("--no-cycle", flags->no_cycle, "Disable the cycle-consistency prior refinement");
    cmd->add_option("--iters", flags->iters, "Prior refinement iterations (0 = single pass)");
    cmd->add_option("--d-min", flags->d_min, "Nearest depth hypothesis, meters");
    cmd->add_option("--d-max", flags->d_max, "Farthest depth hypothesis, meters");
    cmd->add_option("--bins", flags->bins, "Number of depth hypotheses");
    cmd->add_option("--fill-window", flags->fill_window, "Occlusion filling window, bins");
    cmd->add_option("--lambda", flags->lambda, "Prior update step (1 = replace)");
    cmd->add_option("--cycle-threshold", flags->cycle_threshold,
                    "Relative gap that activates the cycle loss");
    cmd->add_option("--gamma", flags->gamma, "SSIM weight of the photometric error");
    cmd->add_flag("--no-closing", flags->no_closing, "Disable splat pinhole closing");
}

SolveResult run_pipeline(const FrameTriplet& triplet, const DepthMap& prior,
                         const SolverConfig& cfg) {
    if (cfg.refine_iterations >= 1 && cfg.toggles.use_cycle)
        return refine_prior_loop(triplet, prior, cfg);
    return solve(triplet, prior, cfg);
}

void write_metric_rows(std::ostream& out, const std::string& scene_id, const std::string& variant,
                       const DepthMap& depth, const FrameTriplet& triplet, double clip_max) {
    MetricOptions opts;
    opts.clip_max = clip_max;
    out << metrics_csv_row(scene_id, variant, "all", compute_metrics(depth, triplet.gt_t, nullptr, opts))
        << "\n";
    Mask dynamic = triplet.mask_t;
    Mask stat = ~dynamic;
    auto has_support = [&](const Mask& m) {
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (m.at(y, x) && depth.is_valid(y, x) && triplet.gt_t.is_valid(y, x)) return true;
        return false;
    };
    if (has_support(dynamic))
        out << metrics_csv_row(scene_id, variant, "dynamic",
                               compute_metrics(depth, triplet.gt_t, &dynamic, opts))
            << "\n";
    if (has_support(stat))
        out << metrics_csv_row(scene_id, variant, "static",
                               compute_metrics(depth, triplet.gt_t, &stat, opts))
            << "\n";
}

void write_loss_csv(const std::string& path, const std::vector<LossReport>& reports) {
    std::ofstream out(path);
    out << "iteration,l_c,l_or,l_s,l_total\n";
    for (size_t i = 0; i < reports.size(); ++i)
        out << i << "," << fmtv(reports[i].l_c) << "," << fmtv(reports[i].l_or) << ","
            << fmtv(reports[i].l_s) << "," << fmtv(reports[i].l_total) << "\n";
}

// ---------------------------------------------------------------------------

int cmd_render(const std::string& config_path, const std::string& out_dir,
               std::optional<std::uint64_t> seed, const std::optional<std::string>& prior_flag) {
    fs::create_directories(out_dir);
    LoadedScene scene = cli::load_scene_from_config(config_path, prior_flag, seed);
    const FrameTriplet& t = scene.triplet;

    RunManifest manifest;
    manifest.tool_version = cli::version_string();
    manifest.config_hash = fnv1a_hash(scene.canonical_config);
    manifest.seed = seed.value_or(0);

    auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
    write_ppm(path("image_prev.ppm"), t.image_prev);
    write_ppm(path("image_t.ppm"), t.image_t);
    write_ppm(path("image_next.ppm"), t.image_next);
    write_pfm(path("depth_prev.pfm"), t.gt_prev);
    write_pfm(path("depth_t.pfm"), t.gt_t);
    write_pfm(path("depth_next.pfm"), t.gt_next);
    write_pgm(path("mask_prev.pgm"), t.mask_prev);
    write_pgm(path("mask_t.pgm"), t.mask_t);
    write_pgm(path("mask_next.pgm"), t.mask_next);
    write_pfm(path("prior_t.pfm"), scene.prior);
    cli::write_pose_sidecar(path("poses.txt"), t.intr, t.pose_t_to_prev, t.pose_t_to_next);
    for (const char* name :
         {"image_prev.ppm", "image_t.ppm", "image_next.ppm", "depth_prev.pfm", "depth_t.pfm",
          "depth_next.pfm", "mask_prev.pgm", "mask_t.pgm", "mask_next.pgm", "prior_t.pfm",
          "poses.txt"})
        manifest.add(name);
    manifest.write(out_dir);
    return 0;
}

int cmd_solve(const std::optional<std::string>& config_path,
              const std::optional<std::string>& scene_dir, const std::string& out_dir,
              std::optional<std::uint64_t> seed, const std::optional<std::string>& prior_flag,
              const SolveFlags& flags, const std::string& scene_id, const std::string& variant,
              double clip_max, bool dump_domd, const std::vector<int>& dump_cv_bins,
              bool dump_loss_maps) {
    if (!config_path == !scene_dir)
        throw ValidationError("solve: exactly one of --config or --scene is required");
    fs::create_directories(out_dir);
    LoadedScene scene = config_path ? cli::load_scene_from_config(*config_path, prior_flag, seed)
                                    : cli::load_scene_from_dir(*scene_dir, prior_flag, seed);

    SolverConfig cfg = flags.to_config();
    SolveResult result = run_pipeline(scene.triplet, scene.prior, cfg);

    RunManifest manifest;
    manifest.tool_version = cli::version_string();
    manifest.config_hash = fnv1a_hash(scene.canonical_config + flags.canonical());
    manifest.seed = seed.value_or(0);
    auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    write_pfm(path("depth.pfm"), result.depth);
    manifest.add("depth.pfm");
    write_pfm(path("prior_updated.pfm"), result.updated_prior);
    manifest.add("prior_updated.pfm");
    write_loss_csv(path("loss.csv"), result.loss_per_iteration);
    manifest.add("loss.csv");

    std::string id = scene_id.empty()
                         ? fs::path(config_path ? *config_path : *scene_dir).stem().string()
                         : scene_id;
    std::ofstream metrics_out(path("metrics.csv"));
    metrics_out << metrics_csv_header() << "\n";
    write_metric_rows(metrics_out, id, variant, result.depth, scene.triplet, clip_max);
    manifest.add("metrics.csv");

    write_ppm(path("error_map.ppm"), error_map(result.depth, scene.triplet.gt_t));
    manifest.add("error_map.ppm");

    if (dump_domd) {
        write_ppm(path("domd_prev.ppm"), result.ref_prev.image);
        write_pgm(path("occlusion_prev.pgm"), result.ref_prev.masks.occluded);
        write_ppm(path("domd_next.ppm"), result.ref_next.image);
        write_pgm(path("occlusion_next.pgm"), result.ref_next.masks.occluded);
        for (const char* name :
             {"domd_prev.ppm", "occlusion_prev.pgm", "domd_next.ppm", "occlusion_next.pgm"})
            manifest.add(name);
    }
    for (int bin : dump_cv_bins) {
        if (bin < 0 || bin >= result.cost_volume.bins)
            throw ValidationError("--dump-cv-bin out of range");
        ImageBuffer slice(result.cost_volume.height, result.cost_volume.width, 1, 0.0);
        for (int y = 0; y < slice.height; ++y)
            for (int x = 0; x < slice.width; ++x)
                if (result.cost_volume.usable(bin, y, x))
                    slice.at(y, x, 0) = std::min(1.0, result.cost_volume.at(bin, y, x));
        char name[64];
        std::snprintf(name, sizeof(name), "cv_bin_%03d.ppm", bin);
        write_ppm(path(name), slice);
        manifest.add(name);
    }
    if (dump_loss_maps && !result.loss_per_iteration.empty()) {
        const LossReport& r = result.loss_per_iteration.back();
        auto clamp01 = [](ImageBuffer img) {
            for (auto& v : img.data) v = std::min(1.0, std::max(0.0, v));
            return img;
        };
        if (r.e_prev.height) write_ppm(path("loss_e_prev.ppm"), clamp01(r.e_prev));
        if (r.e_next.height) write_ppm(path("loss_e_next.ppm"), clamp01(r.e_next));
        if (r.e_or_map.height) write_ppm(path("loss_e_or.ppm"), clamp01(r.e_or_map));
        if (r.e_prev.height) manifest.add("loss_e_prev.ppm");
        if (r.e_next.height) manifest.add("loss_e_next.ppm");
        if (r.e_or_map.height) manifest.add("loss_e_or.ppm");
    }

    manifest.write(out_dir);
    cli::write_timings(out_dir, result.timings);
    std::cout << "solve: wrote " << out_dir << " (iterations " << result.iterations_run
              << (result.diverged ? ", diverged" : "") << ")\n";
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::optional<std::string>& mask_path, const std::string& out_dir,
             const std::string& scene_id, const std::string& variant, double clip_max,
             bool median_scale) {
    fs::create_directories(out_dir);
    DepthMap pred = read_pfm(pred_path);
    DepthMap gt = read_pfm(gt_path);
    MetricOptions opts;
    opts.clip_max = clip_max;
    opts.median_scale = median_scale;

    std::ofstream out(fs::path(out_dir) / "metrics.csv");
    out << metrics_csv_header() << "\n";
    out << metrics_csv_row(scene_id, variant, "all", compute_metrics(pred, gt, nullptr, opts))
        << "\n";
    if (mask_path) {
        Mask dynamic = read_pgm(*mask_path);
        Mask stat = ~dynamic;
        out << metrics_csv_row(scene_id, variant, "dynamic",
                               compute_metrics(pred, gt, &dynamic, opts))
            << "\n";
        out << metrics_csv_row(scene_id, variant, "static", compute_metrics(pred, gt, &stat, opts))
            << "\n";
    }
    write_ppm((fs::path(out_dir) / "error_map.ppm").string(), error_map(pred, gt));

    RunManifest manifest;
    manifest.tool_version = cli::version_string();
    manifest.config_hash = fnv1a_hash(pred_path + "\n" + gt_path);
    manifest.add("metrics.csv");
    manifest.add("error_map.ppm");
    manifest.write(out_dir);
    return 0;
}

struct Variant {
    std::string name;
    SolverToggles toggles;
    bool refine = false;
};

std::vector<Variant> ablation_ladder() {
    // Cumulative feature ladder mirroring the ablation-table groups.
    return {
        {"full", {true, true, true, true, true}, true},
        {"no-cycle", {true, true, true, true, false}, false},
        {"no-fill", {true, false, true, true, false}, false},
        {"no-switch-mask", {true, false, false, false, false}, false},
        {"no-domd", {false, false, false, false, false}, false},
    };
}

int cmd_ablate(const std::string& suite_path, const std::string& out_dir,
               std::optional<std::uint64_t> seed, const std::optional<std::string>& prior_flag,
               const SolveFlags& flags, const std::vector<std::string>& variant_names,
               double clip_max) {
    fs::create_directories(out_dir);
    std::ifstream suite(suite_path);
    if (!suite) throw ValidationError("cannot open suite file '" + suite_path + "'");
    std::vector<std::string> configs;
    std::string line;
    while (std::getline(suite, line)) {
        if (line.empty() || line[0] == '#') continue;
        fs::path p(line);
        if (p.is_relative()) p = fs::path(suite_path).parent_path() / p;
        configs.push_back(p.string());
    }
    if (configs.empty()) throw ValidationError("suite file lists no scenes");

    std::vector<Variant> ladder = ablation_ladder();
    if (!variant_names.empty()) {
        std::vector<Variant> chosen;
        for (const auto& name : variant_names) {
            bool found = false;
            for (const auto& v : ladder)
                if (v.name == name) {
                    chosen.push_back(v);
                    found = true;
                }
            if (!found) throw ValidationError("unknown variant '" + name + "'");
        }
        ladder = chosen;
    }

    std::string canonical;
    std::ofstream out(fs::path(out_dir) / "ablate.csv");
    out << metrics_csv_header() << "\n";
    for (const auto& config : configs) {
        LoadedScene scene = cli::load_scene_from_config(config, prior_flag, seed);
        canonical += scene.canonical_config;
        std::string id = fs::path(config).stem().string();
        for (const auto& variant : ladder) {
            SolverConfig cfg = flags.to_config();
            cfg.toggles = variant.toggles;
            cfg.refine_iterations = variant.refine ? std::max(1, flags.iters) : 0;
            SolveResult result = run_pipeline(scene.triplet, scene.prior, cfg);
            write_metric_rows(out, id, variant.name, result.depth, scene.triplet, clip_max);
        }
    }

    RunManifest manifest;
    manifest.tool_version = cli::version_string();
    manifest.config_hash = fnv1a_hash(canonical + flags.canonical());
    manifest.seed = seed.value_or(0);
    manifest.add("ablate.csv");
    manifest.write(out_dir);
    return 0;
}

int cmd_gradcheck(const std::string& config_path, const std::string& out_dir, int samples,
                  double eps, double threshold, std::optional<std::uint64_t> seed,
                  double depth_scale) {
    if (samples < 1) throw ValidationError("gradcheck: --samples must be positive");
    if (!(eps > 0)) throw ValidationError("gradcheck: --eps must be positive");
    fs::create_directories(out_dir);
    LoadedScene scene = cli::load_scene_from_config(config_path, std::nullopt, seed);
    const FrameTriplet& t = scene.triplet;

    // Evaluation point slightly off the truth so residuals are nonzero.
    DepthMap depth = t.gt_t;
    for (auto& d : depth.depth) d *= depth_scale;

    std::mt19937_64 rng(seed.value_or(17));
    std::uniform_int_distribution<int> px(4, t.intr.width - 5), py(4, t.intr.height - 5);
    std::vector<std::pair<int, int>> pixels;
    pixels.reserve(samples);
    for (int i = 0; i < samples; ++i) pixels.emplace_back(px(rng), py(rng));

    GradCheckReport report = grad_check(t, depth, pixels, eps);
    if (report.skipped > 0)
        std::cerr << "gradcheck: " << report.skipped << " of " << pixels.size()
                  << " samples were degenerate and skipped\n";

    std::ofstream csv(fs::path(out_dir) / "gradcheck.csv");
    csv << "x,y,analytic,numeric,rel_err,skipped\n";
    for (const auto& e : report.entries)
        csv << e.x << "," << e.y << "," << fmtv(e.analytic) << "," << fmtv(e.numeric) << ","
            << fmtv(e.rel_err) << "," << (e.skipped ? 1 : 0) << "\n";

    std::ofstream sweep(fs::path(out_dir) / "eps_sweep.csv");
    sweep << "eps,max_rel_err\n";
    for (double e : {eps, eps / 2, eps / 4}) {
        GradCheckReport r = grad_check(t, depth, pixels, e);
        sweep << fmtv(e) << "," << fmtv(r.max_rel_err) << "\n";
    }

    RunManifest manifest;
    manifest.tool_version = cli::version_string();
    manifest.config_hash = fnv1a_hash(scene.canonical_config);
    manifest.seed = seed.value_or(17);
    manifest.add("gradcheck.csv");
    manifest.add("eps_sweep.csv");
    manifest.write(out_dir);

    std::cout << "gradcheck: " << report.checked << " checked, " << report.skipped
              << " skipped, max rel err " << fmtv(report.max_rel_err) << "\n";
    if (report.checked > 0 && report.max_rel_err > threshold) {
        std::cerr << "gradcheck: max relative error exceeds " << threshold << "\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"domdepth: motion-disentangled multi-frame depth on synthetic scenes"};
    app.require_subcommand(1);
    app.fallthrough();  // --seed may follow the subcommand

    std::optional<std::uint64_t> seed;
    app.add_option("--seed", seed, "Seed for prior corruption and sampling")->capture_default_str();

    // render
    auto* render_cmd = app.add_subcommand("render", "Render a scene triplet to files");
    std::string render_config, render_out;
    std::optional<std::string> render_prior;
    render_cmd->add_option("--config", render_config, "Scene config file")->required();
    render_cmd->add_option("--out", render_out, "Output directory")->required();
    render_cmd->add_option("--prior", render_prior, "Prior mode: exact|noise:s|bias:b");

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "Run the depth pipeline on a scene");
    std::optional<std::string> solve_config, solve_scene, solve_prior;
    std::string solve_out, solve_id, solve_variant = "solve";
    SolveFlags solve_flags;
    double solve_clip = 80.0;
    bool dump_domd = false, dump_loss = false;
    std::vector<int> dump_cv_bins;
    solve_cmd->add_option("--config", solve_config, "Scene config file");
    solve_cmd->add_option("--scene", solve_scene, "Directory produced by render");
    solve_cmd->add_option("--out", solve_out, "Output directory")->required();
    solve_cmd->add_option("--prior", solve_prior, "Prior mode: exact|noise:s|bias:b");
    solve_cmd->add_option("--scene-id", solve_id, "Scene id for CSV rows");
    solve_cmd->add_option("--variant", solve_variant, "Variant label for CSV rows");
    solve_cmd->add_option("--clip-max", solve_clip, "Depth clip for metrics, meters");
    solve_cmd->add_flag("--dump-domd", dump_domd, "Write disentangled frames and occlusion masks");
    solve_cmd->add_option("--dump-cv-bin", dump_cv_bins, "Cost volume slices to dump");
    solve_cmd->add_flag("--dump-loss-maps", dump_loss, "Write per-pixel loss maps");
    add_solver_flags(solve_cmd, &solve_flags);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Compare a depth map against ground truth");
    std::string eval_pred, eval_gt, eval_out, eval_id = "scene", eval_variant = "eval";
    std::optional<std::string> eval_mask;
    double eval_clip = 80.0;
    bool eval_median = false;
    eval_cmd->add_option("--pred", eval_pred, "Predicted depth PFM")->required();
    eval_cmd->add_option("--gt", eval_gt, "Ground-truth depth PFM")->required();
    eval_cmd->add_option("--mask", eval_mask, "Dynamic-object mask PGM");
    eval_cmd->add_option("--out", eval_out, "Output directory")->required();
    eval_cmd->add_option("--scene-id", eval_id, "Scene id for CSV rows");
    eval_cmd->add_option("--variant", eval_variant, "Variant label for CSV rows");
    eval_cmd->add_option("--clip-max", eval_clip, "Depth clip, meters");
    eval_cmd->add_flag("--median-scale", eval_median, "Median-scale predictions before evaluation");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "Run the toggle ladder over a scene suite");
    std::string ablate_suite, ablate_out;
    std::optional<std::string> ablate_prior;
    SolveFlags ablate_flags;
    ablate_flags.iters = 3;
    std::vector<std::string> ablate_variants;
    double ablate_clip = 80.0;
    ablate_cmd->add_option("--suite", ablate_suite, "File listing scene configs")->required();
    ablate_cmd->add_option("--out", ablate_out, "Output directory")->required();
    ablate_cmd->add_option("--prior", ablate_prior, "Prior mode: exact|noise:s|bias:b");
    ablate_cmd->add_option("--variants", ablate_variants,
                           "Subset of full,no-cycle,no-fill,no-switch-mask,no-domd");
    ablate_cmd->add_option("--clip-max", ablate_clip, "Depth clip, meters");
    add_solver_flags(ablate_cmd, &ablate_flags);

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "Check loss gradients against finite differences");
    std::string grad_config, grad_out;
    int grad_samples = 400;
    double grad_eps = 1e-4, grad_threshold = 1e-3, grad_scale = 1.03;
    grad_cmd->add_option("--config", grad_config, "Scene config file")->required();
    grad_cmd->add_option("--out", grad_out, "Output directory")->required();
    grad_cmd->add_option("--samples", grad_samples, "Number of sampled pixels");
    grad_cmd->add_option("--eps", grad_eps, "Relative finite-difference step");
    grad_cmd->add_option("--threshold", grad_threshold, "Maximum tolerated relative error");
    grad_cmd->add_option("--depth-scale", grad_scale, "Evaluation depth = scale * ground truth");

    try {
        app.parse(argc, argv);
        if (*render_cmd) return cmd_render(render_config, render_out, seed, render_prior);
        if (*solve_cmd)
            return cmd_solve(solve_config, solve_scene, solve_out, seed, solve_prior, solve_flags,
                             solve_id, solve_variant, solve_clip, dump_domd, dump_cv_bins,
                             dump_loss);
        if (*eval_cmd)
            return cmd_eval(eval_pred, eval_gt, eval_mask, eval_out, eval_id, eval_variant,
                            eval_clip, eval_median);
        if (*ablate_cmd)
            return cmd_ablate(ablate_suite, ablate_out, seed, ablate_prior, ablate_flags,
                              ablate_variants, ablate_clip);
        if (*grad_cmd)
            return cmd_gradcheck(grad_config, grad_out, grad_samples, grad_eps, grad_threshold,
                                 seed, grad_scale);
        return 1;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
}
