#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>

#include "domdepth/costvol.hpp"
#include "domdepth/domd.hpp"
#include "domdepth/image_io.hpp"
#include "domdepth/losses.hpp"
#include "domdepth/metrics.hpp"
#include "domdepth/scenesim.hpp"
#include "domdepth/solver.hpp"

namespace py = pybind11;
using namespace domdepth;

namespace {

// Images cross the boundary as float64 (H, W, C) arrays, depth maps as
// (H, W) arrays with NaN marking invalid pixels, masks as (H, W) bool.

py::array_t<double> image_to_numpy(const ImageBuffer& img) {
    py::array_t<double> out({img.height, img.width, img.channels});
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
}

ImageBuffer image_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 3 && arr.ndim() != 2)
        throw ValidationError("image array must be (H, W) or (H, W, C)");
    int h = static_cast<int>(arr.shape(0));
    int w = static_cast<int>(arr.shape(1));
    int c = arr.ndim() == 3 ? static_cast<int>(arr.shape(2)) : 1;
    ImageBuffer img(h, w, c);
    std::copy(arr.data(), arr.data() + img.data.size(), img.data.begin());
    return img;
}

py::array_t<double> depth_to_numpy(const DepthMap& d) {
    py::array_t<double> out({d.height, d.width});
    double* ptr = out.mutable_data();
    for (size_t i = 0; i < d.depth.size(); ++i)
        ptr[i] = d.valid[i] ? d.depth[i] : std::numeric_limits<double>::quiet_NaN();
    return out;
}

DepthMap depth_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw ValidationError("depth array must be (H, W)");
    DepthMap d(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    const double* ptr = arr.data();
    for (size_t i = 0; i < d.depth.size(); ++i)
        if (std::isfinite(ptr[i]) && ptr[i] > 0.0) {
            d.depth[i] = ptr[i];
            d.valid[i] = 1;
        }
    return d;
}

py::array_t<bool> mask_to_numpy(const Mask& m) {
    py::array_t<bool> out({m.height, m.width});
    bool* ptr = out.mutable_data();
    for (size_t i = 0; i < m.data.size(); ++i) ptr[i] = m.data[i] != 0;
    return out;
}

Mask mask_from_numpy(const py::array_t<bool, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw ValidationError("mask array must be (H, W)");
    Mask m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    const bool* ptr = arr.data();
    for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = ptr[i] ? 1 : 0;
    return m;
}

py::array_t<double> pose_to_numpy(const RigidPose& pose) {
    py::array_t<double> out({3, 4});
    double* p = out.mutable_data();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) p[r * 4 + c] = pose.rotation.at(r, c);
        p[r * 4 + 3] = r == 0 ? pose.translation.x : (r == 1 ? pose.translation.y : pose.translation.z);
    }
    return out;
}

RigidPose pose_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2 || arr.shape(0) != 3 || arr.shape(1) != 4)
        throw ValidationError("pose array must be (3, 4) [R | t]");
    RigidPose pose;
    const double* p = arr.data();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) pose.rotation.at(r, c) = p[r * 4 + c];
    pose.translation = {p[3], p[7], p[11]};
    pose.validate();
    return pose;
}

PriorMode prior_mode_from_string(const std::string& mode) {
    if (mode == "exact") return PriorMode::Exact;
    if (mode == "noise") return PriorMode::MultiplicativeNoise;
    if (mode == "bias") return PriorMode::ConstantBias;
    throw ValidationError("prior mode must be exact, noise or bias");
}

SolverConfig config_from_kwargs(bool use_domd, bool use_cv_fill, bool loss_switching,
                                bool loss_masking, bool use_cycle, double d_min, double d_max,
                                int bins, int fill_window, int iterations, double lambda) {
    SolverConfig cfg;
    cfg.toggles = {use_domd, use_cv_fill, loss_switching, loss_masking, use_cycle};
    cfg.d_min = d_min;
    cfg.d_max = d_max;
    cfg.num_hypotheses = bins;
    cfg.fill_window = fill_window;
    cfg.refine_iterations = iterations;
    cfg.prior_update_lambda = lambda;
    return cfg;
}

py::dict loss_report_to_dict(const LossReport& r) {
    py::dict d;
    d["l_c"] = r.l_c;
    d["l_or"] = r.l_or;
    d["l_s"] = r.l_s;
    d["l_total"] = r.l_total;
    return d;
}

py::dict solve_result_to_dict(const SolveResult& res) {
    py::dict d;
    d["depth"] = depth_to_numpy(res.depth);
    d["updated_prior"] = depth_to_numpy(res.updated_prior);
    d["iterations"] = res.iterations_run;
    d["diverged"] = res.diverged;
    py::list losses;
    for (const auto& r : res.loss_per_iteration) losses.append(loss_report_to_dict(r));
    d["losses"] = losses;
    d["domd_prev"] = image_to_numpy(res.ref_prev.image);
    d["occluded_prev"] = mask_to_numpy(res.ref_prev.masks.occluded);
    d["domd_next"] = image_to_numpy(res.ref_next.image);
    d["occluded_next"] = mask_to_numpy(res.ref_next.masks.occluded);
    return d;
}

py::dict metrics_to_dict(const MetricReport& m) {
    py::dict d;
    d["abs_rel"] = m.abs_rel;
    d["sq_rel"] = m.sq_rel;
    d["rmse"] = m.rmse;
    d["rmse_log"] = m.rmse_log;
    d["delta1"] = m.delta1;
    d["delta2"] = m.delta2;
    d["delta3"] = m.delta3;
    d["n_pixels"] = m.n_pixels;
    return d;
}

}  // namespace

PYBIND11_MODULE(_domdepth, m) {
    m.doc() = "Motion-disentangled multi-frame depth: synthetic scenes, plane-sweep "
              "cost volumes, occlusion-aware losses and evaluation metrics";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

    py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
        .def(py::init([](double fx, double fy, double cx, double cy, int width, int height) {
                 CameraIntrinsics intr{fx, fy, cx, cy, width, height};
                 intr.validate();
                 return intr;
             }),
             py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"),
             py::arg("height"))
        .def_readonly("fx", &CameraIntrinsics::fx)
        .def_readonly("fy", &CameraIntrinsics::fy)
        .def_readonly("cx", &CameraIntrinsics::cx)
        .def_readonly("cy", &CameraIntrinsics::cy)
        .def_readonly("width", &CameraIntrinsics::width)
        .def_readonly("height", &CameraIntrinsics::height);

    py::class_<FrameTriplet>(m, "FrameTriplet")
        .def_property_readonly("image_prev", [](const FrameTriplet& t) { return image_to_numpy(t.image_prev); })
        .def_property_readonly("image_t", [](const FrameTriplet& t) { return image_to_numpy(t.image_t); })
        .def_property_readonly("image_next", [](const FrameTriplet& t) { return image_to_numpy(t.image_next); })
        .def_property_readonly("gt_prev", [](const FrameTriplet& t) { return depth_to_numpy(t.gt_prev); })
        .def_property_readonly("gt_t", [](const FrameTriplet& t) { return depth_to_numpy(t.gt_t); })
        .def_property_readonly("gt_next", [](const FrameTriplet& t) { return depth_to_numpy(t.gt_next); })
        .def_property_readonly("mask_prev", [](const FrameTriplet& t) { return mask_to_numpy(t.mask_prev); })
        .def_property_readonly("mask_t", [](const FrameTriplet& t) { return mask_to_numpy(t.mask_t); })
        .def_property_readonly("mask_next", [](const FrameTriplet& t) { return mask_to_numpy(t.mask_next); })
        .def_property_readonly("pose_t_to_prev", [](const FrameTriplet& t) { return pose_to_numpy(t.pose_t_to_prev); })
        .def_property_readonly("pose_t_to_next", [](const FrameTriplet& t) { return pose_to_numpy(t.pose_t_to_next); })
        .def_readonly("intrinsics", &FrameTriplet::intr);

    py::class_<DepthHypotheses>(m, "DepthHypotheses")
        .def_static("inverse_linear", &DepthHypotheses::inverse_linear, py::arg("d_min"),
                    py::arg("d_max"), py::arg("count"))
        .def_readonly("values", &DepthHypotheses::values)
        .def("nearest_bin", &DepthHypotheses::nearest_bin)
        .def("__len__", &DepthHypotheses::size);

    py::class_<CostVolume>(m, "CostVolume")
        .def_property_readonly("cost",
                               [](const CostVolume& cv) {
                                   py::array_t<double> out({cv.bins, cv.height, cv.width});
                                   std::copy(cv.cost.begin(), cv.cost.end(), out.mutable_data());
                                   return out;
                               })
        .def_property_readonly("state", [](const CostVolume& cv) {
            py::array_t<std::uint8_t> out({cv.bins, cv.height, cv.width});
            std::uint8_t* ptr = out.mutable_data();
            for (size_t i = 0; i < cv.state.size(); ++i)
                ptr[i] = static_cast<std::uint8_t>(cv.state[i]);
            return out;
        });

    py::class_<DisentangledFrame>(m, "DisentangledFrame")
        .def_property_readonly("image", [](const DisentangledFrame& d) { return image_to_numpy(d.image); })
        .def_property_readonly("occluded", [](const DisentangledFrame& d) { return mask_to_numpy(d.masks.occluded); })
        .def_property_readonly("visible", [](const DisentangledFrame& d) { return mask_to_numpy(d.masks.visible); })
        .def_property_readonly("repainted", [](const DisentangledFrame& d) { return mask_to_numpy(d.repainted); });

    m.def("parse_scene", &parse_scene_spec, py::arg("config_text"),
          "Parse a plain-text scene config; raises ValueError with a line number on errors");
    py::class_<SceneSpec>(m, "SceneSpec")
        .def("render", [](const SceneSpec& spec) { return render(spec); })
        .def("format", [](const SceneSpec& spec) { return format_scene_spec(spec); });
    m.def("render_scene",
          [](const std::string& config_text) { return render(parse_scene_spec(config_text)); },
          py::arg("config_text"), "Render a frame triplet from config text");

    m.def("make_prior",
          [](const py::array_t<double>& gt, const std::string& mode, double param,
             std::uint64_t seed) {
              return depth_to_numpy(make_prior(depth_from_numpy(gt), prior_mode_from_string(mode),
                                               param, seed));
          },
          py::arg("gt"), py::arg("mode") = "exact", py::arg("param") = 0.0, py::arg("seed") = 1);

    m.def("project",
          [](double x, double y, double z, const CameraIntrinsics& intr) {
              Projection p = project({x, y, z}, intr);
              return py::make_tuple(p.pixel.u, p.pixel.v, p.depth);
          },
          py::arg("x"), py::arg("y"), py::arg("z"), py::arg("intrinsics"));
    m.def("backproject",
          [](double u, double v, double depth, const CameraIntrinsics& intr) {
              Vec3 p = backproject({u, v}, depth, intr);
              return py::make_tuple(p.x, p.y, p.z);
          },
          py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("intrinsics"));

    m.def("warp_image",
          [](const py::array_t<double>& source, const py::array_t<double>& target_depth,
             const py::array_t<double>& pose, const CameraIntrinsics& intr,
             std::optional<py::array_t<bool>> source_invalid) {
              Mask invalid;
              const Mask* invalid_ptr = nullptr;
              if (source_invalid) {
                  invalid = mask_from_numpy(*source_invalid);
                  invalid_ptr = &invalid;
              }
              WarpResult res = warp_image(image_from_numpy(source), depth_from_numpy(target_depth),
                                          pose_from_numpy(pose), intr, invalid_ptr);
              return py::make_tuple(image_to_numpy(res.image), mask_to_numpy(res.valid));
          },
          py::arg("source"), py::arg("target_depth"), py::arg("pose_target_to_source"),
          py::arg("intrinsics"), py::arg("source_invalid") = py::none());

    m.def("disentangle",
          [](const py::array_t<double>& ref_image, const py::array_t<double>& t_image,
             const py::array_t<bool>& ref_mask, const py::array_t<bool>& t_mask,
             const py::array_t<double>& prior, const py::array_t<double>& pose,
             const CameraIntrinsics& intr, bool close_pinholes) {
              DomdOptions opts;
              opts.close_pinholes = close_pinholes;
              return disentangle(image_from_numpy(ref_image), image_from_numpy(t_image),
                                 mask_from_numpy(ref_mask), mask_from_numpy(t_mask),
                                 depth_from_numpy(prior), pose_from_numpy(pose), intr, opts);
          },
          py::arg("ref_image"), py::arg("t_image"), py::arg("ref_mask"), py::arg("t_mask"),
          py::arg("prior"), py::arg("pose_t_to_ref"), py::arg("intrinsics"),
          py::arg("close_pinholes") = true);

    m.def("build_cost_volume",
          [](const py::array_t<double>& f_t, const DisentangledFrame& ref,
             const py::array_t<double>& pose, const CameraIntrinsics& intr,
             const DepthHypotheses& hyp) {
              return build_cost_volume(image_from_numpy(f_t), ref, pose_from_numpy(pose), intr, hyp);
          },
          py::arg("frame_t"), py::arg("reference"), py::arg("pose_t_to_ref"), py::arg("intrinsics"),
          py::arg("hypotheses"));
    m.def("fill_occlusions", &fill_occlusions, py::arg("cost_volume"), py::arg("window") = 8);
    m.def("extract_depth",
          [](const CostVolume& cv, const DepthHypotheses& hyp) {
              return depth_to_numpy(extract_depth(cv, hyp));
          },
          py::arg("cost_volume"), py::arg("hypotheses"));

    m.def("photometric_error",
          [](const py::array_t<double>& a, const py::array_t<double>& b, double gamma) {
              PhotometricParams params;
              params.gamma = gamma;
              return image_to_numpy(
                  photometric_error(image_from_numpy(a), image_from_numpy(b), params));
          },
          py::arg("a"), py::arg("b"), py::arg("gamma") = 0.85);
    m.def("occlusion_aware_loss",
          [](const py::array_t<double>& e_prev, const py::array_t<double>& e_next,
             const py::array_t<bool>& occ_prev, const py::array_t<bool>& occ_next) {
              Mask op = mask_from_numpy(occ_prev), on = mask_from_numpy(occ_next);
              OcclusionAwareResult res =
                  occlusion_aware_loss(image_from_numpy(e_prev), image_from_numpy(e_next), op, ~op,
                                       on, ~on);
              return py::make_tuple(res.loss, image_to_numpy(res.e_or), res.empty_support);
          },
          py::arg("e_prev"), py::arg("e_next"), py::arg("occluded_prev"), py::arg("occluded_next"));
    m.def("min_reprojection_loss",
          [](const py::array_t<double>& a, const py::array_t<double>& b) {
              return min_reprojection_loss(image_from_numpy(a), image_from_numpy(b));
          });
    m.def("cycle_consistency",
          [](const py::array_t<double>& depth, const py::array_t<double>& prior,
             const py::array_t<bool>& mask, double threshold) {
              return cycle_consistency(depth_from_numpy(depth), depth_from_numpy(prior),
                                       mask_from_numpy(mask), threshold);
          },
          py::arg("depth"), py::arg("prior"), py::arg("mask"), py::arg("threshold") = 1.0);
    m.def("smoothness",
          [](const py::array_t<double>& depth, const py::array_t<double>& image) {
              return smoothness(depth_from_numpy(depth), image_from_numpy(image));
          });

    m.def("solve",
          [](const FrameTriplet& triplet, const py::array_t<double>& prior, bool use_domd,
             bool use_cv_fill, bool loss_switching, bool loss_masking, bool use_cycle,
             double d_min, double d_max, int bins, int fill_window, double lambda) {
              SolverConfig cfg = config_from_kwargs(use_domd, use_cv_fill, loss_switching,
                                                    loss_masking, use_cycle, d_min, d_max, bins,
                                                    fill_window, 0, lambda);
              return solve_result_to_dict(solve(triplet, depth_from_numpy(prior), cfg));
          },
          py::arg("triplet"), py::arg("prior"), py::arg("use_domd") = true,
          py::arg("use_cv_fill") = true, py::arg("loss_switching") = true,
          py::arg("loss_masking") = true, py::arg("use_cycle") = true, py::arg("d_min") = 1.0,
          py::arg("d_max") = 40.0, py::arg("bins") = 96, py::arg("fill_window") = 8,
          py::arg("prior_update_lambda") = 1.0);

    m.def("refine_prior_loop",
          [](const FrameTriplet& triplet, const py::array_t<double>& prior, int iterations,
             bool use_domd, bool use_cv_fill, bool loss_switching, bool loss_masking,
             double d_min, double d_max, int bins, int fill_window, double lambda) {
              SolverConfig cfg = config_from_kwargs(use_domd, use_cv_fill, loss_switching,
                                                    loss_masking, true, d_min, d_max, bins,
                                                    fill_window, iterations, lambda);
              return solve_result_to_dict(refine_prior_loop(triplet, depth_from_numpy(prior), cfg));
          },
          py::arg("triplet"), py::arg("prior"), py::arg("iterations") = 3,
          py::arg("use_domd") = true, py::arg("use_cv_fill") = true,
          py::arg("loss_switching") = true, py::arg("loss_masking") = true, py::arg("d_min") = 1.0,
          py::arg("d_max") = 40.0, py::arg("bins") = 96, py::arg("fill_window") = 8,
          py::arg("prior_update_lambda") = 1.0);

    m.def("grad_check",
          [](const FrameTriplet& triplet, const py::array_t<double>& depth,
             const std::vector<std::pair<int, int>>& pixels, double eps_rel) {
              GradCheckReport rep = grad_check(triplet, depth_from_numpy(depth), pixels, eps_rel);
              py::dict d;
              d["max_rel_err"] = rep.max_rel_err;
              d["checked"] = rep.checked;
              d["skipped"] = rep.skipped;
              return d;
          },
          py::arg("triplet"), py::arg("depth"), py::arg("pixels"), py::arg("eps_rel") = 1e-4);

    m.def("compute_metrics",
          [](const py::array_t<double>& pred, const py::array_t<double>& gt,
             std::optional<py::array_t<bool>> mask, double clip_max, bool median_scale) {
              Mask m_;
              const Mask* mp = nullptr;
              if (mask) {
                  m_ = mask_from_numpy(*mask);
                  mp = &m_;
              }
              MetricOptions opts;
              opts.clip_max = clip_max;
              opts.median_scale = median_scale;
              return metrics_to_dict(compute_metrics(depth_from_numpy(pred), depth_from_numpy(gt),
                                                     mp, opts));
          },
          py::arg("pred"), py::arg("gt"), py::arg("mask") = py::none(), py::arg("clip_max") = 80.0,
          py::arg("median_scale") = false);
    m.def("error_map",
          [](const py::array_t<double>& pred, const py::array_t<double>& gt) {
              return image_to_numpy(error_map(depth_from_numpy(pred), depth_from_numpy(gt)));
          });

    m.attr("__version__") = "0.1.0";
}
