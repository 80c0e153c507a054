#include "run_support.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "domdepth/image_io.hpp"

namespace domdepth::cli {

namespace fs = std::filesystem;

std::string version_string() { return "0.1.0"; }

void RunManifest::write(const std::string& out_dir) const {
    std::ofstream out(fs::path(out_dir) / "manifest.txt");
    if (!out) throw ValidationError("cannot write manifest in '" + out_dir + "'");
    out << "domdepth_version " << tool_version << "\n";
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(config_hash));
    out << "config_hash " << hex << "\n";
    out << "seed " << seed << "\n";
    std::vector<std::string> sorted = outputs;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& o : sorted) out << "output " << o << "\n";
}

void write_timings(const std::string& out_dir, const std::vector<StageTiming>& timings) {
    std::ofstream out(fs::path(out_dir) / "timings.txt");
    for (const auto& t : timings) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s %.6f\n", t.stage.c_str(), t.seconds);
        out << buf;
    }
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_pose_line(std::ostream& out, const std::string& name, const RigidPose& pose) {
    out << name;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out << " " << fmt(pose.rotation.at(r, c));
    out << " " << fmt(pose.translation.x) << " " << fmt(pose.translation.y) << " "
        << fmt(pose.translation.z) << "\n";
}

RigidPose parse_pose_line(std::istringstream& ss, const std::string& path) {
    RigidPose pose;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (!(ss >> pose.rotation.at(r, c)))
                throw ValidationError("'" + path + "': truncated pose line");
    if (!(ss >> pose.translation.x >> pose.translation.y >> pose.translation.z))
        throw ValidationError("'" + path + "': truncated pose line");
    return pose;
}

}  // namespace

void write_pose_sidecar(const std::string& path, const CameraIntrinsics& intr,
                        const RigidPose& pose_t_to_prev, const RigidPose& pose_t_to_next) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << "spec_version 1\n";
    out << "intrinsics " << fmt(intr.fx) << " " << fmt(intr.fy) << " " << fmt(intr.cx) << " "
        << fmt(intr.cy) << " " << intr.width << " " << intr.height << "\n";
    write_pose_line(out, "pose_t_to_prev", pose_t_to_prev);
    write_pose_line(out, "pose_t_to_next", pose_t_to_next);
}

void read_pose_sidecar(const std::string& path, CameraIntrinsics* intr,
                       RigidPose* pose_t_to_prev, RigidPose* pose_t_to_next) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::string line;
    bool saw_intr = false, saw_prev = false, saw_next = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        if (key == "spec_version") {
            int v = 0;
            ss >> v;
            if (v != 1) throw ValidationError("'" + path + "': unsupported spec_version");
        } else if (key == "intrinsics") {
            if (!(ss >> intr->fx >> intr->fy >> intr->cx >> intr->cy >> intr->width >>
                  intr->height))
                throw ValidationError("'" + path + "': malformed intrinsics");
            saw_intr = true;
        } else if (key == "pose_t_to_prev") {
            *pose_t_to_prev = parse_pose_line(ss, path);
            saw_prev = true;
        } else if (key == "pose_t_to_next") {
            *pose_t_to_next = parse_pose_line(ss, path);
            saw_next = true;
        } else {
            throw ValidationError("'" + path + "': unknown key '" + key + "'");
        }
    }
    if (!saw_intr || !saw_prev || !saw_next)
        throw ValidationError("'" + path + "': missing intrinsics or poses");
}

PriorSpec parse_prior_flag(const std::string& flag) {
    PriorSpec spec;
    if (flag == "exact") {
        spec.mode = "exact";
        return spec;
    }
    auto colon = flag.find(':');
    std::string kind = flag.substr(0, colon);
    if (colon == std::string::npos || (kind != "noise" && kind != "bias"))
        throw ValidationError("--prior expects exact, noise:<sigma> or bias:<beta>");
    double value = 0.0;
    try {
        value = std::stod(flag.substr(colon + 1));
    } catch (const std::exception&) {
        throw ValidationError("--prior: malformed parameter in '" + flag + "'");
    }
    spec.mode = kind;
    (kind == "noise" ? spec.sigma : spec.beta) = value;
    spec.validate();
    return spec;
}

namespace {

LoadedScene finish_load(SceneSpec spec, const std::optional<std::string>& prior_flag,
                        std::optional<std::uint64_t> seed_flag) {
    if (prior_flag) {
        PriorSpec override_spec = parse_prior_flag(*prior_flag);
        override_spec.seed = spec.prior.seed;
        spec.prior = override_spec;
    }
    if (seed_flag) spec.prior.seed = *seed_flag;
    LoadedScene out;
    out.canonical_config = format_scene_spec(spec);
    out.triplet = render(spec);
    out.prior = make_prior(out.triplet.gt_t, spec.prior);
    return out;
}

}  // namespace

LoadedScene load_scene_from_config(const std::string& config_path,
                                   const std::optional<std::string>& prior_flag,
                                   std::optional<std::uint64_t> seed_flag) {
    return finish_load(load_scene_spec(config_path), prior_flag, seed_flag);
}

LoadedScene load_scene_from_dir(const std::string& dir,
                                const std::optional<std::string>& prior_flag,
                                std::optional<std::uint64_t> seed_flag) {
    auto file = [&](const char* name) { return (fs::path(dir) / name).string(); };
    LoadedScene out;
    FrameTriplet& t = out.triplet;
    read_pose_sidecar(file("poses.txt"), &t.intr, &t.pose_t_to_prev, &t.pose_t_to_next);
    t.image_prev = read_ppm(file("image_prev.ppm"));
    t.image_t = read_ppm(file("image_t.ppm"));
    t.image_next = read_ppm(file("image_next.ppm"));
    t.gt_prev = read_pfm(file("depth_prev.pfm"));
    t.gt_t = read_pfm(file("depth_t.pfm"));
    t.gt_next = read_pfm(file("depth_next.pfm"));
    t.mask_prev = read_pgm(file("mask_prev.pgm"));
    t.mask_t = read_pgm(file("mask_t.pgm"));
    t.mask_next = read_pgm(file("mask_next.pgm"));
    if (t.image_t.height != t.intr.height || t.image_t.width != t.intr.width)
        throw ValidationError("scene dir: image size does not match the sidecar intrinsics");

    if (prior_flag) {
        PriorSpec spec = parse_prior_flag(*prior_flag);
        spec.seed = seed_flag.value_or(1);
        out.prior = make_prior(t.gt_t, spec);
    } else if (fs::exists(file("prior_t.pfm"))) {
        out.prior = read_pfm(file("prior_t.pfm"));
    } else {
        out.prior = t.gt_t;
    }

    // Canonicalized stand-in for the config: the sidecar plus file inventory.
    std::ostringstream canon;
    canon << "scene_dir\n";
    std::ifstream sidecar(file("poses.txt"));
    canon << sidecar.rdbuf();
    out.canonical_config = canon.str();
    return out;
}

}  // namespace domdepth::cli
