#pragma once

#include <optional>
#include <string>
#include <vector>

#include "domdepth/scenesim.hpp"
#include "domdepth/solver.hpp"

namespace domdepth::cli {

/// Reproducibility record of one command invocation. Timings are written to a
/// separate timings.txt because they are the only non-deterministic output.
struct RunManifest {
    std::string tool_version;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;  // file names relative to the out dir

    void add(const std::string& name) { outputs.push_back(name); }
    void write(const std::string& out_dir) const;
};

void write_timings(const std::string& out_dir, const std::vector<StageTiming>& timings);

/// Intrinsics + frame poses sidecar (plain text, %.17g round-trip).
void write_pose_sidecar(const std::string& path, const CameraIntrinsics& intr,
                        const RigidPose& pose_t_to_prev, const RigidPose& pose_t_to_next);
void read_pose_sidecar(const std::string& path, CameraIntrinsics* intr,
                       RigidPose* pose_t_to_prev, RigidPose* pose_t_to_next);

/// "exact", "noise:0.05" or "bias:0.3".
PriorSpec parse_prior_flag(const std::string& flag);

/// Renders a triplet from a config file, or loads a directory produced by
/// `render`. Returns the prior stored/derived alongside.
struct LoadedScene {
    FrameTriplet triplet;
    DepthMap prior;
    std::string canonical_config;  // hashed into the manifest
};

LoadedScene load_scene_from_config(const std::string& config_path,
                                   const std::optional<std::string>& prior_flag,
                                   std::optional<std::uint64_t> seed_flag);
LoadedScene load_scene_from_dir(const std::string& dir,
                                const std::optional<std::string>& prior_flag,
                                std::optional<std::uint64_t> seed_flag);

std::string version_string();

}  // namespace domdepth::cli
