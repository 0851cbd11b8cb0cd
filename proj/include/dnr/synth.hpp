#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnr/flow.hpp"
#include "dnr/geometry.hpp"

namespace dnr {

enum class SceneKind { fronto_plane, slanted_plane, sphere, two_planes, moving_box };

SceneKind scene_kind_from_string(const std::string& name);
std::string to_string(SceneKind kind);

/// Analytic scene script. Depth, normals, and flow are exact by construction;
/// the jittered copies stand in for imperfect upstream predictions.
struct SceneSpec {
    SceneKind kind = SceneKind::fronto_plane;
    int width = 64;
    int height = 64;
    int frames = 1;
    Vec3 motion_per_frame{0.0, 0.0, 0.0};  // moving_box: camera-frame meters per frame, z must be 0
    double noise_sigma = 0.0;              // relative depth jitter, also normal jitter in radians
    uint64_t seed = 0;

    void validate() const;
};

struct SceneFrame {
    ColorImage rgb;
    DepthMap gt_depth;  // metric
    NormalMap gt_normal;
    std::optional<FlowField> gt_flow_to_prev;  // frames >= 1
    DepthMap gen_depth;    // jittered copy of gt_depth
    NormalMap gen_normal;  // jittered copy of gt_normal
    MaskGrid region;       // 0 = background surface, 1 = foreground object
};

/// Centered intrinsics with fx = fy = max(width, height), matching the
/// narrow-FOV setups the analytic scenes are written for.
CameraIntrinsics default_intrinsics(int width, int height);

std::vector<SceneFrame> generate(const SceneSpec& spec, const CameraIntrinsics& K);

}  // namespace dnr
