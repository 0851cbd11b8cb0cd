#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dnr/flow.hpp"
#include "dnr/geometry.hpp"
#include "dnr/solver.hpp"
#include "dnr/temporal.hpp"

namespace dnr {

/// Per-frame file references; paths are resolved against the manifest
/// directory. flow_to_prev is empty for frame 0 and optional afterwards when
/// the fallback estimator is allowed.
struct FrameRef {
    std::string rgb;
    std::string depth;
    std::string normal;
    std::string flow_to_prev;
};

struct SequenceManifest {
    CameraIntrinsics intrinsics;
    std::optional<std::pair<double, double>> depth_range;  // near, far
    double flow_threshold_px = 1.0;
    Lambdas lambdas;
    SolveConfig solver;
    std::vector<FrameRef> frames;
    std::string base_dir;

    void validate() const;
};

/// In-memory inputs for one frame. generated_depth must be metric (use
/// relative_to_metric or reinterpretation upstream).
struct FrameInputs {
    DepthMap generated_depth;
    NormalMap normals;
    std::optional<ColorImage> rgb;
    std::optional<FlowField> flow_to_prev;
};

struct RefinedFrame {
    DepthMap refined_log;     // log view over the refined pixels
    DepthMap refined_metric;  // exp of the log view
    std::optional<RegionMasks> masks;  // frames >= 1
    std::vector<double> energy_trace;
    int iters_used = 0;
    PointCloud point_cloud;
};

struct PipelineOptions {
    bool allow_flow_fallback = true;
    double fallback_alpha = 15.0;
    int fallback_iters = 100;
};

/// One step of the sequential refinement: frame 0 anchors to the generated
/// depth everywhere (lambda rb); later frames gate the temporal terms by the
/// flow-derived masks and warp the previous refined depth. prev is null for
/// frame 0.
RefinedFrame refine_frame(const FrameInputs& inputs, const CameraIntrinsics& K, const Lambdas& lambdas,
                          double flow_threshold_px, const SolveConfig& cfg, const RefinedFrame* prev);

/// Sequential fold of refine_frame over the manifest, reading inputs from
/// disk and emitting per-frame point clouds. Errors carry the frame index.
std::vector<RefinedFrame> refine_sequence(const SequenceManifest& manifest, const PipelineOptions& options = {});

struct TrackPoint {
    int frame = 0;
    int u = 0;
    int v = 0;
};

struct LiftedPoint {
    Vec3 position;
    bool found = false;
};

/// Back-project tracked pixels using the refined metric depth; when the exact
/// pixel is invalid the nearest valid pixel within radius 2 supplies the
/// depth. Unresolvable points are flagged, not fatal.
std::vector<LiftedPoint> lift_track(const std::vector<TrackPoint>& track, const std::vector<RefinedFrame>& refined,
                                    const CameraIntrinsics& K);

}  // namespace dnr
