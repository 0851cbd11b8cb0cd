#include "dnr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dnr/integration.hpp"
#include "dnr/io.hpp"

namespace dnr {

void SequenceManifest::validate() const {
    intrinsics.validate();
    solver.validate();
    if (frames.empty()) throw std::invalid_argument("manifest: need at least one frame");
    if (!(flow_threshold_px >= 0.0)) throw std::invalid_argument("manifest: flow_threshold_px must be nonnegative");
    if (!(lambdas.cd >= 0.0 && lambdas.cb >= 0.0 && lambdas.rd >= 0.0 && lambdas.rb >= 0.0)) {
        throw std::invalid_argument("manifest: lambdas must be nonnegative");
    }
    if (depth_range && !(depth_range->first > 0.0 && depth_range->first < depth_range->second)) {
        throw std::invalid_argument("manifest: depth_range requires 0 < near < far");
    }
    for (size_t i = 1; i < frames.size(); ++i) {
        if (frames[i].flow_to_prev.empty() && (frames[i].rgb.empty() || frames[i - 1].rgb.empty())) {
            throw std::invalid_argument("manifest: frames[" + std::to_string(i) +
                                        "] has neither flow_to_prev nor rgb pairs for the flow fallback");
        }
    }
}

namespace {

Grid<double> luminance(const ColorImage& img) {
    Grid<double> gray(img.width(), img.height());
    for (int v = 0; v < img.height(); ++v) {
        for (int u = 0; u < img.width(); ++u) {
            const Rgb& c = img(u, v);
            gray(u, v) = (0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]) / 255.0;
        }
    }
    return gray;
}

std::string resolve(const std::string& base_dir, const std::string& rel) {
    if (rel.empty() || base_dir.empty() || rel.front() == '/') return rel;
    return base_dir + "/" + rel;
}

}  // namespace

RefinedFrame refine_frame(const FrameInputs& inputs, const CameraIntrinsics& K, const Lambdas& lambdas,
                          double flow_threshold_px, const SolveConfig& cfg, const RefinedFrame* prev) {
    K.validate();
    cfg.validate();
    const DepthMap& depth = inputs.generated_depth;
    if (depth.unit != DepthUnit::metric) throw std::invalid_argument("refine_frame: generated depth must be metric");
    if (!depth.values.same_size(K.width, K.height) || !inputs.normals.vectors.same_size(depth.values)) {
        throw std::invalid_argument("refine_frame: input size mismatch");
    }
    if (inputs.rgb && !inputs.rgb->same_size(depth.values)) throw std::invalid_argument("refine_frame: rgb size mismatch");
    if (inputs.flow_to_prev && !inputs.flow_to_prev->du.same_size(depth.values)) {
        throw std::invalid_argument("refine_frame: flow size mismatch");
    }

    // Unknowns live where both the depth and the normal are usable.
    NormalMap masked = inputs.normals;
    for (size_t i = 0; i < masked.valid.size(); ++i) {
        if (!depth.valid.data()[i]) masked.valid.data()[i] = 0;
    }

    const SparseConstraintSystem sys = assemble_system(masked, K);
    std::vector<double> init_log(sys.num_unknowns);
    for (int i = 0; i < sys.num_unknowns; ++i) {
        const Pixel p = sys.unknown_pixel[i];
        init_log[i] = std::log(depth.values(p.u, p.v));
    }

    DiagonalQuadratic q = DiagonalQuadratic::inactive(sys.num_unknowns);
    std::optional<RegionMasks> masks;
    if (prev == nullptr) {
        // First frame: anchor every unknown to the generated depth.
        if (lambdas.rb > 0.0) {
            for (int i = 0; i < sys.num_unknowns; ++i) {
                q.lambda_diag[i] = lambdas.rb;
                q.target[i] = init_log[i];
                q.active[i] = 1;
            }
        }
    } else {
        if (!inputs.flow_to_prev) throw std::invalid_argument("refine_frame: missing flow for a frame with a predecessor");
        // A frame-0 predecessor carries no masks; everything there counts as static.
        const MaskGrid all_static(K.width, K.height, 1);
        const MaskGrid& static_prev = prev->masks ? prev->masks->static_m : all_static;
        masks = region_masks(*inputs.flow_to_prev, static_prev, flow_threshold_px);
        const WarpResult warp = warp_previous_depth(prev->refined_metric, *inputs.flow_to_prev);
        q = temporal_terms(*masks, warp, depth, lambdas, sys.pixel_index, sys.num_unknowns);
    }

    const RefineResult rr = irls_refine(sys, q, init_log, cfg);

    RefinedFrame out;
    out.refined_log = DepthMap{Grid<double>(K.width, K.height), MaskGrid(K.width, K.height, 0), DepthUnit::log};
    out.refined_metric = DepthMap{Grid<double>(K.width, K.height), MaskGrid(K.width, K.height, 0), DepthUnit::metric};
    for (int i = 0; i < sys.num_unknowns; ++i) {
        const Pixel p = sys.unknown_pixel[i];
        out.refined_log.values(p.u, p.v) = rr.d_log[i];
        out.refined_log.valid(p.u, p.v) = 1;
        out.refined_metric.values(p.u, p.v) = std::exp(rr.d_log[i]);
        out.refined_metric.valid(p.u, p.v) = 1;
    }
    out.masks = std::move(masks);
    out.energy_trace = rr.energy_trace;
    out.iters_used = rr.iters_used;
    out.point_cloud = backproject(out.refined_metric, K, inputs.rgb ? &*inputs.rgb : nullptr);
    return out;
}

std::vector<RefinedFrame> refine_sequence(const SequenceManifest& manifest, const PipelineOptions& options) {
    manifest.validate();

    std::vector<RefinedFrame> refined;
    refined.reserve(manifest.frames.size());
    std::optional<Grid<double>> prev_gray;

    for (size_t i = 0; i < manifest.frames.size(); ++i) {
        try {
            const FrameRef& ref = manifest.frames[i];

            FrameInputs inputs;
            DepthMap raw = io::read_depth_any(resolve(manifest.base_dir, ref.depth), DepthUnit::relative);
            if (manifest.depth_range) {
                inputs.generated_depth = relative_to_metric(raw, manifest.depth_range->first, manifest.depth_range->second);
            } else {
                // No range: treat the relative values as scene units directly.
                inputs.generated_depth = DepthMap{std::move(raw.values), std::move(raw.valid), DepthUnit::metric};
            }
            inputs.normals = io::read_normal_any(resolve(manifest.base_dir, ref.normal));
            if (!ref.rgb.empty()) inputs.rgb = io::png_rgb8_read(resolve(manifest.base_dir, ref.rgb));

            std::optional<Grid<double>> gray;
            if (inputs.rgb) gray = luminance(*inputs.rgb);

            if (i > 0) {
                if (!ref.flow_to_prev.empty()) {
                    inputs.flow_to_prev = io::flo_read(resolve(manifest.base_dir, ref.flow_to_prev));
                } else if (options.allow_flow_fallback && gray && prev_gray) {
                    inputs.flow_to_prev = horn_schunck(*gray, *prev_gray, options.fallback_alpha, options.fallback_iters);
                } else {
                    throw std::runtime_error("no flow available and fallback disabled");
                }
            }

            const RefinedFrame* prev = refined.empty() ? nullptr : &refined.back();
            refined.push_back(refine_frame(inputs, manifest.intrinsics, manifest.lambdas, manifest.flow_threshold_px,
                                           manifest.solver, prev));
            prev_gray = std::move(gray);
        } catch (const std::exception& e) {
            throw std::runtime_error("frame " + std::to_string(i) + ": " + e.what());
        }
    }
    return refined;
}

std::vector<LiftedPoint> lift_track(const std::vector<TrackPoint>& track, const std::vector<RefinedFrame>& refined,
                                    const CameraIntrinsics& K) {
    K.validate();

    // Offsets within Euclidean radius 2, nearest first.
    struct Offset {
        int du, dv;
    };
    std::vector<Offset> offsets;
    for (int dv = -2; dv <= 2; ++dv) {
        for (int du = -2; du <= 2; ++du) {
            if (du * du + dv * dv <= 4) offsets.push_back({du, dv});
        }
    }
    std::stable_sort(offsets.begin(), offsets.end(),
                     [](const Offset& a, const Offset& b) { return a.du * a.du + a.dv * a.dv < b.du * b.du + b.dv * b.dv; });

    std::vector<LiftedPoint> out;
    out.reserve(track.size());
    for (const TrackPoint& tp : track) {
        if (tp.frame < 0 || tp.frame >= static_cast<int>(refined.size())) {
            throw std::invalid_argument("lift_track: frame index out of range");
        }
        const DepthMap& depth = refined[tp.frame].refined_metric;
        if (!depth.values.inside(tp.u, tp.v)) throw std::invalid_argument("lift_track: pixel outside frame");

        LiftedPoint lp;
        for (const Offset& o : offsets) {
            const int u = tp.u + o.du;
            const int v = tp.v + o.dv;
            if (!depth.values.inside(u, v) || !depth.valid(u, v)) continue;
            const double z = depth.values(u, v);
            lp.position = {z * (tp.u - K.cx) / K.fx, z * (tp.v - K.cy) / K.fy, z};
            lp.found = true;
            break;
        }
        out.push_back(lp);
    }
    return out;
}

}  // namespace dnr
