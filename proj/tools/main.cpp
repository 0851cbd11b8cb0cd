// Command-line surface for the refinement toolkit. Data goes to files,
// progress to stderr; exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dnr/flow.hpp"
#include "dnr/integration.hpp"
#include "dnr/io.hpp"
#include "dnr/metrics.hpp"
#include "dnr/pipeline.hpp"
#include "dnr/solver.hpp"
#include "dnr/synth.hpp"

namespace {

using namespace dnr;

std::string frame_name(const char* stem, int index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.%s", stem, index, ext);
    return buf;
}

Grid<double> read_gray_any(const std::string& path) {
    const std::string ext = std::filesystem::path(path).extension().string();
    if (ext == ".pfm") {
        const io::PfmImage img = io::pfm_read(path);
        if (img.channels != 1) throw std::runtime_error(path + ": expected 1-channel pfm for grayscale input");
        Grid<double> gray(img.width, img.height);
        for (int v = 0; v < img.height; ++v) {
            for (int u = 0; u < img.width; ++u) gray(u, v) = img.at(u, v, 0);
        }
        return gray;
    }
    const ColorImage rgb = io::png_rgb8_read(path);
    Grid<double> gray(rgb.width(), rgb.height());
    for (int v = 0; v < rgb.height(); ++v) {
        for (int u = 0; u < rgb.width(); ++u) {
            const Rgb& c = rgb(u, v);
            gray(u, v) = (0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]) / 255.0;
        }
    }
    return gray;
}

DepthMap read_depth_maybe_metric(const std::string& path, double near, double far) {
    if (near > 0.0 || far > 0.0) {
        DepthMap rel = io::read_depth_any(path, DepthUnit::relative);
        return relative_to_metric(rel, near, far);
    }
    if (std::filesystem::path(path).extension() == ".pfm") {
        return io::read_depth_any(path, DepthUnit::metric);
    }
    DepthMap rel = io::read_depth_any(path, DepthUnit::relative);
    return DepthMap{std::move(rel.values), std::move(rel.valid), DepthUnit::metric};
}

// Optional defaults file named by DNR_CONFIG; same non-frame keys as the
// manifest document.
struct EnvConfig {
    SolveConfig solver;
    Lambdas lambdas;
    double flow_threshold_px = 1.0;
};

EnvConfig load_env_config() {
    EnvConfig cfg;
    const char* path = std::getenv("DNR_CONFIG");
    if (!path || !*path) return cfg;

    std::ifstream in(path);
    if (!in) throw std::runtime_error(std::string("DNR_CONFIG: cannot open ") + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    for (const auto& item : doc.items()) {
        const std::string& key = item.key();
        if (key == "bilateral_k") cfg.solver.bilateral_k = item.value().get<double>();
        else if (key == "flow_threshold_px") cfg.flow_threshold_px = item.value().get<double>();
        else if (key == "irls") {
            if (item.value().contains("max_iters")) cfg.solver.irls_max_iters = item.value()["max_iters"].get<int>();
            if (item.value().contains("tol")) cfg.solver.irls_tol = item.value()["tol"].get<double>();
        } else if (key == "cg") {
            if (item.value().contains("max_iters")) cfg.solver.cg_max_iters = item.value()["max_iters"].get<int>();
            if (item.value().contains("tol")) cfg.solver.cg_tol = item.value()["tol"].get<double>();
        } else if (key == "lambdas") {
            if (item.value().is_string()) {
                const std::string name = item.value().get<std::string>();
                cfg.lambdas = (name == "rlbench") ? Lambdas::rlbench() : Lambdas::rt1();
            } else {
                cfg.lambdas.cd = item.value().at("cd").get<double>();
                cfg.lambdas.cb = item.value().at("cb").get<double>();
                cfg.lambdas.rd = item.value().at("rd").get<double>();
                cfg.lambdas.rb = item.value().at("rb").get<double>();
            }
        } else {
            throw std::runtime_error("DNR_CONFIG: unknown key \"" + key + "\"");
        }
    }
    return cfg;
}

constexpr double kSynthNear = 0.25;
constexpr double kSynthFar = 2.5;

void run_synth(const SceneSpec& spec, const std::string& out_dir, const std::string& lambdas_preset) {
    std::filesystem::create_directories(out_dir);
    const CameraIntrinsics K = default_intrinsics(spec.width, spec.height);
    const std::vector<SceneFrame> frames = generate(spec, K);

    SequenceManifest manifest;
    manifest.intrinsics = K;
    manifest.depth_range = std::make_pair(kSynthNear, kSynthFar);
    manifest.lambdas = (lambdas_preset == "rlbench") ? Lambdas::rlbench() : Lambdas::rt1();

    for (size_t i = 0; i < frames.size(); ++i) {
        const SceneFrame& f = frames[i];
        const int idx = static_cast<int>(i);

        io::png_rgb8_write(out_dir + "/" + frame_name("rgb", idx, "png"), f.rgb);

        // Generated depth goes out as a relative map plus the manifest range;
        // heavy jitter is clamped into the encodable range.
        DepthMap rel{Grid<double>(f.gen_depth.width(), f.gen_depth.height()), f.gen_depth.valid, DepthUnit::relative};
        for (size_t j = 0; j < rel.values.size(); ++j) {
            const double r = (f.gen_depth.values.data()[j] - kSynthNear) / (kSynthFar - kSynthNear);
            rel.values.data()[j] = std::clamp(r, 2.0 * kMinRelativeDepth, 1.0);
        }
        io::pfm_write(out_dir + "/" + frame_name("depth", idx, "pfm"), io::depth_to_pfm(rel));
        io::pfm_write(out_dir + "/" + frame_name("normal", idx, "pfm"), io::normal_to_pfm(f.gen_normal));
        io::pfm_write(out_dir + "/" + frame_name("gt_depth", idx, "pfm"), io::depth_to_pfm(f.gt_depth));
        io::pfm_write(out_dir + "/" + frame_name("gt_normal", idx, "pfm"), io::normal_to_pfm(f.gt_normal));

        FrameRef ref;
        ref.rgb = frame_name("rgb", idx, "png");
        ref.depth = frame_name("depth", idx, "pfm");
        ref.normal = frame_name("normal", idx, "pfm");
        if (f.gt_flow_to_prev) {
            ref.flow_to_prev = frame_name("flow", idx, "flo");
            io::flo_write(out_dir + "/" + ref.flow_to_prev, *f.gt_flow_to_prev);
        }
        manifest.frames.push_back(std::move(ref));
    }

    manifest.base_dir = out_dir;
    io::manifest_write(out_dir + "/manifest.json", manifest);
    io::intrinsics_write(out_dir + "/intrinsics.json", K);
    std::cerr << "synth: wrote " << frames.size() << " frame(s) to " << out_dir << "\n";
}

void run_reconstruct_one(const std::string& manifest_path, const std::string& out_dir, const PipelineOptions& options) {
    const SequenceManifest manifest = io::manifest_read(manifest_path);
    std::filesystem::create_directories(out_dir);

    const std::vector<RefinedFrame> refined = refine_sequence(manifest, options);

    nlohmann::json record;
    record["manifest"] = manifest_path;
    record["frames"] = nlohmann::json::array();
    for (size_t i = 0; i < refined.size(); ++i) {
        const RefinedFrame& f = refined[i];
        const int idx = static_cast<int>(i);
        const std::string depth_name = frame_name("refined", idx, "pfm");
        const std::string cloud_name = frame_name("cloud", idx, "ply");
        io::pfm_write(out_dir + "/" + depth_name, io::depth_to_pfm(f.refined_metric));
        io::ply_write(f.point_cloud, out_dir + "/" + cloud_name, io::PlyMode::binary_little_endian);

        nlohmann::json entry;
        entry["refined_depth"] = depth_name;
        entry["cloud"] = cloud_name;
        entry["points"] = f.point_cloud.points.size();
        entry["irls_iters"] = f.iters_used;
        entry["final_energy"] = f.energy_trace.empty() ? 0.0 : f.energy_trace.back();
        if (f.masks) {
            size_t stat = 0, dyn = 0, bg = 0;
            for (size_t j = 0; j < f.masks->static_m.size(); ++j) {
                stat += f.masks->static_m.data()[j] ? 1 : 0;
                dyn += f.masks->dynamic_m.data()[j] ? 1 : 0;
                bg += f.masks->background_m.data()[j] ? 1 : 0;
            }
            entry["static_px"] = stat;
            entry["dynamic_px"] = dyn;
            entry["background_px"] = bg;
        }
        record["frames"].push_back(entry);
    }

    std::ofstream rec(out_dir + "/record.json");
    rec << record.dump(2) << "\n";
    std::cerr << "reconstruct: " << refined.size() << " frame(s) -> " << out_dir << "\n";
}

int run_reconstruct(const std::vector<std::string>& manifests, const std::string& out_dir, int jobs,
                    const PipelineOptions& options) {
    if (manifests.size() == 1) {
        run_reconstruct_one(manifests[0], out_dir, options);
        return 0;
    }
    // Several manifests: each gets its own subdirectory, processed jobs at a
    // time. Directory names carry the manifest index so same-named sequence
    // folders cannot collide.
    std::vector<std::string> subdirs(manifests.size());
    for (size_t i = 0; i < manifests.size(); ++i) {
        const std::string stem = std::filesystem::path(manifests[i]).parent_path().filename().string();
        subdirs[i] = out_dir + "/seq_" + std::to_string(i) + (stem.empty() ? "" : "_" + stem);
    }

    std::mutex err_mutex;
    std::vector<std::string> errors;
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(manifests.size())));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (size_t i = next.fetch_add(1); i < manifests.size(); i = next.fetch_add(1)) {
                try {
                    run_reconstruct_one(manifests[i], subdirs[i], options);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    errors.push_back(manifests[i] + ": " + e.what());
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::string& e : errors) std::cerr << "error: " << e << "\n";
    return errors.empty() ? 0 : 2;
}

MaskGrid eval_mask(const DepthMap& pred, const DepthMap& gt) {
    MaskGrid mask(pred.width(), pred.height(), 0);
    for (int v = 0; v < pred.height(); ++v) {
        for (int u = 0; u < pred.width(); ++u) {
            if (pred.valid(u, v) && gt.valid(u, v) && gt.values(u, v) > 0.0) mask(u, v) = 1;
        }
    }
    return mask;
}

void emit_record(const io::KeyValueRecord& record, const std::string& record_path) {
    std::cout << record.to_text();
    if (!record_path.empty()) io::record_write(record_path, record);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatially and temporally consistent depth refinement from depth+normal video"};
    app.require_subcommand(1);

    int exit_code = 0;

    // synth ------------------------------------------------------------
    auto* synth_cmd = app.add_subcommand("synth", "generate an analytic test scene with a ready manifest");
    std::string synth_scene = "fronto_plane", synth_out = "synth_out", synth_lambdas = "rt1";
    int synth_w = 64, synth_h = 64, synth_frames = 1;
    double synth_noise = 0.0, synth_mx = 0.0, synth_my = 0.0;
    uint64_t synth_seed = 0;
    synth_cmd->add_option("--scene", synth_scene, "fronto_plane|slanted_plane|sphere|two_planes|moving_box");
    synth_cmd->add_option("--width", synth_w);
    synth_cmd->add_option("--height", synth_h);
    synth_cmd->add_option("--frames", synth_frames);
    synth_cmd->add_option("--noise", synth_noise, "relative depth jitter sigma");
    synth_cmd->add_option("--seed", synth_seed);
    synth_cmd->add_option("--motion-x", synth_mx, "box translation per frame, meters");
    synth_cmd->add_option("--motion-y", synth_my);
    synth_cmd->add_option("--lambdas", synth_lambdas, "rt1|bridge|rlbench preset for the manifest");
    synth_cmd->add_option("--out-dir", synth_out)->required();
    synth_cmd->callback([&]() {
        SceneSpec spec;
        spec.kind = scene_kind_from_string(synth_scene);
        spec.width = synth_w;
        spec.height = synth_h;
        spec.frames = synth_frames;
        spec.noise_sigma = synth_noise;
        spec.seed = synth_seed;
        spec.motion_per_frame = {synth_mx, synth_my, 0.0};
        run_synth(spec, synth_out, synth_lambdas);
    });

    // integrate ---------------------------------------------------------
    auto* integrate_cmd = app.add_subcommand("integrate", "refine a single frame from depth + normals");
    std::string int_depth, int_normal, int_intr, int_out, int_cloud;
    double int_near = 0.0, int_far = 0.0;
    integrate_cmd->add_option("--depth", int_depth)->required();
    integrate_cmd->add_option("--normal", int_normal)->required();
    integrate_cmd->add_option("--intrinsics", int_intr)->required();
    integrate_cmd->add_option("--near", int_near, "relative->metric near plane");
    integrate_cmd->add_option("--far", int_far, "relative->metric far plane");
    integrate_cmd->add_option("--out", int_out)->required();
    integrate_cmd->add_option("--out-cloud", int_cloud, "optional ply output");
    integrate_cmd->callback([&]() {
        const EnvConfig env = load_env_config();
        FrameInputs inputs;
        inputs.generated_depth = read_depth_maybe_metric(int_depth, int_near, int_far);
        inputs.normals = io::read_normal_any(int_normal);
        const CameraIntrinsics K = io::intrinsics_read(int_intr);
        const RefinedFrame refined = refine_frame(inputs, K, env.lambdas, env.flow_threshold_px, env.solver, nullptr);
        io::pfm_write(int_out, io::depth_to_pfm(refined.refined_metric));
        if (!int_cloud.empty()) io::ply_write(refined.point_cloud, int_cloud);
        std::cerr << "integrate: " << refined.iters_used << " iteration(s), final energy "
                  << (refined.energy_trace.empty() ? 0.0 : refined.energy_trace.back()) << "\n";
    });

    // reconstruct --------------------------------------------------------
    auto* rec_cmd = app.add_subcommand("reconstruct", "refine a sequence from a manifest");
    std::vector<std::string> rec_manifests;
    std::string rec_out;
    int rec_jobs = 1;
    bool rec_no_fallback = false;
    rec_cmd->add_option("--manifest", rec_manifests, "manifest path (repeat for several sequences)")->required();
    rec_cmd->add_option("--out-dir", rec_out)->required();
    rec_cmd->add_option("--jobs", rec_jobs, "concurrent manifests");
    rec_cmd->add_flag("--no-flow-fallback", rec_no_fallback, "fail instead of estimating missing flow");
    rec_cmd->callback([&]() {
        PipelineOptions options;
        options.allow_flow_fallback = !rec_no_fallback;
        exit_code = run_reconstruct(rec_manifests, rec_out, rec_jobs, options);
    });

    // flow ----------------------------------------------------------------
    auto* flow_cmd = app.add_subcommand("flow", "estimate flow between two frames (fallback estimator)");
    std::string flow_cur, flow_prev, flow_out;
    double flow_alpha = 15.0;
    int flow_iters = 100;
    flow_cmd->add_option("--current", flow_cur)->required();
    flow_cmd->add_option("--previous", flow_prev)->required();
    flow_cmd->add_option("--out", flow_out)->required();
    flow_cmd->add_option("--alpha", flow_alpha, "smoothness weight");
    flow_cmd->add_option("--iters", flow_iters, "Jacobi iterations");
    flow_cmd->callback([&]() {
        const FlowField f = horn_schunck(read_gray_any(flow_cur), read_gray_any(flow_prev), flow_alpha, flow_iters);
        io::flo_write(flow_out, f);
    });

    // masks -----------------------------------------------------------------
    auto* masks_cmd = app.add_subcommand("masks", "threshold a flow file into region masks");
    std::string masks_flow, masks_prev, masks_prefix;
    double masks_threshold = -1.0;
    masks_cmd->add_option("--flow", masks_flow)->required();
    masks_cmd->add_option("--threshold", masks_threshold, "pixels; defaults to the config value");
    masks_cmd->add_option("--static-prev", masks_prev, "previous static mask png (defaults to all static)");
    masks_cmd->add_option("--out-prefix", masks_prefix)->required();
    masks_cmd->callback([&]() {
        const EnvConfig env = load_env_config();
        const double c = masks_threshold >= 0.0 ? masks_threshold : env.flow_threshold_px;
        const FlowField f = io::flo_read(masks_flow);
        MaskGrid static_prev(f.width(), f.height(), 1);
        if (!masks_prev.empty()) {
            const MaskGrid png = io::png_gray8_read(masks_prev);
            if (!png.same_size(static_prev)) throw std::runtime_error("masks: static-prev size mismatch");
            for (size_t i = 0; i < png.size(); ++i) static_prev.data()[i] = png.data()[i] ? 1 : 0;
        }
        const RegionMasks m = region_masks(f, static_prev, c);
        auto to_png = [](const MaskGrid& g) {
            MaskGrid out(g.width(), g.height());
            for (size_t i = 0; i < g.size(); ++i) out.data()[i] = g.data()[i] ? 255 : 0;
            return out;
        };
        io::png_gray8_write(masks_prefix + "_static.png", to_png(m.static_m));
        io::png_gray8_write(masks_prefix + "_dynamic.png", to_png(m.dynamic_m));
        io::png_gray8_write(masks_prefix + "_background.png", to_png(m.background_m));
    });

    // eval --------------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "compare prediction against ground truth");
    eval_cmd->require_subcommand(1);
    std::string ev_pred, ev_gt, ev_record;
    bool ev_no_align = false;

    auto* eval_depth_cmd = eval_cmd->add_subcommand("depth", "AbsRel and threshold accuracies");
    eval_depth_cmd->add_option("--pred", ev_pred)->required();
    eval_depth_cmd->add_option("--gt", ev_gt)->required();
    eval_depth_cmd->add_flag("--no-align", ev_no_align, "skip least-squares scale/shift alignment");
    eval_depth_cmd->add_option("--record", ev_record, "also write a json record");
    eval_depth_cmd->callback([&]() {
        DepthMap pred = read_depth_maybe_metric(ev_pred, 0.0, 0.0);
        const DepthMap gt = read_depth_maybe_metric(ev_gt, 0.0, 0.0);
        const MaskGrid mask = eval_mask(pred, gt);
        if (!ev_no_align) pred = apply_scale_shift(pred, align_scale_shift(pred, gt, mask));
        const DepthMetrics m = depth_metrics(pred, gt, mask);
        io::KeyValueRecord record;
        record.add("absrel", m.absrel);
        record.add("delta1", m.delta1);
        record.add("delta2", m.delta2);
        emit_record(record, ev_record);
    });

    auto* eval_normal_cmd = eval_cmd->add_subcommand("normal", "angular error statistics");
    eval_normal_cmd->add_option("--pred", ev_pred)->required();
    eval_normal_cmd->add_option("--gt", ev_gt)->required();
    eval_normal_cmd->add_option("--record", ev_record);
    eval_normal_cmd->callback([&]() {
        const NormalMap pred = io::read_normal_any(ev_pred);
        const NormalMap gt = io::read_normal_any(ev_gt);
        MaskGrid mask(pred.width(), pred.height(), 0);
        for (size_t i = 0; i < mask.size(); ++i) {
            mask.data()[i] = (pred.valid.data()[i] && gt.valid.data()[i]) ? 1 : 0;
        }
        const NormalMetrics m = normal_metrics(pred, gt, mask);
        io::KeyValueRecord record;
        record.add("mean_deg", m.mean_deg);
        record.add("median_deg", m.median_deg);
        record.add("pct_11_25", m.pct_11_25);
        emit_record(record, ev_record);
    });

    auto* eval_chamfer_cmd = eval_cmd->add_subcommand("chamfer", "L1 chamfer distance between point clouds");
    eval_chamfer_cmd->add_option("--pred", ev_pred)->required();
    eval_chamfer_cmd->add_option("--gt", ev_gt)->required();
    eval_chamfer_cmd->add_option("--record", ev_record);
    eval_chamfer_cmd->callback([&]() {
        const PointCloud P = io::ply_read(ev_pred);
        const PointCloud Q = io::ply_read(ev_gt);
        io::KeyValueRecord record;
        record.add("chamfer_l1", chamfer_l1(P, Q));
        emit_record(record, ev_record);
    });

    // depth2normal -------------------------------------------------------------
    auto* d2n_cmd = app.add_subcommand("depth2normal", "normals from depth via the back-projected grid");
    std::string d2n_depth, d2n_intr, d2n_out;
    double d2n_near = 0.0, d2n_far = 0.0;
    d2n_cmd->add_option("--depth", d2n_depth)->required();
    d2n_cmd->add_option("--intrinsics", d2n_intr)->required();
    d2n_cmd->add_option("--near", d2n_near);
    d2n_cmd->add_option("--far", d2n_far);
    d2n_cmd->add_option("--out", d2n_out, "pfm or png by extension")->required();
    d2n_cmd->callback([&]() {
        const DepthMap depth = read_depth_maybe_metric(d2n_depth, d2n_near, d2n_far);
        const CameraIntrinsics K = io::intrinsics_read(d2n_intr);
        const NormalMap normals = depth_to_normal(depth, K);
        if (std::filesystem::path(d2n_out).extension() == ".png") {
            io::normal_png_write(d2n_out, normals);
        } else {
            io::pfm_write(d2n_out, io::normal_to_pfm(normals));
        }
    });

    // lift-track -----------------------------------------------------------------
    auto* lift_cmd = app.add_subcommand("lift-track", "back-project tracked pixels through refined depth");
    std::string lift_track_path, lift_refined_dir, lift_intr, lift_out;
    lift_cmd->add_option("--track", lift_track_path, "text file, one `frame u v` per line")->required();
    lift_cmd->add_option("--refined-dir", lift_refined_dir, "directory with refined_%04d.pfm")->required();
    lift_cmd->add_option("--intrinsics", lift_intr)->required();
    lift_cmd->add_option("--out", lift_out)->required();
    lift_cmd->callback([&]() {
        const CameraIntrinsics K = io::intrinsics_read(lift_intr);

        std::vector<TrackPoint> track;
        std::ifstream in(lift_track_path);
        if (!in) throw std::runtime_error("cannot open " + lift_track_path);
        std::string line;
        int max_frame = -1;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            TrackPoint tp;
            if (!(ls >> tp.frame >> tp.u >> tp.v)) throw std::runtime_error("bad track line: " + line);
            max_frame = std::max(max_frame, tp.frame);
            track.push_back(tp);
        }

        std::vector<RefinedFrame> refined(max_frame + 1);
        for (int i = 0; i <= max_frame; ++i) {
            const std::string path = lift_refined_dir + "/" + frame_name("refined", i, "pfm");
            refined[i].refined_metric = io::depth_from_pfm(io::pfm_read(path), DepthUnit::metric);
        }

        const std::vector<LiftedPoint> lifted = lift_track(track, refined, K);
        std::ofstream out(lift_out);
        for (size_t i = 0; i < lifted.size(); ++i) {
            out << track[i].frame << " " << track[i].u << " " << track[i].v;
            if (lifted[i].found) {
                char buf[96];
                std::snprintf(buf, sizeof(buf), " %.10g %.10g %.10g\n", lifted[i].position.x, lifted[i].position.y,
                              lifted[i].position.z);
                out << buf;
            } else {
                out << " missing\n";
            }
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}
