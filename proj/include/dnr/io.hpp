#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dnr/flow.hpp"
#include "dnr/geometry.hpp"
#include "dnr/pipeline.hpp"

namespace dnr::io {

/// 1- or 3-channel float image as stored in a PFM file, top-down row order in
/// memory (the file itself is bottom-up).
struct PfmImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<float> data;  // row-major, interleaved channels

    float& at(int u, int v, int c) { return data[(static_cast<size_t>(v) * width + u) * channels + c]; }
    float at(int u, int v, int c) const { return data[(static_cast<size_t>(v) * width + u) * channels + c]; }
};

PfmImage pfm_read(const std::string& path);
void pfm_write(const std::string& path, const PfmImage& img);

// Middlebury .flo; pixels with components at or beyond 1e9 are carried as
// unknown (invalid) flow.
FlowField flo_read(const std::string& path);
void flo_write(const std::string& path, const FlowField& flow);

/// 16-bit grayscale PNG, value = round(65535 * relative_depth), 0 reserved
/// for invalid pixels.
DepthMap depth_png16_read(const std::string& path);
void depth_png16_write(const std::string& path, const DepthMap& depth);

/// 8-bit RGB PNG, channel = round(255 * (n + 1) / 2); (0,0,0) marks invalid.
/// Decoded vectors are renormalized to unit length.
NormalMap normal_png_read(const std::string& path);
void normal_png_write(const std::string& path, const NormalMap& normals);

ColorImage png_rgb8_read(const std::string& path);
void png_rgb8_write(const std::string& path, const ColorImage& img);

MaskGrid png_gray8_read(const std::string& path);
void png_gray8_write(const std::string& path, const MaskGrid& mask);

enum class PlyMode { ascii, binary_little_endian };
void ply_write(const PointCloud& pc, const std::string& path, PlyMode mode = PlyMode::binary_little_endian);
PointCloud ply_read(const std::string& path);

/// Parse and validate the sequence manifest document; unknown keys are
/// rejected, defaults filled, file references checked for existence.
SequenceManifest manifest_read(const std::string& path);
void manifest_write(const std::string& path, const SequenceManifest& manifest);

/// Standalone intrinsics document with the same keys as the manifest block.
CameraIntrinsics intrinsics_read(const std::string& path);
void intrinsics_write(const std::string& path, const CameraIntrinsics& K);

// Depth/normal helpers over the float carriers.
DepthMap depth_from_pfm(const PfmImage& img, DepthUnit unit);
PfmImage depth_to_pfm(const DepthMap& depth);
NormalMap normal_from_pfm(const PfmImage& img);
PfmImage normal_to_pfm(const NormalMap& normals);

/// Reads a depth/normal file by extension (.pfm or .png).
DepthMap read_depth_any(const std::string& path, DepthUnit unit);
NormalMap read_normal_any(const std::string& path);

/// Flat `key value` report, keys in insertion order, plus a JSON record with
/// the same keys; the machine-readable side of the metrics output.
struct KeyValueRecord {
    std::vector<std::pair<std::string, double>> entries;

    void add(const std::string& key, double value) { entries.emplace_back(key, value); }
    std::string to_text() const;
    std::string to_json() const;
};
void record_write(const std::string& path, const KeyValueRecord& record);

}  // namespace dnr::io
