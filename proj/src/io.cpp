#include "dnr/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dnr::io {

namespace {

using nlohmann::json;

constexpr float kFloMagic = 202021.25f;
constexpr double kUnknownFlow = 1e10;
constexpr double kUnknownFlowThreshold = 1e9;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot open " + path + " for writing");
    return out;
}

uint32_t byteswap32(uint32_t x) {
    return ((x & 0xffu) << 24) | ((x & 0xff00u) << 8) | ((x >> 8) & 0xff00u) | (x >> 24);
}

}  // namespace

// ---------------------------------------------------------------------------
// PFM

PfmImage pfm_read(const std::string& path) {
    std::ifstream in = open_input(path);

    auto read_token = [&]() {
        std::string tok;
        char c;
        while (in.get(c) && std::isspace(static_cast<unsigned char>(c))) {
        }
        if (!in) fail(path + ": pfm: truncated header at byte " + std::to_string(in.tellg() == -1 ? 0 : long(in.tellg())));
        tok.push_back(c);
        while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) tok.push_back(c);
        return tok;
    };

    const std::string magic = read_token();
    if (magic != "Pf" && magic != "PF") fail(path + ": pfm: bad magic at byte 0");
    PfmImage img;
    img.channels = (magic == "PF") ? 3 : 1;

    try {
        img.width = std::stoi(read_token());
        img.height = std::stoi(read_token());
    } catch (const std::exception&) {
        fail(path + ": pfm: bad dimensions");
    }
    if (img.width <= 0 || img.height <= 0) fail(path + ": pfm: nonpositive dimensions");

    double scale = 0.0;
    try {
        scale = std::stod(read_token());
    } catch (const std::exception&) {
        fail(path + ": pfm: bad scale");
    }
    if (scale == 0.0) fail(path + ": pfm: zero scale");
    const bool file_little_endian = scale < 0.0;

    const std::streamoff payload_start = in.tellg();
    const size_t count = static_cast<size_t>(img.width) * img.height * img.channels;
    std::vector<float> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != count * sizeof(float)) {
        fail(path + ": pfm: truncated payload at byte " + std::to_string(payload_start + in.gcount()));
    }

    if (file_little_endian != (std::endian::native == std::endian::little)) {
        for (float& f : raw) {
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            bits = byteswap32(bits);
            std::memcpy(&f, &bits, 4);
        }
    }

    // File rows run bottom-to-top.
    img.data.resize(count);
    const size_t row_elems = static_cast<size_t>(img.width) * img.channels;
    for (int v = 0; v < img.height; ++v) {
        const size_t src_row = static_cast<size_t>(img.height - 1 - v);
        std::memcpy(&img.data[v * row_elems], &raw[src_row * row_elems], row_elems * sizeof(float));
    }
    return img;
}

void pfm_write(const std::string& path, const PfmImage& img) {
    if (img.channels != 1 && img.channels != 3) fail("pfm_write: channels must be 1 or 3");
    if (img.width <= 0 || img.height <= 0) fail("pfm_write: empty image");
    const size_t expected = static_cast<size_t>(img.width) * img.height * img.channels;
    if (img.data.size() != expected) fail("pfm_write: data size mismatch");

    std::ofstream out = open_output(path);
    const double scale = (std::endian::native == std::endian::little) ? -1.0 : 1.0;
    out << (img.channels == 3 ? "PF" : "Pf") << "\n" << img.width << " " << img.height << "\n" << scale << "\n";

    const size_t row_elems = static_cast<size_t>(img.width) * img.channels;
    for (int v = img.height - 1; v >= 0; --v) {
        out.write(reinterpret_cast<const char*>(&img.data[v * row_elems]),
                  static_cast<std::streamsize>(row_elems * sizeof(float)));
    }
    if (!out) fail("pfm_write: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Middlebury .flo

FlowField flo_read(const std::string& path) {
    std::ifstream in = open_input(path);
    float magic = 0.0f;
    int32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    if (!in || magic != kFloMagic) fail(path + ": flo: bad magic");
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || w <= 0 || h <= 0) fail(path + ": flo: bad dimensions");

    FlowField f{Grid<double>(w, h), Grid<double>(w, h), MaskGrid(w, h, 1)};
    std::vector<float> row(static_cast<size_t>(w) * 2);
    for (int v = 0; v < h; ++v) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (static_cast<size_t>(in.gcount()) != row.size() * sizeof(float)) fail(path + ": flo: truncated payload");
        for (int u = 0; u < w; ++u) {
            const double du = row[2 * u];
            const double dv = row[2 * u + 1];
            f.du(u, v) = du;
            f.dv(u, v) = dv;
            if (!(std::abs(du) < kUnknownFlowThreshold) || !(std::abs(dv) < kUnknownFlowThreshold)) f.valid(u, v) = 0;
        }
    }
    return f;
}

void flo_write(const std::string& path, const FlowField& flow) {
    std::ofstream out = open_output(path);
    const float magic = kFloMagic;
    const int32_t w = flow.width();
    const int32_t h = flow.height();
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    std::vector<float> row(static_cast<size_t>(w) * 2);
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            if (flow.valid(u, v)) {
                row[2 * u] = static_cast<float>(flow.du(u, v));
                row[2 * u + 1] = static_cast<float>(flow.dv(u, v));
            } else {
                row[2 * u] = static_cast<float>(kUnknownFlow);
                row[2 * u + 1] = static_cast<float>(kUnknownFlow);
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) fail("flo_write: write failed for " + path);
}

// ---------------------------------------------------------------------------
// PNG (libpng)

namespace {

struct PngRaw {
    int width = 0;
    int height = 0;
    int bit_depth = 0;
    int color_type = 0;
    size_t stride = 0;
    std::vector<uint8_t> bytes;  // height * stride
};

PngRaw png_read_raw(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) fail("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail("png: allocation failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail(path + ": png: decode error");
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    PngRaw raw;
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.bit_depth = png_get_bit_depth(png, info);
    raw.color_type = png_get_color_type(png, info);

    if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
    png_read_update_info(png, info);
    raw.stride = png_get_rowbytes(png, info);
    raw.bytes.resize(raw.stride * raw.height);

    std::vector<png_bytep> rows(raw.height);
    for (int v = 0; v < raw.height; ++v) rows[v] = raw.bytes.data() + v * raw.stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return raw;
}

void png_write_raw(const std::string& path, int width, int height, int bit_depth, int color_type,
                   const std::vector<uint8_t>& bytes, size_t stride) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) fail("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail("png: allocation failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail(path + ": png: encode error");
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_bytep> rows(height);
    for (int v = 0; v < height; ++v) rows[v] = const_cast<png_bytep>(bytes.data() + v * stride);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace

DepthMap depth_png16_read(const std::string& path) {
    const PngRaw raw = png_read_raw(path);
    if (raw.color_type != PNG_COLOR_TYPE_GRAY || raw.bit_depth != 16) {
        fail(path + ": expected 16-bit grayscale png");
    }
    Grid<double> values(raw.width, raw.height, 0.0);
    MaskGrid valid(raw.width, raw.height, 0);
    for (int v = 0; v < raw.height; ++v) {
        const uint8_t* row = raw.bytes.data() + v * raw.stride;
        for (int u = 0; u < raw.width; ++u) {
            const uint16_t code = static_cast<uint16_t>((row[2 * u] << 8) | row[2 * u + 1]);  // png is big-endian
            if (code == 0) continue;
            values(u, v) = code / 65535.0;
            valid(u, v) = 1;
        }
    }
    return make_relative_depth(std::move(values), std::move(valid));
}

void depth_png16_write(const std::string& path, const DepthMap& depth) {
    if (depth.unit != DepthUnit::relative) fail("depth_png16_write: depth must be relative");
    const int W = depth.width();
    const int H = depth.height();
    const size_t stride = static_cast<size_t>(W) * 2;
    std::vector<uint8_t> bytes(stride * H, 0);
    for (int v = 0; v < H; ++v) {
        uint8_t* row = bytes.data() + v * stride;
        for (int u = 0; u < W; ++u) {
            if (!depth.valid(u, v)) continue;
            const long code = std::lround(65535.0 * depth.values(u, v));
            const uint16_t clamped = static_cast<uint16_t>(std::clamp(code, 1L, 65535L));
            row[2 * u] = static_cast<uint8_t>(clamped >> 8);
            row[2 * u + 1] = static_cast<uint8_t>(clamped & 0xff);
        }
    }
    png_write_raw(path, W, H, 16, PNG_COLOR_TYPE_GRAY, bytes, stride);
}

NormalMap normal_png_read(const std::string& path) {
    const PngRaw raw = png_read_raw(path);
    if (raw.color_type != PNG_COLOR_TYPE_RGB || raw.bit_depth != 8) {
        fail(path + ": expected 8-bit rgb png");
    }
    NormalMap out{Grid<Vec3>(raw.width, raw.height), MaskGrid(raw.width, raw.height, 0)};
    for (int v = 0; v < raw.height; ++v) {
        const uint8_t* row = raw.bytes.data() + v * raw.stride;
        for (int u = 0; u < raw.width; ++u) {
            const uint8_t r = row[3 * u], g = row[3 * u + 1], b = row[3 * u + 2];
            if (r == 0 && g == 0 && b == 0) continue;  // reserved for invalid
            Vec3 n{2.0 * r / 255.0 - 1.0, 2.0 * g / 255.0 - 1.0, 2.0 * b / 255.0 - 1.0};
            const double norm = n.norm();
            if (norm < 1e-9) continue;
            n = n / norm;
            if (n.z > 0.0) n = -n;  // stored camera-facing
            out.vectors(u, v) = n;
            out.valid(u, v) = 1;
        }
    }
    return out;
}

void normal_png_write(const std::string& path, const NormalMap& normals) {
    const int W = normals.width();
    const int H = normals.height();
    const size_t stride = static_cast<size_t>(W) * 3;
    std::vector<uint8_t> bytes(stride * H, 0);
    for (int v = 0; v < H; ++v) {
        uint8_t* row = bytes.data() + v * stride;
        for (int u = 0; u < W; ++u) {
            if (!normals.valid(u, v)) continue;
            const Vec3& n = normals.vectors(u, v);
            row[3 * u] = static_cast<uint8_t>(std::clamp(std::lround(255.0 * (n.x + 1.0) / 2.0), 0L, 255L));
            row[3 * u + 1] = static_cast<uint8_t>(std::clamp(std::lround(255.0 * (n.y + 1.0) / 2.0), 0L, 255L));
            row[3 * u + 2] = static_cast<uint8_t>(std::clamp(std::lround(255.0 * (n.z + 1.0) / 2.0), 0L, 255L));
        }
    }
    png_write_raw(path, W, H, 8, PNG_COLOR_TYPE_RGB, bytes, stride);
}

ColorImage png_rgb8_read(const std::string& path) {
    const PngRaw raw = png_read_raw(path);
    if (raw.color_type != PNG_COLOR_TYPE_RGB || raw.bit_depth != 8) {
        fail(path + ": expected 8-bit rgb png");
    }
    ColorImage img(raw.width, raw.height);
    for (int v = 0; v < raw.height; ++v) {
        const uint8_t* row = raw.bytes.data() + v * raw.stride;
        for (int u = 0; u < raw.width; ++u) {
            img(u, v) = {row[3 * u], row[3 * u + 1], row[3 * u + 2]};
        }
    }
    return img;
}

void png_rgb8_write(const std::string& path, const ColorImage& img) {
    const int W = img.width();
    const int H = img.height();
    const size_t stride = static_cast<size_t>(W) * 3;
    std::vector<uint8_t> bytes(stride * H);
    for (int v = 0; v < H; ++v) {
        uint8_t* row = bytes.data() + v * stride;
        for (int u = 0; u < W; ++u) {
            row[3 * u] = img(u, v)[0];
            row[3 * u + 1] = img(u, v)[1];
            row[3 * u + 2] = img(u, v)[2];
        }
    }
    png_write_raw(path, W, H, 8, PNG_COLOR_TYPE_RGB, bytes, stride);
}

MaskGrid png_gray8_read(const std::string& path) {
    const PngRaw raw = png_read_raw(path);
    if (raw.color_type != PNG_COLOR_TYPE_GRAY || raw.bit_depth != 8) {
        fail(path + ": expected 8-bit grayscale png");
    }
    MaskGrid mask(raw.width, raw.height);
    for (int v = 0; v < raw.height; ++v) {
        const uint8_t* row = raw.bytes.data() + v * raw.stride;
        for (int u = 0; u < raw.width; ++u) mask(u, v) = row[u];
    }
    return mask;
}

void png_gray8_write(const std::string& path, const MaskGrid& mask) {
    const int W = mask.width();
    const int H = mask.height();
    const size_t stride = static_cast<size_t>(W);
    std::vector<uint8_t> bytes(stride * H);
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) bytes[v * stride + u] = mask(u, v);
    }
    png_write_raw(path, W, H, 8, PNG_COLOR_TYPE_GRAY, bytes, stride);
}

// ---------------------------------------------------------------------------
// PLY

void ply_write(const PointCloud& pc, const std::string& path, PlyMode mode) {
    if (pc.has_colors() && pc.colors.size() != pc.points.size()) fail("ply_write: color count mismatch");
    std::ofstream out = open_output(path);
    out << "ply\n"
        << (mode == PlyMode::ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
        << "element vertex " << pc.points.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n";
    if (pc.has_colors()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out << "end_header\n";

    if (mode == PlyMode::ascii) {
        char buf[160];
        for (size_t i = 0; i < pc.points.size(); ++i) {
            const Vec3& p = pc.points[i];
            std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g", static_cast<float>(p.x), static_cast<float>(p.y),
                          static_cast<float>(p.z));
            out << buf;
            if (pc.has_colors()) {
                out << " " << int(pc.colors[i][0]) << " " << int(pc.colors[i][1]) << " " << int(pc.colors[i][2]);
            }
            out << "\n";
        }
    } else {
        for (size_t i = 0; i < pc.points.size(); ++i) {
            const float xyz[3] = {static_cast<float>(pc.points[i].x), static_cast<float>(pc.points[i].y),
                                  static_cast<float>(pc.points[i].z)};
            out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
            if (pc.has_colors()) out.write(reinterpret_cast<const char*>(pc.colors[i].data()), 3);
        }
    }
    if (!out) fail("ply_write: write failed for " + path);
}

PointCloud ply_read(const std::string& path) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line) || line != "ply") fail(path + ": ply: bad magic");

    bool binary = false;
    size_t vertex_count = 0;
    std::vector<std::string> properties;
    bool in_vertex_element = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment") continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") binary = true;
            else if (fmt != "ascii") fail(path + ": ply: unsupported format " + fmt);
        } else if (word == "element") {
            std::string name;
            ls >> name >> vertex_count;
            if (name != "vertex") fail(path + ": ply: unsupported element " + name);
            in_vertex_element = true;
        } else if (word == "property") {
            if (!in_vertex_element) fail(path + ": ply: property outside vertex element");
            std::string type, name;
            ls >> type >> name;
            properties.push_back(type + " " + name);
        } else if (word == "end_header") {
            break;
        }
    }

    const std::vector<std::string> xyz = {"float x", "float y", "float z"};
    const std::vector<std::string> xyzrgb = {"float x", "float y", "float z", "uchar red", "uchar green", "uchar blue"};
    bool with_colors;
    if (properties == xyz) with_colors = false;
    else if (properties == xyzrgb) with_colors = true;
    else fail(path + ": ply: unsupported vertex layout");

    PointCloud pc;
    pc.points.reserve(vertex_count);
    if (with_colors) pc.colors.reserve(vertex_count);
    for (size_t i = 0; i < vertex_count; ++i) {
        if (binary) {
            float xyzv[3];
            in.read(reinterpret_cast<char*>(xyzv), sizeof(xyzv));
            if (!in) fail(path + ": ply: truncated vertex data");
            pc.points.push_back({xyzv[0], xyzv[1], xyzv[2]});
            if (with_colors) {
                uint8_t rgb[3];
                in.read(reinterpret_cast<char*>(rgb), 3);
                if (!in) fail(path + ": ply: truncated vertex data");
                pc.colors.push_back({rgb[0], rgb[1], rgb[2]});
            }
        } else {
            float x, y, z;
            if (!(in >> x >> y >> z)) fail(path + ": ply: truncated vertex data");
            pc.points.push_back({x, y, z});
            if (with_colors) {
                int r, g, b;
                if (!(in >> r >> g >> b)) fail(path + ": ply: truncated vertex data");
                pc.colors.push_back({static_cast<uint8_t>(r), static_cast<uint8_t>(g), static_cast<uint8_t>(b)});
            }
        }
    }
    return pc;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& prefix) {
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) fail("manifest: unknown key \"" + prefix + item.key() + "\"");
    }
}

double require_number(const json& obj, const std::string& key, const std::string& prefix) {
    if (!obj.contains(key) || !obj.at(key).is_number()) fail("manifest: missing or non-numeric \"" + prefix + key + "\"");
    return obj.at(key).get<double>();
}

double optional_number(const json& obj, const std::string& key, double fallback, const std::string& prefix) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number()) fail("manifest: non-numeric \"" + prefix + key + "\"");
    return obj.at(key).get<double>();
}

std::string optional_string(const json& obj, const std::string& key) {
    if (!obj.contains(key)) return {};
    if (!obj.at(key).is_string()) fail("manifest: \"" + key + "\" must be a string");
    return obj.at(key).get<std::string>();
}

Lambdas lambdas_preset(const std::string& name) {
    if (name == "rt1" || name == "bridge") return Lambdas::rt1();
    if (name == "rlbench") return Lambdas::rlbench();
    fail("manifest: unknown lambdas preset \"" + name + "\"");
}

std::string resolve_path(const std::string& base_dir, const std::string& rel) {
    std::filesystem::path p(rel);
    if (p.is_absolute() || base_dir.empty()) return rel;
    return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace

SequenceManifest manifest_read(const std::string& path) {
    std::ifstream in = open_input(path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        fail(path + ": manifest: " + e.what());
    }
    if (!doc.is_object()) fail(path + ": manifest: top level must be an object");

    reject_unknown_keys(doc, {"intrinsics", "depth_range", "flow_threshold_px", "lambdas", "bilateral_k", "irls", "cg", "frames"}, "");

    SequenceManifest m;
    m.base_dir = std::filesystem::path(path).parent_path().string();

    if (!doc.contains("intrinsics") || !doc.at("intrinsics").is_object()) fail("manifest: missing \"intrinsics\"");
    const json& intr = doc.at("intrinsics");
    reject_unknown_keys(intr, {"fx", "fy", "cx", "cy", "width", "height"}, "intrinsics.");
    m.intrinsics.fx = require_number(intr, "fx", "intrinsics.");
    m.intrinsics.fy = require_number(intr, "fy", "intrinsics.");
    m.intrinsics.cx = require_number(intr, "cx", "intrinsics.");
    m.intrinsics.cy = require_number(intr, "cy", "intrinsics.");
    m.intrinsics.width = static_cast<int>(require_number(intr, "width", "intrinsics."));
    m.intrinsics.height = static_cast<int>(require_number(intr, "height", "intrinsics."));

    if (doc.contains("depth_range")) {
        const json& dr = doc.at("depth_range");
        if (!dr.is_object()) fail("manifest: \"depth_range\" must be an object");
        reject_unknown_keys(dr, {"near", "far"}, "depth_range.");
        m.depth_range = std::make_pair(require_number(dr, "near", "depth_range."), require_number(dr, "far", "depth_range."));
    }

    m.flow_threshold_px = optional_number(doc, "flow_threshold_px", 1.0, "");

    if (doc.contains("lambdas")) {
        const json& l = doc.at("lambdas");
        if (l.is_string()) {
            m.lambdas = lambdas_preset(l.get<std::string>());
        } else if (l.is_object()) {
            reject_unknown_keys(l, {"cd", "cb", "rd", "rb"}, "lambdas.");
            m.lambdas.cd = require_number(l, "cd", "lambdas.");
            m.lambdas.cb = require_number(l, "cb", "lambdas.");
            m.lambdas.rd = require_number(l, "rd", "lambdas.");
            m.lambdas.rb = require_number(l, "rb", "lambdas.");
        } else {
            fail("manifest: \"lambdas\" must be an object or preset name");
        }
    }

    m.solver.bilateral_k = optional_number(doc, "bilateral_k", 2.0, "");
    if (doc.contains("irls")) {
        const json& irls = doc.at("irls");
        if (!irls.is_object()) fail("manifest: \"irls\" must be an object");
        reject_unknown_keys(irls, {"max_iters", "tol"}, "irls.");
        m.solver.irls_max_iters = static_cast<int>(optional_number(irls, "max_iters", 100, "irls."));
        m.solver.irls_tol = optional_number(irls, "tol", 1e-5, "irls.");
    }
    if (doc.contains("cg")) {
        const json& cg = doc.at("cg");
        if (!cg.is_object()) fail("manifest: \"cg\" must be an object");
        reject_unknown_keys(cg, {"max_iters", "tol"}, "cg.");
        m.solver.cg_max_iters = static_cast<int>(optional_number(cg, "max_iters", 5000, "cg."));
        m.solver.cg_tol = optional_number(cg, "tol", 1e-9, "cg.");
    }

    if (!doc.contains("frames") || !doc.at("frames").is_array()) fail("manifest: missing \"frames\" array");
    size_t index = 0;
    for (const json& fr : doc.at("frames")) {
        if (!fr.is_object()) fail("manifest: frames[" + std::to_string(index) + "] must be an object");
        reject_unknown_keys(fr, {"rgb", "depth", "normal", "flow_to_prev"}, "frames[" + std::to_string(index) + "].");
        FrameRef ref;
        ref.rgb = optional_string(fr, "rgb");
        ref.depth = optional_string(fr, "depth");
        ref.normal = optional_string(fr, "normal");
        ref.flow_to_prev = optional_string(fr, "flow_to_prev");
        if (ref.depth.empty() || ref.normal.empty()) {
            fail("manifest: frames[" + std::to_string(index) + "] needs \"depth\" and \"normal\"");
        }
        for (const std::string* p : {&ref.rgb, &ref.depth, &ref.normal, &ref.flow_to_prev}) {
            if (p->empty()) continue;
            const std::string full = resolve_path(m.base_dir, *p);
            if (!std::filesystem::exists(full)) {
                fail("manifest: frames[" + std::to_string(index) + "]: missing file " + full);
            }
        }
        m.frames.push_back(std::move(ref));
        ++index;
    }

    m.validate();
    return m;
}

void manifest_write(const std::string& path, const SequenceManifest& manifest) {
    json doc;
    doc["intrinsics"] = {{"fx", manifest.intrinsics.fx}, {"fy", manifest.intrinsics.fy},
                         {"cx", manifest.intrinsics.cx}, {"cy", manifest.intrinsics.cy},
                         {"width", manifest.intrinsics.width}, {"height", manifest.intrinsics.height}};
    if (manifest.depth_range) {
        doc["depth_range"] = {{"near", manifest.depth_range->first}, {"far", manifest.depth_range->second}};
    }
    doc["flow_threshold_px"] = manifest.flow_threshold_px;
    doc["lambdas"] = {{"cd", manifest.lambdas.cd}, {"cb", manifest.lambdas.cb},
                      {"rd", manifest.lambdas.rd}, {"rb", manifest.lambdas.rb}};
    doc["bilateral_k"] = manifest.solver.bilateral_k;
    doc["irls"] = {{"max_iters", manifest.solver.irls_max_iters}, {"tol", manifest.solver.irls_tol}};
    doc["cg"] = {{"max_iters", manifest.solver.cg_max_iters}, {"tol", manifest.solver.cg_tol}};
    doc["frames"] = json::array();
    for (const FrameRef& fr : manifest.frames) {
        json entry;
        if (!fr.rgb.empty()) entry["rgb"] = fr.rgb;
        entry["depth"] = fr.depth;
        entry["normal"] = fr.normal;
        if (!fr.flow_to_prev.empty()) entry["flow_to_prev"] = fr.flow_to_prev;
        doc["frames"].push_back(entry);
    }

    std::ofstream out = open_output(path);
    out << doc.dump(2) << "\n";
    if (!out) fail("manifest_write: write failed for " + path);
}

CameraIntrinsics intrinsics_read(const std::string& path) {
    std::ifstream in = open_input(path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        fail(path + ": intrinsics: " + e.what());
    }
    if (!doc.is_object()) fail(path + ": intrinsics: expected an object");
    reject_unknown_keys(doc, {"fx", "fy", "cx", "cy", "width", "height"}, "intrinsics.");
    CameraIntrinsics K;
    K.fx = require_number(doc, "fx", "intrinsics.");
    K.fy = require_number(doc, "fy", "intrinsics.");
    K.cx = require_number(doc, "cx", "intrinsics.");
    K.cy = require_number(doc, "cy", "intrinsics.");
    K.width = static_cast<int>(require_number(doc, "width", "intrinsics."));
    K.height = static_cast<int>(require_number(doc, "height", "intrinsics."));
    K.validate();
    return K;
}

void intrinsics_write(const std::string& path, const CameraIntrinsics& K) {
    json doc = {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
    std::ofstream out = open_output(path);
    out << doc.dump(2) << "\n";
    if (!out) fail("intrinsics_write: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Depth / normal carriers

DepthMap depth_from_pfm(const PfmImage& img, DepthUnit unit) {
    if (img.channels != 1) fail("depth_from_pfm: expected 1 channel");
    Grid<double> values(img.width, img.height);
    MaskGrid valid(img.width, img.height, 1);
    for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u) {
            const float f = img.at(u, v, 0);
            values(u, v) = f;
            if (!std::isfinite(f)) valid(u, v) = 0;
        }
    }
    if (unit == DepthUnit::relative) return make_relative_depth(std::move(values), std::move(valid));
    return make_metric_depth(std::move(values), std::move(valid));
}

PfmImage depth_to_pfm(const DepthMap& depth) {
    PfmImage img;
    img.width = depth.width();
    img.height = depth.height();
    img.channels = 1;
    img.data.assign(static_cast<size_t>(img.width) * img.height, std::numeric_limits<float>::quiet_NaN());
    for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u) {
            if (depth.valid(u, v)) img.at(u, v, 0) = static_cast<float>(depth.values(u, v));
        }
    }
    return img;
}

NormalMap normal_from_pfm(const PfmImage& img) {
    if (img.channels != 3) fail("normal_from_pfm: expected 3 channels");
    NormalMap out{Grid<Vec3>(img.width, img.height), MaskGrid(img.width, img.height, 0)};
    for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u) {
            Vec3 n{img.at(u, v, 0), img.at(u, v, 1), img.at(u, v, 2)};
            if (!n.finite()) continue;
            const double norm = n.norm();
            if (norm < 1e-9) continue;
            n = n / norm;
            if (n.z > 0.0) n = -n;  // stored camera-facing
            out.vectors(u, v) = n;
            out.valid(u, v) = 1;
        }
    }
    return out;
}

PfmImage normal_to_pfm(const NormalMap& normals) {
    PfmImage img;
    img.width = normals.width();
    img.height = normals.height();
    img.channels = 3;
    img.data.assign(static_cast<size_t>(img.width) * img.height * 3, std::numeric_limits<float>::quiet_NaN());
    for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u) {
            if (!normals.valid(u, v)) continue;
            img.at(u, v, 0) = static_cast<float>(normals.vectors(u, v).x);
            img.at(u, v, 1) = static_cast<float>(normals.vectors(u, v).y);
            img.at(u, v, 2) = static_cast<float>(normals.vectors(u, v).z);
        }
    }
    return img;
}

namespace {

std::string lower_ext(const std::string& path) {
    const std::string ext = std::filesystem::path(path).extension().string();
    std::string out;
    for (char c : ext) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

}  // namespace

DepthMap read_depth_any(const std::string& path, DepthUnit unit) {
    const std::string ext = lower_ext(path);
    if (ext == ".pfm") return depth_from_pfm(pfm_read(path), unit);
    if (ext == ".png") {
        if (unit != DepthUnit::relative) fail(path + ": png depth is always relative");
        return depth_png16_read(path);
    }
    fail(path + ": unsupported depth format " + ext);
}

NormalMap read_normal_any(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".pfm") return normal_from_pfm(pfm_read(path));
    if (ext == ".png") return normal_png_read(path);
    fail(path + ": unsupported normal format " + ext);
}

// ---------------------------------------------------------------------------
// Metrics record

std::string KeyValueRecord::to_text() const {
    std::string out;
    char buf[64];
    for (const auto& [key, value] : entries) {
        std::snprintf(buf, sizeof(buf), "%.10g", value);
        out += key;
        out += " ";
        out += buf;
        out += "\n";
    }
    return out;
}

std::string KeyValueRecord::to_json() const {
    json doc = json::object();
    for (const auto& [key, value] : entries) doc[key] = value;
    return doc.dump(2) + "\n";
}

void record_write(const std::string& path, const KeyValueRecord& record) {
    std::ofstream out = open_output(path);
    out << record.to_json();
    if (!out) fail("record_write: write failed for " + path);
}

}  // namespace dnr::io
