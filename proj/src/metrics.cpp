#include "dnr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dnr {

namespace {

void check_sizes(const Grid<double>& a, const Grid<double>& b, const MaskGrid& mask, const char* who) {
    if (!a.same_size(b) || !a.same_size(mask)) throw std::invalid_argument(std::string(who) + ": size mismatch");
}

// kd-tree over 3D points with L1-metric pruning. Each node stores the median
// point of its range; per-axis splits give a valid lower bound for L1.
class KdTree {
  public:
    explicit KdTree(const std::vector<Vec3>& points) : points_(points), order_(points.size()) {
        for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        build(0, order_.size(), 0);
    }

    double nearest_l1(const Vec3& query) const {
        double best = std::numeric_limits<double>::infinity();
        search(query, 0, order_.size(), 0, best);
        return best;
    }

  private:
    static double coord(const Vec3& p, int axis) { return axis == 0 ? p.x : (axis == 1 ? p.y : p.z); }

    static double l1(const Vec3& a, const Vec3& b) {
        return std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.z - b.z);
    }

    void build(size_t lo, size_t hi, int axis) {
        if (hi - lo <= 1) return;
        const size_t mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](size_t a, size_t b) { return coord(points_[a], axis) < coord(points_[b], axis); });
        build(lo, mid, (axis + 1) % 3);
        build(mid + 1, hi, (axis + 1) % 3);
    }

    void search(const Vec3& query, size_t lo, size_t hi, int axis, double& best) const {
        if (lo >= hi) return;
        const size_t mid = (lo + hi) / 2;
        const Vec3& node = points_[order_[mid]];
        const double d = l1(query, node);
        if (d < best) best = d;

        const double delta = coord(query, axis) - coord(node, axis);
        const int next = (axis + 1) % 3;
        if (delta < 0.0) {
            search(query, lo, mid, next, best);
            if (std::abs(delta) < best) search(query, mid + 1, hi, next, best);
        } else {
            search(query, mid + 1, hi, next, best);
            if (std::abs(delta) < best) search(query, lo, mid, next, best);
        }
    }

    const std::vector<Vec3>& points_;
    std::vector<size_t> order_;
};

double directed_mean_l1(const std::vector<Vec3>& from, const KdTree& to_tree) {
    double sum = 0.0;
    for (const Vec3& p : from) sum += to_tree.nearest_l1(p);
    return sum / static_cast<double>(from.size());
}

}  // namespace

ScaleShift align_scale_shift(const DepthMap& pred, const DepthMap& gt, const MaskGrid& mask) {
    check_sizes(pred.values, gt.values, mask, "align_scale_shift");

    size_t n = 0;
    double sum_p = 0.0, sum_g = 0.0;
    for (int v = 0; v < mask.height(); ++v) {
        for (int u = 0; u < mask.width(); ++u) {
            if (!mask(u, v)) continue;
            sum_p += pred.values(u, v);
            sum_g += gt.values(u, v);
            ++n;
        }
    }
    if (n < 2) throw std::invalid_argument("align_scale_shift: need at least two masked pixels");

    const double mean_p = sum_p / n;
    const double mean_g = sum_g / n;
    double var_p = 0.0, cov = 0.0;
    for (int v = 0; v < mask.height(); ++v) {
        for (int u = 0; u < mask.width(); ++u) {
            if (!mask(u, v)) continue;
            const double dp = pred.values(u, v) - mean_p;
            var_p += dp * dp;
            cov += dp * (gt.values(u, v) - mean_g);
        }
    }
    if (!(var_p > 0.0)) throw std::invalid_argument("align_scale_shift: constant prediction is degenerate");

    ScaleShift st;
    st.s = cov / var_p;
    st.t = mean_g - st.s * mean_p;
    return st;
}

DepthMap apply_scale_shift(const DepthMap& pred, ScaleShift st) {
    DepthMap out = pred;
    out.unit = DepthUnit::metric;
    for (size_t i = 0; i < out.values.size(); ++i) {
        if (out.valid.data()[i]) out.values.data()[i] = st.s * pred.values.data()[i] + st.t;
    }
    return out;
}

DepthMetrics depth_metrics(const DepthMap& pred_aligned, const DepthMap& gt, const MaskGrid& mask) {
    check_sizes(pred_aligned.values, gt.values, mask, "depth_metrics");

    size_t n = 0, ok1 = 0, ok2 = 0;
    double absrel_sum = 0.0;
    for (int v = 0; v < mask.height(); ++v) {
        for (int u = 0; u < mask.width(); ++u) {
            if (!mask(u, v)) continue;
            const double g = gt.values(u, v);
            if (!(g > 0.0)) throw std::invalid_argument("depth_metrics: ground truth must be positive on the mask");
            const double p = pred_aligned.values(u, v);
            absrel_sum += std::abs(p - g) / g;
            if (p > 0.0) {
                const double ratio = std::max(p / g, g / p);
                if (ratio < 1.25) ++ok1;
                if (ratio < 1.25 * 1.25) ++ok2;
            }
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("depth_metrics: empty mask");

    DepthMetrics m;
    m.absrel = absrel_sum / static_cast<double>(n);
    m.delta1 = static_cast<double>(ok1) / static_cast<double>(n);
    m.delta2 = static_cast<double>(ok2) / static_cast<double>(n);
    return m;
}

NormalMetrics normal_metrics(const NormalMap& pred, const NormalMap& gt, const MaskGrid& mask) {
    if (!pred.vectors.same_size(gt.vectors) || !pred.vectors.same_size(mask)) {
        throw std::invalid_argument("normal_metrics: size mismatch");
    }

    std::vector<double> angles;
    angles.reserve(mask.size());
    for (int v = 0; v < mask.height(); ++v) {
        for (int u = 0; u < mask.width(); ++u) {
            if (!mask(u, v)) continue;
            const double c = std::clamp(pred.vectors(u, v).dot(gt.vectors(u, v)), -1.0, 1.0);
            angles.push_back(std::acos(c) * 180.0 / M_PI);
        }
    }
    if (angles.empty()) throw std::invalid_argument("normal_metrics: empty mask");

    double sum = 0.0;
    size_t below = 0;
    for (double a : angles) {
        sum += a;
        if (a < 11.25) ++below;
    }
    std::sort(angles.begin(), angles.end());

    NormalMetrics m;
    m.mean_deg = sum / static_cast<double>(angles.size());
    m.median_deg = angles[(angles.size() - 1) / 2];  // lower middle for even counts
    m.pct_11_25 = static_cast<double>(below) / static_cast<double>(angles.size());
    return m;
}

double chamfer_l1(const PointCloud& P, const PointCloud& Q) {
    if (P.points.empty() || Q.points.empty()) throw std::invalid_argument("chamfer_l1: empty point cloud");
    const KdTree treeP(P.points);
    const KdTree treeQ(Q.points);
    return 0.5 * (directed_mean_l1(P.points, treeQ) + directed_mean_l1(Q.points, treeP));
}

}  // namespace dnr
