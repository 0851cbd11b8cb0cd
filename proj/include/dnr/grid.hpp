#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dnr {

/// Row-major H x W grid indexed by (u, v) = (column, row).
template <typename T>
class Grid {
  public:
    Grid() = default;

    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(static_cast<size_t>(width) * static_cast<size_t>(height), fill) {
        if (width <= 0 || height <= 0) {
            throw std::invalid_argument("Grid: dimensions must be positive");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool inside(int u, int v) const { return u >= 0 && u < width_ && v >= 0 && v < height_; }

    size_t index(int u, int v) const { return static_cast<size_t>(v) * width_ + u; }

    T& operator()(int u, int v) { return data_[index(u, v)]; }
    const T& operator()(int u, int v) const { return data_[index(u, v)]; }

    T& at(int u, int v) {
        if (!inside(u, v)) throw std::out_of_range("Grid::at: index outside grid");
        return data_[index(u, v)];
    }
    const T& at(int u, int v) const {
        if (!inside(u, v)) throw std::out_of_range("Grid::at: index outside grid");
        return data_[index(u, v)];
    }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool same_size(int width, int height) const { return width_ == width && height_ == height; }

    template <typename U>
    bool same_size(const Grid<U>& other) const {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
    }

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using MaskGrid = Grid<uint8_t>;

}  // namespace dnr
