#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace flowvo {

namespace detail {

template <typename T>
T zero_value() {
    if constexpr (std::is_arithmetic_v<T>) {
        return T{};
    } else {
        return T::Zero();
    }
}

} // namespace detail

/// Dense row-major H x W raster. Pixel (row, col) with the origin at the
/// top-left pixel center; col grows rightward (u), row grows downward (v).
template <typename T>
class Image {
public:
    Image() = default;

    Image(int height, int width)
        : Image(height, width, detail::zero_value<T>()) {}

    Image(int height, int width, const T& fill)
        : height_(height), width_(width) {
        if (height < 0 || width < 0)
            throw std::invalid_argument("Image: negative dimensions");
        data_.assign(static_cast<std::size_t>(height) * width, fill);
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(int row, int col) { return data_[index(row, col)]; }
    const T& operator()(int row, int col) const { return data_[index(row, col)]; }

    T& operator[](std::size_t linear) { return data_[linear]; }
    const T& operator[](std::size_t linear) const { return data_[linear]; }

    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * width_ + col;
    }
    int row_of(std::size_t linear) const { return static_cast<int>(linear / width_); }
    int col_of(std::size_t linear) const { return static_cast<int>(linear % width_); }

    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height_ && col >= 0 && col < width_;
    }

    template <typename U>
    bool same_shape(const Image<U>& other) const {
        return height_ == other.height() && width_ == other.width();
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> pixels() { return data_; }
    std::span<const T> pixels() const { return data_; }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    bool operator==(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_ && data_ == other.data_;
    }

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

using DepthMap = Image<double>;
using FlowMap = Image<Eigen::Vector2d>;
using Vec3Map = Image<Eigen::Vector3d>;
using MaskMap = Image<std::uint8_t>;
using ScalarMap = Image<double>;

/// Per-pixel mean over the three channels of a vector map.
inline ScalarMap channel_mean(const Vec3Map& map) {
    ScalarMap out(map.height(), map.width());
    for (std::size_t i = 0; i < map.size(); ++i)
        out[i] = map[i].mean();
    return out;
}

namespace detail {

/// Pairwise (tree) summation with fixed fan-in: deterministic regardless of
/// how callers later split the work, and more accurate than sequential adds.
inline double pairwise_sum(const double* values, std::size_t count) {
    if (count <= 8) {
        double acc = 0.0;
        for (std::size_t i = 0; i < count; ++i)
            acc += values[i];
        return acc;
    }
    const std::size_t half = count / 2;
    return pairwise_sum(values, half) + pairwise_sum(values + half, count - half);
}

inline double pairwise_sum(std::span<const double> values) {
    return pairwise_sum(values.data(), values.size());
}

} // namespace detail

} // namespace flowvo
