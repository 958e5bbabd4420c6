#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "moft/error.hpp"

namespace moft {

// Dense (frame, row, column, channel) row-major layout.
struct Shape {
    std::size_t frames = 1;
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t channels = 1;

    std::size_t size() const { return frames * height * width * channels; }
    std::size_t pixels() const { return height * width; }
    std::size_t frame_size() const { return height * width * channels; }
    bool operator==(const Shape&) const = default;
};

struct Point2 {
    double row = 0.0;
    double col = 0.0;
    bool operator==(const Point2&) const = default;
};

// Per-frame displacement in pixels; dx along columns, dy along rows.
struct Displacement {
    double dx = 0.0;
    double dy = 0.0;
    bool operator==(const Displacement&) const = default;
};

/// Dense 4-D tensor of finite values. Values are held in double precision in
/// memory; the on-disk format stores 32-bit floats.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(Shape shape, double fill = 0.0);
    Tensor4(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t frames() const { return shape_.frames; }
    std::size_t height() const { return shape_.height; }
    std::size_t width() const { return shape_.width; }
    std::size_t channels() const { return shape_.channels; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    std::size_t index(std::size_t f, std::size_t r, std::size_t c, std::size_t ch) const {
        return ((f * shape_.height + r) * shape_.width + c) * shape_.channels + ch;
    }
    double& at(std::size_t f, std::size_t r, std::size_t c, std::size_t ch) {
        return values_[index(f, r, c, ch)];
    }
    double at(std::size_t f, std::size_t r, std::size_t c, std::size_t ch) const {
        return values_[index(f, r, c, ch)];
    }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    std::span<double> frame(std::size_t f);
    std::span<const double> frame(std::size_t f) const;
    std::span<double> pixel(std::size_t f, std::size_t r, std::size_t c);
    std::span<const double> pixel(std::size_t f, std::size_t r, std::size_t c) const;

    Tensor4& operator+=(const Tensor4& other);
    Tensor4& operator-=(const Tensor4& other);
    Tensor4& operator*=(double s);

    bool operator==(const Tensor4&) const = default;

private:
    Shape shape_{0, 0, 0, 0};
    std::vector<double> values_;
};

using FeatureTensor = Tensor4;

/// The optimizable latent video z together with the seed of its generator.
struct LatentVideo {
    Tensor4 z;
    std::uint64_t seed = 0;
};

/// Spatial region R plus the frame set used for gradient clipping.
struct RegionMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> inside;   // row-major, 1 = member
    std::vector<std::size_t> frame_set; // 0-based frame indices

    static RegionMask full(std::size_t height, std::size_t width, std::size_t frames);
    bool contains(std::size_t r, std::size_t c) const { return inside[r * width + c] != 0; }
    bool has_frame(std::size_t f) const;
    std::size_t count() const;
};

/// Throws DataError naming the first non-finite flat index.
void require_finite(const Tensor4& t, const char* what);

/// Per (row, column, channel) mean over frames, compensated summation.
Tensor4 frame_mean(const Tensor4& t);

Tensor4 operator+(Tensor4 a, const Tensor4& b);
Tensor4 operator-(Tensor4 a, const Tensor4& b);
Tensor4 operator*(double s, Tensor4 a);

double max_abs_diff(const Tensor4& a, const Tensor4& b);

} // namespace moft
