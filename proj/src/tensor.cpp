#include "moft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace moft {

Tensor4::Tensor4(Shape shape, double fill) : shape_(shape), values_(shape.size(), fill) {
    if (shape.frames == 0 || shape.height == 0 || shape.width == 0 || shape.channels == 0)
        throw ArgumentError("tensor dimensions must be >= 1");
}

Tensor4::Tensor4(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
    if (shape.frames == 0 || shape.height == 0 || shape.width == 0 || shape.channels == 0)
        throw ArgumentError("tensor dimensions must be >= 1");
    if (values_.size() != shape.size())
        throw ShapeError("tensor payload has " + std::to_string(values_.size()) + " values, expected " +
                         std::to_string(shape.size()));
}

std::span<double> Tensor4::frame(std::size_t f) {
    return std::span<double>(values_).subspan(f * shape_.frame_size(), shape_.frame_size());
}

std::span<const double> Tensor4::frame(std::size_t f) const {
    return std::span<const double>(values_).subspan(f * shape_.frame_size(), shape_.frame_size());
}

std::span<double> Tensor4::pixel(std::size_t f, std::size_t r, std::size_t c) {
    return std::span<double>(values_).subspan(index(f, r, c, 0), shape_.channels);
}

std::span<const double> Tensor4::pixel(std::size_t f, std::size_t r, std::size_t c) const {
    return std::span<const double>(values_).subspan(index(f, r, c, 0), shape_.channels);
}

Tensor4& Tensor4::operator+=(const Tensor4& other) {
    if (!(shape_ == other.shape_)) throw ShapeError("tensor shapes differ");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

Tensor4& Tensor4::operator-=(const Tensor4& other) {
    if (!(shape_ == other.shape_)) throw ShapeError("tensor shapes differ");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

Tensor4& Tensor4::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
Tensor4 operator-(Tensor4 a, const Tensor4& b) { return a -= b; }
Tensor4 operator*(double s, Tensor4 a) { return a *= s; }

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
    if (!(a.shape() == b.shape())) throw ShapeError("tensor shapes differ");
    double m = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
    return m;
}

RegionMask RegionMask::full(std::size_t height, std::size_t width, std::size_t frames) {
    RegionMask m;
    m.height = height;
    m.width = width;
    m.inside.assign(height * width, 1);
    for (std::size_t f = 0; f < frames; ++f) m.frame_set.push_back(f);
    return m;
}

bool RegionMask::has_frame(std::size_t f) const {
    return std::find(frame_set.begin(), frame_set.end(), f) != frame_set.end();
}

std::size_t RegionMask::count() const {
    return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), std::uint8_t{1}));
}

void require_finite(const Tensor4& t, const char* what) {
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw DataError(std::string(what) + ": non-finite value at flat index " + std::to_string(i));
    }
}

Tensor4 frame_mean(const Tensor4& t) {
    const Shape s = t.shape();
    Tensor4 out(Shape{1, s.height, s.width, s.channels});
    const std::size_t n = s.frame_size();
    auto src = t.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < n; ++i) {
        // Neumaier summation over the frame axis.
        double sum = 0.0, comp = 0.0;
        for (std::size_t f = 0; f < s.frames; ++f) {
            const double x = src[f * n + i];
            const double y = sum + x;
            comp += (std::abs(sum) >= std::abs(x)) ? (sum - y) + x : (x - y) + sum;
            sum = y;
        }
        dst[i] = (sum + comp) / static_cast<double>(s.frames);
    }
    return out;
}

} // namespace moft
