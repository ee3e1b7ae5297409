#pragma once

// Dense row-major tensor used for images, weights and datasets.
//
// Image layout is channel-first: a single image is [C, H, W], a batch is
// [N, C, H, W]. Tensors are plain values; gradient tracking lives in Var
// (autodiff.hpp).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pansharp {

using Shape = std::vector<std::size_t>;

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// NaN/Inf, divergence and similar numeric failures.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_numel(shape_))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    std::span<T> data() & { return data_; }
    std::span<const T> data() const& { return data_; }
    // Keeps `for (auto v : make_tensor().data())` valid past the temporary.
    std::vector<T> data() && { return std::move(data_); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    const T& at(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    // Height and width of an image-like tensor (last two extents).
    std::size_t height() const { return shape_.at(rank() - 2); }
    std::size_t width() const { return shape_.at(rank() - 1); }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != data_.size())
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        return Tensor(std::move(shape), data_);
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

template <typename T>
T max_value(const Tensor<T>& t);

template <typename T>
double sum_value(const Tensor<T>& t);

// Stacks equally shaped rank-3 images into a [N, C, H, W] batch.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> images);

// Extracts image n of a [N, C, H, W] batch as [C, H, W].
template <typename T>
Tensor<T> unstack(const Tensor<T>& batch, std::size_t n);

// Spatial window [y0, y0+h) x [x0, x0+w) of a [C, H, W] image.
template <typename T>
Tensor<T> crop(const Tensor<T>& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);

template <typename T>
Tensor<T> clip(const Tensor<T>& t, T lo, T hi);

// .ten container: "TEN1", u8 rank, rank x u32 LE dims, f32 LE payload.
void save_ten(const std::filesystem::path& path, const Tensor<float>& t);
Tensor<float> load_ten(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ten(const Tensor<float>& t);
Tensor<float> decode_ten(std::span<const std::uint8_t> bytes);

}  // namespace pansharp
