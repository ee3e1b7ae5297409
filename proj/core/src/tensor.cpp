#include "pansharp/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace pansharp {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

template <typename T>
T max_value(const Tensor<T>& t) {
    if (t.empty()) throw ShapeError("max_value of empty tensor");
    return *std::max_element(t.storage().begin(), t.storage().end());
}

template <typename T>
double sum_value(const Tensor<T>& t) {
    double s = 0.0;
    for (T v : t.data()) s += static_cast<double>(v);
    return s;
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> images) {
    if (images.empty()) throw ShapeError("stack: no images");
    const Shape& s = images.front().shape();
    if (s.size() != 3) throw ShapeError("stack: expected [C,H,W] images, got " + shape_str(s));
    Tensor<T> out({images.size(), s[0], s[1], s[2]});
    const std::size_t plane = shape_numel(s);
    for (std::size_t n = 0; n < images.size(); ++n) {
        if (images[n].shape() != s)
            throw ShapeError("stack: shape mismatch " + shape_str(s) + " vs " +
                             shape_str(images[n].shape()));
        std::copy(images[n].storage().begin(), images[n].storage().end(),
                  out.storage().begin() + static_cast<std::ptrdiff_t>(n * plane));
    }
    return out;
}

template <typename T>
Tensor<T> unstack(const Tensor<T>& batch, std::size_t n) {
    if (batch.rank() != 4 || n >= batch.dim(0))
        throw ShapeError("unstack: bad index " + std::to_string(n) + " for " + shape_str(batch.shape()));
    Shape s{batch.dim(1), batch.dim(2), batch.dim(3)};
    const std::size_t plane = shape_numel(s);
    auto first = batch.storage().begin() + static_cast<std::ptrdiff_t>(n * plane);
    return Tensor<T>(s, std::vector<T>(first, first + static_cast<std::ptrdiff_t>(plane)));
}

template <typename T>
Tensor<T> crop(const Tensor<T>& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
    if (image.rank() != 3 || y0 + h > image.dim(1) || x0 + w > image.dim(2))
        throw ShapeError("crop: window out of range for " + shape_str(image.shape()));
    Tensor<T> out({image.dim(0), h, w});
    for (std::size_t c = 0; c < image.dim(0); ++c)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, y0 + y, x0 + x);
    return out;
}

template <typename T>
Tensor<T> clip(const Tensor<T>& t, T lo, T hi) {
    Tensor<T> out = t;
    for (T& v : out.data()) v = std::clamp(v, lo, hi);
    return out;
}

namespace {

constexpr char kMagic[4] = {'T', 'E', 'N', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_ten(const Tensor<float>& t) {
    if (t.rank() > 255) throw ShapeError("encode_ten: rank too large");
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) {
        if (d > std::numeric_limits<std::uint32_t>::max()) throw ShapeError("encode_ten: extent too large");
        put_u32(out, static_cast<std::uint32_t>(d));
    }
    out.reserve(out.size() + 4 * t.size());
    for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

Tensor<float> decode_ten(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError("not a TEN1 tensor (bad magic)");
    const std::size_t rank = bytes[4];
    std::size_t off = 5;
    if (bytes.size() < off + 4 * rank) throw IoError("truncated TEN1 header");
    Shape shape(rank);
    for (std::size_t i = 0; i < rank; ++i, off += 4) shape[i] = get_u32(bytes, off);
    const std::size_t n = shape_numel(shape);
    if (bytes.size() != off + 4 * n)
        throw IoError("TEN1 payload size " + std::to_string(bytes.size() - off) + " does not match shape " +
                      shape_str(shape));
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i, off += 4) data[i] = std::bit_cast<float>(get_u32(bytes, off));
    return Tensor<float>(std::move(shape), std::move(data));
}

void save_ten(const std::filesystem::path& path, const Tensor<float>& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    auto bytes = encode_ten(t);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

Tensor<float> load_ten(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return decode_ten(bytes);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

#define PANSHARP_INSTANTIATE(T)                                                              \
    template T max_value<T>(const Tensor<T>&);                                               \
    template double sum_value<T>(const Tensor<T>&);                                          \
    template Tensor<T> stack<T>(std::span<const Tensor<T>>);                                 \
    template Tensor<T> unstack<T>(const Tensor<T>&, std::size_t);                            \
    template Tensor<T> crop<T>(const Tensor<T>&, std::size_t, std::size_t, std::size_t, std::size_t); \
    template Tensor<T> clip<T>(const Tensor<T>&, T, T);

PANSHARP_INSTANTIATE(float)
PANSHARP_INSTANTIATE(double)
#undef PANSHARP_INSTANTIATE

}  // namespace pansharp
