#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beacon/error.hpp"

namespace beacon::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out.empty() ? "scalar" : out;
}

// Dense row-major tensor. Storage is aligned to Eigen's maximum alignment so
// vectorised reductions peel the same way on every allocation, which keeps
// results bit-reproducible across runs.
template <typename T>
class Tensor {
public:
    using Storage = std::vector<T, Eigen::aligned_allocator<T>>;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
    Tensor(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) { check_size(); }
    Tensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) { check_size(); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    // Copy of the values as a plain vector.
    std::vector<T> storage() const { return {data_.begin(), data_.end()}; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape shape) const& {
        if (shape_size(shape) != data_.size()) {
            fail(ErrorKind::Shape, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
        }
        return Tensor(std::move(shape), data_);
    }
    Tensor reshaped(Shape shape) && {
        if (shape_size(shape) != data_.size()) {
            fail(ErrorKind::Shape, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
        }
        return Tensor(std::move(shape), std::move(data_));
    }

    bool all_finite() const {
        for (const T& v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

private:
    void check_size() const {
        if (data_.size() != shape_size(shape_)) {
            fail(ErrorKind::Shape, "tensor data of size " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
        }
    }

    Shape shape_;
    Storage data_;
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
MatrixMap<T> as_matrix(T* data, std::size_t rows, std::size_t cols) {
    return MatrixMap<T>(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
template <typename T>
ConstMatrixMap<T> as_matrix(const T* data, std::size_t rows, std::size_t cols) {
    return ConstMatrixMap<T>(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline void expect_shape(bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::Shape, what);
}

}  // namespace beacon::nn
