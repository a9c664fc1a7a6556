#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "snnforge/errors.hpp"

namespace snnforge {

std::string shape_str(const std::vector<std::size_t>& shape);
std::size_t shape_product(const std::vector<std::size_t>& shape);

// Dense row-major n-d array of doubles. All kernels in this project flow
// through this one carrier; shape is explicit and data length always equals
// the product of the extents.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> values)
        : shape_(std::move(shape)), data_(std::move(values)) {
        if (data_.size() != shape_product(shape_)) {
            throw DimensionError("tensor: data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str(shape_));
        }
    }

    static Tensor vec(std::vector<double> values) {
        std::vector<std::size_t> shape{values.size()};
        return Tensor(std::move(shape), std::move(values));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    Tensor reshaped(std::vector<std::size_t> shape) const {
        return Tensor(std::move(shape), data_);
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

inline std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw DimensionError("tensor: zero extent in shape " + shape_str(shape));
        n *= e;
    }
    return n;
}

}  // namespace snnforge
