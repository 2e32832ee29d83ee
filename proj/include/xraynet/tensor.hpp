#pragma once

#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "xraynet/errors.hpp"

namespace xraynet {

// Dense N-dimensional array in row-major order. Immutable by convention once
// handed to a tape; the optimizer mutates parameters through exclusive access.
template <typename T>
class TensorT {
  public:
    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> shape, T fill = T{0})
        : shape_(std::move(shape)), data_(checkedSize(shape_), fill) {}

    TensorT(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        const std::size_t expected = checkedSize(shape_);
        if (data_.size() != expected) {
            std::ostringstream msg;
            msg << "buffer length " << data_.size() << " does not match shape product "
                << expected;
            throw ShapeError(msg.str());
        }
    }

    static TensorT zerosLike(const TensorT& other) { return TensorT(other.shape_); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    bool sameShape(const TensorT& other) const { return shape_ == other.shape_; }

    TensorT reshape(std::vector<std::size_t> newShape) const {
        const std::size_t expected = checkedSize(newShape);
        if (expected != data_.size()) {
            std::ostringstream msg;
            msg << "cannot reshape " << size() << " elements to shape product " << expected;
            throw ShapeError(msg.str());
        }
        TensorT out;
        out.shape_ = std::move(newShape);
        out.data_ = data_;
        return out;
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) {
            out[i] = static_cast<U>(data_[i]);
        }
        return out;
    }

    std::string shapeString() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            os << (i ? "," : "") << shape_[i];
        }
        os << "]";
        return os.str();
    }

  private:
    static std::size_t checkedSize(const std::vector<std::size_t>& shape) {
        if (shape.empty()) {
            throw ShapeError("tensor shape must be nonempty");
        }
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d < 1) {
                throw ShapeError("tensor dimensions must be >= 1");
            }
            n *= d;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace xraynet
