#ifndef EFPRUNE_TENSOR_HPP
#define EFPRUNE_TENSOR_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "efprune/errors.hpp"

namespace efprune {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

// Dense row-major n-dimensional array. Storage is a flat Eigen vector so that
// whole-tensor arithmetic stays expression-friendly.
template <typename Scalar>
class Tensor {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MatrixMap = Eigen::Map<Matrix>;
    using ConstMatrixMap = Eigen::Map<const Matrix>;

    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        check_extents(shape_);
        data_ = Vector::Zero(shape_size(shape_));
    }

    Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents(shape_);
        if (shape_size(shape_) != data_.size())
            throw DimensionError("", "tensor data length " + std::to_string(data_.size()) +
                                         " does not match shape " + shape_string(shape_));
    }

    Tensor(std::initializer_list<Index> shape) : Tensor(Shape(shape)) {}

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor constant(Shape shape, Scalar value) {
        Tensor t(std::move(shape));
        t.data_.setConstant(value);
        return t;
    }

    static Tensor from_values(Shape shape, const std::vector<Scalar>& values) {
        Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
        return Tensor(std::move(shape), std::move(v));
    }

    const Shape& shape() const noexcept { return shape_; }
    Index dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t rank() const noexcept { return shape_.size(); }
    Index size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return shape_.empty(); }

    Vector& data() noexcept { return data_; }
    const Vector& data() const noexcept { return data_; }
    Scalar* ptr() noexcept { return data_.data(); }
    const Scalar* ptr() const noexcept { return data_.data(); }

    Scalar& operator[](Index i) { return data_[i]; }
    Scalar operator[](Index i) const { return data_[i]; }

    Scalar& at(Index i0, Index i1) { return data_[i0 * shape_[1] + i1]; }
    Scalar at(Index i0, Index i1) const { return data_[i0 * shape_[1] + i1]; }
    Scalar& at(Index i0, Index i1, Index i2, Index i3) {
        return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
    }
    Scalar at(Index i0, Index i1, Index i2, Index i3) const {
        return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
    }

    // View as [dim0, rest] matrix; for a conv weight this is one filter per row.
    MatrixMap rows() { return MatrixMap(data_.data(), shape_.at(0), data_.size() / shape_.at(0)); }
    ConstMatrixMap rows() const {
        return ConstMatrixMap(data_.data(), shape_.at(0), data_.size() / shape_.at(0));
    }

    // Slab of entries belonging to leading index i (e.g. filter n of a conv weight).
    auto slab(Index i) { return data_.segment(i * (data_.size() / shape_.at(0)), data_.size() / shape_.at(0)); }
    auto slab(Index i) const {
        return data_.segment(i * (data_.size() / shape_.at(0)), data_.size() / shape_.at(0));
    }

    void set_zero() { data_.setZero(); }

    bool all_finite() const { return data_.allFinite(); }

    template <typename Other>
    Tensor<Other> cast() const {
        return Tensor<Other>(shape_, data_.template cast<Other>());
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    static void check_extents(const Shape& shape) {
        for (Index e : shape)
            if (e < 1) throw DimensionError("", "tensor extents must be >= 1, got " + shape_string(shape));
    }

    Shape shape_;
    Vector data_;
};

} // namespace efprune

#endif // EFPRUNE_TENSOR_HPP
