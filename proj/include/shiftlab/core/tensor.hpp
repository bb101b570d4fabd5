#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "shiftlab/core/error.hpp"

namespace shiftlab {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

inline Eigen::Index shape_numel(const Shape& s) {
    Eigen::Index n = 1;
    for (int d : s) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

/// Dense N-dimensional array, row-major, backed by a flat Eigen array.
///
/// Scalar is float for training and double for gradient checking; every
/// operation in ops.hpp is templated on it.
template <typename Scalar>
class Tensor {
public:
    using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    using MatrixMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstMatrixMap =
        Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        data_ = Storage::Zero(shape_numel(shape_));
    }

    Tensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_numel(shape_))
            throw ShapeError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    Tensor(Shape shape, std::initializer_list<Scalar> values)
        : Tensor(std::move(shape), Storage::Map(values.begin(), static_cast<Eigen::Index>(values.size()))) {}

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, Scalar value) {
        Tensor t(std::move(shape));
        t.data_.setConstant(value);
        return t;
    }

    static Tensor scalar(Scalar value) { return full({1}, value); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    Eigen::Index numel() const { return data_.size(); }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    Storage& array() { return data_; }
    const Storage& array() const { return data_; }

    Scalar& operator[](Eigen::Index i) { return data_[i]; }
    Scalar operator[](Eigen::Index i) const { return data_[i]; }

    /// 4-D accessor (N,C,H,W); callers are responsible for rank.
    Scalar& at(int n, int c, int y, int x) {
        return data_[((static_cast<Eigen::Index>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    Scalar at(int n, int c, int y, int x) const {
        return data_[((static_cast<Eigen::Index>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    Scalar& at(int r, int c) { return data_[static_cast<Eigen::Index>(r) * shape_[1] + c]; }
    Scalar at(int r, int c) const { return data_[static_cast<Eigen::Index>(r) * shape_[1] + c]; }

    /// Same storage reinterpreted under a new shape (copies the flat data).
    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != numel())
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        return Tensor(std::move(shape), data_);
    }

    /// View of the flat buffer as a rows x cols row-major matrix.
    MatrixMap matrix(Eigen::Index rows, Eigen::Index cols) {
        return MatrixMap(data_.data(), rows, cols);
    }
    ConstMatrixMap matrix(Eigen::Index rows, Eigen::Index cols) const {
        return ConstMatrixMap(data_.data(), rows, cols);
    }

    bool all_finite() const { return data_.isFinite().all(); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    template <typename Other>
    Tensor<Other> cast() const {
        typename Tensor<Other>::Storage d = data_.template cast<Other>();
        return Tensor<Other>(shape_, std::move(d));
    }

private:
    Shape shape_;
    Storage data_;
};

template <typename Scalar>
void require_shape(const Tensor<Scalar>& t, const Shape& want, const char* who) {
    if (t.shape() != want)
        throw ShapeError(std::string(who) + ": expected shape " + shape_str(want) + ", got " +
                         shape_str(t.shape()));
}

template <typename Scalar>
void require_rank(const Tensor<Scalar>& t, int rank, const char* who) {
    if (t.rank() != rank)
        throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
}

template <typename Scalar>
void require_finite(const Tensor<Scalar>& t, const char* who) {
    if (!t.all_finite())
        throw NumericsError(std::string(who) + ": non-finite values in tensor " + shape_str(t.shape()));
}

}  // namespace shiftlab
