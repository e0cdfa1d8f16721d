#pragma once
#include <Eigen/Core>
#include <cstddef>

namespace smuq {

using Index = Eigen::Index;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using MaskVector = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Half-open interval of time steps [begin, end).
struct StepRange {
    Index begin = 0;
    Index end = 0;

    Index size() const { return end - begin; }
    bool empty() const { return end <= begin; }
    bool contains(Index t) const { return t >= begin && t < end; }
    friend bool operator==(const StepRange&, const StepRange&) = default;
};

}  // namespace smuq
