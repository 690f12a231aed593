#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace multilink {

using Scalar = double;
using Index = Eigen::Index;

using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using CountVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using CountMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

} // namespace multilink
