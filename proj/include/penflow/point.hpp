#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace penflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline void require_finite(const Vec& x, const char* what) {
    if (!x.allFinite())
        throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

inline void require_dim(const Vec& x, Eigen::Index n, const char* what) {
    if (x.size() != n)
        throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                    std::to_string(n) + ", got " + std::to_string(x.size()));
}

}  // namespace penflow
