#pragma once

#include <Eigen/Core>

#include "mfnuts/random.hpp"

namespace mfnuts {

// n stratified points in the box [lower, upper]; one point per stratum and
// per dimension, strata shuffled independently per dimension.
Eigen::MatrixXd latin_hypercube(int n, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                RandomStream& rng);

// n iid uniform points in the box.
Eigen::MatrixXd uniform_box(int n, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                            RandomStream& rng);

}  // namespace mfnuts
