#pragma once

#include "mixrom/field.hpp"

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

namespace mixrom {

enum class RbfKernel { ThinPlate, Gaussian, Multiquadric };

RbfKernel rbf_kernel_from_string(const std::string& name);
std::string to_string(RbfKernel kernel);

/// Radial basis function interpolant from parameter space to latent space.
/// Centers are normalized to [0,1] per dimension before any distance is
/// taken. Thin-plate uses a linear polynomial tail with the usual moment
/// constraints; the other kernels interpolate without a tail.
struct RbfModel {
    RbfKernel kernel = RbfKernel::ThinPlate;
    double shape_epsilon = 1.0; // ignored for thin-plate
    Eigen::MatrixXd centers;    // N x p, normalized
    Eigen::VectorXd lo, hi;     // per-dimension normalization bounds
    Eigen::MatrixXd coefficients; // N x r
    Eigen::MatrixXd tail;         // (p+1) x r, thin-plate only (empty otherwise)
    double solve_residual = 0.0;

    Eigen::Index n_centers() const { return centers.rows(); }
    Eigen::Index dim() const { return centers.cols(); }
    Eigen::Index latent_dim() const { return coefficients.cols(); }
};

RbfModel rbf_fit(const Eigen::MatrixXd& points, const Eigen::MatrixXd& values,
                 RbfKernel kernel = RbfKernel::ThinPlate, double shape_epsilon = 1.0);

RbfModel rbf_fit(const std::vector<ParameterVector>& points, const Eigen::MatrixXd& values,
                 RbfKernel kernel = RbfKernel::ThinPlate, double shape_epsilon = 1.0);

Eigen::VectorXd rbf_predict(const RbfModel& model, const Eigen::VectorXd& point);

void write_rbf(std::ostream& out, const RbfModel& model);
RbfModel read_rbf(std::istream& in);

} // namespace mixrom
