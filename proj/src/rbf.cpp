#include "mixrom/rbf.hpp"
#include "mixrom/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace mixrom {

namespace {

double kernel_value(RbfKernel kernel, double r, double eps) {
    switch (kernel) {
    case RbfKernel::ThinPlate:
        return (r > 0.0) ? r * r * std::log(r) : 0.0;
    case RbfKernel::Gaussian:
        return std::exp(-(eps * r) * (eps * r));
    case RbfKernel::Multiquadric:
        return std::sqrt(1.0 + (eps * r) * (eps * r));
    }
    return 0.0;
}

Eigen::MatrixXd normalize_points(const Eigen::MatrixXd& pts, const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi) {
    Eigen::MatrixXd out(pts.rows(), pts.cols());
    for (Eigen::Index d = 0; d < pts.cols(); ++d) {
        const double span = hi[d] - lo[d];
        if (span > 0.0) {
            out.col(d) = (pts.col(d).array() - lo[d]) / span;
        } else {
            out.col(d).setZero();
        }
    }
    return out;
}

} // namespace

RbfKernel rbf_kernel_from_string(const std::string& name) {
    if (name == "thin_plate") return RbfKernel::ThinPlate;
    if (name == "gaussian") return RbfKernel::Gaussian;
    if (name == "multiquadric") return RbfKernel::Multiquadric;
    throw ConfigError("unknown RBF kernel '" + name + "'");
}

std::string to_string(RbfKernel kernel) {
    switch (kernel) {
    case RbfKernel::ThinPlate: return "thin_plate";
    case RbfKernel::Gaussian: return "gaussian";
    case RbfKernel::Multiquadric: return "multiquadric";
    }
    return "?";
}

RbfModel rbf_fit(const Eigen::MatrixXd& points, const Eigen::MatrixXd& values,
                 RbfKernel kernel, double shape_epsilon) {
    if (points.rows() == 0) throw EmptyInput("rbf_fit: no centers");
    if (values.rows() != points.rows()) {
        throw ShapeMismatch("rbf_fit: " + std::to_string(points.rows()) + " centers vs " +
                            std::to_string(values.rows()) + " value rows");
    }
    if (shape_epsilon <= 0.0 && kernel != RbfKernel::ThinPlate) {
        throw OutOfRange("rbf_fit: shape_epsilon must be positive");
    }

    RbfModel model;
    model.kernel = kernel;
    model.shape_epsilon = shape_epsilon;
    model.lo = points.colwise().minCoeff();
    model.hi = points.colwise().maxCoeff();
    model.centers = normalize_points(points, model.lo, model.hi);

    const Eigen::Index n = model.centers.rows();
    const Eigen::Index p = model.centers.cols();

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if ((model.centers.row(i) - model.centers.row(j)).norm() < 1e-12) {
                throw SingularSystem("rbf_fit: centers " + std::to_string(i) + " and " +
                                     std::to_string(j) + " coincide after normalization");
            }
        }
    }

    Eigen::MatrixXd phi(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        phi(i, i) = kernel_value(kernel, 0.0, shape_epsilon);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double r = (model.centers.row(i) - model.centers.row(j)).norm();
            phi(i, j) = phi(j, i) = kernel_value(kernel, r, shape_epsilon);
        }
    }

    const bool with_tail = (kernel == RbfKernel::ThinPlate);
    const Eigen::Index m = with_tail ? n + p + 1 : n;
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, values.cols());
    system.topLeftCorner(n, n) = phi;
    rhs.topRows(n) = values;
    if (with_tail) {
        Eigen::MatrixXd poly(n, p + 1);
        poly.col(0).setOnes();
        poly.rightCols(p) = model.centers;
        system.block(0, n, n, p + 1) = poly;
        system.block(n, 0, p + 1, n) = poly.transpose();
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible()) {
        const Eigen::VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
        const double cond = (diag.minCoeff() > 0.0) ? diag.maxCoeff() / diag.minCoeff()
                                                    : std::numeric_limits<double>::infinity();
        throw SingularSystem("rbf_fit: interpolation system is singular "
                             "(pivot-ratio estimate " + std::to_string(cond) + ")");
    }
    const Eigen::MatrixXd sol = lu.solve(rhs);
    model.solve_residual = (system * sol - rhs).norm();
    model.coefficients = sol.topRows(n);
    if (with_tail) model.tail = sol.bottomRows(p + 1);
    return model;
}

RbfModel rbf_fit(const std::vector<ParameterVector>& points, const Eigen::MatrixXd& values,
                 RbfKernel kernel, double shape_epsilon) {
    if (points.empty()) throw EmptyInput("rbf_fit: no centers");
    const Eigen::Index p = points.front().size();
    Eigen::MatrixXd mat(static_cast<Eigen::Index>(points.size()), p);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != p) throw ShapeMismatch("rbf_fit: mixed parameter dimensions");
        mat.row(static_cast<Eigen::Index>(i)) = points[i].values.transpose();
    }
    return rbf_fit(mat, values, kernel, shape_epsilon);
}

Eigen::VectorXd rbf_predict(const RbfModel& model, const Eigen::VectorXd& point) {
    if (point.size() != model.dim()) {
        throw ShapeMismatch("rbf_predict: query dimension " + std::to_string(point.size()) +
                            ", model dimension " + std::to_string(model.dim()));
    }
    Eigen::VectorXd q(model.dim());
    for (Eigen::Index d = 0; d < model.dim(); ++d) {
        const double span = model.hi[d] - model.lo[d];
        q[d] = (span > 0.0) ? (point[d] - model.lo[d]) / span : 0.0;
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(model.latent_dim());
    for (Eigen::Index j = 0; j < model.n_centers(); ++j) {
        const double r = (model.centers.row(j).transpose() - q).norm();
        out += kernel_value(model.kernel, r, model.shape_epsilon) *
               model.coefficients.row(j).transpose();
    }
    if (model.tail.size() > 0) {
        out += model.tail.row(0).transpose();
        for (Eigen::Index d = 0; d < model.dim(); ++d) {
            out += q[d] * model.tail.row(d + 1).transpose();
        }
    }
    return out;
}

void write_rbf(std::ostream& out, const RbfModel& model) {
    const char magic[4] = {'M', 'R', 'B', 'F'};
    out.write(magic, 4);
    const char version = 1;
    out.write(&version, 1);
    const auto kern = static_cast<char>(model.kernel);
    out.write(&kern, 1);
    auto write_mat = [&out](const Eigen::MatrixXd& m) {
        const std::uint32_t r = static_cast<std::uint32_t>(m.rows());
        const std::uint32_t c = static_cast<std::uint32_t>(m.cols());
        out.write(reinterpret_cast<const char*>(&r), sizeof(r));
        out.write(reinterpret_cast<const char*>(&c), sizeof(c));
        out.write(reinterpret_cast<const char*>(m.data()),
                  static_cast<std::streamsize>(sizeof(double) * m.size()));
    };
    out.write(reinterpret_cast<const char*>(&model.shape_epsilon), sizeof(double));
    out.write(reinterpret_cast<const char*>(&model.solve_residual), sizeof(double));
    write_mat(model.centers);
    write_mat(model.lo);
    write_mat(model.hi);
    write_mat(model.coefficients);
    write_mat(model.tail);
    if (!out) throw IoError("write_rbf: stream failure");
}

RbfModel read_rbf(std::istream& in) {
    char magic[4], version, kern;
    if (!in.read(magic, 4) || std::memcmp(magic, "MRBF", 4) != 0) {
        throw FormatError("read_rbf: bad magic");
    }
    in.read(&version, 1);
    if (version != 1) throw FormatError("read_rbf: unsupported version");
    in.read(&kern, 1);
    RbfModel model;
    model.kernel = static_cast<RbfKernel>(kern);
    auto read_mat = [&in]() {
        std::uint32_t r = 0, c = 0;
        in.read(reinterpret_cast<char*>(&r), sizeof(r));
        in.read(reinterpret_cast<char*>(&c), sizeof(c));
        if (!in || r > (1u << 24) || c > (1u << 24)) {
            throw FormatError("read_rbf: bad matrix header");
        }
        Eigen::MatrixXd m(r, c);
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!in) throw FormatError("read_rbf: truncated matrix");
        return m;
    };
    in.read(reinterpret_cast<char*>(&model.shape_epsilon), sizeof(double));
    in.read(reinterpret_cast<char*>(&model.solve_residual), sizeof(double));
    model.centers = read_mat();
    Eigen::MatrixXd lo = read_mat(), hi = read_mat();
    model.lo = lo.col(0);
    model.hi = hi.col(0);
    model.coefficients = read_mat();
    model.tail = read_mat();
    return model;
}

} // namespace mixrom
