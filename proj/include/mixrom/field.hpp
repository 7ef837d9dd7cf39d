#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace mixrom {

/// Ordered, named physical/geometric parameters of one configuration.
struct ParameterVector {
    std::vector<std::string> names;
    Eigen::VectorXd values;

    ParameterVector() = default;
    ParameterVector(std::vector<std::string> n, Eigen::VectorXd v)
        : names(std::move(n)), values(std::move(v)) {}

    Eigen::Index size() const { return values.size(); }
    void validate() const; // throws ShapeMismatch / FormatError
    bool same_values(const ParameterVector& other) const;
};

/// Point cloud with coordinates in crest-height units. The dof count is
/// fixed across all meshes of one study; only coordinates move.
struct Mesh {
    Eigen::VectorXd x;
    Eigen::VectorXd y;

    Eigen::Index n_dof() const { return x.size(); }
    void validate() const;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// One scalar field over a mesh, tagged with its parameters and source model.
struct FieldSnapshot {
    MeshPtr mesh;
    Eigen::VectorXd values;
    std::string quantity = "Ux";
    ParameterVector params;
    std::string model_tag;

    Eigen::Index n_dof() const { return values.size(); }
    void validate() const;
};

/// Column-stacked snapshots: n_dof x N, one parameter vector per column.
struct SnapshotMatrix {
    Eigen::MatrixXd columns;
    std::vector<ParameterVector> params;

    Eigen::Index n_dof() const { return columns.rows(); }
    Eigen::Index n_snapshots() const { return columns.cols(); }
};

SnapshotMatrix assemble_matrix(const std::vector<FieldSnapshot>& snapshots);

enum class SnapshotFormat { Text, Binary };

/// Round-trip lossless persistence. Text files carry a key:value header and
/// "x y value" rows printed with 17 significant digits; the binary variant
/// (magic "MROM") stores raw little-endian float64 triplets. Format is
/// sniffed on load.
void save_snapshot(const FieldSnapshot& s, const std::string& path,
                   SnapshotFormat format = SnapshotFormat::Text);
FieldSnapshot load_snapshot(const std::string& path);

struct InterpOptions {
    int k_neighbors = 4;
    double extrapolation_margin = 1e-6; // relative to source bounding-box diagonal
};

/// Inverse-distance-weighted interpolation from the k nearest source points.
/// Exact when a target point coincides with a source point; distance ties at
/// the k-th neighbor are all included so symmetric stencils stay symmetric.
FieldSnapshot interpolate_to_mesh(const FieldSnapshot& source, const MeshPtr& target,
                                  const InterpOptions& opts = {});

/// Point-sample a field at arbitrary locations with the same IDW rule.
Eigen::VectorXd sample_field(const FieldSnapshot& source,
                             const Eigen::VectorXd& xs, const Eigen::VectorXd& ys,
                             const InterpOptions& opts = {});

/// FNV-1a over the raw coordinate bytes; used to validate that a serialized
/// model is applied to the mesh it was trained on.
std::uint64_t mesh_hash(const Mesh& mesh);

} // namespace mixrom
