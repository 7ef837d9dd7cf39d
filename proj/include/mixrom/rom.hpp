#pragma once

#include "mixrom/dense_net.hpp"
#include "mixrom/field.hpp"
#include "mixrom/rbf.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mixrom {

enum class ScalerMode { MinMax, Standard, None };

/// Global (whole-matrix) scaling applied to snapshot values before training.
struct FieldScaler {
    ScalerMode mode = ScalerMode::MinMax;
    double a = 0.0; // min (minmax) or mean (standard)
    double b = 1.0; // max (minmax) or stddev (standard)

    static FieldScaler fit(ScalerMode mode, const Eigen::MatrixXd& data);
    Eigen::MatrixXd transform(const Eigen::MatrixXd& data) const;
    Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& data) const;
};

struct Autoencoder {
    NetSpec encoder_spec;
    NetParams encoder;
    NetSpec decoder_spec;
    NetParams decoder;
    FieldScaler scaler;

    int latent_dim() const { return encoder_spec.output_width(); }
    Eigen::MatrixXd encode(const Eigen::MatrixXd& fields) const;  // raw -> latent
    Eigen::MatrixXd decode(const Eigen::MatrixXd& latents) const; // latent -> raw
};

/// Architecture and training settings of one reduced model.
struct RomSettings {
    std::vector<int> encoder_hidden = {40, 16}; // between n_dof and latent
    int latent_dim = 3;
    Activation activation = Activation::Softplus;
    TrainConfig train;
    RbfKernel kernel = RbfKernel::ThinPlate;
    double shape_epsilon = 1.0;
    ScalerMode scaler = ScalerMode::MinMax;

    /// Named presets: "hills-paper", "bump-paper", "hills-desk", "bump-desk".
    static RomSettings preset(const std::string& name);
};

struct ReconstructionReport {
    std::vector<double> per_snapshot_relative_l2;
    double max_relative_l2 = 0.0;
    double mean_relative_l2 = 0.0;
    std::vector<double> loss_history;
};

struct AutoencoderResult {
    Autoencoder ae;
    ReconstructionReport report;
};

AutoencoderResult train_autoencoder(const SnapshotMatrix& snapshots,
                                    const RomSettings& settings);

/// Non-intrusive reduced model: autoencoder + parameter-to-latent map.
struct Rom {
    Autoencoder ae;
    RbfModel rbf;
    std::vector<ParameterVector> training_params;
    MeshPtr mesh_ref;
    std::string quantity = "Ux";
    std::string source_tag; // tag of the snapshots the ROM was trained on
    ReconstructionReport report;
};

Rom build_rom(const std::vector<FieldSnapshot>& snapshots, const RomSettings& settings);

FieldSnapshot rom_predict(const Rom& rom, const ParameterVector& mu);

void write_rom(std::ostream& out, const Rom& rom);
Rom read_rom(std::istream& in, const MeshPtr& mesh);

} // namespace mixrom
