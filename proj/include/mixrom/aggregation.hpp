#pragma once

#include "mixrom/dense_net.hpp"
#include "mixrom/field.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mixrom {

/// Space-dependent convex weights over n_M models: every entry in [0,1],
/// every row summing to 1.
struct WeightField {
    Eigen::MatrixXd weights; // n_dof x n_M
    std::vector<std::string> model_tags;
    MeshPtr mesh;

    Eigen::Index n_dof() const { return weights.rows(); }
    Eigen::Index n_models() const { return weights.cols(); }
};

struct EwaConfig {
    double sigma = 0.0;       // explicit value; <= 0 means "auto"
    int sigma_grid_size = 15; // log-spaced candidates for auto mode
    bool auto_sigma() const { return sigma <= 0.0; }
};

/// One aggregation-training configuration: component fields (dataset order)
/// plus the reference on the same mesh.
struct AggregationCase {
    std::vector<FieldSnapshot> components;
    FieldSnapshot reference;
};

/// Pointwise Gaussian cost exp(-(pred-ref)^2 / (2 sigma^2)); 1 where exact.
Eigen::VectorXd gaussian_cost(const FieldSnapshot& pred, const FieldSnapshot& ref,
                              double sigma);

/// Exponentially-weighted-average weights: per-dof normalization of the
/// Gaussian costs. Rows where every cost underflows fall back to uniform.
WeightField ewa_weights(const std::vector<Eigen::VectorXd>& costs,
                        const std::vector<std::string>& model_tags, const MeshPtr& mesh);

struct SigmaSelection {
    double sigma = 0.0;
    std::vector<std::pair<double, double>> trace; // (candidate, mean rel-L2 error)
};

/// Grid search for the EWA sensitivity: the candidate minimizing the mean
/// relative L2 error of the EWA-aggregated training predictions, ties broken
/// toward the larger (smoother) value. The default grid spans
/// [1e-3, 1] x pooled reference standard deviation, log-spaced.
SigmaSelection select_sigma(const std::vector<AggregationCase>& cases,
                            const std::vector<double>& grid);
std::vector<double> default_sigma_grid(const std::vector<AggregationCase>& cases,
                                       int grid_size);

/// KNN weight regression: stores the per-configuration Gaussian cost fields
/// and, at query time, averages those of the k nearest training parameters
/// (uniform weights) before row normalization.
struct KnnWeightModel {
    int k = 4;
    double sigma = 0.0;
    Eigen::MatrixXd train_params; // N x p (raw values)
    Eigen::VectorXd lo, hi;       // per-dimension normalization for distances
    std::vector<Eigen::MatrixXd> cost_fields; // per config: n_dof x n_M
    std::vector<std::string> model_tags;
    MeshPtr mesh;
};

KnnWeightModel fit_knn_weights(const std::vector<AggregationCase>& cases, int k,
                               double sigma);
WeightField predict_knn_weights(const KnnWeightModel& model, const ParameterVector& mu);

/// ANN weighting: a softmax-headed network mapping (x, y, mu) to the weight
/// row at that location. Inputs are min-max normalized per dimension over the
/// training set.
struct AnnWeightModel {
    NetSpec spec;
    NetParams params;
    Eigen::VectorXd in_lo, in_hi;
    std::vector<std::string> model_tags;
};

struct AnnWeightSettings {
    std::vector<int> hidden = {24, 24};
    Activation activation = Activation::Softplus;
    TrainConfig train;

    /// Named presets: "hills-paper", "bump-paper", "hills-desk", "bump-desk".
    static AnnWeightSettings preset(const std::string& name);
};

struct AnnTrainReport {
    std::vector<double> loss_history;
    double final_loss = 0.0;
    double uniform_loss = 0.0; // aggregated loss at uniform weights
};

struct AnnWeightResult {
    AnnWeightModel model;
    AnnTrainReport report;
};

/// Trains on one sample per (configuration, dof): the squared error of the
/// aggregated prediction against the reference, with gradients flowing only
/// through the softmax weights. Fails (DivergenceDetected) if training ends
/// worse than the uniform-weight baseline.
AnnWeightResult train_ann_weights(const std::vector<AggregationCase>& cases,
                                  const AnnWeightSettings& settings);

WeightField predict_ann_weights(const AnnWeightModel& model, const MeshPtr& mesh,
                                const ParameterVector& mu);

/// Convex combination of component fields (Eq.-style pointwise mixture);
/// result is tagged "mixed".
FieldSnapshot aggregate(const std::vector<FieldSnapshot>& fields, const WeightField& w);

void write_knn_weights(std::ostream& out, const KnnWeightModel& model);
KnnWeightModel read_knn_weights(std::istream& in, const MeshPtr& mesh);
void write_ann_weights(std::ostream& out, const AnnWeightModel& model);
AnnWeightModel read_ann_weights(std::istream& in);

} // namespace mixrom
