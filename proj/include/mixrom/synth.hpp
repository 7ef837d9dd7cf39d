#pragma once

#include "mixrom/field.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mixrom {

enum class SynthPreset { Hills, Bump, Custom };

struct ParamRange {
    std::string name;
    double min = 0.0;
    double max = 1.0;
};

/// Configuration of the deterministic multi-model flow-field family.
///
/// The family provides, for every admissible parameter vector:
///   - a tensor-product channel mesh whose lower wall follows a smooth
///     hill/bump profile, vertically graded toward both walls;
///   - an analytic reference field: a wall-bounded shear profile times a
///     separation-bubble factor whose closure abscissa has a closed form;
///   - n_models biased component fields ref + A_i * b_i with smooth,
///     zero-mean, sign-complementary biases, each concentrated in its own
///     part of the domain, so that some convex combination of the component
///     fields is strictly better than any single one.
struct SynthConfig {
    SynthPreset preset = SynthPreset::Hills;
    int n_x = 64;
    int n_y = 48;
    std::vector<ParamRange> param_ranges;
    int n_models = 4;
    std::vector<double> bias_amplitudes = {0.40, 0.30, 0.35, 0.25};
    std::uint64_t seed = 0;

    static SynthConfig hills(std::uint64_t seed = 0);
    static SynthConfig bump(std::uint64_t seed = 0);
    static SynthConfig custom(std::vector<ParamRange> ranges, std::uint64_t seed = 0);

    void validate() const;
};

/// One generated configuration: reference + component fields on a shared mesh.
struct SynthCase {
    ParameterVector params;
    MeshPtr mesh;
    FieldSnapshot reference;
    std::vector<FieldSnapshot> model_fields;
    std::optional<double> x_r_true;
};

/// Default train/test parameter layout of each preset.
struct ParamSplit {
    std::vector<ParameterVector> rom_train; // component-model snapshots exist here
    std::vector<ParameterVector> mix_train; // references exist here (subset or equal)
    std::vector<ParameterVector> test;      // references exist here as well
};

/// Component model tags, in dataset order.
std::vector<std::string> synth_model_tags(const SynthConfig& config);

Mesh generate_mesh(const SynthConfig& config, const ParameterVector& params);
SynthCase generate_case(const SynthConfig& config, const ParameterVector& params);

/// Closed-form reattachment abscissa of the reference field; absent in the
/// attached regime.
std::optional<double> true_reattachment(const SynthConfig& config,
                                        const ParameterVector& params);

ParamSplit default_split(const SynthConfig& config);

/// Streamwise extent of the channel for the given parameters.
double streamwise_extent(const SynthConfig& config, const ParameterVector& params);

/// Channel height, fixed across presets (crest-height units).
inline constexpr double kChannelHeight = 3.036;

} // namespace mixrom
