#include "mixrom/synth.hpp"
#include "mixrom/errors.hpp"
#include "mixrom/rng.hpp"

#include <algorithm>
#include <cmath>

namespace mixrom {

namespace {

// Vertical grading strength and bias geometry. The bubble-fill gain is sized
// so that the filling model stays attached for every admissible bubble depth
// (amplitude * kFillGain > max beta).
constexpr double kGradingGamma = 1.8;
constexpr double kWallMaskWidth = 0.12;  // vertical extent of the bubble factor
constexpr double kBiasBandWidth = 0.28;  // vertical extent of the wall-band biases
constexpr double kFillGain = 3.4;
constexpr double kPhaseSwing = 0.4;      // parameter-driven phase shift of the biases

struct CaseGeometry {
    double length = 0.0;       // streamwise extent
    double crest_scale = 0.0;  // wall profile height
    double ramp = 0.0;         // streamwise extent of each curved wall segment (hills)
    double bubble_center = 0.0;
    double bubble_width = 1.0;
    double bubble_depth = -1.0; // beta; attached when <= 0
};

double quintic_step(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

double param_by_name(const ParameterVector& p, const std::string& name) {
    for (std::size_t i = 0; i < p.names.size(); ++i) {
        if (p.names[i] == name) return p.values[static_cast<Eigen::Index>(i)];
    }
    throw OutOfRange("missing parameter '" + name + "'");
}

void check_ranges(const SynthConfig& config, const ParameterVector& params) {
    params.validate();
    if (params.size() != static_cast<Eigen::Index>(config.param_ranges.size())) {
        throw OutOfRange("expected " + std::to_string(config.param_ranges.size()) +
                         " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < config.param_ranges.size(); ++i) {
        const auto& r = config.param_ranges[i];
        const double v = params.values[static_cast<Eigen::Index>(i)];
        if (params.names[i] != r.name) {
            throw OutOfRange("parameter " + std::to_string(i) + " is named '" +
                             params.names[i] + "', expected '" + r.name + "'");
        }
        if (v < r.min || v > r.max) {
            throw OutOfRange("parameter '" + r.name + "' = " + std::to_string(v) +
                             " outside [" + std::to_string(r.min) + ", " +
                             std::to_string(r.max) + "]");
        }
    }
}

CaseGeometry case_geometry(const SynthConfig& config, const ParameterVector& params) {
    CaseGeometry g;
    switch (config.preset) {
    case SynthPreset::Hills: {
        const double alpha = param_by_name(params, "alpha");
        const double c = param_by_name(params, "c");
        g.length = 3.858 * alpha + c;
        g.crest_scale = 1.0;
        g.ramp = 1.929 * alpha;
        g.bubble_center = g.ramp + 0.30 * c;
        g.bubble_width = 0.22 * c;
        g.bubble_depth = 0.45 + 0.3 * alpha;
        break;
    }
    case SynthPreset::Bump: {
        const double h = param_by_name(params, "h_mm");
        g.length = 6.0;
        g.crest_scale = h / 150.0;
        g.ramp = 0.0;
        g.bubble_center = 3.8;
        g.bubble_width = 0.5;
        g.bubble_depth = (h - 24.0) / 30.0;
        break;
    }
    case SynthPreset::Custom:
        g.length = 9.0;
        g.crest_scale = 0.0;
        g.ramp = 0.0;
        g.bubble_center = 4.5;
        g.bubble_width = 9.0 / 8.0;
        g.bubble_depth = -1.0; // attached channel
        break;
    }
    return g;
}

double wall_height(const SynthConfig& config, const CaseGeometry& g, double x) {
    switch (config.preset) {
    case SynthPreset::Hills: {
        if (x <= g.ramp) return g.crest_scale * (1.0 - quintic_step(x / g.ramp));
        if (x >= g.length - g.ramp) {
            return g.crest_scale * quintic_step((x - (g.length - g.ramp)) / g.ramp);
        }
        return 0.0;
    }
    case SynthPreset::Bump: {
        const double u = (x - 2.0) / 1.2;
        if (std::abs(u) >= 1.0) return 0.0;
        const double q = 1.0 - u * u;
        return g.crest_scale * q * q * q;
    }
    case SynthPreset::Custom:
        return 0.0;
    }
    return 0.0;
}

/// Normalized wall distance of grid row j, identical for every column.
double graded_tau(int j, int n_y) {
    const double t = static_cast<double>(j) / static_cast<double>(n_y - 1);
    return 0.5 * (1.0 + std::tanh(kGradingGamma * (2.0 * t - 1.0)) / std::tanh(kGradingGamma));
}

double shear_profile(double tau) { return 4.0 * tau * (1.0 - tau); }

double bubble_streamwise(const CaseGeometry& g, double x) {
    const double u = (x - g.bubble_center) / g.bubble_width;
    return std::exp(-u * u);
}

double wall_mask(double tau) {
    const double u = tau / kWallMaskWidth;
    return std::exp(-u * u * u * u);
}

double reference_value(const CaseGeometry& g, double x, double tau) {
    const double bubble = (1.0 + g.bubble_depth) * bubble_streamwise(g, x) * wall_mask(tau);
    return shear_profile(tau) * (1.0 - bubble);
}

double normalized_first_param(const SynthConfig& config, const ParameterVector& params) {
    const auto& r = config.param_ranges.front();
    const double span = r.max - r.min;
    if (span <= 0) return 0.5;
    return (params.values[0] - r.min) / span;
}

} // namespace

SynthConfig SynthConfig::hills(std::uint64_t seed) {
    SynthConfig c;
    c.preset = SynthPreset::Hills;
    c.param_ranges = {{"alpha", 0.4, 1.6}, {"c", 2.0, 8.3}};
    c.seed = seed;
    return c;
}

SynthConfig SynthConfig::bump(std::uint64_t seed) {
    SynthConfig c;
    c.preset = SynthPreset::Bump;
    c.param_ranges = {{"h_mm", 13.0, 49.0}};
    c.seed = seed;
    return c;
}

SynthConfig SynthConfig::custom(std::vector<ParamRange> ranges, std::uint64_t seed) {
    SynthConfig c;
    c.preset = SynthPreset::Custom;
    c.param_ranges = std::move(ranges);
    c.seed = seed;
    return c;
}

void SynthConfig::validate() const {
    if (n_x < 4 || n_y < 4) {
        throw OutOfRange("grid resolution must be at least 4x4, got " +
                         std::to_string(n_x) + "x" + std::to_string(n_y));
    }
    if (n_models < 1) throw OutOfRange("n_models must be >= 1");
    if (bias_amplitudes.size() != static_cast<std::size_t>(n_models)) {
        throw ShapeMismatch("bias_amplitudes length " + std::to_string(bias_amplitudes.size()) +
                            " does not match n_models " + std::to_string(n_models));
    }
    if (param_ranges.empty()) throw OutOfRange("param_ranges must not be empty");
    for (const auto& r : param_ranges) {
        if (!(r.min < r.max)) {
            throw OutOfRange("parameter '" + r.name + "' has empty range");
        }
    }
}

std::vector<std::string> synth_model_tags(const SynthConfig& config) {
    static const std::vector<std::string> canonical = {"SA", "kEpsilon", "kOmega", "kOmegaSST"};
    std::vector<std::string> tags;
    tags.reserve(static_cast<std::size_t>(config.n_models));
    for (int i = 0; i < config.n_models; ++i) {
        if (config.n_models <= 4) {
            tags.push_back(canonical[static_cast<std::size_t>(i)]);
        } else {
            tags.push_back("model" + std::to_string(i));
        }
    }
    return tags;
}

double streamwise_extent(const SynthConfig& config, const ParameterVector& params) {
    check_ranges(config, params);
    return case_geometry(config, params).length;
}

Mesh generate_mesh(const SynthConfig& config, const ParameterVector& params) {
    config.validate();
    check_ranges(config, params);
    const CaseGeometry g = case_geometry(config, params);

    Mesh mesh;
    const Eigen::Index n = static_cast<Eigen::Index>(config.n_x) * config.n_y;
    mesh.x.resize(n);
    mesh.y.resize(n);
    for (int i = 0; i < config.n_x; ++i) {
        const double x = g.length * static_cast<double>(i) / (config.n_x - 1);
        const double yw = wall_height(config, g, x);
        for (int j = 0; j < config.n_y; ++j) {
            const double tau = graded_tau(j, config.n_y);
            const Eigen::Index dof = static_cast<Eigen::Index>(i) * config.n_y + j;
            mesh.x[dof] = x;
            mesh.y[dof] = yw + (kChannelHeight - yw) * tau;
        }
    }
    return mesh;
}

std::optional<double> true_reattachment(const SynthConfig& config,
                                        const ParameterVector& params) {
    config.validate();
    check_ranges(config, params);
    const CaseGeometry g = case_geometry(config, params);
    if (g.bubble_depth <= 0.0) return std::nullopt;
    return g.bubble_center + g.bubble_width * std::sqrt(std::log1p(g.bubble_depth));
}

SynthCase generate_case(const SynthConfig& config, const ParameterVector& params) {
    config.validate();
    check_ranges(config, params);
    const CaseGeometry g = case_geometry(config, params);
    const auto tags = synth_model_tags(config);

    SynthCase c;
    c.params = params;
    c.mesh = std::make_shared<Mesh>(generate_mesh(config, params));
    c.x_r_true = true_reattachment(config, params);

    const Eigen::Index n = c.mesh->n_dof();

    // Bias phases: fixed per config seed, shifted smoothly by the first
    // parameter so unseen configurations differ from training ones.
    Rng phase_rng(seed_for(config.seed, "bias-phase"));
    const double phi_f = 2.0 * M_PI * phase_rng.uniform();
    const double phi_g = 2.0 * M_PI * phase_rng.uniform();
    const double shift = kPhaseSwing * (normalized_first_param(config, params) - 0.5);

    Eigen::VectorXd ref(n), low_band(n), up_band(n), fill(n);
    for (int i = 0; i < config.n_x; ++i) {
        const double x = g.length * static_cast<double>(i) / (config.n_x - 1);
        const double gx = bubble_streamwise(g, x);
        const double arg = 2.0 * M_PI * x / g.length + shift;
        for (int j = 0; j < config.n_y; ++j) {
            const double tau = graded_tau(j, config.n_y);
            const Eigen::Index dof = static_cast<Eigen::Index>(i) * config.n_y + j;
            ref[dof] = reference_value(g, x, tau);
            const double wl = std::exp(-(tau / kBiasBandWidth) * (tau / kBiasBandWidth));
            const double wu = std::exp(-((1.0 - tau) / kBiasBandWidth) *
                                       ((1.0 - tau) / kBiasBandWidth));
            low_band[dof] = std::sin(arg + phi_f) * wl;
            up_band[dof] = std::cos(arg + phi_g) * wu;
            fill[dof] = kFillGain * shear_profile(tau) * gx * wall_mask(tau);
        }
    }

    auto make_snapshot = [&](Eigen::VectorXd values, const std::string& tag) {
        FieldSnapshot s;
        s.mesh = c.mesh;
        s.values = std::move(values);
        s.quantity = "Ux";
        s.params = params;
        s.model_tag = tag;
        return s;
    };

    c.reference = make_snapshot(ref, "reference");

    // Raw bias patterns, cycled over models: one pair concentrated near the
    // lower wall (+/- low_band) and one near the upper wall (+/- up_band).
    // The -up_band member also carries the bubble fill, which cancels the
    // reference backflow and so stays attached everywhere.
    for (int m = 0; m < config.n_models; ++m) {
        Eigen::VectorXd raw;
        switch (m % 4) {
        case 0: raw = low_band; break;
        case 1: raw = -up_band + fill; break;
        case 2: raw = up_band; break;
        default: raw = -low_band; break;
        }
        raw.array() -= raw.mean();
        Eigen::VectorXd vals = ref + config.bias_amplitudes[static_cast<std::size_t>(m)] * raw;
        c.model_fields.push_back(make_snapshot(std::move(vals), tags[static_cast<std::size_t>(m)]));
    }
    return c;
}

ParamSplit default_split(const SynthConfig& config) {
    config.validate();
    ParamSplit split;
    auto pv = [&](std::initializer_list<double> vals) {
        ParameterVector p;
        for (const auto& r : config.param_ranges) p.names.push_back(r.name);
        p.values.resize(static_cast<Eigen::Index>(vals.size()));
        Eigen::Index i = 0;
        for (double v : vals) p.values[i++] = v;
        return p;
    };

    switch (config.preset) {
    case SynthPreset::Hills: {
        for (double alpha : {0.5, 1.0, 1.5}) {
            for (double c : {2.142, 5.142, 8.142}) {
                split.rom_train.push_back(pv({alpha, c}));
            }
        }
        split.mix_train = split.rom_train;
        split.test.push_back(pv({0.75, 5.142}));
        split.test.push_back(pv({1.25, 5.142}));
        break;
    }
    case SynthPreset::Bump: {
        for (int i = 0; i < 10; ++i) {
            split.rom_train.push_back(pv({13.0 + 4.0 * i}));
        }
        split.mix_train = {pv({20.0}), pv({31.0}), pv({42.0})};
        split.test = {pv({26.0}), pv({38.0})};
        break;
    }
    case SynthPreset::Custom: {
        // Plain grid over the first one or two dimensions, remaining fixed
        // at range midpoints.
        const auto& ranges = config.param_ranges;
        auto at = [&](std::size_t dim, double frac) {
            return ranges[dim].min + frac * (ranges[dim].max - ranges[dim].min);
        };
        auto full = [&](double f0, double f1) {
            ParameterVector p;
            p.values.resize(static_cast<Eigen::Index>(ranges.size()));
            for (std::size_t d = 0; d < ranges.size(); ++d) {
                p.names.push_back(ranges[d].name);
                const double frac = (d == 0) ? f0 : (d == 1 ? f1 : 0.5);
                p.values[static_cast<Eigen::Index>(d)] = at(d, frac);
            }
            return p;
        };
        for (double f0 : {0.1, 0.5, 0.9}) {
            if (ranges.size() >= 2) {
                for (double f1 : {0.1, 0.5, 0.9}) split.rom_train.push_back(full(f0, f1));
            } else {
                split.rom_train.push_back(full(f0, 0.5));
            }
        }
        split.mix_train = split.rom_train;
        split.test = {full(0.3, 0.5), full(0.7, 0.5)};
        break;
    }
    }
    return split;
}

} // namespace mixrom
