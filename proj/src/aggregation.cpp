#include "mixrom/aggregation.hpp"
#include "mixrom/errors.hpp"
#include "mixrom/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

namespace mixrom {

namespace {

void check_same_mesh(const FieldSnapshot& a, const FieldSnapshot& b, const char* what) {
    if (a.n_dof() != b.n_dof()) {
        throw ShapeMismatch(std::string(what) + ": dof counts differ (" +
                            std::to_string(a.n_dof()) + " vs " + std::to_string(b.n_dof()) + ")");
    }
}

void check_cases(const std::vector<AggregationCase>& cases) {
    if (cases.empty()) throw EmptyInput("no aggregation training cases");
    const std::size_t n_m = cases.front().components.size();
    if (n_m == 0) throw EmptyInput("aggregation case without component fields");
    for (const auto& c : cases) {
        if (c.components.size() != n_m) {
            throw ShapeMismatch("aggregation cases with differing model counts");
        }
        for (const auto& f : c.components) check_same_mesh(f, c.reference, "aggregation case");
    }
}

std::vector<std::string> case_tags(const AggregationCase& c) {
    std::vector<std::string> tags;
    tags.reserve(c.components.size());
    for (const auto& f : c.components) tags.push_back(f.model_tag);
    return tags;
}

constexpr double kCostFloor = 1e-300;

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& costs) {
    Eigen::MatrixXd w(costs.rows(), costs.cols());
    const double uniform = 1.0 / static_cast<double>(costs.cols());
    for (Eigen::Index i = 0; i < costs.rows(); ++i) {
        const double sum = costs.row(i).sum();
        if (sum < kCostFloor) {
            w.row(i).setConstant(uniform);
        } else {
            w.row(i) = costs.row(i) / sum;
        }
    }
    return w;
}

} // namespace

Eigen::VectorXd gaussian_cost(const FieldSnapshot& pred, const FieldSnapshot& ref,
                              double sigma) {
    check_same_mesh(pred, ref, "gaussian_cost");
    if (!(sigma > 0.0)) {
        throw NonPositiveSigma("gaussian_cost: sigma must be positive, got " +
                               std::to_string(sigma));
    }
    const Eigen::ArrayXd diff = (pred.values - ref.values).array();
    return (-(diff * diff) / (2.0 * sigma * sigma)).exp();
}

WeightField ewa_weights(const std::vector<Eigen::VectorXd>& costs,
                        const std::vector<std::string>& model_tags, const MeshPtr& mesh) {
    if (costs.empty()) throw EmptyInput("ewa_weights: no cost fields");
    const Eigen::Index n = costs.front().size();
    Eigen::MatrixXd c(n, static_cast<Eigen::Index>(costs.size()));
    for (std::size_t m = 0; m < costs.size(); ++m) {
        if (costs[m].size() != n) throw ShapeMismatch("ewa_weights: cost field length mismatch");
        if ((costs[m].array() < 0.0).any()) {
            throw OutOfRange("ewa_weights: negative cost entry");
        }
        c.col(static_cast<Eigen::Index>(m)) = costs[m];
    }
    WeightField w;
    w.weights = normalize_rows(c);
    w.model_tags = model_tags;
    w.mesh = mesh;
    return w;
}

std::vector<double> default_sigma_grid(const std::vector<AggregationCase>& cases,
                                       int grid_size) {
    check_cases(cases);
    if (grid_size < 1) throw EmptyGrid("sigma grid size must be >= 1");
    // Pooled standard deviation of the reference fields.
    double sum = 0.0, sum2 = 0.0;
    long count = 0;
    for (const auto& c : cases) {
        sum += c.reference.values.sum();
        sum2 += c.reference.values.squaredNorm();
        count += c.reference.values.size();
    }
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(sum2 / static_cast<double>(count) - mean * mean, 1e-30);
    const double scale = std::sqrt(var);
    std::vector<double> grid(static_cast<std::size_t>(grid_size));
    if (grid_size == 1) {
        grid[0] = scale;
        return grid;
    }
    const double lo = std::log(1e-3), hi = std::log(1.0);
    for (int i = 0; i < grid_size; ++i) {
        const double t = static_cast<double>(i) / (grid_size - 1);
        grid[static_cast<std::size_t>(i)] = scale * std::exp(lo + t * (hi - lo));
    }
    return grid;
}

SigmaSelection select_sigma(const std::vector<AggregationCase>& cases,
                            const std::vector<double>& grid) {
    check_cases(cases);
    if (grid.empty()) throw EmptyGrid("select_sigma: empty candidate grid");

    SigmaSelection sel;
    double best_err = std::numeric_limits<double>::infinity();
    for (double sigma : grid) {
        double err_sum = 0.0;
        for (const auto& c : cases) {
            std::vector<Eigen::VectorXd> costs;
            costs.reserve(c.components.size());
            for (const auto& f : c.components) {
                costs.push_back(gaussian_cost(f, c.reference, sigma));
            }
            const WeightField w = ewa_weights(costs, case_tags(c), c.reference.mesh);
            const FieldSnapshot mixed = aggregate(c.components, w);
            const double ref_norm = c.reference.values.norm();
            if (ref_norm <= 0.0) throw ZeroReference("select_sigma: zero reference field");
            err_sum += (mixed.values - c.reference.values).norm() / ref_norm;
        }
        const double err = err_sum / static_cast<double>(cases.size());
        sel.trace.emplace_back(sigma, err);
        if (err < best_err || (err == best_err && sigma > sel.sigma)) {
            best_err = err;
            sel.sigma = sigma;
        }
    }
    return sel;
}

// ---------------------------------------------------------------------------
// KNN weighting
// ---------------------------------------------------------------------------

KnnWeightModel fit_knn_weights(const std::vector<AggregationCase>& cases, int k,
                               double sigma) {
    check_cases(cases);
    if (k < 1) throw KTooLarge("fit_knn_weights: k must be >= 1");
    if (k > static_cast<int>(cases.size())) {
        throw KTooLarge("fit_knn_weights: k = " + std::to_string(k) + " exceeds " +
                        std::to_string(cases.size()) + " training configurations");
    }
    KnnWeightModel model;
    model.k = k;
    model.sigma = sigma;
    model.model_tags = case_tags(cases.front());
    model.mesh = cases.front().reference.mesh;

    const Eigen::Index p = cases.front().reference.params.size();
    model.train_params.resize(static_cast<Eigen::Index>(cases.size()), p);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (cases[i].reference.params.size() != p) {
            throw ShapeMismatch("fit_knn_weights: mixed parameter dimensions");
        }
        model.train_params.row(static_cast<Eigen::Index>(i)) =
            cases[i].reference.params.values.transpose();
        Eigen::MatrixXd costs(cases[i].reference.n_dof(),
                              static_cast<Eigen::Index>(model.model_tags.size()));
        for (std::size_t m = 0; m < cases[i].components.size(); ++m) {
            costs.col(static_cast<Eigen::Index>(m)) =
                gaussian_cost(cases[i].components[m], cases[i].reference, sigma);
        }
        model.cost_fields.push_back(std::move(costs));
    }
    model.lo = model.train_params.colwise().minCoeff();
    model.hi = model.train_params.colwise().maxCoeff();
    return model;
}

WeightField predict_knn_weights(const KnnWeightModel& model, const ParameterVector& mu) {
    if (mu.size() != model.train_params.cols()) {
        throw ShapeMismatch("predict_knn_weights: parameter dimension mismatch");
    }
    const Eigen::Index n_train = model.train_params.rows();
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n_train));
    for (Eigen::Index i = 0; i < n_train; ++i) {
        double d2 = 0.0;
        for (Eigen::Index d = 0; d < model.train_params.cols(); ++d) {
            const double span = model.hi[d] - model.lo[d];
            const double scale = (span > 0.0) ? span : 1.0;
            const double delta = (mu.values[d] - model.train_params(i, d)) / scale;
            d2 += delta * delta;
        }
        dist[static_cast<std::size_t>(i)] = {d2, i};
    }
    std::stable_sort(dist.begin(), dist.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(model.cost_fields.front().rows(),
                                                model.cost_fields.front().cols());
    for (int i = 0; i < model.k; ++i) {
        avg += model.cost_fields[static_cast<std::size_t>(dist[static_cast<std::size_t>(i)].second)];
    }
    avg /= static_cast<double>(model.k);

    WeightField w;
    w.weights = normalize_rows(avg);
    w.model_tags = model.model_tags;
    w.mesh = model.mesh;
    return w;
}

// ---------------------------------------------------------------------------
// ANN weighting
// ---------------------------------------------------------------------------

AnnWeightSettings AnnWeightSettings::preset(const std::string& name) {
    AnnWeightSettings s;
    if (name == "hills-paper") {
        s.hidden = {30, 30, 30, 30, 30};
        s.activation = Activation::Softplus;
        s.train.learning_rate = 5e-4;
        s.train.weight_decay = 1e-4;
        s.train.epochs = 60000;
    } else if (name == "bump-paper") {
        s.hidden = {50, 50, 50};
        s.activation = Activation::Tanh;
        s.train.learning_rate = 1e-3;
        s.train.weight_decay = 1e-5;
        s.train.epochs = 10000;
    } else if (name == "hills-desk") {
        s.hidden = {24, 24};
        s.activation = Activation::Softplus;
        s.train.learning_rate = 2e-3;
        s.train.weight_decay = 1e-6;
        s.train.epochs = 800;
    } else if (name == "bump-desk") {
        s.hidden = {24, 24};
        s.activation = Activation::Tanh;
        s.train.learning_rate = 2e-3;
        s.train.weight_decay = 1e-6;
        s.train.epochs = 800;
    } else {
        throw ConfigError("unknown ANN weighting preset '" + name + "'");
    }
    return s;
}

namespace {

Eigen::MatrixXd ann_inputs_for_case(const AggregationCase& c) {
    const Eigen::Index n = c.reference.n_dof();
    const Eigen::Index p = c.reference.params.size();
    Eigen::MatrixXd in(2 + p, n);
    in.row(0) = c.reference.mesh->x.transpose();
    in.row(1) = c.reference.mesh->y.transpose();
    for (Eigen::Index d = 0; d < p; ++d) {
        in.row(2 + d).setConstant(c.reference.params.values[d]);
    }
    return in;
}

Eigen::MatrixXd normalize_inputs(const Eigen::MatrixXd& in, const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi) {
    Eigen::MatrixXd out(in.rows(), in.cols());
    for (Eigen::Index d = 0; d < in.rows(); ++d) {
        const double span = hi[d] - lo[d];
        if (span > 0.0) {
            out.row(d) = (in.row(d).array() - lo[d]) / span;
        } else {
            out.row(d).setZero();
        }
    }
    return out;
}

} // namespace

AnnWeightResult train_ann_weights(const std::vector<AggregationCase>& cases,
                                  const AnnWeightSettings& settings) {
    check_cases(cases);
    const Eigen::Index n_m = static_cast<Eigen::Index>(cases.front().components.size());
    const Eigen::Index p = cases.front().reference.params.size();

    // One training sample per (configuration, dof).
    Eigen::Index total = 0;
    for (const auto& c : cases) total += c.reference.n_dof();
    Eigen::MatrixXd inputs(2 + p, total);
    Eigen::MatrixXd comps(n_m, total); // component values, constants in the loss
    Eigen::VectorXd refs(total);
    Eigen::Index at = 0;
    for (const auto& c : cases) {
        const Eigen::Index n = c.reference.n_dof();
        inputs.middleCols(at, n) = ann_inputs_for_case(c);
        for (Eigen::Index m = 0; m < n_m; ++m) {
            comps.row(m).segment(at, n) =
                c.components[static_cast<std::size_t>(m)].values.transpose();
        }
        refs.segment(at, n) = c.reference.values;
        at += n;
    }

    AnnWeightResult res;
    res.model.model_tags = case_tags(cases.front());
    res.model.in_lo = inputs.rowwise().minCoeff();
    res.model.in_hi = inputs.rowwise().maxCoeff();
    const Eigen::MatrixXd norm_in = normalize_inputs(inputs, res.model.in_lo, res.model.in_hi);

    NetSpec spec;
    spec.widths.push_back(static_cast<int>(2 + p));
    for (int h : settings.hidden) spec.widths.push_back(h);
    spec.widths.push_back(static_cast<int>(n_m));
    spec.hidden_activation = settings.activation;
    spec.output_head = OutputHead::Softmax;
    res.model.spec = spec;
    res.model.params = init_he(spec, seed_for(settings.train.seed, "ann-weights"));

    const double denom = static_cast<double>(total);
    res.report.uniform_loss =
        (refs - comps.colwise().mean().transpose()).squaredNorm() / denom;

    const auto loss_fn = [&comps, &refs, denom](const Eigen::MatrixXd& out,
                                                Eigen::MatrixXd& out_grad) {
        const Eigen::VectorXd mixed = (out.array() * comps.array()).colwise().sum();
        const Eigen::VectorXd residual = refs - mixed;
        out_grad = comps.array().rowwise() * (-2.0 / denom * residual.transpose().array());
        return residual.squaredNorm() / denom;
    };

    res.report.loss_history =
        train(spec, res.model.params, norm_in, loss_fn, settings.train).loss_history;
    res.report.final_loss = res.report.loss_history.empty()
                                ? res.report.uniform_loss
                                : res.report.loss_history.back();
    if (settings.train.epochs > 0 && res.report.final_loss > res.report.uniform_loss) {
        throw DivergenceDetected(
            "ann weighting ended above the uniform-weight baseline (" +
            std::to_string(res.report.final_loss) + " > " +
            std::to_string(res.report.uniform_loss) + ")");
    }
    return res;
}

WeightField predict_ann_weights(const AnnWeightModel& model, const MeshPtr& mesh,
                                const ParameterVector& mu) {
    const Eigen::Index p = mu.size();
    if (model.spec.input_width() != static_cast<int>(2 + p)) {
        throw ShapeMismatch("predict_ann_weights: parameter dimension mismatch");
    }
    const Eigen::Index n = mesh->n_dof();
    Eigen::MatrixXd in(2 + p, n);
    in.row(0) = mesh->x.transpose();
    in.row(1) = mesh->y.transpose();
    for (Eigen::Index d = 0; d < p; ++d) in.row(2 + d).setConstant(mu.values[d]);
    const Eigen::MatrixXd out =
        forward(model.spec, model.params, normalize_inputs(in, model.in_lo, model.in_hi));
    WeightField w;
    w.weights = out.transpose();
    w.model_tags = model.model_tags;
    w.mesh = mesh;
    return w;
}

FieldSnapshot aggregate(const std::vector<FieldSnapshot>& fields, const WeightField& w) {
    if (fields.empty()) throw EmptyInput("aggregate: no fields");
    if (static_cast<Eigen::Index>(fields.size()) != w.n_models()) {
        throw ShapeMismatch("aggregate: " + std::to_string(fields.size()) + " fields vs " +
                            std::to_string(w.n_models()) + " weight columns");
    }
    const Eigen::Index n = fields.front().n_dof();
    if (w.n_dof() != n) throw ShapeMismatch("aggregate: weight rows do not match dof count");
    Eigen::VectorXd mixed = Eigen::VectorXd::Zero(n);
    for (std::size_t m = 0; m < fields.size(); ++m) {
        if (fields[m].n_dof() != n) throw ShapeMismatch("aggregate: field dof mismatch");
        mixed.array() +=
            w.weights.col(static_cast<Eigen::Index>(m)).array() * fields[m].values.array();
    }
    FieldSnapshot out;
    out.mesh = fields.front().mesh;
    out.values = std::move(mixed);
    out.quantity = fields.front().quantity;
    out.params = fields.front().params;
    out.model_tag = "mixed";
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

void write_str(std::ostream& out, const std::string& s) {
    const auto n = static_cast<std::uint32_t>(s.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& in) {
    std::uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n > (1u << 20)) throw FormatError("weight model: bad string length");
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n)) throw FormatError("weight model: truncated string");
    return s;
}

void write_mat(std::ostream& out, const Eigen::MatrixXd& m) {
    const auto r = static_cast<std::uint32_t>(m.rows());
    const auto c = static_cast<std::uint32_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&r), sizeof(r));
    out.write(reinterpret_cast<const char*>(&c), sizeof(c));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd read_mat(std::istream& in) {
    std::uint32_t r = 0, c = 0;
    in.read(reinterpret_cast<char*>(&r), sizeof(r));
    in.read(reinterpret_cast<char*>(&c), sizeof(c));
    if (!in || r > (1u << 26) || c > (1u << 26)) {
        throw FormatError("weight model: bad matrix header");
    }
    Eigen::MatrixXd m(r, c);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw FormatError("weight model: truncated matrix");
    return m;
}

} // namespace

void write_knn_weights(std::ostream& out, const KnnWeightModel& model) {
    const char magic[4] = {'M', 'K', 'N', 'N'};
    out.write(magic, 4);
    const char version = 1;
    out.write(&version, 1);
    const auto k = static_cast<std::uint32_t>(model.k);
    out.write(reinterpret_cast<const char*>(&k), sizeof(k));
    out.write(reinterpret_cast<const char*>(&model.sigma), sizeof(double));
    const auto n_tags = static_cast<std::uint32_t>(model.model_tags.size());
    out.write(reinterpret_cast<const char*>(&n_tags), sizeof(n_tags));
    for (const auto& t : model.model_tags) write_str(out, t);
    write_mat(out, model.train_params);
    write_mat(out, model.lo);
    write_mat(out, model.hi);
    const auto n_fields = static_cast<std::uint32_t>(model.cost_fields.size());
    out.write(reinterpret_cast<const char*>(&n_fields), sizeof(n_fields));
    for (const auto& f : model.cost_fields) write_mat(out, f);
    if (!out) throw IoError("write_knn_weights: stream failure");
}

KnnWeightModel read_knn_weights(std::istream& in, const MeshPtr& mesh) {
    char magic[4], version;
    if (!in.read(magic, 4) || std::memcmp(magic, "MKNN", 4) != 0) {
        throw FormatError("knn weights: bad magic");
    }
    in.read(&version, 1);
    if (version != 1) throw FormatError("knn weights: unsupported version");
    KnnWeightModel model;
    std::uint32_t k = 0;
    in.read(reinterpret_cast<char*>(&k), sizeof(k));
    model.k = static_cast<int>(k);
    in.read(reinterpret_cast<char*>(&model.sigma), sizeof(double));
    std::uint32_t n_tags = 0;
    in.read(reinterpret_cast<char*>(&n_tags), sizeof(n_tags));
    if (!in || n_tags == 0 || n_tags > 4096) throw FormatError("knn weights: bad tag count");
    for (std::uint32_t i = 0; i < n_tags; ++i) model.model_tags.push_back(read_str(in));
    model.train_params = read_mat(in);
    model.lo = read_mat(in).col(0);
    model.hi = read_mat(in).col(0);
    std::uint32_t n_fields = 0;
    in.read(reinterpret_cast<char*>(&n_fields), sizeof(n_fields));
    if (!in || n_fields == 0) throw FormatError("knn weights: bad field count");
    for (std::uint32_t i = 0; i < n_fields; ++i) model.cost_fields.push_back(read_mat(in));
    model.mesh = mesh;
    return model;
}

void write_ann_weights(std::ostream& out, const AnnWeightModel& model) {
    const char magic[4] = {'M', 'A', 'N', 'N'};
    out.write(magic, 4);
    const char version = 1;
    out.write(&version, 1);
    const auto n_tags = static_cast<std::uint32_t>(model.model_tags.size());
    out.write(reinterpret_cast<const char*>(&n_tags), sizeof(n_tags));
    for (const auto& t : model.model_tags) write_str(out, t);
    write_net(out, model.spec, model.params);
    write_mat(out, model.in_lo);
    write_mat(out, model.in_hi);
    if (!out) throw IoError("write_ann_weights: stream failure");
}

AnnWeightModel read_ann_weights(std::istream& in) {
    char magic[4], version;
    if (!in.read(magic, 4) || std::memcmp(magic, "MANN", 4) != 0) {
        throw FormatError("ann weights: bad magic");
    }
    in.read(&version, 1);
    if (version != 1) throw FormatError("ann weights: unsupported version");
    AnnWeightModel model;
    std::uint32_t n_tags = 0;
    in.read(reinterpret_cast<char*>(&n_tags), sizeof(n_tags));
    if (!in || n_tags == 0 || n_tags > 4096) throw FormatError("ann weights: bad tag count");
    for (std::uint32_t i = 0; i < n_tags; ++i) model.model_tags.push_back(read_str(in));
    read_net(in, model.spec, model.params);
    model.in_lo = read_mat(in).col(0);
    model.in_hi = read_mat(in).col(0);
    return model;
}

} // namespace mixrom
