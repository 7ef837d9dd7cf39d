#include "mixrom/dense_net.hpp"
#include "mixrom/errors.hpp"
#include "mixrom/rng.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

namespace mixrom {

namespace {

double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Eigen::MatrixXd apply_hidden(Activation act, const Eigen::MatrixXd& z) {
    if (act == Activation::Softplus) {
        return z.unaryExpr([](double v) { return softplus(v); });
    }
    return z.array().tanh();
}

Eigen::MatrixXd hidden_derivative(Activation act, const Eigen::MatrixXd& z) {
    if (act == Activation::Softplus) {
        return z.unaryExpr([](double v) { return sigmoid(v); });
    }
    return 1.0 - z.array().tanh().square();
}

/// Shift-invariant by construction: the column max is subtracted first.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd out(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const Eigen::VectorXd shifted = z.col(c).array() - z.col(c).maxCoeff();
        Eigen::VectorXd e = shifted.array().exp();
        out.col(c) = e / e.sum();
    }
    return out;
}

} // namespace

void NetSpec::validate() const {
    if (widths.size() < 2) {
        throw ShapeMismatch("network needs at least input and output widths");
    }
    for (int w : widths) {
        if (w <= 0) throw ShapeMismatch("network layer width must be positive");
    }
}

NetParams NetParams::scaled_like() const {
    NetParams out;
    out.w.reserve(w.size());
    out.b.reserve(b.size());
    for (const auto& m : w) out.w.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
    for (const auto& v : b) out.b.push_back(Eigen::VectorXd::Zero(v.size()));
    return out;
}

bool NetParams::all_finite() const {
    for (const auto& m : w) {
        if (!m.allFinite()) return false;
    }
    for (const auto& v : b) {
        if (!v.allFinite()) return false;
    }
    return true;
}

NetParams init_he(const NetSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    NetParams p;
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        const int fan_in = spec.widths[l];
        const int fan_out = spec.widths[l + 1];
        const double stddev = std::sqrt(2.0 / fan_in);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                w(i, j) = stddev * rng.normal();
            }
        }
        p.w.push_back(std::move(w));
        p.b.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return p;
}

ForwardCache forward_cached(const NetSpec& spec, const NetParams& params,
                            const Eigen::MatrixXd& inputs) {
    spec.validate();
    if (inputs.rows() != spec.input_width()) {
        throw ShapeMismatch("network input width " + std::to_string(spec.input_width()) +
                            ", got " + std::to_string(inputs.rows()));
    }
    if (params.w.size() != spec.n_layers()) {
        throw ShapeMismatch("parameter layer count does not match spec");
    }
    ForwardCache cache;
    cache.acts.reserve(spec.n_layers() + 1);
    cache.pre.reserve(spec.n_layers());
    cache.acts.push_back(inputs);
    const std::size_t last = spec.n_layers() - 1;
    for (std::size_t l = 0; l < spec.n_layers(); ++l) {
        Eigen::MatrixXd z = params.w[l] * cache.acts.back();
        z.colwise() += params.b[l];
        if (l < last) {
            cache.acts.push_back(apply_hidden(spec.hidden_activation, z));
        } else if (spec.output_head == OutputHead::Softmax) {
            cache.acts.push_back(softmax_columns(z));
        } else {
            cache.acts.push_back(z);
        }
        cache.pre.push_back(std::move(z));
    }
    return cache;
}

Eigen::MatrixXd forward(const NetSpec& spec, const NetParams& params,
                        const Eigen::MatrixXd& inputs) {
    return forward_cached(spec, params, inputs).acts.back();
}

BackpropResult backprop(const NetSpec& spec, const NetParams& params,
                        const ForwardCache& cache, const Eigen::MatrixXd& out_grad) {
    const std::size_t L = spec.n_layers();
    BackpropResult res;
    res.grads = params.scaled_like();

    // Head jacobian: dL/dz for the final pre-activation.
    Eigen::MatrixXd delta;
    if (spec.output_head == OutputHead::Softmax) {
        const Eigen::MatrixXd& y = cache.acts[L];
        delta.resize(y.rows(), y.cols());
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            const double dot = y.col(c).dot(out_grad.col(c));
            delta.col(c) = y.col(c).array() * (out_grad.col(c).array() - dot);
        }
    } else {
        delta = out_grad;
    }

    for (std::size_t l = L; l-- > 0;) {
        res.grads.w[l] = delta * cache.acts[l].transpose();
        res.grads.b[l] = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd upstream = params.w[l].transpose() * delta;
            delta = upstream.array() *
                    hidden_derivative(spec.hidden_activation, cache.pre[l - 1]).array();
        } else {
            res.input_grad = params.w[0].transpose() * delta;
        }
    }
    return res;
}

MseGrad grad_mse(const NetSpec& spec, const NetParams& params, const Eigen::MatrixXd& inputs,
                 const Eigen::MatrixXd& targets, double weight_decay) {
    if (targets.rows() != spec.output_width() || targets.cols() != inputs.cols()) {
        throw ShapeMismatch("target shape does not match network output/batch");
    }
    const ForwardCache cache = forward_cached(spec, params, inputs);
    const Eigen::MatrixXd diff = cache.acts.back() - targets;
    const double denom = static_cast<double>(diff.size());
    MseGrad out;
    out.loss = diff.squaredNorm() / denom;
    Eigen::MatrixXd out_grad = (2.0 / denom) * diff;
    out.grads = backprop(spec, params, cache, out_grad).grads;
    if (weight_decay > 0.0) {
        for (std::size_t l = 0; l < params.w.size(); ++l) {
            out.grads.w[l] += weight_decay * params.w[l];
        }
    }
    return out;
}

AdamState::AdamState(const NetParams& params) {
    for (const auto& m : params.w) {
        mw_.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
        vw_.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
    }
    for (const auto& v : params.b) {
        mb_.push_back(Eigen::VectorXd::Zero(v.size()));
        vb_.push_back(Eigen::VectorXd::Zero(v.size()));
    }
}

void AdamState::step(NetParams& params, const NetParams& grads, const TrainConfig& cfg) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < params.w.size(); ++l) {
        mw_[l] = cfg.adam_beta1 * mw_[l] + (1.0 - cfg.adam_beta1) * grads.w[l];
        vw_[l] = cfg.adam_beta2 * vw_[l].array() +
                 (1.0 - cfg.adam_beta2) * grads.w[l].array().square();
        params.w[l].array() -= cfg.learning_rate * (mw_[l].array() / c1) /
                               ((vw_[l].array() / c2).sqrt() + cfg.adam_eps);

        mb_[l] = cfg.adam_beta1 * mb_[l] + (1.0 - cfg.adam_beta1) * grads.b[l];
        vb_[l] = cfg.adam_beta2 * vb_[l].array() +
                 (1.0 - cfg.adam_beta2) * grads.b[l].array().square();
        params.b[l].array() -= cfg.learning_rate * (mb_[l].array() / c1) /
                               ((vb_[l].array() / c2).sqrt() + cfg.adam_eps);
    }
}

TrainReport train(const NetSpec& spec, NetParams& params, const Eigen::MatrixXd& inputs,
                  const LossFn& loss, const TrainConfig& cfg) {
    spec.validate();
    if (inputs.cols() == 0) throw EmptyInput("train: empty dataset");
    if (cfg.learning_rate <= 0.0) throw OutOfRange("learning_rate must be positive");
    if (cfg.weight_decay < 0.0) throw OutOfRange("weight_decay must be non-negative");

    TrainReport report;
    report.loss_history.reserve(static_cast<std::size_t>(std::max(cfg.epochs, 0)));
    AdamState adam(params);
    const Eigen::Index n = inputs.cols();
    const Eigen::Index batch = (cfg.batch_size > 0)
                                   ? std::min<Eigen::Index>(cfg.batch_size, n)
                                   : n;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(seed_for(cfg.seed, "batch-order"));

    Eigen::MatrixXd out_grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        if (batch == n) {
            const ForwardCache cache = forward_cached(spec, params, inputs);
            out_grad.setZero(cache.acts.back().rows(), cache.acts.back().cols());
            epoch_loss = loss(cache.acts.back(), out_grad);
            NetParams grads = backprop(spec, params, cache, out_grad).grads;
            if (cfg.weight_decay > 0.0) {
                for (std::size_t l = 0; l < params.w.size(); ++l) {
                    grads.w[l] += cfg.weight_decay * params.w[l];
                }
            }
            adam.step(params, grads, cfg);
        } else {
            // Fisher-Yates with the portable stream, fixed per (seed, epoch).
            for (std::size_t i = order.size(); i > 1; --i) {
                const auto j = static_cast<std::size_t>(shuffle_rng.uniform() * static_cast<double>(i));
                std::swap(order[i - 1], order[std::min(j, i - 1)]);
            }
            double weighted = 0.0;
            for (Eigen::Index start = 0; start < n; start += batch) {
                const Eigen::Index count = std::min(batch, n - start);
                Eigen::MatrixXd chunk(inputs.rows(), count);
                for (Eigen::Index c = 0; c < count; ++c) {
                    chunk.col(c) = inputs.col(order[static_cast<std::size_t>(start + c)]);
                }
                const ForwardCache cache = forward_cached(spec, params, chunk);
                out_grad.setZero(cache.acts.back().rows(), count);
                const double chunk_loss = loss(cache.acts.back(), out_grad);
                weighted += chunk_loss * static_cast<double>(count);
                NetParams grads = backprop(spec, params, cache, out_grad).grads;
                if (cfg.weight_decay > 0.0) {
                    for (std::size_t l = 0; l < params.w.size(); ++l) {
                        grads.w[l] += cfg.weight_decay * params.w[l];
                    }
                }
                adam.step(params, grads, cfg);
            }
            epoch_loss = weighted / static_cast<double>(n);
        }
        if (!std::isfinite(epoch_loss) || !params.all_finite()) {
            throw DivergenceDetected("training diverged at epoch " + std::to_string(epoch));
        }
        report.loss_history.push_back(epoch_loss);
    }
    report.final_loss = report.loss_history.empty() ? 0.0 : report.loss_history.back();
    return report;
}

TrainReport train_mse(const NetSpec& spec, NetParams& params, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, const TrainConfig& cfg) {
    if (targets.cols() != inputs.cols()) {
        throw ShapeMismatch("train_mse: inputs/targets batch mismatch");
    }
    if (cfg.batch_size <= 0) {
        const Eigen::MatrixXd& t = targets;
        return train(spec, params, inputs,
                     [&t](const Eigen::MatrixXd& out, Eigen::MatrixXd& out_grad) {
                         const Eigen::MatrixXd diff = out - t;
                         const double denom = static_cast<double>(diff.size());
                         out_grad = (2.0 / denom) * diff;
                         return diff.squaredNorm() / denom;
                     },
                     cfg);
    }
    // Mini-batch loop with targets permuted alongside the inputs.
    spec.validate();
    if (cfg.learning_rate <= 0.0) throw OutOfRange("learning_rate must be positive");
    TrainReport report;
    AdamState adam(params);
    const Eigen::Index n = inputs.cols();
    const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(seed_for(cfg.seed, "batch-order"));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(shuffle_rng.uniform() * static_cast<double>(i));
            std::swap(order[i - 1], order[std::min(j, i - 1)]);
        }
        double weighted = 0.0;
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index count = std::min(batch, n - start);
            Eigen::MatrixXd in_chunk(inputs.rows(), count);
            Eigen::MatrixXd t_chunk(targets.rows(), count);
            for (Eigen::Index c = 0; c < count; ++c) {
                in_chunk.col(c) = inputs.col(order[static_cast<std::size_t>(start + c)]);
                t_chunk.col(c) = targets.col(order[static_cast<std::size_t>(start + c)]);
            }
            MseGrad g = grad_mse(spec, params, in_chunk, t_chunk, cfg.weight_decay);
            weighted += g.loss * static_cast<double>(count);
            adam.step(params, g.grads, cfg);
        }
        const double epoch_loss = weighted / static_cast<double>(n);
        if (!std::isfinite(epoch_loss) || !params.all_finite()) {
            throw DivergenceDetected("training diverged at epoch " + std::to_string(epoch));
        }
        report.loss_history.push_back(epoch_loss);
    }
    report.final_loss = report.loss_history.empty() ? 0.0 : report.loss_history.back();
    return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {
constexpr char kNetMagic[4] = {'M', 'N', 'E', 'T'};
}

void write_net(std::ostream& out, const NetSpec& spec, const NetParams& params) {
    out.write(kNetMagic, 4);
    const char version = 1;
    out.write(&version, 1);
    const auto act = static_cast<char>(spec.hidden_activation);
    const auto head = static_cast<char>(spec.output_head);
    out.write(&act, 1);
    out.write(&head, 1);
    const auto n = static_cast<std::uint32_t>(spec.widths.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (int w : spec.widths) {
        const auto v = static_cast<std::uint32_t>(w);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    for (std::size_t l = 0; l < params.w.size(); ++l) {
        out.write(reinterpret_cast<const char*>(params.w[l].data()),
                  static_cast<std::streamsize>(sizeof(double) * params.w[l].size()));
        out.write(reinterpret_cast<const char*>(params.b[l].data()),
                  static_cast<std::streamsize>(sizeof(double) * params.b[l].size()));
    }
    if (!out) throw IoError("write_net: stream failure");
}

void read_net(std::istream& in, NetSpec& spec, NetParams& params) {
    char magic[4];
    char version, act, head;
    if (!in.read(magic, 4) || std::memcmp(magic, kNetMagic, 4) != 0) {
        throw FormatError("read_net: bad magic");
    }
    in.read(&version, 1);
    if (version != 1) throw FormatError("read_net: unsupported version");
    in.read(&act, 1);
    in.read(&head, 1);
    spec.hidden_activation = static_cast<Activation>(act);
    spec.output_head = static_cast<OutputHead>(head);
    std::uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n < 2 || n > 64) throw FormatError("read_net: bad layer count");
    spec.widths.resize(n);
    for (auto& w : spec.widths) {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        w = static_cast<int>(v);
    }
    spec.validate();
    params.w.clear();
    params.b.clear();
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        Eigen::MatrixXd w(spec.widths[l + 1], spec.widths[l]);
        Eigen::VectorXd b(spec.widths[l + 1]);
        in.read(reinterpret_cast<char*>(w.data()),
                static_cast<std::streamsize>(sizeof(double) * w.size()));
        in.read(reinterpret_cast<char*>(b.data()),
                static_cast<std::streamsize>(sizeof(double) * b.size()));
        if (!in) throw FormatError("read_net: truncated parameter block");
        params.w.push_back(std::move(w));
        params.b.push_back(std::move(b));
    }
    if (!params.all_finite()) throw FormatError("read_net: non-finite parameters");
}

} // namespace mixrom
