#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mixrom {

enum class Activation { Softplus, Tanh };
enum class OutputHead { Linear, Softmax };

struct NetSpec {
    std::vector<int> widths; // input width first, output width last
    Activation hidden_activation = Activation::Softplus;
    OutputHead output_head = OutputHead::Linear;

    int input_width() const { return widths.front(); }
    int output_width() const { return widths.back(); }
    std::size_t n_layers() const { return widths.size() - 1; }
    void validate() const;
};

/// Per-layer weight matrices (out x in) and bias vectors.
struct NetParams {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;

    NetParams scaled_like() const; // same shapes, zero-filled
    bool all_finite() const;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    int epochs = 1000;
    int batch_size = 0; // 0 = full batch
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

NetParams init_he(const NetSpec& spec, std::uint64_t seed);

/// Forward pass on a batch stored column-wise (input_width x batch).
Eigen::MatrixXd forward(const NetSpec& spec, const NetParams& params,
                        const Eigen::MatrixXd& inputs);

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> acts; // acts[0] = inputs, acts[L] = output
    std::vector<Eigen::MatrixXd> pre;  // pre-activation per layer
};

ForwardCache forward_cached(const NetSpec& spec, const NetParams& params,
                            const Eigen::MatrixXd& inputs);

struct BackpropResult {
    NetParams grads;
    Eigen::MatrixXd input_grad;
};

/// Exact reverse-mode gradients given dL/d(output); the output-head jacobian
/// (identity or softmax) is applied internally.
BackpropResult backprop(const NetSpec& spec, const NetParams& params,
                        const ForwardCache& cache, const Eigen::MatrixXd& out_grad);

/// Gradient of mean-squared error over the batch (plus optional L2 term on
/// weights only). Loss normalization: mean over batch and output components.
struct MseGrad {
    double loss = 0.0;
    NetParams grads;
};
MseGrad grad_mse(const NetSpec& spec, const NetParams& params, const Eigen::MatrixXd& inputs,
                 const Eigen::MatrixXd& targets, double weight_decay = 0.0);

/// Adam optimizer state with bias correction.
class AdamState {
public:
    explicit AdamState(const NetParams& params);
    void step(NetParams& params, const NetParams& grads, const TrainConfig& cfg);

private:
    std::vector<Eigen::MatrixXd> mw_, vw_;
    std::vector<Eigen::VectorXd> mb_, vb_;
    long t_ = 0;
};

/// Loss callback: receives the head output for a batch, fills dL/d(output),
/// returns the scalar loss.
using LossFn = std::function<double(const Eigen::MatrixXd& out, Eigen::MatrixXd& out_grad)>;

struct TrainReport {
    std::vector<double> loss_history; // one entry per epoch
    double final_loss = 0.0;
};

/// Run Adam for cfg.epochs over inputs (column-wise batch). Full-batch by
/// default; with batch_size set the sample order is reshuffled
/// deterministically per epoch. Throws DivergenceDetected (naming the epoch)
/// when the loss stops being finite.
TrainReport train(const NetSpec& spec, NetParams& params, const Eigen::MatrixXd& inputs,
                  const LossFn& loss, const TrainConfig& cfg);

/// MSE convenience wrapper around train().
TrainReport train_mse(const NetSpec& spec, NetParams& params, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, const TrainConfig& cfg);

/// Versioned binary block (magic "MNET"): spec followed by raw float64
/// parameters. Used standalone and embedded in surrogate bundles.
void write_net(std::ostream& out, const NetSpec& spec, const NetParams& params);
void read_net(std::istream& in, NetSpec& spec, NetParams& params);

} // namespace mixrom
