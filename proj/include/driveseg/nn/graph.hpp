#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "driveseg/rng.hpp"

namespace driveseg::nn {

/// One node of a dynamically built computation graph. Values are 64-bit
/// matrices; 1-D tensors are column vectors and scalars are 1x1. Batched
/// time series for the causal convolution are laid out channel-major as
/// (channels x batch*T) with the block length T passed to the op.
class Node {
public:
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;  // allocated on demand, same shape as value
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;  // scatters this->grad into parents
    bool requires_grad = false;
    bool optimizer_bound = false;  // a parameter joins at most one optimizer
    std::string name;

    long rows() const { return value.rows(); }
    long cols() const { return value.cols(); }
    void ensure_grad() {
        if (grad.rows() != value.rows() || grad.cols() != value.cols())
            grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
    }
};

using NodePtr = std::shared_ptr<Node>;

NodePtr constant(Eigen::MatrixXd value, std::string name = "");
NodePtr parameter(Eigen::MatrixXd value, std::string name);

/// Uniform init in +-sqrt(1/fan_in).
NodePtr parameter_init(long rows, long cols, long fan_in, driveseg::Rng& rng, std::string name);

// elementwise; shapes must match exactly, or one operand is 1x1 (scalar broadcast)
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);

NodePtr scale(const NodePtr& a, double c);
NodePtr add_const(const NodePtr& a, double c);

NodePtr relu(const NodePtr& a);
NodePtr sigmoid(const NodePtr& a);
NodePtr tanh_op(const NodePtr& a);
NodePtr softplus(const NodePtr& a);  // log(1+exp(x)), numerically stable
NodePtr log_op(const NodePtr& a);
NodePtr exp_op(const NodePtr& a);

NodePtr sum(const NodePtr& a);                // -> 1x1
NodePtr mean(const NodePtr& a);               // -> 1x1
NodePtr colwise_sum(const NodePtr& a);        // -> 1 x cols
NodePtr mse(const NodePtr& pred, const NodePtr& target);  // mean((pred-target)^2) -> 1x1

/// y = W x + b. W: (out x in), x: (in x batch), b: (out x 1) broadcast
/// over batch columns.
NodePtr dense(const NodePtr& weight, const NodePtr& bias, const NodePtr& x);

/// Causal dilated 1-D convolution. x is (C_in x B*T) holding B blocks of
/// T steps; weight is (C_out x C_in*K); bias (C_out x 1). Each block is
/// zero-padded on the left by (K-1)*dilation so output step t depends
/// only on input steps <= t within the same block.
NodePtr conv1d_causal(const NodePtr& x, const NodePtr& weight, const NodePtr& bias,
                      int kernel, int dilation, long block_len);

/// Last column of every length-T block: (C x B*T) -> (C x B).
NodePtr block_last_col(const NodePtr& x, long block_len);

NodePtr concat_rows(const NodePtr& a, const NodePtr& b);
NodePtr slice_rows(const NodePtr& a, long start, long count);
NodePtr slice_cols(const NodePtr& a, long start, long count);

/// Tile a's columns `times` over: (r x c) -> (r x c*times).
NodePtr repeat_cols(const NodePtr& a, long times);

/// Reparameterized Gaussian draw: mean + exp(0.5*logvar) .* noise.
/// noise is a constant tensor sampled by the caller.
NodePtr gaussian_sample(const NodePtr& mean, const NodePtr& logvar, const NodePtr& noise);

/// Reverse-mode gradient of a scalar root with respect to every node
/// with requires_grad reachable from it. Grads of visited nodes are
/// zeroed first, so each backward() starts fresh.
void backward(const NodePtr& root);

}  // namespace driveseg::nn
