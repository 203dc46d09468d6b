#pragma once

#include <map>
#include <string>
#include <vector>

#include "driveseg/nn/graph.hpp"

namespace driveseg::nn {

/// Named trainable tensors with deterministic (sorted-name) iteration.
class ParameterSet {
public:
    NodePtr add(const NodePtr& param);
    NodePtr get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    const std::map<std::string, NodePtr>& items() const { return params_; }
    std::size_t size() const { return params_.size(); }
    long value_count() const;

    /// Merge another set into this one (names must not clash).
    void absorb(const ParameterSet& other);

private:
    std::map<std::string, NodePtr> params_;
};

/// Adam with beta1=0.9, beta2=0.999, eps=1e-8. Consumes gradients
/// accumulated on the parameter nodes by backward() and zeroes them.
/// Throws NumericalError when a gradient contains NaN/Inf, leaving the
/// parameters untouched.
class AdamOptimizer {
public:
    AdamOptimizer(ParameterSet& params, double learning_rate);
    ~AdamOptimizer();

    void step();
    long step_count() const { return step_count_; }
    double learning_rate() const { return lr_; }

    AdamOptimizer(const AdamOptimizer&) = delete;
    AdamOptimizer& operator=(const AdamOptimizer&) = delete;

private:
    std::vector<NodePtr> params_;
    std::vector<Eigen::MatrixXd> m_;
    std::vector<Eigen::MatrixXd> v_;
    double lr_;
    long step_count_ = 0;
};

}  // namespace driveseg::nn
