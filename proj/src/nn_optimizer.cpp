#include "driveseg/nn/optimizer.hpp"

#include <cmath>

#include "driveseg/errors.hpp"

namespace driveseg::nn {

NodePtr ParameterSet::add(const NodePtr& param) {
    if (param->name.empty()) throw ConfigError("parameters must be named");
    if (params_.count(param->name))
        throw ConfigError("duplicate parameter name: " + param->name);
    params_[param->name] = param;
    return param;
}

NodePtr ParameterSet::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

long ParameterSet::value_count() const {
    long n = 0;
    for (const auto& [name, p] : params_) n += p->value.size();
    return n;
}

void ParameterSet::absorb(const ParameterSet& other) {
    for (const auto& [name, p] : other.items()) add(p);
}

AdamOptimizer::AdamOptimizer(ParameterSet& params, double learning_rate) : lr_(learning_rate) {
    for (const auto& [name, p] : params.items()) {
        if (p->optimizer_bound)
            throw ConfigError("parameter '" + name + "' is already bound to an optimizer");
        p->optimizer_bound = true;
        params_.push_back(p);
        m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
}

AdamOptimizer::~AdamOptimizer() {
    for (auto& p : params_) p->optimizer_bound = false;
}

void AdamOptimizer::step() {
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;

    for (std::size_t i = 0; i < params_.size(); ++i) {
        params_[i]->ensure_grad();
        if (!params_[i]->grad.allFinite())
            throw NumericalError("NaN/Inf gradient for parameter '" + params_[i]->name +
                                 "' at step " + std::to_string(step_count_ + 1));
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Eigen::MatrixXd& g = params_[i]->grad;
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * g.cwiseProduct(g);
        params_[i]->value.array() -=
            lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps);
        params_[i]->grad.setZero();
    }
}

}  // namespace driveseg::nn
