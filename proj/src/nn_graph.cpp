#include "driveseg/nn/graph.hpp"

#include <cmath>
#include <unordered_set>

#include "driveseg/errors.hpp"

namespace driveseg::nn {

namespace {

std::string shape_str(const Eigen::MatrixXd& m) {
    return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void require_same_shape(const NodePtr& a, const NodePtr& b, const char* op) {
    if (a->rows() != b->rows() || a->cols() != b->cols())
        throw DataError(std::string(op) + ": shape mismatch " + shape_str(a->value) + " vs " +
                        shape_str(b->value));
}

bool is_scalar(const NodePtr& a) { return a->rows() == 1 && a->cols() == 1; }

NodePtr make_node(Eigen::MatrixXd value, std::vector<NodePtr> parents) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    return n;
}

}  // namespace

NodePtr constant(Eigen::MatrixXd value, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->name = std::move(name);
    return n;
}

NodePtr parameter(Eigen::MatrixXd value, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->name = std::move(name);
    return n;
}

NodePtr parameter_init(long rows, long cols, long fan_in, driveseg::Rng& rng, std::string name) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Eigen::MatrixXd w(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) w(i, j) = rng.uniform(-bound, bound);
    return parameter(std::move(w), std::move(name));
}

// binary elementwise with optional 1x1 broadcast on either side
template <typename Fwd, typename BwdA, typename BwdB>
static NodePtr binary_elementwise(const NodePtr& a, const NodePtr& b, const char* op, Fwd fwd,
                                  BwdA bwd_a, BwdB bwd_b) {
    if (!is_scalar(a) && !is_scalar(b)) require_same_shape(a, b, op);
    const bool a_scalar = is_scalar(a) && !is_scalar(b);
    const bool b_scalar = is_scalar(b) && !is_scalar(a);
    Eigen::MatrixXd av = a_scalar ? Eigen::MatrixXd::Constant(b->rows(), b->cols(), a->value(0, 0))
                                  : a->value;
    Eigen::MatrixXd bv = b_scalar ? Eigen::MatrixXd::Constant(a->rows(), a->cols(), b->value(0, 0))
                                  : b->value;
    auto n = make_node(fwd(av, bv), {a, b});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, a, b, a_scalar, b_scalar, av, bv, bwd_a, bwd_b]() {
        if (a->requires_grad) {
            a->ensure_grad();
            Eigen::MatrixXd ga = bwd_a(raw->grad, av, bv);
            if (a_scalar)
                a->grad(0, 0) += ga.sum();
            else
                a->grad += ga;
        }
        if (b->requires_grad) {
            b->ensure_grad();
            Eigen::MatrixXd gb = bwd_b(raw->grad, av, bv);
            if (b_scalar)
                b->grad(0, 0) += gb.sum();
            else
                b->grad += gb;
        }
    };
    return n;
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    return binary_elementwise(
        a, b, "add", [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) { return x + y; },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd&, const Eigen::MatrixXd&) { return g; },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd&, const Eigen::MatrixXd&) { return g; });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    return binary_elementwise(
        a, b, "sub", [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) { return x - y; },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd&, const Eigen::MatrixXd&) { return g; },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd&, const Eigen::MatrixXd&) {
            return (-g).eval();
        });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    return binary_elementwise(
        a, b, "mul",
        [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
            return (x.array() * y.array()).matrix().eval();
        },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd&, const Eigen::MatrixXd& y) {
            return (g.array() * y.array()).matrix().eval();
        },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd& x, const Eigen::MatrixXd&) {
            return (g.array() * x.array()).matrix().eval();
        });
}

NodePtr scale(const NodePtr& a, double c) {
    auto n = make_node(a->value * c, {a});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, a, c]() {
        a->ensure_grad();
        a->grad += raw->grad * c;
    };
    return n;
}

NodePtr add_const(const NodePtr& a, double c) {
    auto n = make_node(a->value.array() + c, {a});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, a]() {
        a->ensure_grad();
        a->grad += raw->grad;
    };
    return n;
}

template <typename Fwd, typename Bwd>
static NodePtr unary_elementwise(const NodePtr& a, Fwd fwd, Bwd bwd) {
    auto n = make_node(fwd(a->value), {a});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, a, bwd]() {
        a->ensure_grad();
        a->grad += bwd(raw->grad, a->value, raw->value);
    };
    return n;
}

NodePtr relu(const NodePtr& a) {
    auto n = unary_elementwise(
        a, [](const Eigen::MatrixXd& x) { return x.cwiseMax(0.0).eval(); },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd& x, const Eigen::MatrixXd&) {
            return (g.array() * (x.array() > 0.0).cast<double>()).matrix().eval();
        });
    n->name = "relu";  // the one kink in the op set; lets tools find activation boundaries
    return n;
}

NodePtr sigmoid(const NodePtr& a) {
    return unary_elementwise(
        a,
        [](const Eigen::MatrixXd& x) {
            return (0.5 * (x.array() * 0.5).tanh() + 0.5).matrix().eval();
        },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd&, const Eigen::MatrixXd& y) {
            return (g.array() * y.array() * (1.0 - y.array())).matrix().eval();
        });
}

NodePtr tanh_op(const NodePtr& a) {
    return unary_elementwise(
        a, [](const Eigen::MatrixXd& x) { return x.array().tanh().matrix().eval(); },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd&, const Eigen::MatrixXd& y) {
            return (g.array() * (1.0 - y.array().square())).matrix().eval();
        });
}

NodePtr softplus(const NodePtr& a) {
    return unary_elementwise(
        a,
        [](const Eigen::MatrixXd& x) {
            // max(x,0) + log1p(exp(-|x|)) avoids overflow on both tails
            return (x.array().max(0.0) + (-x.array().abs()).exp().log1p()).matrix().eval();
        },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd& x, const Eigen::MatrixXd&) {
            return (g.array() * (0.5 * (x.array() * 0.5).tanh() + 0.5)).matrix().eval();
        });
}

NodePtr log_op(const NodePtr& a) {
    return unary_elementwise(
        a, [](const Eigen::MatrixXd& x) { return x.array().log().matrix().eval(); },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd& x, const Eigen::MatrixXd&) {
            return (g.array() / x.array()).matrix().eval();
        });
}

NodePtr exp_op(const NodePtr& a) {
    return unary_elementwise(
        a, [](const Eigen::MatrixXd& x) { return x.array().exp().matrix().eval(); },
        [](const Eigen::MatrixXd& g, const Eigen::MatrixXd&, const Eigen::MatrixXd& y) {
            return (g.array() * y.array()).matrix().eval();
        });
}

NodePtr sum(const NodePtr& a) {
    auto n = make_node(Eigen::MatrixXd::Constant(1, 1, a->value.sum()), {a});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, a]() {
        a->ensure_grad();
        a->grad.array() += raw->grad(0, 0);
    };
    return n;
}

NodePtr mean(const NodePtr& a) {
    const double inv = 1.0 / static_cast<double>(a->value.size());
    auto n = make_node(Eigen::MatrixXd::Constant(1, 1, a->value.mean()), {a});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, a, inv]() {
        a->ensure_grad();
        a->grad.array() += raw->grad(0, 0) * inv;
    };
    return n;
}

NodePtr colwise_sum(const NodePtr& a) {
    auto n = make_node(a->value.colwise().sum(), {a});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, a]() {
        a->ensure_grad();
        a->grad += Eigen::MatrixXd::Ones(a->rows(), 1) * raw->grad;
    };
    return n;
}

NodePtr mse(const NodePtr& pred, const NodePtr& target) {
    require_same_shape(pred, target, "mse");
    const double inv = 1.0 / static_cast<double>(pred->value.size());
    Eigen::MatrixXd diff = pred->value - target->value;
    auto n = make_node(Eigen::MatrixXd::Constant(1, 1, diff.squaredNorm() * inv),
                       {pred, target});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, pred, target, diff, inv]() {
        const double g = raw->grad(0, 0) * 2.0 * inv;
        if (pred->requires_grad) {
            pred->ensure_grad();
            pred->grad += g * diff;
        }
        if (target->requires_grad) {
            target->ensure_grad();
            target->grad -= g * diff;
        }
    };
    return n;
}

NodePtr dense(const NodePtr& weight, const NodePtr& bias, const NodePtr& x) {
    if (weight->cols() != x->rows())
        throw DataError("dense: weight " + shape_str(weight->value) + " does not match input " +
                        shape_str(x->value));
    if (bias->rows() != weight->rows() || bias->cols() != 1)
        throw DataError("dense: bias " + shape_str(bias->value) + " must be (" +
                        std::to_string(weight->rows()) + "x1)");
    Eigen::MatrixXd y = weight->value * x->value;
    y.colwise() += bias->value.col(0);
    auto n = make_node(std::move(y), {weight, bias, x});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, weight, bias, x]() {
        if (weight->requires_grad) {
            weight->ensure_grad();
            weight->grad.noalias() += raw->grad * x->value.transpose();
        }
        if (bias->requires_grad) {
            bias->ensure_grad();
            bias->grad.col(0) += raw->grad.rowwise().sum();
        }
        if (x->requires_grad) {
            x->ensure_grad();
            x->grad.noalias() += weight->value.transpose() * raw->grad;
        }
    };
    return n;
}

NodePtr conv1d_causal(const NodePtr& x, const NodePtr& weight, const NodePtr& bias, int kernel,
                      int dilation, long block_len) {
    if (kernel < 1) throw ConfigError("conv kernel must be >= 1");
    if (dilation < 1) throw ConfigError("conv dilation must be >= 1");
    const long c_in = x->rows();
    const long total = x->cols();
    if (block_len < 1 || total % block_len != 0)
        throw DataError("conv1d_causal: input columns " + std::to_string(total) +
                        " are not a multiple of block length " + std::to_string(block_len));
    const long batch = total / block_len;
    if (weight->cols() != c_in * kernel)
        throw DataError("conv1d_causal: weight " + shape_str(weight->value) +
                        " does not match C_in*K = " + std::to_string(c_in * kernel));
    const long c_out = weight->rows();
    if (bias->rows() != c_out || bias->cols() != 1)
        throw DataError("conv1d_causal: bias " + shape_str(bias->value) + " must be (" +
                        std::to_string(c_out) + "x1)");

    // im2col: column (b,t) stacks the K dilated taps ending at step t,
    // zero where a tap reaches before the block start (left padding)
    Eigen::MatrixXd unfolded = Eigen::MatrixXd::Zero(c_in * kernel, total);
    for (long b = 0; b < batch; ++b) {
        for (long t = 0; t < block_len; ++t) {
            for (int j = 0; j < kernel; ++j) {
                const long src = t - static_cast<long>(kernel - 1 - j) * dilation;
                if (src < 0) continue;
                unfolded.block(static_cast<long>(j) * c_in, b * block_len + t, c_in, 1) =
                    x->value.col(b * block_len + src);
            }
        }
    }
    Eigen::MatrixXd y = weight->value * unfolded;
    y.colwise() += bias->value.col(0);
    auto n = make_node(std::move(y), {x, weight, bias});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, x, weight, bias, unfolded, kernel, dilation, block_len, batch,
                      c_in]() {
        if (weight->requires_grad) {
            weight->ensure_grad();
            weight->grad.noalias() += raw->grad * unfolded.transpose();
        }
        if (bias->requires_grad) {
            bias->ensure_grad();
            bias->grad.col(0) += raw->grad.rowwise().sum();
        }
        if (x->requires_grad) {
            x->ensure_grad();
            Eigen::MatrixXd g_unfolded = weight->value.transpose() * raw->grad;
            for (long b = 0; b < batch; ++b) {
                for (long t = 0; t < block_len; ++t) {
                    for (int j = 0; j < kernel; ++j) {
                        const long src = t - static_cast<long>(kernel - 1 - j) * dilation;
                        if (src < 0) continue;
                        x->grad.col(b * block_len + src) +=
                            g_unfolded.block(static_cast<long>(j) * c_in, b * block_len + t,
                                             c_in, 1);
                    }
                }
            }
        }
    };
    return n;
}

NodePtr block_last_col(const NodePtr& x, long block_len) {
    const long total = x->cols();
    if (block_len < 1 || total % block_len != 0)
        throw DataError("block_last_col: input columns not a multiple of block length");
    const long batch = total / block_len;
    Eigen::MatrixXd y(x->rows(), batch);
    for (long b = 0; b < batch; ++b) y.col(b) = x->value.col((b + 1) * block_len - 1);
    auto n = make_node(std::move(y), {x});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, x, block_len, batch]() {
        x->ensure_grad();
        for (long b = 0; b < batch; ++b)
            x->grad.col((b + 1) * block_len - 1) += raw->grad.col(b);
    };
    return n;
}

NodePtr concat_rows(const NodePtr& a, const NodePtr& b) {
    if (a->cols() != b->cols())
        throw DataError("concat_rows: column mismatch " + shape_str(a->value) + " vs " +
                        shape_str(b->value));
    Eigen::MatrixXd y(a->rows() + b->rows(), a->cols());
    y.topRows(a->rows()) = a->value;
    y.bottomRows(b->rows()) = b->value;
    auto n = make_node(std::move(y), {a, b});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, a, b]() {
        if (a->requires_grad) {
            a->ensure_grad();
            a->grad += raw->grad.topRows(a->rows());
        }
        if (b->requires_grad) {
            b->ensure_grad();
            b->grad += raw->grad.bottomRows(b->rows());
        }
    };
    return n;
}

NodePtr slice_rows(const NodePtr& a, long start, long count) {
    if (start < 0 || count < 1 || start + count > a->rows())
        throw DataError("slice_rows: range [" + std::to_string(start) + ", " +
                        std::to_string(start + count) + ") out of " + shape_str(a->value));
    auto n = make_node(a->value.middleRows(start, count), {a});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, a, start, count]() {
        a->ensure_grad();
        a->grad.middleRows(start, count) += raw->grad;
    };
    return n;
}

NodePtr slice_cols(const NodePtr& a, long start, long count) {
    if (start < 0 || count < 1 || start + count > a->cols())
        throw DataError("slice_cols: range [" + std::to_string(start) + ", " +
                        std::to_string(start + count) + ") out of " + shape_str(a->value));
    auto n = make_node(a->value.middleCols(start, count), {a});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, a, start, count]() {
        a->ensure_grad();
        a->grad.middleCols(start, count) += raw->grad;
    };
    return n;
}

NodePtr repeat_cols(const NodePtr& a, long times) {
    if (times < 1) throw DataError("repeat_cols: times must be >= 1");
    auto n = make_node(a->value.replicate(1, times), {a});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    long width = a->cols();
    n->backward_fn = [raw, a, times, width]() {
        a->ensure_grad();
        for (long r = 0; r < times; ++r) a->grad += raw->grad.middleCols(r * width, width);
    };
    return n;
}

NodePtr gaussian_sample(const NodePtr& mean, const NodePtr& logvar, const NodePtr& noise) {
    require_same_shape(mean, logvar, "gaussian_sample");
    require_same_shape(mean, noise, "gaussian_sample");
    Eigen::MatrixXd std_dev = (logvar->value.array() * 0.5).exp();
    auto n = make_node(mean->value.array() + std_dev.array() * noise->value.array(),
                       {mean, logvar, noise});
    if (!n->requires_grad) return n;
    Node* raw = n.get();
    n->backward_fn = [raw, mean, logvar, noise, std_dev]() {
        if (mean->requires_grad) {
            mean->ensure_grad();
            mean->grad += raw->grad;
        }
        if (logvar->requires_grad) {
            logvar->ensure_grad();
            logvar->grad.array() +=
                raw->grad.array() * noise->value.array() * std_dev.array() * 0.5;
        }
    };
    return n;
}

void backward(const NodePtr& root) {
    if (root->rows() != 1 || root->cols() != 1)
        throw DataError("gradient requested on non-scalar root of shape " +
                        shape_str(root->value));

    // iterative post-order DFS; reversed it yields root-first order where
    // every node is processed before its parents
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next_parent] = stack.back();
        if (next_parent < node->parents.size()) {
            NodePtr p = node->parents[next_parent++];
            if (!visited.count(p.get())) {
                visited.insert(p.get());
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node.get());
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        n->ensure_grad();
        n->grad.setZero();
    }
    root->grad(0, 0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn && (*it)->requires_grad) (*it)->backward_fn();
}

}  // namespace driveseg::nn
