#include "gridrl/tensor.hpp"

#include <cassert>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace gridrl {

namespace {

thread_local int g_no_grad_depth = 0;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                                    "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                    "x" + std::to_string(b.cols()) + ")");
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor::Tensor(int rows, int cols, double fill, bool requires_grad) {
    n_ = std::make_shared<Node>();
    n_->rows = rows;
    n_->cols = cols;
    n_->val.assign(static_cast<std::size_t>(rows) * cols, fill);
    n_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    Tensor t(1, 1, v, requires_grad);
    return t;
}

Tensor Tensor::from_values(int rows, int cols, std::vector<double> vals, bool requires_grad) {
    if (vals.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("from_values: element count does not match shape");
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->rows = rows;
    t.n_->cols = cols;
    t.n_->val = std::move(vals);
    t.n_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
    return from_values(m.rows(), m.cols(), m.data(), requires_grad);
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor is not scalar");
    return n_->val[0];
}

const std::vector<double>& Tensor::grad() const {
    n_->ensure_grad();
    return n_->grad;
}

std::vector<double>& Tensor::grad_mut() {
    n_->ensure_grad();
    return n_->grad;
}

void Tensor::zero_grad() { n_->grad.assign(n_->val.size(), 0.0); }

void Tensor::backward() const {
    if (numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    // Iterative post-order DFS over the requires_grad subgraph.
    std::vector<Node*> order;
    std::set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    if (!n_->requires_grad) return;
    stack.emplace_back(n_.get(), 0);
    visited.insert(n_.get());
    while (!stack.empty()) {
        auto& top = stack.back();
        if (top.second < top.first->parents.size()) {
            Node* p = top.first->parents[top.second++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(top.first);
            stack.pop_back();
        }
    }
    n_->ensure_grad();
    n_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

Tensor make_op(int rows, int cols, std::vector<double> vals, std::vector<Tensor> parents,
               std::function<void(Tensor::Node&)> backprop) {
    auto node = std::make_shared<Tensor::Node>();
    node->rows = rows;
    node->cols = cols;
    node->val = std::move(vals);
    bool needs = false;
    if (grad_enabled())
        for (const Tensor& p : parents)
            if (p.requires_grad()) needs = true;
    node->requires_grad = needs;
    if (needs) {
        node->parents.reserve(parents.size());
        for (const Tensor& p : parents) node->parents.push_back(p.node());
        node->backprop = std::move(backprop);
    }
    return Tensor(std::move(node));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + ")");
    int m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
            double aik = av[i * k + kk];
            if (aik == 0.0) continue;
            for (int j = 0; j < n; ++j) out[i * n + j] += aik * bv[kk * n + j];
        }
    return make_op(m, n, std::move(out), {a, b}, [m, k, n](Tensor::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            // dA = dC * B^T
            for (int i = 0; i < m; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += self.grad[i * n + j] * pb.val[kk * n + j];
                    pa.grad[i * k + kk] += s;
                }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            // dB = A^T * dC
            for (int kk = 0; kk < k; ++kk)
                for (int i = 0; i < m; ++i) {
                    double aik = pa.val[i * k + kk];
                    if (aik == 0.0) continue;
                    for (int j = 0; j < n; ++j) pb.grad[kk * n + j] += aik * self.grad[i * n + j];
                }
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_op(a.rows(), a.cols(), std::move(out), {a, b}, [](Tensor::Node& self) {
        for (int side = 0; side < 2; ++side) {
            auto& p = *self.parents[side];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return make_op(a.rows(), a.cols(), std::move(out), {a, b}, [](Tensor::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return make_op(a.rows(), a.cols(), std::move(out), {a, b}, [](Tensor::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.val[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.val[i];
        }
    });
}

Tensor add_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.values());
    for (double& v : out) v += s;
    return make_op(a.rows(), a.cols(), std::move(out), {a}, [](Tensor::Node& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    });
}

Tensor mul_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.values());
    for (double& v : out) v *= s;
    return make_op(a.rows(), a.cols(), std::move(out), {a}, [s](Tensor::Node& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += s * self.grad[i];
    });
}

Tensor pow_int(const Tensor& a, int p) {
    if (p < 1) throw std::invalid_argument("pow_int: exponent must be >= 1");
    std::vector<double> out(a.values());
    for (double& v : out) {
        double base = v, acc = v;
        for (int i = 1; i < p; ++i) acc *= base;
        v = acc;
    }
    return make_op(a.rows(), a.cols(), std::move(out), {a}, [p](Tensor::Node& self) {
        auto& pa = *self.parents[0];
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            double deriv = static_cast<double>(p);  // p * base^{p-1}
            for (int j = 0; j < p - 1; ++j) deriv *= pa.val[i];
            pa.grad[i] += self.grad[i] * deriv;
        }
    });
}

namespace {

template <typename F, typename DF>
Tensor unary_op(const Tensor& a, F f, DF df_from_in_out) {
    std::vector<double> out(a.values());
    for (double& v : out) v = f(v);
    auto out_copy = out;  // closure needs the outputs for several activations
    return make_op(a.rows(), a.cols(), std::move(out), {a},
                   [df_from_in_out, out_copy](Tensor::Node& self) {
                       auto& p = *self.parents[0];
                       p.ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                           p.grad[i] += self.grad[i] * df_from_in_out(p.val[i], out_copy[i]);
                   });
}

}  // namespace

Tensor tanh_t(const Tensor& a) {
    return unary_op(a, [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor relu_t(const Tensor& a) {
    return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid_t(const Tensor& a) {
    // 1/(1+exp(-x)); underflows to exactly 0 for the -inf mask sentinel.
    return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_t(const Tensor& a) {
    return unary_op(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
    return unary_op(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp_t(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
    return unary_op(a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
                    [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "minimum");
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], bv[i]);
    // Ties route the gradient to the first argument.
    return make_op(a.rows(), a.cols(), std::move(out), {a, b}, [](Tensor::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            bool first = pa.val[i] <= pb.val[i];
            if (first && pa.requires_grad) {
                pa.ensure_grad();
                pa.grad[i] += self.grad[i];
            } else if (!first && pb.requires_grad) {
                pb.ensure_grad();
                pb.grad[i] += self.grad[i];
            }
        }
    });
}

Tensor mean_last_axis(const Tensor& a) {
    int r = a.rows(), c = a.cols();
    std::vector<double> out(r, 0.0);
    const auto& av = a.values();
    for (int i = 0; i < r; ++i) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += av[i * c + j];
        out[i] = s / c;
    }
    return make_op(r, 1, std::move(out), {a}, [r, c](Tensor::Node& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (int i = 0; i < r; ++i) {
            double g = self.grad[i] / c;
            for (int j = 0; j < c; ++j) p.grad[i * c + j] += g;
        }
    });
}

Tensor mean_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    double inv = 1.0 / static_cast<double>(a.numel());
    return make_op(1, 1, {s * inv}, {a}, [inv](Tensor::Node& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        double g = self.grad[0] * inv;
        for (double& gv : p.grad) gv += g;
    });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return make_op(1, 1, {s}, {a}, [](Tensor::Node& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        double g = self.grad[0];
        for (double& gv : p.grad) gv += g;
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    int cols = parts[0].cols();
    int rows = 0;
    std::vector<double> out;
    for (const Tensor& p : parts) {
        if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
        rows += p.rows();
        out.insert(out.end(), p.values().begin(), p.values().end());
    }
    std::vector<int> row_counts;
    for (const Tensor& p : parts) row_counts.push_back(p.rows());
    return make_op(rows, cols, std::move(out), parts, [row_counts, cols](Tensor::Node& self) {
        std::size_t offset = 0;
        for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
            auto& p = *self.parents[pi];
            std::size_t count = static_cast<std::size_t>(row_counts[pi]) * cols;
            if (p.requires_grad) {
                p.ensure_grad();
                for (std::size_t i = 0; i < count; ++i) p.grad[i] += self.grad[offset + i];
            }
            offset += count;
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    int rows = parts[0].rows();
    int cols = 0;
    std::vector<int> col_counts;
    for (const Tensor& p : parts) {
        if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
        col_counts.push_back(p.cols());
        cols += p.cols();
    }
    std::vector<double> out(static_cast<std::size_t>(rows) * cols);
    int offset = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& pv = parts[pi].values();
        int pc = col_counts[pi];
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < pc; ++j) out[static_cast<std::size_t>(i) * cols + offset + j] = pv[i * pc + j];
        offset += pc;
    }
    return make_op(rows, cols, std::move(out), parts, [col_counts, rows, cols](Tensor::Node& self) {
        int offset = 0;
        for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
            auto& p = *self.parents[pi];
            int pc = col_counts[pi];
            if (p.requires_grad) {
                p.ensure_grad();
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < pc; ++j)
                        p.grad[i * pc + j] += self.grad[static_cast<std::size_t>(i) * cols + offset + j];
            }
            offset += pc;
        }
    });
}

}  // namespace gridrl
