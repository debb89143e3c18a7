#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gridrl/linalg.hpp"

namespace gridrl {

// Minimal reverse-mode tensor: 2-D doubles, dynamic tape built per forward
// pass. Scalars are {1,1}, vectors {n,1}. Single-threaded per graph.
class Tensor {
public:
    struct Node {
        int rows = 0, cols = 0;
        std::vector<double> val;
        std::vector<double> grad;  // allocated lazily; persists on leaves until zero_grad
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backprop;  // scatter this->grad into parents

        void ensure_grad() {
            if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
        }
    };

    Tensor() = default;
    Tensor(int rows, int cols, double fill = 0.0, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor from_values(int rows, int cols, std::vector<double> vals, bool requires_grad = false);
    static Tensor from_matrix(const Matrix& m, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(n_); }
    int rows() const { return n_->rows; }
    int cols() const { return n_->cols; }
    std::size_t numel() const { return n_->val.size(); }
    bool requires_grad() const { return n_->requires_grad; }

    double item() const;
    const std::vector<double>& values() const { return n_->val; }
    std::vector<double>& values_mut() { return n_->val; }
    const std::vector<double>& grad() const;
    std::vector<double>& grad_mut();
    void zero_grad();

    // Reverse pass from a scalar; accumulates into requires_grad leaves.
    void backward() const;

    std::shared_ptr<Node> node() const { return n_; }

private:
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}
    std::shared_ptr<Node> n_;

    friend Tensor make_op(int rows, int cols, std::vector<double> vals,
                          std::vector<Tensor> parents,
                          std::function<void(Tensor::Node&)> backprop);
};

// Disables taping in scope; forward values are still computed.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor pow_int(const Tensor& a, int p);  // elementwise power, p >= 1
Tensor tanh_t(const Tensor& a);
Tensor relu_t(const Tensor& a);
Tensor sigmoid_t(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor clamp_t(const Tensor& a, double lo, double hi);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor mean_last_axis(const Tensor& a);  // {r,c} -> {r,1}
Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);  // stack column blocks vertically
Tensor concat_cols(const std::vector<Tensor>& parts);  // stack row blocks side by side

}  // namespace gridrl
