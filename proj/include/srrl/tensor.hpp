#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace srrl {

// Rank-2 storage; row vectors are 1 x n, scalars 1 x 1. Values are 64-bit
// floats throughout.
struct TensorNode {
    int rows = 0;
    int cols = 0;
    std::vector<double> value;
    std::vector<double> grad;  // allocated iff tracked
    bool tracked = false;
    std::string name;  // non-empty for parameters
};

class Tensor {
  public:
    Tensor() = default;

    static Tensor matrix(int rows, int cols, double fill = 0.0);
    static Tensor row(const std::vector<double>& v);
    static Tensor row(const double* data, int n);
    static Tensor scalar(double v);
    static Tensor from_rows(const std::vector<std::vector<double>>& rows);
    // Tracked leaf with persistent gradient buffer.
    static Tensor parameter(int rows, int cols, std::string name);

    bool defined() const { return node_ != nullptr; }
    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    int size() const { return node_->rows * node_->cols; }
    bool tracked() const { return node_->tracked; }
    const std::string& name() const { return node_->name; }

    double at(int r, int c) const { return node_->value[static_cast<std::size_t>(r) * node_->cols + c]; }
    double& at(int r, int c) { return node_->value[static_cast<std::size_t>(r) * node_->cols + c]; }
    double scalar_value() const;

    std::vector<double>& values() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& grads();
    const std::vector<double>& grads() const;

    void zero_grad();
    void fill(double v);

    TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<TensorNode>& shared_node() const { return node_; }

  private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;

    friend class Tape;
};

bool all_finite(const Tensor& t);

// Reverse-mode tape. Ops validate shapes, compute eagerly and record a
// backward closure when recording is on and any input is tracked.
//
// backward() replays the whole tape in reverse, so call clear() (or use a
// fresh Tape) between independent forward computations. Parameter gradients
// accumulate across backward calls; intermediate gradients are reset at the
// start of each backward pass.
class Tape {
  public:
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor add_rowvec(const Tensor& a, const Tensor& bias);  // bias 1 x n
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double c);
    Tensor add_const(const Tensor& a, double c);
    Tensor relu(const Tensor& a);
    Tensor tanh(const Tensor& a);
    Tensor exp(const Tensor& a);
    Tensor sqrt(const Tensor& a);
    Tensor square(const Tensor& a);
    Tensor clamp(const Tensor& a, double lo, double hi);
    Tensor minimum(const Tensor& a, const Tensor& b);
    Tensor softmax_rows(const Tensor& a);
    Tensor sum_all(const Tensor& a);   // 1 x 1
    Tensor mean_all(const Tensor& a);  // 1 x 1
    Tensor row_sum(const Tensor& a);   // m x 1
    Tensor slice_rows(const Tensor& a, int r0, int r1);
    Tensor slice_cols(const Tensor& a, int c0, int c1);
    Tensor concat_cols(const Tensor& a, const Tensor& b);
    Tensor concat_rows(const std::vector<Tensor>& parts);
    Tensor gather_rows(const Tensor& table, const std::vector<int>& idx);
    Tensor broadcast_row(const Tensor& row, int rows);  // 1 x n -> m x n

    // loss must be scalar and live on this tape.
    void backward(const Tensor& loss);

    void clear();
    std::size_t size() const { return entries_.size(); }
    bool recording() const { return pause_depth_ == 0; }

    class NoGrad {
      public:
        explicit NoGrad(Tape& t) : tape_(t) { ++tape_.pause_depth_; }
        ~NoGrad() { --tape_.pause_depth_; }
        NoGrad(const NoGrad&) = delete;
        NoGrad& operator=(const NoGrad&) = delete;

      private:
        Tape& tape_;
    };

  private:
    struct Entry {
        std::shared_ptr<TensorNode> out;
        std::function<void()> back;
    };

    Tensor make(int rows, int cols, bool tracked);
    bool track(const Tensor& a) const { return recording() && a.tracked(); }
    bool track(const Tensor& a, const Tensor& b) const { return recording() && (a.tracked() || b.tracked()); }
    void record(const Tensor& out, std::function<void()> back);
    static std::vector<double>& grad_of(const Tensor& t);

    std::vector<Entry> entries_;
    int pause_depth_ = 0;
};

}  // namespace srrl
