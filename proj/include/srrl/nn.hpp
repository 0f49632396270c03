#pragma once

#include <string>
#include <utility>
#include <vector>

#include "srrl/rng.hpp"
#include "srrl/tensor.hpp"

namespace srrl {

// Ordered name -> parameter map. Modules register their tensors here so
// optimizers and checkpoints see one flat, stable listing.
class ParamRegistry {
  public:
    Tensor create(const std::string& name, int rows, int cols);
    void add(const std::string& name, const Tensor& t);
    bool has(const std::string& name) const;
    Tensor get(const std::string& name) const;
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::vector<std::pair<std::string, Tensor>> items_with_prefix(const std::string& prefix) const;
    void zero_grads();
    std::size_t total_size() const;

  private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

void orthogonal_init(Tensor& w, Rng& rng);
void uniform_init(Tensor& w, Rng& rng, double lo, double hi);

// y = x W + b, optional activation applied by the caller.
struct Linear {
    Tensor weight;  // in x out
    Tensor bias;    // 1 x out

    enum class Init { kOrthogonal, kUniformSmall };

    static Linear create(ParamRegistry& reg, const std::string& prefix, int in, int out, Init init,
                         std::uint64_t seed);
    Tensor forward(Tape& tape, const Tensor& x) const;
    int in_dim() const { return weight.rows(); }
    int out_dim() const { return weight.cols(); }
};

// Plain MLP: ReLU between hidden layers, configurable head activation.
struct Mlp {
    enum class Head { kLinear, kTanh };

    std::vector<Linear> layers;
    Head head = Head::kLinear;

    // dims = {in, h1, ..., out}; final layer init is orthogonal unless
    // final_uniform is set (actor/critic output heads).
    static Mlp create(ParamRegistry& reg, const std::string& prefix, const std::vector<int>& dims, Head head,
                      bool final_uniform, std::uint64_t seed);
    Tensor forward(Tape& tape, const Tensor& x) const;
    std::vector<double> forward_row(const std::vector<double>& x) const;  // no-grad convenience
    int in_dim() const { return layers.front().in_dim(); }
    int out_dim() const { return layers.back().out_dim(); }
};

// Cross-attention block: one query row against M (key, value) slots.
// model_dim must divide evenly into num_heads.
struct MultiHeadAttention {
    int num_heads = 1;
    int model_dim = 0;
    Tensor wq, wk, wv, wo;  // model_dim x model_dim projections

    static MultiHeadAttention create(ParamRegistry& reg, const std::string& prefix, int num_heads,
                                     int model_dim, std::uint64_t seed);
    // q: 1 x U, keys/values: M x U, M >= 1. Optional per-head attention
    // weights (num_heads x M, row-major) for inspection.
    Tensor forward(Tape& tape, const Tensor& q, const Tensor& keys, const Tensor& values,
                   std::vector<double>* weights_out = nullptr) const;
};

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
};

// Standard Adam with bias correction over a fixed parameter list.
class Adam {
  public:
    Adam(std::vector<std::pair<std::string, Tensor>> params, double lr, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long step_count() const { return step_count_; }
    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }

  private:
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<AdamState> states_;
    double lr_, beta1_, beta2_, eps_;
    long step_count_ = 0;
};

}  // namespace srrl
