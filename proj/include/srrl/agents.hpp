#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srrl/nn.hpp"
#include "srrl/rng.hpp"
#include "srrl/sr_core.hpp"
#include "srrl/tensor.hpp"

namespace srrl {

// One n-step minibatch. rewards_n holds the discounted n-step sums; boot_gamma
// is gamma^m for the bootstrap state (0 when the episode ended before any
// bootstrap state with a stored retrieval context was reached).
struct Batch {
    int size = 0;
    int state_dim = 0;
    int action_dim = 0;
    std::vector<double> states;       // B x s
    std::vector<double> actions;      // B x a
    std::vector<double> rewards_n;    // B
    std::vector<double> boot_gamma;   // B
    std::vector<double> boot_states;  // B x s
    std::vector<const ContextSlots*> ctx_state;  // B (null -> zero reference)
    std::vector<const ContextSlots*> ctx_boot;   // B
    // noise-reference ablation: explicit reference rows override aggregation
    const std::vector<double>* explicit_ref_state = nullptr;  // B x U
    const std::vector<double>* explicit_ref_boot = nullptr;   // B x U
};

struct DdpgConfig {
    int state_dim = 0;
    int action_dim = 0;
    int hidden = 256;
    bool sr = false;
    int ref_dim = 256;  // reference vector dimension U
    int heads = 4;
    int depth = 5;
    double lr = 1e-4;
    double gamma = 0.99;
    double tau = 0.01;
    double expl_stddev = 0.2;
    double expl_clip = 0.3;
    bool critic_agg_frozen = false;  // finetune phase
    std::uint64_t seed = 0;
};

// Deterministic-policy actor-critic with an EMA target critic and n-step
// Bellman targets. When `sr` is set, the actor and the critic each own an
// aggregation stack whose reference vector is concatenated after their first
// hidden layer.
class DdpgAgent {
  public:
    DdpgAgent(ParamRegistry& reg, const DdpgConfig& cfg);

    // Deterministic actor output, optionally with clipped exploration noise.
    std::vector<double> act(const std::vector<double>& state, const ContextSlots* ctx, bool explore,
                            Rng& noise_rng) const;
    std::vector<double> act_with_reference(const std::vector<double>& state, const std::vector<double>& ref,
                                           bool explore, Rng& noise_rng) const;
    std::vector<double> actor_mean(const std::vector<double>& state, const ContextSlots* ctx) const;

    double critic_update(const Batch& batch);
    double actor_update(const Batch& batch);
    void update_target();  // EMA with rate tau

    double q_value(const std::vector<double>& state, const std::vector<double>& action,
                   const ContextSlots* ctx) const;

    const DdpgConfig& config() const { return cfg_; }
    const Aggregator* actor_aggregator() const { return actor_agg_ ? &*actor_agg_ : nullptr; }
    const Aggregator* critic_aggregator() const { return critic_agg_ ? &*critic_agg_ : nullptr; }
    Adam& actor_optimizer() { return actor_opt_; }
    Adam& critic_optimizer() { return critic_opt_; }
    const Linear& actor_l1() const { return a1_; }
    const Linear& actor_l2() const { return a2_; }
    const Linear& actor_l3() const { return a3_; }
    const Linear& critic_l1() const { return c1_; }
    const Linear& critic_l2() const { return c2_; }
    const Linear& critic_l3() const { return c3_; }

    Tensor actor_forward(Tape& tape, const Tensor& states, const Tensor& ref) const;
    Tensor critic_forward(Tape& tape, const Tensor& states, const Tensor& actions, const Tensor& ref) const;
    Tensor target_critic_forward(Tape& tape, const Tensor& states, const Tensor& actions,
                                 const Tensor& ref) const;

  private:
    Tensor batch_reference(Tape& tape, const Aggregator& agg, const Tensor& states,
                           const std::vector<const ContextSlots*>& ctxs,
                           const std::vector<double>* explicit_ref) const;

    DdpgConfig cfg_;
    Linear a1_, a2_, a3_;  // actor
    Linear c1_, c2_, c3_;  // critic
    Linear t1_, t2_, t3_;  // target critic (EMA copies, never trained directly)
    std::optional<Aggregator> actor_agg_, critic_agg_;
    Adam actor_opt_, critic_opt_;
};

// Exploration helper: noise entries are clipped to +-clip before the sum and
// the result is clamped to the action box.
std::vector<double> add_clipped_noise(std::vector<double> action, const std::vector<double>& noise,
                                      double clip);

// Retrieval-free policy with the baseline actor architecture; the
// distillation student.
struct StudentPolicy {
    ParamRegistry params;
    Linear l1, l2, l3;
    int state_dim = 0;
    int action_dim = 0;

    static StudentPolicy create(int state_dim, int action_dim, int hidden, std::uint64_t seed);
    Tensor forward(Tape& tape, const Tensor& states) const;
    std::vector<double> act(const std::vector<double>& state) const;
};

struct DistillOptions {
    int epochs = 200;
    double lr = 1e-3;  // cosine-annealed to 0 over `epochs`
    double sigma = 0.1;
    int batch = 256;
    double holdout_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct DistillResult {
    StudentPolicy student;
    std::vector<double> epoch_losses;  // mean NLL per epoch
    double initial_loss = 0.0;
    double final_lr = 0.0;
    double mse_holdout = 0.0;      // per-dimension squared error on held-out states
    double mean_abs_diff = 0.0;    // per-dimension |a_student - a_teacher| on held-out states
    std::size_t holdout_size = 0;
};

double cosine_lr(double base_lr, int epoch, int total_epochs);

// Relabels every state with the teacher's deterministic action and fits the
// student by Gaussian maximum likelihood (fixed sigma, so the data term is a
// scaled MSE). Teacher actions use each state's stored retrieval context.
DistillResult distill(const DdpgAgent& teacher, const std::vector<std::vector<double>>& states,
                      const std::vector<ContextSlots>& contexts, const DistillOptions& options);

// Mean KL(N(mu_a, sigma^2 I) || N(mu_b, sigma^2 I)) over states:
// mean ||mu_a - mu_b||^2 / (2 sigma^2).
double policy_kl(const std::function<std::vector<double>(const std::vector<double>&)>& mean_a,
                 const std::function<std::vector<double>(const std::vector<double>&)>& mean_b,
                 const std::vector<std::vector<double>>& states, double sigma);

}  // namespace srrl
