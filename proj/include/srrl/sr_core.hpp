#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srrl/nn.hpp"
#include "srrl/retrieval.hpp"
#include "srrl/rng.hpp"
#include "srrl/tensor.hpp"

namespace srrl {

enum class QueryStrategy { kLearned, kCurrentState, kRandomSample, kNoiseReference };

QueryStrategy parse_query_strategy(const std::string& s);
std::string to_string(QueryStrategy s);

enum class Phase { kPretrain, kFinetune };

// Retrieved trajectories flattened to k*depth (state, offset) slots, the unit
// the aggregator consumes and the replay buffer stores alongside each
// transition. count == 0 marks the warm-up fallback (zero reference vector).
struct ContextSlots {
    int dim = 0;
    int count = 0;
    std::vector<double> states;  // count x dim
    std::vector<int> offsets;    // count, each in [0, depth)

    bool empty() const { return count == 0; }
    static ContextSlots from_retrieval(const RetrievalSet& set, int dim);
};

// Encodes retrieved states, adds learnable per-offset time embeddings to keys
// and values, and cross-attends from the encoded current state. Output is the
// reference vector of dimension `out_dim`.
class Aggregator {
  public:
    struct Config {
        int state_dim = 0;
        int hidden = 256;
        int out_dim = 256;
        int heads = 4;
        int depth = 5;
    };

    Aggregator(ParamRegistry& reg, const std::string& prefix, const Config& cfg, std::uint64_t seed);

    Tensor forward(Tape& tape, const Tensor& state_row, const ContextSlots& ctx,
                   std::vector<double>* attention_out = nullptr) const;
    // One aggregation per row of `states`; empty contexts yield zero rows.
    Tensor forward_batch(Tape& tape, const Tensor& states, const std::vector<const ContextSlots*>& ctxs) const;
    std::vector<double> reference(const std::vector<double>& state, const ContextSlots& ctx) const;

    const Config& config() const { return cfg_; }
    const Mlp& query_encoder() const { return q_enc_; }
    const Mlp& key_encoder() const { return k_enc_; }
    const Mlp& value_encoder() const { return v_enc_; }
    const MultiHeadAttention& attention() const { return mha_; }
    Tensor time_table() const { return time_table_; }

  private:
    Config cfg_;
    Mlp q_enc_, k_enc_, v_enc_;
    Tensor time_table_;  // depth x out_dim
    MultiHeadAttention mha_;
};

struct QueryRollout {
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> queries;
    std::vector<double> rewards;
    std::vector<double> logps;
    std::vector<double> values;

    std::size_t size() const { return states.size(); }
    void clear();
};

// Gaussian policy over state space trained on-policy with a clipped
// surrogate, plus an identity regularizer pulling the policy mean toward the
// input state. The value head trains with the usual 0.5 * MSE loss.
class QueryModule {
  public:
    struct Config {
        int state_dim = 0;
        int hidden = 256;
        double lr = 3e-4;
        double gamma = 0.99;
        double gae_lambda = 0.95;
        double clip = 0.2;
        int epochs = 4;
        double identity_coef = 1.0;
        double value_coef = 0.5;
    };

    QueryModule(ParamRegistry& reg, const std::string& prefix, const Config& cfg, std::uint64_t seed);

    std::vector<double> mean(const std::vector<double>& state) const;
    std::vector<double> stddev() const;
    std::vector<double> sample(const std::vector<double>& state, Rng& rng) const;
    double log_prob(const std::vector<double>& state, const std::vector<double>& query) const;
    double value(const std::vector<double>& state) const;

    void begin_episode() { rollout_.clear(); }
    void record(const std::vector<double>& state, const std::vector<double>& query, double reward);
    void discard_episode() { rollout_.clear(); }
    std::size_t rollout_size() const { return rollout_.size(); }

    // Runs the on-policy update on the recorded episode and clears it.
    // Returns the final total actor loss; empty rollouts are a no-op.
    double update();

    // Total actor loss (surrogate + identity term) for a rollout with given
    // normalized advantages; exposed for gradient verification.
    Tensor actor_loss(Tape& tape, const QueryRollout& rollout, const std::vector<double>& advantages) const;
    Tensor identity_loss(Tape& tape, const QueryRollout& rollout) const;
    Tensor value_loss(Tape& tape, const QueryRollout& rollout, const std::vector<double>& returns) const;

    static void gae(const std::vector<double>& rewards, const std::vector<double>& values, double gamma,
                    double lambda, std::vector<double>* advantages, std::vector<double>* returns);
    static void normalize(std::vector<double>& advantages);

    const Config& config() const { return cfg_; }
    const Mlp& mean_net() const { return mean_net_; }
    Tensor log_std() const { return log_std_; }
    const QueryRollout& rollout() const { return rollout_; }

  private:
    Tensor clamped_log_std(Tape& tape) const;

    Config cfg_;
    Mlp mean_net_;
    Tensor log_std_;  // 1 x state_dim, clamped to [-5, 2] on use
    Mlp value_net_;
    QueryRollout rollout_;
    Adam opt_;
};

struct QueryDecision {
    std::vector<double> query;
    bool trainable = false;        // record this step into the rollout
    bool random_indices = false;   // retriever draws k uniform storage indices
    bool noise_reference = false;  // skip retrieval, reference ~ N(0, I)
};

// Strategy dispatch for one decision step. Learned queries sample from the
// policy (its mean when `deterministic`); during pretraining the learned
// strategy is bypassed on odd-parity episodes, which also marks the episode
// as non-trainable for the query module.
QueryDecision make_query(const QueryModule* module, QueryStrategy strategy, const std::vector<double>& state,
                         long episode_index, Phase phase, Rng& rng, bool deterministic = false);

}  // namespace srrl
