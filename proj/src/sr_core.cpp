#include "srrl/sr_core.hpp"

#include <cmath>
#include <stdexcept>

namespace srrl {

namespace {
constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)
}  // namespace

QueryStrategy parse_query_strategy(const std::string& s) {
    if (s == "learned") return QueryStrategy::kLearned;
    if (s == "current_state") return QueryStrategy::kCurrentState;
    if (s == "random_sample") return QueryStrategy::kRandomSample;
    if (s == "noise_reference") return QueryStrategy::kNoiseReference;
    throw std::invalid_argument("unknown query_strategy: " + s);
}

std::string to_string(QueryStrategy s) {
    switch (s) {
        case QueryStrategy::kLearned: return "learned";
        case QueryStrategy::kCurrentState: return "current_state";
        case QueryStrategy::kRandomSample: return "random_sample";
        case QueryStrategy::kNoiseReference: return "noise_reference";
    }
    return "?";
}

ContextSlots ContextSlots::from_retrieval(const RetrievalSet& set, int dim) {
    ContextSlots ctx;
    ctx.dim = dim;
    for (std::size_t i = 0; i < set.trajectories.size(); ++i) {
        const auto& traj = set.trajectories[i];
        for (std::size_t j = 0; j < traj.size(); ++j) {
            ctx.states.insert(ctx.states.end(), traj[j].begin(), traj[j].end());
            ctx.offsets.push_back(set.offsets[i][j]);
        }
    }
    ctx.count = static_cast<int>(ctx.offsets.size());
    return ctx;
}

Aggregator::Aggregator(ParamRegistry& reg, const std::string& prefix, const Config& cfg, std::uint64_t seed)
    : cfg_(cfg),
      q_enc_(Mlp::create(reg, prefix + ".q_enc", {cfg.state_dim, cfg.hidden, cfg.out_dim}, Mlp::Head::kLinear,
                         false, seed)),
      k_enc_(Mlp::create(reg, prefix + ".k_enc", {cfg.state_dim, cfg.hidden, cfg.out_dim}, Mlp::Head::kLinear,
                         false, seed)),
      v_enc_(Mlp::create(reg, prefix + ".v_enc", {cfg.state_dim, cfg.hidden, cfg.out_dim}, Mlp::Head::kLinear,
                         false, seed)),
      time_table_(reg.create(prefix + ".time_table", cfg.depth, cfg.out_dim)),
      mha_(MultiHeadAttention::create(reg, prefix + ".mha", cfg.heads, cfg.out_dim, seed)) {}

Tensor Aggregator::forward(Tape& tape, const Tensor& state_row, const ContextSlots& ctx,
                           std::vector<double>* attention_out) const {
    if (ctx.empty()) return Tensor::matrix(1, cfg_.out_dim);
    Tensor slots = Tensor::matrix(ctx.count, ctx.dim);
    slots.values() = ctx.states;
    Tensor keys = tape.add(k_enc_.forward(tape, slots), tape.gather_rows(time_table_, ctx.offsets));
    Tensor values = tape.add(v_enc_.forward(tape, slots), tape.gather_rows(time_table_, ctx.offsets));
    Tensor q = q_enc_.forward(tape, state_row);
    return mha_.forward(tape, q, keys, values, attention_out);
}

Tensor Aggregator::forward_batch(Tape& tape, const Tensor& states,
                                 const std::vector<const ContextSlots*>& ctxs) const {
    const int batch = states.rows();
    if (static_cast<int>(ctxs.size()) != batch)
        throw std::invalid_argument("aggregator: context count does not match batch");

    int total = 0;
    for (const auto* c : ctxs) total += c ? c->count : 0;
    if (total == 0) return Tensor::matrix(batch, cfg_.out_dim);

    Tensor slots = Tensor::matrix(total, cfg_.state_dim);
    std::vector<int> offsets;
    offsets.reserve(static_cast<std::size_t>(total));
    {
        auto& v = slots.values();
        std::size_t at = 0;
        for (const auto* c : ctxs) {
            if (!c || c->empty()) continue;
            std::copy(c->states.begin(), c->states.end(), v.begin() + at);
            at += c->states.size();
            offsets.insert(offsets.end(), c->offsets.begin(), c->offsets.end());
        }
    }
    Tensor emb = tape.gather_rows(time_table_, offsets);
    Tensor keys = tape.add(k_enc_.forward(tape, slots), emb);
    Tensor values = tape.add(v_enc_.forward(tape, slots), emb);
    Tensor q_all = q_enc_.forward(tape, states);

    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(batch));
    int at = 0;
    for (int b = 0; b < batch; ++b) {
        const auto* c = ctxs[static_cast<std::size_t>(b)];
        if (!c || c->empty()) {
            rows.push_back(Tensor::matrix(1, cfg_.out_dim));
            continue;
        }
        Tensor q = tape.slice_rows(q_all, b, b + 1);
        Tensor k = tape.slice_rows(keys, at, at + c->count);
        Tensor v = tape.slice_rows(values, at, at + c->count);
        rows.push_back(mha_.forward(tape, q, k, v));
        at += c->count;
    }
    return tape.concat_rows(rows);
}

std::vector<double> Aggregator::reference(const std::vector<double>& state, const ContextSlots& ctx) const {
    Tape tape;
    Tape::NoGrad ng(tape);
    return forward(tape, Tensor::row(state), ctx).values();
}

void QueryRollout::clear() {
    states.clear();
    queries.clear();
    rewards.clear();
    logps.clear();
    values.clear();
}

QueryModule::QueryModule(ParamRegistry& reg, const std::string& prefix, const Config& cfg, std::uint64_t seed)
    : cfg_(cfg),
      mean_net_(Mlp::create(reg, prefix + ".mean", {cfg.state_dim, cfg.hidden, cfg.state_dim},
                            Mlp::Head::kLinear, true, seed)),
      log_std_(reg.create(prefix + ".log_std", 1, cfg.state_dim)),
      value_net_(Mlp::create(reg, prefix + ".value", {cfg.state_dim, cfg.hidden, 1}, Mlp::Head::kLinear, true,
                             seed)),
      opt_(reg.items_with_prefix(prefix + "."), cfg.lr) {}

Tensor QueryModule::clamped_log_std(Tape& tape) const { return tape.clamp(log_std_, kLogStdMin, kLogStdMax); }

std::vector<double> QueryModule::mean(const std::vector<double>& state) const {
    return mean_net_.forward_row(state);
}

std::vector<double> QueryModule::stddev() const {
    std::vector<double> out(log_std_.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double ls = std::min(kLogStdMax, std::max(kLogStdMin, log_std_.values()[i]));
        out[i] = std::exp(ls);
    }
    return out;
}

std::vector<double> QueryModule::sample(const std::vector<double>& state, Rng& rng) const {
    std::vector<double> q = mean(state);
    const auto sd = stddev();
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += sd[i] * rng.gaussian();
    return q;
}

double QueryModule::log_prob(const std::vector<double>& state, const std::vector<double>& query) const {
    const auto mu = mean(state);
    const auto sd = stddev();
    double lp = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double z = (query[i] - mu[i]) / sd[i];
        lp += -0.5 * z * z - std::log(sd[i]) - kHalfLog2Pi;
    }
    return lp;
}

double QueryModule::value(const std::vector<double>& state) const { return value_net_.forward_row(state)[0]; }

void QueryModule::record(const std::vector<double>& state, const std::vector<double>& query, double reward) {
    rollout_.states.push_back(state);
    rollout_.queries.push_back(query);
    rollout_.rewards.push_back(reward);
    rollout_.logps.push_back(log_prob(state, query));
    rollout_.values.push_back(value(state));
}

void QueryModule::gae(const std::vector<double>& rewards, const std::vector<double>& values, double gamma,
                      double lambda, std::vector<double>* advantages, std::vector<double>* returns) {
    const std::size_t n = rewards.size();
    advantages->assign(n, 0.0);
    returns->assign(n, 0.0);
    double running = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double next_value = (i + 1 < n) ? values[i + 1] : 0.0;  // episode ends here
        const double delta = rewards[i] + gamma * next_value - values[i];
        running = delta + gamma * lambda * (i + 1 < n ? running : 0.0);
        (*advantages)[i] = running;
        (*returns)[i] = running + values[i];
    }
}

void QueryModule::normalize(std::vector<double>& advantages) {
    if (advantages.empty()) return;
    double mean = 0.0;
    for (double a : advantages) mean += a;
    mean /= static_cast<double>(advantages.size());
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(advantages.size());
    const double denom = std::sqrt(var) + 1e-8;
    for (double& a : advantages) a = (a - mean) / denom;
}

Tensor QueryModule::actor_loss(Tape& tape, const QueryRollout& rollout,
                               const std::vector<double>& advantages) const {
    const int m = static_cast<int>(rollout.size());
    Tensor states = Tensor::from_rows(rollout.states);
    Tensor queries = Tensor::from_rows(rollout.queries);
    Tensor logp_old = Tensor::matrix(m, 1);
    logp_old.values() = rollout.logps;
    Tensor adv = Tensor::matrix(m, 1);
    adv.values() = advantages;

    Tensor mu = mean_net_.forward(tape, states);
    Tensor log_std = clamped_log_std(tape);
    Tensor inv_var = tape.exp(tape.scale(log_std, -2.0));
    Tensor diff = tape.sub(queries, mu);
    Tensor quad = tape.row_sum(tape.mul(tape.square(diff), tape.broadcast_row(inv_var, m)));
    Tensor sum_log_std = tape.broadcast_row(tape.row_sum(log_std), m);
    Tensor logp = tape.add_const(tape.sub(tape.scale(quad, -0.5), sum_log_std),
                                 -kHalfLog2Pi * cfg_.state_dim);

    Tensor ratio = tape.exp(tape.sub(logp, logp_old));
    Tensor surr1 = tape.mul(ratio, adv);
    Tensor surr2 = tape.mul(tape.clamp(ratio, 1.0 - cfg_.clip, 1.0 + cfg_.clip), adv);
    Tensor ppo = tape.scale(tape.mean_all(tape.minimum(surr1, surr2)), -1.0);

    Tensor id = identity_loss(tape, rollout);
    return tape.add(ppo, tape.scale(id, cfg_.identity_coef));
}

Tensor QueryModule::identity_loss(Tape& tape, const QueryRollout& rollout) const {
    Tensor states = Tensor::from_rows(rollout.states);
    Tensor mu = mean_net_.forward(tape, states);
    Tensor diff = tape.sub(mu, states);
    return tape.mean_all(tape.sqrt(tape.row_sum(tape.square(diff))));
}

Tensor QueryModule::value_loss(Tape& tape, const QueryRollout& rollout,
                               const std::vector<double>& returns) const {
    const int m = static_cast<int>(rollout.size());
    Tensor states = Tensor::from_rows(rollout.states);
    Tensor target = Tensor::matrix(m, 1);
    target.values() = returns;
    Tensor v = value_net_.forward(tape, states);
    return tape.scale(tape.mean_all(tape.square(tape.sub(v, target))), 0.5);
}

double QueryModule::update() {
    if (rollout_.size() == 0) return 0.0;
    std::vector<double> advantages, returns;
    gae(rollout_.rewards, rollout_.values, cfg_.gamma, cfg_.gae_lambda, &advantages, &returns);
    normalize(advantages);

    double last_actor_loss = 0.0;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        Tape tape;
        opt_.zero_grad();
        Tensor actor = actor_loss(tape, rollout_, advantages);
        Tensor value = value_loss(tape, rollout_, returns);
        Tensor total = tape.add(actor, tape.scale(value, cfg_.value_coef));
        tape.backward(total);
        opt_.step();
        last_actor_loss = actor.scalar_value();
    }
    rollout_.clear();
    return last_actor_loss;
}

QueryDecision make_query(const QueryModule* module, QueryStrategy strategy, const std::vector<double>& state,
                         long episode_index, Phase phase, Rng& rng, bool deterministic) {
    QueryDecision d;
    switch (strategy) {
        case QueryStrategy::kLearned: {
            const bool bypass = phase == Phase::kPretrain && episode_index % 2 != 0;
            if (bypass) {
                d.query = state;
                d.trainable = false;
            } else {
                d.query = deterministic ? module->mean(state) : module->sample(state, rng);
                d.trainable = !deterministic;
            }
            break;
        }
        case QueryStrategy::kCurrentState:
            d.query = state;
            break;
        case QueryStrategy::kRandomSample:
            d.query = state;
            d.random_indices = true;
            break;
        case QueryStrategy::kNoiseReference:
            d.query = state;
            d.noise_reference = true;
            break;
    }
    return d;
}

}  // namespace srrl
