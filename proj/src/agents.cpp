#include "srrl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace srrl {

namespace {

std::vector<std::pair<std::string, Tensor>> merge(std::vector<std::pair<std::string, Tensor>> a,
                                                  const std::vector<std::pair<std::string, Tensor>>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

DdpgAgent::DdpgAgent(ParamRegistry& reg, const DdpgConfig& cfg)
    : cfg_(cfg),
      a1_(Linear::create(reg, "actor.l1", cfg.state_dim, cfg.hidden, Linear::Init::kOrthogonal, cfg.seed)),
      a2_(Linear::create(reg, "actor.l2", cfg.hidden + (cfg.sr ? cfg.ref_dim : 0), cfg.hidden,
                         Linear::Init::kOrthogonal, cfg.seed)),
      a3_(Linear::create(reg, "actor.l3", cfg.hidden, cfg.action_dim, Linear::Init::kUniformSmall, cfg.seed)),
      c1_(Linear::create(reg, "critic.l1", cfg.state_dim + cfg.action_dim, cfg.hidden,
                         Linear::Init::kOrthogonal, cfg.seed)),
      c2_(Linear::create(reg, "critic.l2", cfg.hidden + (cfg.sr ? cfg.ref_dim : 0), cfg.hidden,
                         Linear::Init::kOrthogonal, cfg.seed)),
      c3_(Linear::create(reg, "critic.l3", cfg.hidden, 1, Linear::Init::kUniformSmall, cfg.seed)),
      t1_(Linear::create(reg, "target_critic.l1", cfg.state_dim + cfg.action_dim, cfg.hidden,
                         Linear::Init::kOrthogonal, cfg.seed)),
      t2_(Linear::create(reg, "target_critic.l2", cfg.hidden + (cfg.sr ? cfg.ref_dim : 0), cfg.hidden,
                         Linear::Init::kOrthogonal, cfg.seed)),
      t3_(Linear::create(reg, "target_critic.l3", cfg.hidden, 1, Linear::Init::kUniformSmall, cfg.seed)),
      actor_agg_(cfg.sr ? std::optional<Aggregator>(Aggregator(
                              reg, "actor_agg",
                              Aggregator::Config{cfg.state_dim, cfg.hidden, cfg.ref_dim, cfg.heads, cfg.depth},
                              cfg.seed))
                        : std::nullopt),
      critic_agg_(cfg.sr ? std::optional<Aggregator>(Aggregator(
                               reg, "critic_agg",
                               Aggregator::Config{cfg.state_dim, cfg.hidden, cfg.ref_dim, cfg.heads, cfg.depth},
                               cfg.seed))
                         : std::nullopt),
      actor_opt_(merge(reg.items_with_prefix("actor."), reg.items_with_prefix("actor_agg.")), cfg.lr),
      critic_opt_(cfg.critic_agg_frozen
                      ? reg.items_with_prefix("critic.")
                      : merge(reg.items_with_prefix("critic."), reg.items_with_prefix("critic_agg.")),
                  cfg.lr) {
    // target starts as an exact copy of the critic
    t1_.weight.values() = c1_.weight.values();
    t1_.bias.values() = c1_.bias.values();
    t2_.weight.values() = c2_.weight.values();
    t2_.bias.values() = c2_.bias.values();
    t3_.weight.values() = c3_.weight.values();
    t3_.bias.values() = c3_.bias.values();
}

Tensor DdpgAgent::actor_forward(Tape& tape, const Tensor& states, const Tensor& ref) const {
    Tensor h = tape.relu(a1_.forward(tape, states));
    if (cfg_.sr) h = tape.concat_cols(h, ref);
    h = tape.relu(a2_.forward(tape, h));
    return tape.tanh(a3_.forward(tape, h));
}

Tensor DdpgAgent::critic_forward(Tape& tape, const Tensor& states, const Tensor& actions,
                                 const Tensor& ref) const {
    Tensor h = tape.relu(c1_.forward(tape, tape.concat_cols(states, actions)));
    if (cfg_.sr) h = tape.concat_cols(h, ref);
    h = tape.relu(c2_.forward(tape, h));
    return c3_.forward(tape, h);
}

Tensor DdpgAgent::target_critic_forward(Tape& tape, const Tensor& states, const Tensor& actions,
                                        const Tensor& ref) const {
    Tensor h = tape.relu(t1_.forward(tape, tape.concat_cols(states, actions)));
    if (cfg_.sr) h = tape.concat_cols(h, ref);
    h = tape.relu(t2_.forward(tape, h));
    return t3_.forward(tape, h);
}

Tensor DdpgAgent::batch_reference(Tape& tape, const Aggregator& agg, const Tensor& states,
                                  const std::vector<const ContextSlots*>& ctxs,
                                  const std::vector<double>* explicit_ref) const {
    if (explicit_ref) {
        Tensor r = Tensor::matrix(states.rows(), cfg_.ref_dim);
        r.values() = *explicit_ref;
        return r;
    }
    return agg.forward_batch(tape, states, ctxs);
}

std::vector<double> DdpgAgent::actor_mean(const std::vector<double>& state, const ContextSlots* ctx) const {
    Tape tape;
    Tape::NoGrad ng(tape);
    Tensor ref;
    if (cfg_.sr) {
        ContextSlots none;
        ref = actor_agg_->forward(tape, Tensor::row(state), ctx ? *ctx : none);
    }
    return actor_forward(tape, Tensor::row(state), ref).values();
}

std::vector<double> add_clipped_noise(std::vector<double> action, const std::vector<double>& noise,
                                      double clip) {
    for (std::size_t i = 0; i < action.size(); ++i) {
        const double n = std::clamp(noise[i], -clip, clip);
        action[i] = std::clamp(action[i] + n, -1.0, 1.0);
    }
    return action;
}

std::vector<double> DdpgAgent::act(const std::vector<double>& state, const ContextSlots* ctx, bool explore,
                                   Rng& noise_rng) const {
    if (cfg_.sr && ctx == nullptr)
        throw std::invalid_argument("act: retrieval-enabled agent needs a context (may be empty)");
    std::vector<double> action = actor_mean(state, ctx);
    if (explore) {
        std::vector<double> noise(action.size());
        for (auto& n : noise) n = noise_rng.gaussian(0.0, cfg_.expl_stddev);
        action = add_clipped_noise(std::move(action), noise, cfg_.expl_clip);
    }
    return action;
}

std::vector<double> DdpgAgent::act_with_reference(const std::vector<double>& state,
                                                  const std::vector<double>& ref, bool explore,
                                                  Rng& noise_rng) const {
    Tape tape;
    Tape::NoGrad ng(tape);
    Tensor r = Tensor::row(ref);
    std::vector<double> action = actor_forward(tape, Tensor::row(state), r).values();
    if (explore) {
        std::vector<double> noise(action.size());
        for (auto& n : noise) n = noise_rng.gaussian(0.0, cfg_.expl_stddev);
        action = add_clipped_noise(std::move(action), noise, cfg_.expl_clip);
    }
    return action;
}

double DdpgAgent::q_value(const std::vector<double>& state, const std::vector<double>& action,
                          const ContextSlots* ctx) const {
    Tape tape;
    Tape::NoGrad ng(tape);
    Tensor ref;
    if (cfg_.sr) {
        ContextSlots none;
        ref = critic_agg_->forward(tape, Tensor::row(state), ctx ? *ctx : none);
    }
    return critic_forward(tape, Tensor::row(state), Tensor::row(action), ref).scalar_value();
}

double DdpgAgent::critic_update(const Batch& batch) {
    Tensor states = Tensor::matrix(batch.size, batch.state_dim);
    states.values() = batch.states;
    Tensor actions = Tensor::matrix(batch.size, batch.action_dim);
    actions.values() = batch.actions;

    // Bellman targets, no gradients anywhere in this block.
    std::vector<double> targets(static_cast<std::size_t>(batch.size));
    {
        Tape tape;
        Tape::NoGrad ng(tape);
        Tensor boot = Tensor::matrix(batch.size, batch.state_dim);
        boot.values() = batch.boot_states;
        Tensor ref_a, ref_c;
        if (cfg_.sr) {
            ref_a = batch_reference(tape, *actor_agg_, boot, batch.ctx_boot, batch.explicit_ref_boot);
            ref_c = batch_reference(tape, *critic_agg_, boot, batch.ctx_boot, batch.explicit_ref_boot);
        }
        Tensor boot_actions = actor_forward(tape, boot, ref_a);
        Tensor qn = target_critic_forward(tape, boot, boot_actions, ref_c);
        for (int i = 0; i < batch.size; ++i)
            targets[static_cast<std::size_t>(i)] =
                batch.rewards_n[static_cast<std::size_t>(i)] +
                batch.boot_gamma[static_cast<std::size_t>(i)] * qn.values()[static_cast<std::size_t>(i)];
    }

    Tape tape;
    critic_opt_.zero_grad();
    Tensor ref;
    if (cfg_.sr) {
        if (cfg_.critic_agg_frozen) {
            Tape::NoGrad ng(tape);
            ref = batch_reference(tape, *critic_agg_, states, batch.ctx_state, batch.explicit_ref_state);
        } else {
            ref = batch_reference(tape, *critic_agg_, states, batch.ctx_state, batch.explicit_ref_state);
        }
    }
    Tensor q = critic_forward(tape, states, actions, ref);
    Tensor target = Tensor::matrix(batch.size, 1);
    target.values() = targets;
    Tensor loss = tape.mean_all(tape.square(tape.sub(q, target)));
    const double loss_value = loss.scalar_value();
    if (!std::isfinite(loss_value)) throw std::runtime_error("critic update produced a non-finite loss");
    tape.backward(loss);
    critic_opt_.step();
    return loss_value;
}

double DdpgAgent::actor_update(const Batch& batch) {
    Tensor states = Tensor::matrix(batch.size, batch.state_dim);
    states.values() = batch.states;

    Tape tape;
    actor_opt_.zero_grad();
    Tensor ref_a, ref_c;
    if (cfg_.sr) {
        ref_a = batch_reference(tape, *actor_agg_, states, batch.ctx_state, batch.explicit_ref_state);
        {
            Tape::NoGrad ng(tape);
            ref_c = batch_reference(tape, *critic_agg_, states, batch.ctx_state, batch.explicit_ref_state);
        }
    }
    Tensor actions = actor_forward(tape, states, ref_a);
    Tensor q = critic_forward(tape, states, actions, ref_c);
    Tensor loss = tape.scale(tape.mean_all(q), -1.0);
    const double loss_value = loss.scalar_value();
    if (!std::isfinite(loss_value)) throw std::runtime_error("actor update produced a non-finite loss");
    tape.backward(loss);
    actor_opt_.step();
    return loss_value;
}

void DdpgAgent::update_target() {
    const double tau = cfg_.tau;
    const Linear* src[3] = {&c1_, &c2_, &c3_};
    Linear* dst[3] = {&t1_, &t2_, &t3_};
    for (int i = 0; i < 3; ++i) {
        auto blend = [tau](const Tensor& s, Tensor& d) {
            const auto& sv = s.values();
            auto& dv = d.values();
            for (std::size_t j = 0; j < dv.size(); ++j) dv[j] = (1.0 - tau) * dv[j] + tau * sv[j];
        };
        blend(src[i]->weight, dst[i]->weight);
        blend(src[i]->bias, dst[i]->bias);
    }
}

StudentPolicy StudentPolicy::create(int state_dim, int action_dim, int hidden, std::uint64_t seed) {
    StudentPolicy s;
    s.state_dim = state_dim;
    s.action_dim = action_dim;
    s.l1 = Linear::create(s.params, "student.l1", state_dim, hidden, Linear::Init::kOrthogonal, seed);
    s.l2 = Linear::create(s.params, "student.l2", hidden, hidden, Linear::Init::kOrthogonal, seed);
    s.l3 = Linear::create(s.params, "student.l3", hidden, action_dim, Linear::Init::kUniformSmall, seed);
    return s;
}

Tensor StudentPolicy::forward(Tape& tape, const Tensor& states) const {
    Tensor h = tape.relu(l1.forward(tape, states));
    h = tape.relu(l2.forward(tape, h));
    return tape.tanh(l3.forward(tape, h));
}

std::vector<double> StudentPolicy::act(const std::vector<double>& state) const {
    Tape tape;
    Tape::NoGrad ng(tape);
    return forward(tape, Tensor::row(state)).values();
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
    return base_lr * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(epoch) / total_epochs));
}

namespace {

double gaussian_nll(Tape& tape, const StudentPolicy& student, const Tensor& states, const Tensor& targets,
                    double sigma, Tensor* out_loss) {
    const int dims = targets.cols();
    Tensor mu = student.forward(tape, states);
    Tensor err = tape.mean_all(tape.square(tape.sub(targets, mu)));
    const double norm_const = dims * (0.5 * std::log(2.0 * M_PI * sigma * sigma));
    // mean over samples of the per-sample NLL = d*0.5*log(2*pi*sigma^2) + ||err||^2/(2 sigma^2)
    Tensor loss = tape.add_const(tape.scale(err, static_cast<double>(dims) / (2.0 * sigma * sigma)),
                                 norm_const);
    if (out_loss) *out_loss = loss;
    return loss.scalar_value();
}

}  // namespace

DistillResult distill(const DdpgAgent& teacher, const std::vector<std::vector<double>>& states,
                      const std::vector<ContextSlots>& contexts, const DistillOptions& options) {
    if (states.empty()) throw std::invalid_argument("distill: empty buffer");
    if (contexts.size() != states.size() && !contexts.empty())
        throw std::invalid_argument("distill: contexts/states size mismatch");

    const auto& tcfg = teacher.config();
    DistillResult result;
    result.student =
        StudentPolicy::create(tcfg.state_dim, tcfg.action_dim, tcfg.hidden, options.seed);

    // relabel every state with the teacher's deterministic output
    std::vector<std::vector<double>> teacher_actions(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        const ContextSlots* ctx = contexts.empty() ? nullptr : &contexts[i];
        teacher_actions[i] = teacher.actor_mean(states[i], ctx);
    }

    // deterministic shuffled split: first 10% held out
    std::vector<std::size_t> order(states.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(options.seed, "distill:holdout");
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    std::size_t holdout = static_cast<std::size_t>(options.holdout_fraction * order.size());
    holdout = std::min(holdout, order.size() - 1);
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(holdout), order.end());
    std::vector<std::size_t> hold_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout));
    result.holdout_size = hold_idx.size();

    auto gather = [&](const std::vector<std::size_t>& idx, Tensor& s, Tensor& a) {
        s = Tensor::matrix(static_cast<int>(idx.size()), tcfg.state_dim);
        a = Tensor::matrix(static_cast<int>(idx.size()), tcfg.action_dim);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            std::copy(states[idx[r]].begin(), states[idx[r]].end(),
                      s.values().begin() + r * static_cast<std::size_t>(tcfg.state_dim));
            std::copy(teacher_actions[idx[r]].begin(), teacher_actions[idx[r]].end(),
                      a.values().begin() + r * static_cast<std::size_t>(tcfg.action_dim));
        }
    };
    Tensor all_states, all_actions;
    gather(train_idx, all_states, all_actions);

    {
        Tape tape;
        Tape::NoGrad ng(tape);
        result.initial_loss = gaussian_nll(tape, result.student, all_states, all_actions, options.sigma,
                                           nullptr);
    }

    Adam opt(result.student.params.items(), options.lr);
    Rng batch_rng(options.seed, "distill:batches");
    const int n = static_cast<int>(train_idx.size());
    const int batch = std::min(options.batch, n);
    result.epoch_losses.reserve(static_cast<std::size_t>(options.epochs));
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        opt.set_lr(cosine_lr(options.lr, epoch, options.epochs));
        double epoch_loss = 0.0;
        int num_batches = 0;
        for (int start = 0; start < n; start += batch) {
            const int b = std::min(batch, n - start);
            Tensor s = Tensor::matrix(b, tcfg.state_dim);
            Tensor a = Tensor::matrix(b, tcfg.action_dim);
            for (int r = 0; r < b; ++r) {
                const std::size_t src = train_idx[static_cast<std::size_t>(
                    batch_rng.uniform_index(train_idx.size()))];
                std::copy(states[src].begin(), states[src].end(),
                          s.values().begin() + static_cast<std::size_t>(r) * tcfg.state_dim);
                std::copy(teacher_actions[src].begin(), teacher_actions[src].end(),
                          a.values().begin() + static_cast<std::size_t>(r) * tcfg.action_dim);
            }
            Tape tape;
            opt.zero_grad();
            Tensor loss;
            epoch_loss += gaussian_nll(tape, result.student, s, a, options.sigma, &loss);
            tape.backward(loss);
            opt.step();
            ++num_batches;
        }
        result.epoch_losses.push_back(epoch_loss / num_batches);
    }
    result.final_lr = cosine_lr(options.lr, options.epochs, options.epochs);

    // held-out fidelity
    double abs_sum = 0.0, sq_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t idx : hold_idx) {
        const auto out = result.student.act(states[idx]);
        for (int d = 0; d < tcfg.action_dim; ++d) {
            const double diff = out[static_cast<std::size_t>(d)] - teacher_actions[idx][static_cast<std::size_t>(d)];
            abs_sum += std::abs(diff);
            sq_sum += diff * diff;
            ++count;
        }
    }
    if (count > 0) {
        result.mean_abs_diff = abs_sum / count;
        result.mse_holdout = sq_sum / count;
    }
    return result;
}

double policy_kl(const std::function<std::vector<double>(const std::vector<double>&)>& mean_a,
                 const std::function<std::vector<double>(const std::vector<double>&)>& mean_b,
                 const std::vector<std::vector<double>>& states, double sigma) {
    if (states.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : states) {
        const auto ma = mean_a(s);
        const auto mb = mean_b(s);
        double d2 = 0.0;
        for (std::size_t i = 0; i < ma.size(); ++i) d2 += (ma[i] - mb[i]) * (ma[i] - mb[i]);
        total += d2 / (2.0 * sigma * sigma);
    }
    return total / static_cast<double>(states.size());
}

}  // namespace srrl
