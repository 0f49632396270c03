#include "srrl/nn.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace srrl {

Tensor ParamRegistry::create(const std::string& name, int rows, int cols) {
    Tensor t = Tensor::parameter(rows, cols, name);
    add(name, t);
    return t;
}

void ParamRegistry::add(const std::string& name, const Tensor& t) {
    if (has(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    items_.emplace_back(name, t);
}

bool ParamRegistry::has(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return true;
    return false;
}

Tensor ParamRegistry::get(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return t;
    throw std::invalid_argument("unknown parameter: " + name);
}

std::vector<std::pair<std::string, Tensor>> ParamRegistry::items_with_prefix(const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& item : items_)
        if (item.first.rfind(prefix, 0) == 0) out.push_back(item);
    return out;
}

void ParamRegistry::zero_grads() {
    for (auto& [n, t] : items_) t.zero_grad();
}

std::size_t ParamRegistry::total_size() const {
    std::size_t s = 0;
    for (const auto& [n, t] : items_) s += t.values().size();
    return s;
}

// Householder QR; fills w with an orthonormal basis (orthonormal columns when
// rows >= cols, orthonormal rows otherwise), signs fixed by the R diagonal.
void orthogonal_init(Tensor& w, Rng& rng) {
    const int rows = w.rows(), cols = w.cols();
    const bool tall = rows >= cols;
    const int n = tall ? rows : cols;  // long side
    const int m = tall ? cols : rows;  // short side
    std::vector<double> a(static_cast<std::size_t>(n) * m);
    for (auto& v : a) v = rng.gaussian();

    std::vector<double> q(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) q[static_cast<std::size_t>(i) * n + i] = 1.0;
    std::vector<double> v(n);
    for (int k = 0; k < m; ++k) {
        double norm = 0.0;
        for (int i = k; i < n; ++i) norm += a[static_cast<std::size_t>(i) * m + k] * a[static_cast<std::size_t>(i) * m + k];
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        double alpha = a[static_cast<std::size_t>(k) * m + k] > 0 ? -norm : norm;
        double vnorm2 = 0.0;
        for (int i = k; i < n; ++i) {
            v[i] = a[static_cast<std::size_t>(i) * m + k];
            if (i == k) v[i] -= alpha;
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 == 0.0) continue;
        // apply H = I - 2 v v^T / (v^T v) to A and accumulate into Q
        for (int j = k; j < m; ++j) {
            double dot = 0.0;
            for (int i = k; i < n; ++i) dot += v[i] * a[static_cast<std::size_t>(i) * m + j];
            const double f = 2.0 * dot / vnorm2;
            for (int i = k; i < n; ++i) a[static_cast<std::size_t>(i) * m + j] -= f * v[i];
        }
        for (int j = 0; j < n; ++j) {
            double dot = 0.0;
            for (int i = k; i < n; ++i) dot += v[i] * q[static_cast<std::size_t>(j) * n + i];
            const double f = 2.0 * dot / vnorm2;
            for (int i = k; i < n; ++i) q[static_cast<std::size_t>(j) * n + i] -= f * v[i];
        }
    }
    // q (row j) now holds Q columns; take the first m columns, sign-fixed.
    auto& out = w.values();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const int qi = tall ? i : j;  // long index
            const int qj = tall ? j : i;  // short index
            const double sign = a[static_cast<std::size_t>(qj) * m + qj] < 0 ? -1.0 : 1.0;
            out[static_cast<std::size_t>(i) * cols + j] = q[static_cast<std::size_t>(qi) * n + qj] * sign;
        }
}

void uniform_init(Tensor& w, Rng& rng, double lo, double hi) {
    for (auto& v : w.values()) v = rng.uniform(lo, hi);
}

Linear Linear::create(ParamRegistry& reg, const std::string& prefix, int in, int out, Init init,
                      std::uint64_t seed) {
    Linear l;
    l.weight = reg.create(prefix + ".weight", in, out);
    l.bias = reg.create(prefix + ".bias", 1, out);
    Rng rng(seed, "init:" + prefix);
    if (init == Init::kOrthogonal) {
        orthogonal_init(l.weight, rng);
    } else {
        uniform_init(l.weight, rng, -3e-3, 3e-3);
        uniform_init(l.bias, rng, -3e-3, 3e-3);
    }
    return l;
}

Tensor Linear::forward(Tape& tape, const Tensor& x) const {
    if (x.cols() != weight.rows()) {
        std::ostringstream os;
        os << "linear '" << weight.name() << "': input has " << x.cols() << " features, expected "
           << weight.rows();
        throw std::invalid_argument(os.str());
    }
    return tape.add_rowvec(tape.matmul(x, weight), bias);
}

Mlp Mlp::create(ParamRegistry& reg, const std::string& prefix, const std::vector<int>& dims, Head head,
                bool final_uniform, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("mlp '" + prefix + "': need at least in/out dims");
    Mlp mlp;
    mlp.head = head;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const bool last = i + 2 == dims.size();
        const auto init = (last && final_uniform) ? Linear::Init::kUniformSmall : Linear::Init::kOrthogonal;
        mlp.layers.push_back(
            Linear::create(reg, prefix + ".l" + std::to_string(i), dims[i], dims[i + 1], init, seed));
    }
    return mlp;
}

Tensor Mlp::forward(Tape& tape, const Tensor& x) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(tape, h);
        if (i + 1 < layers.size()) h = tape.relu(h);
    }
    if (head == Head::kTanh) h = tape.tanh(h);
    return h;
}

std::vector<double> Mlp::forward_row(const std::vector<double>& x) const {
    Tape tape;
    Tape::NoGrad ng(tape);
    Tensor out = forward(tape, Tensor::row(x));
    return out.values();
}

MultiHeadAttention MultiHeadAttention::create(ParamRegistry& reg, const std::string& prefix, int num_heads,
                                              int model_dim, std::uint64_t seed) {
    if (num_heads < 1 || model_dim % num_heads != 0)
        throw std::invalid_argument("attention '" + prefix + "': model_dim must be divisible by num_heads");
    MultiHeadAttention mha;
    mha.num_heads = num_heads;
    mha.model_dim = model_dim;
    const char* names[4] = {".wq", ".wk", ".wv", ".wo"};
    Tensor* slots[4] = {&mha.wq, &mha.wk, &mha.wv, &mha.wo};
    for (int i = 0; i < 4; ++i) {
        *slots[i] = reg.create(prefix + names[i], model_dim, model_dim);
        Rng rng(seed, "init:" + prefix + names[i]);
        orthogonal_init(*slots[i], rng);
    }
    return mha;
}

Tensor MultiHeadAttention::forward(Tape& tape, const Tensor& q, const Tensor& keys, const Tensor& values,
                                   std::vector<double>* weights_out) const {
    if (keys.rows() == 0) throw std::invalid_argument("attention: no retrieved slots to attend over");
    if (q.rows() != 1 || q.cols() != model_dim || keys.cols() != model_dim || values.cols() != model_dim ||
        keys.rows() != values.rows())
        throw std::invalid_argument("attention: query/key/value shape mismatch");

    const int dh = model_dim / num_heads;
    Tensor qp = tape.matmul(q, wq);
    Tensor kp = tape.matmul(keys, wk);
    Tensor vp = tape.matmul(values, wv);
    if (weights_out) weights_out->clear();

    std::vector<Tensor> heads;
    heads.reserve(num_heads);
    for (int h = 0; h < num_heads; ++h) {
        Tensor qh = tape.slice_cols(qp, h * dh, (h + 1) * dh);
        Tensor kh = tape.slice_cols(kp, h * dh, (h + 1) * dh);
        Tensor vh = tape.slice_cols(vp, h * dh, (h + 1) * dh);
        Tensor logits = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
        Tensor att = tape.softmax_rows(logits);
        if (weights_out) weights_out->insert(weights_out->end(), att.values().begin(), att.values().end());
        heads.push_back(tape.matmul(att, vh));
    }
    Tensor cat = heads.front();
    for (std::size_t i = 1; i < heads.size(); ++i) cat = tape.concat_cols(cat, heads[i]);
    return tape.matmul(cat, wo);
}

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    states_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const std::size_t n = params_[i].second.values().size();
        states_[i].first_moment.assign(n, 0.0);
        states_[i].second_moment.assign(n, 0.0);
    }
}

void Adam::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        auto& t = params_[p].second;
        auto& g = t.grads();
        auto& m = states_[p].first_moment;
        auto& v = states_[p].second_moment;
        auto& w = t.values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw std::runtime_error("adam: non-finite gradient in parameter '" + params_[p].first + "'");
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto& [n, t] : params_) t.zero_grad();
}

}  // namespace srrl
