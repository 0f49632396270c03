#include "srrl/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace srrl {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    std::ostringstream os;
    os << op << ": incompatible shapes (" << a.rows() << "x" << a.cols() << ") and (" << b.rows() << "x"
       << b.cols() << ")";
    throw std::invalid_argument(os.str());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
    std::ostringstream os;
    os << op << ": invalid shape (" << a.rows() << "x" << a.cols() << ")";
    throw std::invalid_argument(os.str());
}

}  // namespace

Tensor Tensor::matrix(int rows, int cols, double fill) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->value.assign(static_cast<std::size_t>(rows) * cols, fill);
    return Tensor(std::move(n));
}

Tensor Tensor::row(const std::vector<double>& v) { return row(v.data(), static_cast<int>(v.size())); }

Tensor Tensor::row(const double* data, int n) {
    Tensor t = matrix(1, n);
    t.node_->value.assign(data, data + n);
    return t;
}

Tensor Tensor::scalar(double v) {
    Tensor t = matrix(1, 1);
    t.node_->value[0] = v;
    return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("from_rows: no rows");
    const int cols = static_cast<int>(rows.front().size());
    Tensor t = matrix(static_cast<int>(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<int>(rows[r].size()) != cols) throw std::invalid_argument("from_rows: ragged rows");
        std::copy(rows[r].begin(), rows[r].end(), t.node_->value.begin() + r * cols);
    }
    return t;
}

Tensor Tensor::parameter(int rows, int cols, std::string name) {
    Tensor t = matrix(rows, cols);
    t.node_->tracked = true;
    t.node_->grad.assign(t.node_->value.size(), 0.0);
    t.node_->name = std::move(name);
    return t;
}

double Tensor::scalar_value() const {
    if (size() != 1) shape_error("scalar_value", *this);
    return node_->value[0];
}

std::vector<double>& Tensor::grads() {
    if (node_->grad.size() != node_->value.size()) node_->grad.assign(node_->value.size(), 0.0);
    return node_->grad;
}

const std::vector<double>& Tensor::grads() const { return node_->grad; }

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

void Tensor::fill(double v) { node_->value.assign(node_->value.size(), v); }

bool all_finite(const Tensor& t) {
    for (double v : t.values())
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor Tape::make(int rows, int cols, bool tracked) {
    Tensor t = Tensor::matrix(rows, cols);
    if (tracked) {
        t.node_->tracked = true;
        t.node_->grad.assign(t.node_->value.size(), 0.0);
    }
    return t;
}

void Tape::record(const Tensor& out, std::function<void()> back) {
    entries_.push_back(Entry{out.shared_node(), std::move(back)});
}

std::vector<double>& Tape::grad_of(const Tensor& t) {
    auto* n = t.node();
    if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
    return n->grad;
}

void Tape::clear() { entries_.clear(); }

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!loss.tracked()) throw std::invalid_argument("backward: loss is not connected to any tracked tensor");
    bool on_tape = false;
    for (auto& e : entries_) {
        e.out->grad.assign(e.out->value.size(), 0.0);
        if (e.out.get() == loss.node()) on_tape = true;
    }
    if (!on_tape) throw std::invalid_argument("backward: loss does not live on this tape");
    grad_of(loss)[0] = 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->back();
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make(m, n, track(a, b));
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* po = out.values().data();
    for (int i = 0; i < m; ++i) {
        double* orow = po + static_cast<std::size_t>(i) * n;
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = pb + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    if (out.tracked()) {
        record(out, [a, b, out, m, k, n]() {
            const double* g = out.grads().data();
            if (a.tracked()) {
                double* ga = grad_of(a).data();
                const double* pb = b.values().data();
                for (int i = 0; i < m; ++i)
                    for (int l = 0; l < k; ++l) {
                        const double* brow = pb + static_cast<std::size_t>(l) * n;
                        const double* grow = g + static_cast<std::size_t>(i) * n;
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                        ga[static_cast<std::size_t>(i) * k + l] += s;
                    }
            }
            if (b.tracked()) {
                double* gb = grad_of(b).data();
                const double* pa = a.values().data();
                for (int i = 0; i < m; ++i) {
                    const double* arow = pa + static_cast<std::size_t>(i) * k;
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    for (int l = 0; l < k; ++l) {
                        const double av = arow[l];
                        if (av == 0.0) continue;
                        double* gbrow = gb + static_cast<std::size_t>(l) * n;
                        for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
    const int m = a.rows(), k = a.cols(), n = b.rows();
    Tensor out = make(m, n, track(a, b));
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* po = out.values().data();
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        double* orow = po + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = pb + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int l = 0; l < k; ++l) s += arow[l] * brow[l];
            orow[j] = s;
        }
    }
    if (out.tracked()) {
        record(out, [a, b, out, m, k, n]() {
            const double* g = out.grads().data();
            if (a.tracked()) {
                double* ga = grad_of(a).data();
                const double* pb = b.values().data();
                for (int i = 0; i < m; ++i) {
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    double* garow = ga + static_cast<std::size_t>(i) * k;
                    for (int j = 0; j < n; ++j) {
                        const double gv = grow[j];
                        if (gv == 0.0) continue;
                        const double* brow = pb + static_cast<std::size_t>(j) * k;
                        for (int l = 0; l < k; ++l) garow[l] += gv * brow[l];
                    }
                }
            }
            if (b.tracked()) {
                double* gb = grad_of(b).data();
                const double* pa = a.values().data();
                for (int i = 0; i < m; ++i) {
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    const double* arow = pa + static_cast<std::size_t>(i) * k;
                    for (int j = 0; j < n; ++j) {
                        const double gv = grow[j];
                        if (gv == 0.0) continue;
                        double* gbrow = gb + static_cast<std::size_t>(j) * k;
                        for (int l = 0; l < k; ++l) gbrow[l] += gv * arow[l];
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a, b);
    Tensor out = make(a.rows(), a.cols(), track(a, b));
    const auto& va = a.values();
    const auto& vb = b.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] + vb[i];
    if (out.tracked()) {
        record(out, [a, b, out]() {
            const auto& g = out.grads();
            if (a.tracked()) {
                auto& ga = grad_of(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.tracked()) {
                auto& gb = grad_of(b);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor Tape::add_rowvec(const Tensor& a, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols()) shape_error("add_rowvec", a, bias);
    Tensor out = make(a.rows(), a.cols(), track(a, bias));
    const int n = a.cols();
    const auto& va = a.values();
    const auto& vb = bias.values();
    auto& vo = out.values();
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < n; ++j) vo[static_cast<std::size_t>(i) * n + j] = va[static_cast<std::size_t>(i) * n + j] + vb[j];
    if (out.tracked()) {
        record(out, [a, bias, out, n]() {
            const auto& g = out.grads();
            if (a.tracked()) {
                auto& ga = grad_of(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bias.tracked()) {
                auto& gb = grad_of(bias);
                const int rows = out.rows();
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < n; ++j) gb[j] += g[static_cast<std::size_t>(i) * n + j];
            }
        });
    }
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("sub", a, b);
    Tensor out = make(a.rows(), a.cols(), track(a, b));
    const auto& va = a.values();
    const auto& vb = b.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] - vb[i];
    if (out.tracked()) {
        record(out, [a, b, out]() {
            const auto& g = out.grads();
            if (a.tracked()) {
                auto& ga = grad_of(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.tracked()) {
                auto& gb = grad_of(b);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a, b);
    Tensor out = make(a.rows(), a.cols(), track(a, b));
    const auto& va = a.values();
    const auto& vb = b.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] * vb[i];
    if (out.tracked()) {
        record(out, [a, b, out]() {
            const auto& g = out.grads();
            if (a.tracked()) {
                auto& ga = grad_of(a);
                const auto& vb = b.values();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
            }
            if (b.tracked()) {
                auto& gb = grad_of(b);
                const auto& va = a.values();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
            }
        });
    }
    return out;
}

Tensor Tape::scale(const Tensor& a, double c) {
    Tensor out = make(a.rows(), a.cols(), track(a));
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] * c;
    if (out.tracked()) {
        record(out, [a, out, c]() {
            const auto& g = out.grads();
            auto& ga = grad_of(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
        });
    }
    return out;
}

Tensor Tape::add_const(const Tensor& a, double c) {
    Tensor out = make(a.rows(), a.cols(), track(a));
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] + c;
    if (out.tracked()) {
        record(out, [a, out]() {
            const auto& g = out.grads();
            auto& ga = grad_of(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    return out;
}

Tensor Tape::relu(const Tensor& a) {
    Tensor out = make(a.rows(), a.cols(), track(a));
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] > 0.0 ? va[i] : 0.0;
    if (out.tracked()) {
        record(out, [a, out]() {
            const auto& g = out.grads();
            const auto& va = a.values();
            auto& ga = grad_of(a);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (va[i] > 0.0) ga[i] += g[i];
        });
    }
    return out;
}

Tensor Tape::tanh(const Tensor& a) {
    Tensor out = make(a.rows(), a.cols(), track(a));
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = std::tanh(va[i]);
    if (out.tracked()) {
        record(out, [a, out]() {
            const auto& g = out.grads();
            const auto& vo = out.values();
            auto& ga = grad_of(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - vo[i] * vo[i]);
        });
    }
    return out;
}

Tensor Tape::exp(const Tensor& a) {
    Tensor out = make(a.rows(), a.cols(), track(a));
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = std::exp(va[i]);
    if (out.tracked()) {
        record(out, [a, out]() {
            const auto& g = out.grads();
            const auto& vo = out.values();
            auto& ga = grad_of(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vo[i];
        });
    }
    return out;
}

Tensor Tape::sqrt(const Tensor& a) {
    Tensor out = make(a.rows(), a.cols(), track(a));
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = std::sqrt(va[i]);
    if (out.tracked()) {
        record(out, [a, out]() {
            const auto& g = out.grads();
            const auto& vo = out.values();
            auto& ga = grad_of(a);
            // subgradient 0 at the origin
            for (std::size_t i = 0; i < g.size(); ++i)
                if (vo[i] > 0.0) ga[i] += g[i] * 0.5 / vo[i];
        });
    }
    return out;
}

Tensor Tape::square(const Tensor& a) {
    Tensor out = make(a.rows(), a.cols(), track(a));
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] * va[i];
    if (out.tracked()) {
        record(out, [a, out]() {
            const auto& g = out.grads();
            const auto& va = a.values();
            auto& ga = grad_of(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 2.0 * va[i];
        });
    }
    return out;
}

Tensor Tape::clamp(const Tensor& a, double lo, double hi) {
    Tensor out = make(a.rows(), a.cols(), track(a));
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] < lo ? lo : (va[i] > hi ? hi : va[i]);
    if (out.tracked()) {
        record(out, [a, out, lo, hi]() {
            const auto& g = out.grads();
            const auto& va = a.values();
            auto& ga = grad_of(a);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (va[i] > lo && va[i] < hi) ga[i] += g[i];
        });
    }
    return out;
}

Tensor Tape::minimum(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("minimum", a, b);
    Tensor out = make(a.rows(), a.cols(), track(a, b));
    const auto& va = a.values();
    const auto& vb = b.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] <= vb[i] ? va[i] : vb[i];
    if (out.tracked()) {
        record(out, [a, b, out]() {
            const auto& g = out.grads();
            const auto& va = a.values();
            const auto& vb = b.values();
            // ties route to a
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (va[i] <= vb[i]) {
                    if (a.tracked()) grad_of(a)[i] += g[i];
                } else {
                    if (b.tracked()) grad_of(b)[i] += g[i];
                }
            }
        });
    }
    return out;
}

Tensor Tape::softmax_rows(const Tensor& a) {
    Tensor out = make(a.rows(), a.cols(), track(a));
    const int n = a.cols();
    const auto& va = a.values();
    auto& vo = out.values();
    for (int i = 0; i < a.rows(); ++i) {
        const double* in = va.data() + static_cast<std::size_t>(i) * n;
        double* o = vo.data() + static_cast<std::size_t>(i) * n;
        double mx = in[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, in[j]);
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            o[j] = std::exp(in[j] - mx);
            denom += o[j];
        }
        for (int j = 0; j < n; ++j) o[j] /= denom;
    }
    if (out.tracked()) {
        record(out, [a, out, n]() {
            const auto& g = out.grads();
            const auto& vo = out.values();
            auto& ga = grad_of(a);
            for (int i = 0; i < out.rows(); ++i) {
                const double* y = vo.data() + static_cast<std::size_t>(i) * n;
                const double* gy = g.data() + static_cast<std::size_t>(i) * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += y[j] * gy[j];
                double* gi = ga.data() + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) gi[j] += y[j] * (gy[j] - dot);
            }
        });
    }
    return out;
}

Tensor Tape::sum_all(const Tensor& a) {
    Tensor out = make(1, 1, track(a));
    double s = 0.0;
    for (double v : a.values()) s += v;
    out.values()[0] = s;
    if (out.tracked()) {
        record(out, [a, out]() {
            const double g = out.grads()[0];
            auto& ga = grad_of(a);
            for (auto& v : ga) v += g;
        });
    }
    return out;
}

Tensor Tape::mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / a.size()); }

Tensor Tape::row_sum(const Tensor& a) {
    Tensor out = make(a.rows(), 1, track(a));
    const int n = a.cols();
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += a.values()[static_cast<std::size_t>(i) * n + j];
        out.values()[i] = s;
    }
    if (out.tracked()) {
        record(out, [a, out, n]() {
            const auto& g = out.grads();
            auto& ga = grad_of(a);
            for (int i = 0; i < out.rows(); ++i)
                for (int j = 0; j < n; ++j) ga[static_cast<std::size_t>(i) * n + j] += g[i];
        });
    }
    return out;
}

Tensor Tape::slice_rows(const Tensor& a, int r0, int r1) {
    if (r0 < 0 || r1 > a.rows() || r0 >= r1) shape_error("slice_rows", a);
    const int n = a.cols();
    Tensor out = make(r1 - r0, n, track(a));
    std::copy(a.values().begin() + static_cast<std::size_t>(r0) * n,
              a.values().begin() + static_cast<std::size_t>(r1) * n, out.values().begin());
    if (out.tracked()) {
        record(out, [a, out, r0, n]() {
            const auto& g = out.grads();
            auto& ga = grad_of(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[static_cast<std::size_t>(r0) * n + i] += g[i];
        });
    }
    return out;
}

Tensor Tape::slice_cols(const Tensor& a, int c0, int c1) {
    if (c0 < 0 || c1 > a.cols() || c0 >= c1) shape_error("slice_cols", a);
    const int n = a.cols(), w = c1 - c0;
    Tensor out = make(a.rows(), w, track(a));
    for (int i = 0; i < a.rows(); ++i)
        std::copy(a.values().begin() + static_cast<std::size_t>(i) * n + c0,
                  a.values().begin() + static_cast<std::size_t>(i) * n + c1,
                  out.values().begin() + static_cast<std::size_t>(i) * w);
    if (out.tracked()) {
        record(out, [a, out, c0, n, w]() {
            const auto& g = out.grads();
            auto& ga = grad_of(a);
            for (int i = 0; i < out.rows(); ++i)
                for (int j = 0; j < w; ++j)
                    ga[static_cast<std::size_t>(i) * n + c0 + j] += g[static_cast<std::size_t>(i) * w + j];
        });
    }
    return out;
}

Tensor Tape::concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) shape_error("concat_cols", a, b);
    const int na = a.cols(), nb = b.cols(), n = na + nb;
    Tensor out = make(a.rows(), n, track(a, b));
    for (int i = 0; i < a.rows(); ++i) {
        std::copy(a.values().begin() + static_cast<std::size_t>(i) * na,
                  a.values().begin() + static_cast<std::size_t>(i + 1) * na,
                  out.values().begin() + static_cast<std::size_t>(i) * n);
        std::copy(b.values().begin() + static_cast<std::size_t>(i) * nb,
                  b.values().begin() + static_cast<std::size_t>(i + 1) * nb,
                  out.values().begin() + static_cast<std::size_t>(i) * n + na);
    }
    if (out.tracked()) {
        record(out, [a, b, out, na, nb, n]() {
            const auto& g = out.grads();
            for (int i = 0; i < out.rows(); ++i) {
                if (a.tracked()) {
                    auto& ga = grad_of(a);
                    for (int j = 0; j < na; ++j)
                        ga[static_cast<std::size_t>(i) * na + j] += g[static_cast<std::size_t>(i) * n + j];
                }
                if (b.tracked()) {
                    auto& gb = grad_of(b);
                    for (int j = 0; j < nb; ++j)
                        gb[static_cast<std::size_t>(i) * nb + j] += g[static_cast<std::size_t>(i) * n + na + j];
                }
            }
        });
    }
    return out;
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    const int n = parts.front().cols();
    int rows = 0;
    bool tracked = false;
    for (const auto& p : parts) {
        if (p.cols() != n) shape_error("concat_rows", parts.front(), p);
        rows += p.rows();
        tracked = tracked || p.tracked();
    }
    Tensor out = make(rows, n, recording() && tracked);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.values().begin(), p.values().end(), out.values().begin() + off);
        off += p.values().size();
    }
    if (out.tracked()) {
        record(out, [parts, out]() {
            const auto& g = out.grads();
            std::size_t off = 0;
            for (const auto& p : parts) {
                if (p.tracked()) {
                    auto& gp = grad_of(p);
                    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
                }
                off += p.values().size();
            }
        });
    }
    return out;
}

Tensor Tape::gather_rows(const Tensor& table, const std::vector<int>& idx) {
    const int n = table.cols();
    Tensor out = make(static_cast<int>(idx.size()), n, track(table));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= table.rows()) shape_error("gather_rows", table);
        std::copy(table.values().begin() + static_cast<std::size_t>(idx[i]) * n,
                  table.values().begin() + static_cast<std::size_t>(idx[i] + 1) * n,
                  out.values().begin() + i * n);
    }
    if (out.tracked()) {
        record(out, [table, out, idx, n]() {
            const auto& g = out.grads();
            auto& gt = grad_of(table);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (int j = 0; j < n; ++j)
                    gt[static_cast<std::size_t>(idx[i]) * n + j] += g[i * static_cast<std::size_t>(n) + j];
        });
    }
    return out;
}

Tensor Tape::broadcast_row(const Tensor& row, int rows) {
    if (row.rows() != 1) shape_error("broadcast_row", row);
    const int n = row.cols();
    Tensor out = make(rows, n, track(row));
    for (int i = 0; i < rows; ++i)
        std::copy(row.values().begin(), row.values().end(), out.values().begin() + static_cast<std::size_t>(i) * n);
    if (out.tracked()) {
        record(out, [row, out, rows, n]() {
            const auto& g = out.grads();
            auto& gr = grad_of(row);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < n; ++j) gr[j] += g[static_cast<std::size_t>(i) * n + j];
        });
    }
    return out;
}

}  // namespace srrl
