#include "srrl/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace srrl {

double cosine_similarity(const double* a, const double* b, std::size_t n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return -1.0;  // zero-norm ranks last
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::size_t> top_k_similar(const double* states, std::size_t count, std::size_t dim,
                                       const double* query, std::size_t k, SimilarityMetric metric) {
    k = std::min(k, count);
    std::vector<double> scores(count);
    if (metric == SimilarityMetric::kCosine) {
        double qn = 0.0;
        for (std::size_t i = 0; i < dim; ++i) qn += query[i] * query[i];
        if (qn == 0.0) {
            std::fill(scores.begin(), scores.end(), -1.0);
        } else {
            qn = std::sqrt(qn);
            for (std::size_t r = 0; r < count; ++r) {
                const double* s = states + r * dim;
                double dot = 0.0, sn = 0.0;
                for (std::size_t i = 0; i < dim; ++i) {
                    dot += s[i] * query[i];
                    sn += s[i] * s[i];
                }
                scores[r] = sn == 0.0 ? -1.0 : dot / (qn * std::sqrt(sn));
            }
        }
    } else {
        for (std::size_t r = 0; r < count; ++r) {
            const double* s = states + r * dim;
            double d2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double d = s[i] - query[i];
                d2 += d * d;
            }
            scores[r] = -d2;  // closer is better
        }
    }

    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = i;
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    idx.resize(k);
    return idx;
}

ReferenceWindow::ReferenceWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("reference window: capacity must be positive");
}

void ReferenceWindow::append_episode(const std::vector<Transition>& episode, std::size_t expected_length) {
    if (episode.empty() || episode.size() != expected_length)
        throw std::invalid_argument("reference window: only complete episodes may be appended");
    const long ep = episode.front().episode_id;
    for (const auto& t : episode)
        if (t.episode_id != ep)
            throw std::invalid_argument("reference window: episode ids are not uniform");

    if (state_dim_ == 0) state_dim_ = static_cast<int>(episode.front().state.size());

    if (episode.size() >= capacity_) {
        evict(storage_.size());
    } else if (storage_.size() + episode.size() > capacity_) {
        evict(storage_.size() + episode.size() - capacity_);
    }

    const std::size_t global_lo = base_ + storage_.size();
    for (const auto& t : episode) {
        if (static_cast<int>(t.state.size()) != state_dim_)
            throw std::invalid_argument("reference window: state dimension changed");
        storage_.push_back(t);
        states_flat_.insert(states_flat_.end(), t.state.begin(), t.state.end());
        double n2 = 0.0;
        for (double v : t.state) n2 += v * v;
        norms_.push_back(std::sqrt(n2));
    }
    // a single episode larger than the capacity keeps only its newest states
    if (storage_.size() > capacity_) evict(storage_.size() - capacity_);
    episodes_[ep] = Range{std::max(global_lo, base_), base_ + storage_.size() - 1};
    newest_episode_id_ = std::max(newest_episode_id_, ep);
}

void ReferenceWindow::evict(std::size_t count) {
    count = std::min(count, storage_.size());
    if (count == 0) return;
    storage_.erase(storage_.begin(), storage_.begin() + static_cast<std::ptrdiff_t>(count));
    states_flat_.erase(states_flat_.begin(),
                       states_flat_.begin() + static_cast<std::ptrdiff_t>(count * state_dim_));
    norms_.erase(norms_.begin(), norms_.begin() + static_cast<std::ptrdiff_t>(count));
    base_ += count;
    for (auto it = episodes_.begin(); it != episodes_.end();) {
        if (it->second.hi < base_) {
            it = episodes_.erase(it);
        } else {
            it->second.lo = std::max(it->second.lo, base_);
            ++it;
        }
    }
}

std::vector<std::size_t> ReferenceWindow::knn(const std::vector<double>& query, std::size_t k,
                                              SimilarityMetric metric, bool* clamped) const {
    if (storage_.empty()) throw std::invalid_argument("reference window: knn over an empty window");
    if (static_cast<int>(query.size()) != state_dim_)
        throw std::invalid_argument("reference window: query dimension mismatch");
    if (clamped) *clamped = k > storage_.size();
    return top_k_similar(states_flat_.data(), storage_.size(), static_cast<std::size_t>(state_dim_),
                         query.data(), k, metric);
}

RetrievalSet ReferenceWindow::expand(const std::vector<std::size_t>& neighbor_starts, int depth,
                                     bool* padded) const {
    if (depth < 1) throw std::invalid_argument("reference window: depth must be positive");
    if (padded) *padded = false;
    RetrievalSet set;
    set.neighbor_starts = neighbor_starts;
    set.trajectories.reserve(neighbor_starts.size());
    set.offsets.reserve(neighbor_starts.size());
    for (std::size_t start : neighbor_starts) {
        if (start >= storage_.size()) throw std::invalid_argument("reference window: neighbor index out of range");
        const auto range_it = episodes_.find(storage_[start].episode_id);
        if (range_it == episodes_.end()) throw std::logic_error("reference window: missing episode range");
        const std::size_t lo = range_it->second.lo - base_;
        const std::size_t hi = range_it->second.hi - base_;

        std::vector<std::vector<double>> traj;
        traj.reserve(static_cast<std::size_t>(depth));
        std::size_t from = start;
        if (from + depth - 1 > hi) {
            // do not run past the episode end: take its last `depth` states
            from = hi + 1 >= static_cast<std::size_t>(depth) + lo ? hi + 1 - depth : lo;
        }
        const std::size_t avail = hi - from + 1;
        if (avail < static_cast<std::size_t>(depth)) {
            if (padded) *padded = true;
            for (std::size_t i = avail; i < static_cast<std::size_t>(depth); ++i)
                traj.push_back(storage_[from].state);
        }
        for (std::size_t i = from; i <= hi && traj.size() < static_cast<std::size_t>(depth); ++i)
            traj.push_back(storage_[i].state);

        std::vector<int> offs(static_cast<std::size_t>(depth));
        for (int i = 0; i < depth; ++i) offs[static_cast<std::size_t>(i)] = i;
        set.trajectories.push_back(std::move(traj));
        set.offsets.push_back(std::move(offs));
    }
    return set;
}

void ReferenceWindow::newest_states(std::size_t limit, std::vector<const double*>& out) const {
    out.clear();
    const std::size_t n = std::min(limit, storage_.size());
    for (std::size_t i = storage_.size() - n; i < storage_.size(); ++i)
        out.push_back(states_flat_.data() + i * state_dim_);
}

}  // namespace srrl
