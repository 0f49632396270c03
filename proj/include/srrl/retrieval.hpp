#pragma once

#include <cstddef>
#include <unordered_map>
#include <vector>

namespace srrl {

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_state;
    long episode_id = 0;
    int step_in_episode = 0;
};

// k ordered trajectories of `depth` states each, expanded forward from the
// retrieved neighbor states. Offsets are the positions 0..depth-1 within each
// returned list.
struct RetrievalSet {
    std::vector<std::size_t> neighbor_starts;
    std::vector<std::vector<std::vector<double>>> trajectories;
    std::vector<std::vector<int>> offsets;

    bool empty() const { return neighbor_starts.empty(); }
    std::size_t count() const { return neighbor_starts.size(); }
    int depth() const { return trajectories.empty() ? 0 : static_cast<int>(trajectories.front().size()); }
};

enum class SimilarityMetric { kCosine, kL2 };

// Retrievable history: completed episodes only, capped at `capacity`
// transitions with oldest-first eviction. Appends happen at episode
// boundaries, so searches never see the running episode.
class ReferenceWindow {
  public:
    explicit ReferenceWindow(std::size_t capacity = 100000);

    // The episode must be complete; `expected_length` is the env horizon.
    void append_episode(const std::vector<Transition>& episode, std::size_t expected_length);

    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return storage_.empty(); }
    const Transition& at(std::size_t index) const { return storage_[index]; }
    long newest_episode_id() const { return newest_episode_id_; }
    int state_dim() const { return state_dim_; }

    // Indices of the k stored states most similar to `query`, descending,
    // ties broken by lower index. Exact brute-force scan. k larger than the
    // store clamps and reports through `clamped`.
    std::vector<std::size_t> knn(const std::vector<double>& query, std::size_t k,
                                 SimilarityMetric metric = SimilarityMetric::kCosine,
                                 bool* clamped = nullptr) const;

    // Forward expansion of neighbor starts to `depth`-state trajectories; if
    // fewer than `depth` steps remain before the episode (or its surviving
    // portion) ends, the last `depth` stored states of that episode are
    // returned instead. Episodes with fewer than `depth` stored states pad
    // left by repeating the first state and report through `padded`.
    RetrievalSet expand(const std::vector<std::size_t>& neighbor_starts, int depth,
                        bool* padded = nullptr) const;

    // Newest `limit` stored states, oldest first (particle source for the
    // entropy-style reward).
    void newest_states(std::size_t limit, std::vector<const double*>& out) const;

  private:
    struct Range {
        std::size_t lo;  // global indices
        std::size_t hi;  // inclusive
    };

    std::size_t capacity_;
    std::vector<Transition> storage_;
    std::vector<double> states_flat_;  // |storage| x state_dim
    std::vector<double> norms_;
    std::unordered_map<long, Range> episodes_;
    std::size_t base_ = 0;  // global index of storage_[0]
    long newest_episode_id_ = -1;
    int state_dim_ = 0;

    void evict(std::size_t count);
};

double cosine_similarity(const double* a, const double* b, std::size_t n);

// Shared ranking core: scores every row of `states` (count x dim, row-major)
// against `query` and returns the top-k indices, descending, ties broken by
// lower index. Zero-norm vectors rank last under the cosine metric.
std::vector<std::size_t> top_k_similar(const double* states, std::size_t count, std::size_t dim,
                                       const double* query, std::size_t k, SimilarityMetric metric);

}  // namespace srrl
