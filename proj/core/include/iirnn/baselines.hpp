#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "iirnn/corpus.hpp"
#include "iirnn/rand.hpp"

namespace iirnn {

// ---- Most Popular ----

struct PopularityTable {
    std::vector<std::uint64_t> counts;  // indexed by item id, [0] unused
    std::vector<ItemId> order;          // all items, count desc then id asc
};

PopularityTable build_popularity(const Corpus& corpus);
std::vector<ItemId> most_popular_recommend(const PopularityTable& table, std::size_t k);

// ---- Most Recent ----

// Fixed-size stack of distinct items, top = most recently seen.
struct RecentStack {
    std::vector<ItemId> items;  // front = top
};

RecentStack make_recent_stack(std::size_t k, std::size_t num_items, Rng& rng);
// Move-to-front; an unseen item pushes the bottom item out.
void most_recent_step(RecentStack& stack, ItemId observed);

// ---- Item-kNN ----

// Symmetric co-occurrence counts; a pair counts once per training session
// containing both items (set semantics).
struct CoOccurrenceMatrix {
    std::unordered_map<std::uint64_t, std::uint32_t> counts;

    static std::uint64_t key(ItemId a, ItemId b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
               static_cast<std::uint32_t>(b);
    }
    std::uint32_t get(ItemId a, ItemId b) const {
        if (a == b) return 0;
        auto it = counts.find(key(a, b));
        return it == counts.end() ? 0 : it->second;
    }
    void add(ItemId a, ItemId b) {
        if (a != b) ++counts[key(a, b)];
    }
};

CoOccurrenceMatrix build_cooccurrence(const Corpus& corpus);

// Top-k by c(last_item, .), ties broken by popularity then id; falls back to
// most-popular when the last item co-occurs with nothing, and pads short
// lists the same way.
std::vector<ItemId> item_knn_recommend(const CoOccurrenceMatrix& matrix,
                                       const PopularityTable& popularity, ItemId last_item,
                                       std::size_t k);

// ---- BPR-MF ----

struct BprConfig {
    int factors = 40;
    float lr = 0.05f;
    float reg = 0.002f;
    int epochs = 10;
    int negatives = 10;  // negative samples per positive per epoch
    std::uint64_t seed = 1;
};

struct MfFactors {
    int factors = 0;
    std::size_t num_users = 0, num_items = 0;
    std::vector<float> user_f;    // num_users x factors
    std::vector<float> item_f;    // (num_items+1) x factors
    std::vector<float> item_bias; // num_items+1
    std::unordered_map<std::string, std::size_t> user_index;

    float score(std::size_t u, ItemId i) const {
        const float* pu = user_f.data() + u * factors;
        const float* qi = item_f.data() + static_cast<std::size_t>(i) * factors;
        float s = item_bias[static_cast<std::size_t>(i)];
        for (int f = 0; f < factors; ++f) s += pu[f] * qi[f];
        return s;
    }
};

// SGD over sampled (u, i, j) triples maximizing ln sigmoid(x_ui - x_uj) with
// L2 regularization; trained on the hold-one-out train split. Seen items are
// not excluded at recommendation time.
MfFactors bpr_mf_train(const Corpus& holdout_corpus, const BprConfig& cfg);

std::vector<ItemId> bpr_mf_recommend(const MfFactors& factors, std::size_t user_index,
                                     std::size_t k);

// Per-triple objective and analytic gradients, shared by training and the
// finite-difference checks. Arrays are (p_u, q_i, q_j) of width `factors`
// plus biases b_i, b_j. Returns -ln sigmoid(x_ui - x_uj) + reg * ||theta||^2.
template <typename T>
T bpr_triple_loss(const T* pu, const T* qi, const T* qj, T bi, T bj, int factors, T reg,
                  T* grad_pu, T* grad_qi, T* grad_qj, T* grad_bi, T* grad_bj) {
    T diff = bi - bj;
    for (int f = 0; f < factors; ++f) diff += pu[f] * (qi[f] - qj[f]);
    const T sig = T(1) / (T(1) + std::exp(-diff));
    const T dloss = sig - T(1);  // d(-ln sigmoid(diff))/d(diff)
    T loss = -std::log(sig);
    if (grad_bi) *grad_bi = dloss + T(2) * reg * bi;
    if (grad_bj) *grad_bj = -dloss + T(2) * reg * bj;
    for (int f = 0; f < factors; ++f) {
        if (grad_pu) grad_pu[f] = dloss * (qi[f] - qj[f]) + T(2) * reg * pu[f];
        if (grad_qi) grad_qi[f] = dloss * pu[f] + T(2) * reg * qi[f];
        if (grad_qj) grad_qj[f] = -dloss * pu[f] + T(2) * reg * qj[f];
    }
    T sq = bi * bi + bj * bj;
    for (int f = 0; f < factors; ++f) sq += pu[f] * pu[f] + qi[f] * qi[f] + qj[f] * qj[f];
    return loss + reg * sq;
}

}  // namespace iirnn
