#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "iirnn/corpus.hpp"
#include "iirnn/dense.hpp"
#include "iirnn/error.hpp"
#include "iirnn/gru.hpp"
#include "iirnn/log.hpp"
#include "iirnn/numerics.hpp"

namespace iirnn {

enum class Variant { IntraOnly, InterAvgPool, InterLastHidden };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);
// report/model label, e.g. "ii-rnn-lhs"
std::string variant_model_label(Variant v);

// All trainable state of one recommender. Embedding row 0 is the padding
// slot and is never trained. The inter GRU consumes session representations
// of width repr_dim(): the embedding width for average pooling, the hidden
// width for last-hidden-state.
template <typename T>
struct ModelParamsT {
    Variant variant = Variant::IntraOnly;
    int num_items = 0;  // |N|
    int emb_dim = 0;    // d
    int hidden = 0;     // h

    DenseArrayT<T> embeddings;  // (num_items+1) x emb_dim
    GruParamsT<T> intra;        // emb_dim -> hidden
    GruParamsT<T> inter;        // repr_dim -> hidden (empty for IntraOnly)
    DenseArrayT<T> output_w;    // num_items x hidden
    DenseArrayT<T> output_b;    // num_items

    int repr_dim() const { return variant == Variant::InterAvgPool ? emb_dim : hidden; }
    bool uses_inter() const { return variant != Variant::IntraOnly; }

    template <typename U>
    ModelParamsT<U> cast() const {
        ModelParamsT<U> out;
        out.variant = variant;
        out.num_items = num_items;
        out.emb_dim = emb_dim;
        out.hidden = hidden;
        out.embeddings = embeddings.template cast<U>();
        auto cast_gru = [](const GruParamsT<T>& g) {
            GruParamsT<U> r;
            r.W_z = g.W_z.template cast<U>(); r.W_r = g.W_r.template cast<U>(); r.W_c = g.W_c.template cast<U>();
            r.U_z = g.U_z.template cast<U>(); r.U_r = g.U_r.template cast<U>(); r.U_c = g.U_c.template cast<U>();
            r.b_z = g.b_z.template cast<U>(); r.b_r = g.b_r.template cast<U>(); r.b_c = g.b_c.template cast<U>();
            return r;
        };
        out.intra = cast_gru(intra);
        if (!inter.empty()) out.inter = cast_gru(inter);
        out.output_w = output_w.template cast<U>();
        out.output_b = output_b.template cast<U>();
        return out;
    }
};

using ModelParams = ModelParamsT<float>;

template <typename T>
ModelParamsT<T> make_model_params(Variant variant, int num_items, int emb_dim, int hidden) {
    ModelParamsT<T> p;
    p.variant = variant;
    p.num_items = num_items;
    p.emb_dim = emb_dim;
    p.hidden = hidden;
    p.embeddings = make_matrix<T>(static_cast<std::size_t>(num_items) + 1, emb_dim);
    p.intra = make_gru_params<T>(emb_dim, hidden);
    if (variant != Variant::IntraOnly)
        p.inter = make_gru_params<T>(p.repr_dim(), hidden);
    p.output_w = make_matrix<T>(num_items, hidden);
    p.output_b = make_vector<T>(num_items);
    return p;
}

// uniform(-0.1, 0.1) matrices and embeddings, zero biases; padding row zero
inline ModelParams init_model_params(Variant variant, int num_items, int emb_dim, int hidden,
                                     std::uint64_t seed) {
    ModelParams p = make_model_params<float>(variant, num_items, emb_dim, hidden);
    Rng rng(seed);
    fill_uniform(p.embeddings, rng, -0.1, 0.1);
    for (int j = 0; j < emb_dim; ++j) p.embeddings.at(0, j) = 0.0f;
    init_gru_params(p.intra, rng, -0.1, 0.1);
    if (p.uses_inter()) init_gru_params(p.inter, rng, -0.1, 0.1);
    fill_uniform(p.output_w, rng, -0.1, 0.1);
    return p;
}

// Stable enumeration of the trainable arrays; drives Adam, checkpointing and
// gradient checks.
template <typename T>
std::vector<std::pair<std::string, DenseArrayT<T>*>> named_arrays(ModelParamsT<T>& p) {
    std::vector<std::pair<std::string, DenseArrayT<T>*>> out;
    out.emplace_back("embeddings", &p.embeddings);
    auto add_gru = [&out](const std::string& prefix, GruParamsT<T>& g) {
        out.emplace_back(prefix + ".W_z", &g.W_z);
        out.emplace_back(prefix + ".W_r", &g.W_r);
        out.emplace_back(prefix + ".W_c", &g.W_c);
        out.emplace_back(prefix + ".U_z", &g.U_z);
        out.emplace_back(prefix + ".U_r", &g.U_r);
        out.emplace_back(prefix + ".U_c", &g.U_c);
        out.emplace_back(prefix + ".b_z", &g.b_z);
        out.emplace_back(prefix + ".b_r", &g.b_r);
        out.emplace_back(prefix + ".b_c", &g.b_c);
    };
    add_gru("intra", p.intra);
    if (!p.inter.empty()) add_gru("inter", p.inter);
    out.emplace_back("output.W", &p.output_w);
    out.emplace_back("output.b", &p.output_b);
    return out;
}

template <typename T>
ModelParamsT<T> make_zero_grads(const ModelParamsT<T>& p) {
    return make_model_params<T>(p.variant, p.num_items, p.emb_dim, p.hidden);
}

// One completed session, as the inter-session level sees it. For average
// pooling the item list is kept and the vector is recomputed from the live
// embeddings at every use; for last-hidden-state the stored vector is the
// representation and is treated as a constant by backpropagation.
template <typename T>
struct SessionReprT {
    std::vector<T> values;
    std::vector<ItemId> items;
    std::int64_t session_start = 0;
};

using SessionRepr = SessionReprT<float>;

template <typename T>
struct ReprBufferT {
    std::size_t capacity = 15;  // g

    void push(SessionReprT<T> repr) {
        if (!entries.empty() && repr.session_start < entries.back().session_start)
            throw UsageError("session representations must be pushed in start-time order");
        entries.push_back(std::move(repr));
        if (entries.size() > capacity) entries.pop_front();
    }

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
    void clear() { entries.clear(); }

    std::deque<SessionReprT<T>> entries;
};

using ReprBuffer = ReprBufferT<float>;

inline void check_item_ids(const std::vector<ItemId>& items, int num_items, const char* op) {
    for (ItemId id : items)
        if (id < 1 || id > num_items)
            throw IndexError(std::string(op) + ": item id " + std::to_string(id) +
                             " outside vocabulary 1.." + std::to_string(num_items));
}

template <typename T>
SessionReprT<T> session_repr_avg(const std::vector<ItemId>& items,
                                 const ModelParamsT<T>& params, std::int64_t session_start) {
    if (items.empty()) throw UsageError("session_repr_avg: session is empty");
    check_item_ids(items, params.num_items, "session_repr_avg");
    SessionReprT<T> repr;
    repr.items = items;
    repr.session_start = session_start;
    repr.values.assign(params.emb_dim, T(0));
    for (ItemId id : items) {
        const T* row = params.embeddings.row_ptr(static_cast<std::size_t>(id));
        for (int j = 0; j < params.emb_dim; ++j) repr.values[j] += row[j];
    }
    const T inv = T(1) / static_cast<T>(items.size());
    for (auto& v : repr.values) v *= inv;
    return repr;
}

template <typename T>
SessionReprT<T> session_repr_lhs(std::vector<T> final_hidden, std::int64_t session_start) {
    SessionReprT<T> repr;
    repr.values = std::move(final_hidden);
    repr.session_start = session_start;
    return repr;
}

// Vector the inter GRU consumes for one buffer entry.
template <typename T>
std::vector<T> repr_input(const SessionReprT<T>& repr, const ModelParamsT<T>& params) {
    if (params.variant == Variant::InterAvgPool)
        return session_repr_avg(repr.items, params, repr.session_start).values;
    return repr.values;
}

template <typename T>
struct InterCacheT {
    std::vector<GruCacheT<T>> steps;
    std::vector<std::vector<T>> inputs;
};

// Runs the inter GRU over the buffer oldest -> newest from a zero state and
// returns the final state (the intra level's H0). Empty buffer -> zero.
template <typename T>
std::vector<T> inter_forward(const ReprBufferT<T>& buffer, const ModelParamsT<T>& params,
                             InterCacheT<T>* cache = nullptr) {
    std::vector<T> h(params.hidden, T(0));
    if (!params.uses_inter() || buffer.empty()) return h;
    const std::size_t want = static_cast<std::size_t>(params.repr_dim());
    for (const auto& entry : buffer.entries) {
        std::vector<T> x = repr_input(entry, params);
        if (x.size() != want)
            throw ConfigError("inter_forward: representation width " + std::to_string(x.size()) +
                              " does not match variant width " + std::to_string(want));
        GruCacheT<T> step_cache;
        h = gru_cell_forward(x, h, params.inter, static_cast<const std::vector<T>*>(nullptr),
                             cache ? &step_cache : nullptr);
        if (cache) {
            cache->steps.push_back(std::move(step_cache));
            cache->inputs.push_back(std::move(x));
        }
    }
    return h;
}

template <typename T>
struct IntraForwardResult {
    std::vector<std::vector<T>> logits;   // one row per consumed item
    std::vector<std::vector<T>> hiddens;  // state after each step
    std::vector<T> final_hidden;
};

// Step t consumes the embedding of prefix[t] and produces logits scoring the
// next item. Masks (one per step) are applied when given; eval passes none.
template <typename T>
IntraForwardResult<T> intra_forward(const std::vector<ItemId>& prefix, const std::vector<T>& h0,
                                    const ModelParamsT<T>& params,
                                    const std::vector<std::vector<T>>* masks = nullptr) {
    if (prefix.empty()) throw UsageError("intra_forward: empty prefix");
    check_item_ids(prefix, params.num_items, "intra_forward");
    require_shape(h0.size() == static_cast<std::size_t>(params.hidden), "intra_forward",
                  "H0 has " + std::to_string(h0.size()) + " entries, expected " +
                      std::to_string(params.hidden));

    IntraForwardResult<T> out;
    std::vector<T> h = h0;
    for (std::size_t t = 0; t < prefix.size(); ++t) {
        const T* row = params.embeddings.row_ptr(static_cast<std::size_t>(prefix[t]));
        std::vector<T> x(row, row + params.emb_dim);
        const std::vector<T>* mask = (masks && t < masks->size()) ? &(*masks)[t] : nullptr;
        h = gru_cell_forward(x, h, params.intra, mask, static_cast<GruCacheT<T>*>(nullptr));
        out.hiddens.push_back(h);
        out.logits.push_back(output_layer_forward(h, params.output_w, params.output_b));
    }
    out.final_hidden = out.hiddens.back();
    return out;
}

struct ScoredItem {
    ItemId item = 0;
    float score = 0.0f;
};

// top-k by (score desc, id asc); ids are 1-based so padding never appears
template <typename T>
std::vector<ScoredItem> top_k_items(const std::vector<T>& logits, std::size_t k) {
    std::vector<ItemId> ids(logits.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<ItemId>(i + 1);
    if (k > ids.size()) {
        warn("top-k request " + std::to_string(k) + " clipped to catalogue size " +
             std::to_string(ids.size()));
        k = ids.size();
    }
    std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](ItemId a, ItemId b) {
        const T sa = logits[a - 1], sb = logits[b - 1];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    std::vector<ScoredItem> out(k);
    for (std::size_t i = 0; i < k; ++i)
        out[i] = ScoredItem{ids[i], static_cast<float>(logits[ids[i] - 1])};
    return out;
}

// Serving-path prediction: H0 from the user's buffer, teacher-forced prefix,
// top-k of the last step's logits.
template <typename T>
std::vector<ScoredItem> predict_next(const ReprBufferT<T>& buffer,
                                     const std::vector<ItemId>& prefix, std::size_t k,
                                     const ModelParamsT<T>& params) {
    if (k < 1) throw UsageError("predict_next: k must be >= 1");
    const std::vector<T> h0 = inter_forward(buffer, params);
    const auto fwd = intra_forward(prefix, h0, params);
    return top_k_items(fwd.logits.back(), k);
}

template <typename T>
struct SessionGradResult {
    T loss = T(0);  // mean cross-entropy over the session's targets
    int num_targets = 0;
    ModelParamsT<T> grads;
    std::vector<T> final_hidden;  // state after consuming the whole session
};

// Mean cross-entropy over targets j = 1..l-1 plus gradients for every
// parameter. Gradients flow through the intra GRU, output layer and
// embeddings; for the inter variants additionally through the inter GRU and
// (average pooling) into the embeddings of past-session items. Stored
// last-hidden-state representations are constants: backpropagation stops at
// the session boundary.
template <typename T>
SessionGradResult<T> session_loss_and_grads(const ReprBufferT<T>& buffer,
                                            const std::vector<ItemId>& items,
                                            const ModelParamsT<T>& params,
                                            const std::vector<std::vector<T>>* masks = nullptr) {
    if (items.size() < 2)
        throw UsageError("session_loss_and_grads: session must have at least 2 items");
    check_item_ids(items, params.num_items, "session_loss_and_grads");

    SessionGradResult<T> res;
    res.grads = make_zero_grads(params);
    const std::size_t steps = items.size() - 1;
    res.num_targets = static_cast<int>(steps);

    InterCacheT<T> inter_cache;
    std::vector<T> h = inter_forward(buffer, params, params.uses_inter() ? &inter_cache : nullptr);

    // forward through the loss steps, caching intermediates
    std::vector<GruCacheT<T>> caches(steps);
    std::vector<std::vector<T>> hiddens(steps);
    std::vector<std::vector<T>> grad_logits(steps);
    double loss_sum = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        const T* row = params.embeddings.row_ptr(static_cast<std::size_t>(items[t]));
        std::vector<T> x(row, row + params.emb_dim);
        const std::vector<T>* mask = (masks && t < masks->size()) ? &(*masks)[t] : nullptr;
        h = gru_cell_forward(x, h, params.intra, mask, &caches[t]);
        hiddens[t] = h;
        auto logits = output_layer_forward(h, params.output_w, params.output_b);
        auto [loss, gl] = softmax_cross_entropy(logits, items[t + 1]);
        loss_sum += static_cast<double>(loss);
        grad_logits[t] = std::move(gl);
    }
    res.loss = static_cast<T>(loss_sum / static_cast<double>(steps));
    if (!std::isfinite(static_cast<double>(res.loss)))
        throw TrainingError("session_loss_and_grads: non-finite loss");

    // one more step over the last item for the session representation only;
    // no loss depends on it, so it stays forward-only
    {
        const T* row = params.embeddings.row_ptr(static_cast<std::size_t>(items.back()));
        std::vector<T> x(row, row + params.emb_dim);
        res.final_hidden = gru_cell_forward(x, h, params.intra,
                                            static_cast<const std::vector<T>*>(nullptr),
                                            static_cast<GruCacheT<T>*>(nullptr));
    }

    // backward through time
    const T inv_steps = T(1) / static_cast<T>(steps);
    std::vector<T> dh(params.hidden, T(0));
    std::vector<T> dx;
    for (std::size_t t = steps; t-- > 0;) {
        for (auto& v : grad_logits[t]) v *= inv_steps;
        std::vector<T> dh_out;
        output_layer_backward(grad_logits[t], hiddens[t], params.output_w, res.grads.output_w,
                              res.grads.output_b, dh_out);
        for (int i = 0; i < params.hidden; ++i) dh[i] += dh_out[i];

        std::vector<T> dh_prev;
        gru_cell_backward(dh, caches[t], params.intra, res.grads.intra, dx, dh_prev);
        T* emb_row = res.grads.embeddings.row_ptr(static_cast<std::size_t>(items[t]));
        for (int j = 0; j < params.emb_dim; ++j) emb_row[j] += dx[j];
        dh = std::move(dh_prev);
    }

    // dh is now dL/dH0; push it through the inter GRU
    if (params.uses_inter() && !buffer.empty()) {
        for (std::size_t s = inter_cache.steps.size(); s-- > 0;) {
            std::vector<T> ds, dq_prev;
            gru_cell_backward(dh, inter_cache.steps[s], params.inter, res.grads.inter, ds,
                              dq_prev);
            if (params.variant == Variant::InterAvgPool) {
                const auto& entry = buffer.entries[s];
                const T inv = T(1) / static_cast<T>(entry.items.size());
                for (ItemId id : entry.items) {
                    T* row = res.grads.embeddings.row_ptr(static_cast<std::size_t>(id));
                    for (int j = 0; j < params.emb_dim; ++j) row[j] += ds[j] * inv;
                }
            }
            // last-hidden-state inputs are stored constants: ds is dropped
            dh = std::move(dq_prev);
        }
    }
    return res;
}

}  // namespace iirnn
