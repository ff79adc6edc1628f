#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "iirnn/dense.hpp"
#include "iirnn/error.hpp"

namespace iirnn {

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// One GRU layer: input-to-hidden W_*, hidden-to-hidden U_*, biases b_*.
// Gates: z = sigmoid(W_z x + U_z h + b_z), r = sigmoid(W_r x + U_r h + b_r),
// candidate hc = tanh(W_c x + U_c (r.h) + b_c), h' = (1-z).h + z.hc.
template <typename T>
struct GruParamsT {
    DenseArrayT<T> W_z, W_r, W_c;  // h x d
    DenseArrayT<T> U_z, U_r, U_c;  // h x h
    DenseArrayT<T> b_z, b_r, b_c;  // h

    std::size_t input_dim() const { return W_z.cols(); }
    std::size_t hidden_dim() const { return W_z.rows(); }
    bool empty() const { return W_z.size() == 0; }

    void zero() {
        W_z.fill(T(0)); W_r.fill(T(0)); W_c.fill(T(0));
        U_z.fill(T(0)); U_r.fill(T(0)); U_c.fill(T(0));
        b_z.fill(T(0)); b_r.fill(T(0)); b_c.fill(T(0));
    }
};

using GruParams = GruParamsT<float>;

template <typename T>
GruParamsT<T> make_gru_params(std::size_t input_dim, std::size_t hidden_dim) {
    GruParamsT<T> p;
    p.W_z = make_matrix<T>(hidden_dim, input_dim);
    p.W_r = make_matrix<T>(hidden_dim, input_dim);
    p.W_c = make_matrix<T>(hidden_dim, input_dim);
    p.U_z = make_matrix<T>(hidden_dim, hidden_dim);
    p.U_r = make_matrix<T>(hidden_dim, hidden_dim);
    p.U_c = make_matrix<T>(hidden_dim, hidden_dim);
    p.b_z = make_vector<T>(hidden_dim);
    p.b_r = make_vector<T>(hidden_dim);
    p.b_c = make_vector<T>(hidden_dim);
    return p;
}

template <typename T>
void init_gru_params(GruParamsT<T>& p, Rng& rng, double lo, double hi) {
    fill_uniform(p.W_z, rng, lo, hi);
    fill_uniform(p.W_r, rng, lo, hi);
    fill_uniform(p.W_c, rng, lo, hi);
    fill_uniform(p.U_z, rng, lo, hi);
    fill_uniform(p.U_r, rng, lo, hi);
    fill_uniform(p.U_c, rng, lo, hi);
    // biases stay zero
}

template <typename T>
void validate_gru_shapes(const GruParamsT<T>& p, const std::string& op) {
    const std::size_t h = p.W_z.rows(), d = p.W_z.cols();
    require_shape(p.W_r.rows() == h && p.W_r.cols() == d, op,
                  "W_r is " + p.W_r.shape_str() + ", expected [" + std::to_string(h) + "x" + std::to_string(d) + "]");
    require_shape(p.W_c.rows() == h && p.W_c.cols() == d, op,
                  "W_c is " + p.W_c.shape_str() + ", expected [" + std::to_string(h) + "x" + std::to_string(d) + "]");
    for (const auto* u : {&p.U_z, &p.U_r, &p.U_c}) {
        require_shape(u->rows() == h && u->cols() == h, op,
                      "U gate matrix is " + u->shape_str() + ", expected [" + std::to_string(h) + "x" + std::to_string(h) + "]");
    }
    for (const auto* b : {&p.b_z, &p.b_r, &p.b_c}) {
        require_shape(b->size() == h, op,
                      "bias is " + b->shape_str() + ", expected [" + std::to_string(h) + "]");
    }
}

// Intermediates kept for the backward pass.
template <typename T>
struct GruCacheT {
    std::vector<T> x, h_prev;
    std::vector<T> z, r, rh, hc;   // rh = r . h_prev
    std::vector<T> h_pre;          // before dropout
    std::vector<T> mask;           // empty when no dropout
};

// h_new = (1-z).h_prev + z.hc, elementwise-multiplied by mask when given.
// mask entries are 0 or 1/keep_prob (inverted dropout).
template <typename T>
std::vector<T> gru_cell_forward(const std::vector<T>& x, const std::vector<T>& h_prev,
                                const GruParamsT<T>& p, const std::vector<T>* mask,
                                GruCacheT<T>* cache) {
    const std::size_t h = p.hidden_dim(), d = p.input_dim();
    require_shape(x.size() == d, "gru_cell_forward",
                  "x has " + std::to_string(x.size()) + " entries, W_z expects " + std::to_string(d));
    require_shape(h_prev.size() == h, "gru_cell_forward",
                  "h_prev has " + std::to_string(h_prev.size()) + " entries, expected " + std::to_string(h));
    validate_gru_shapes(p, "gru_cell_forward");
    if (mask)
        require_shape(mask->size() == h, "gru_cell_forward",
                      "dropout_mask has " + std::to_string(mask->size()) + " entries, expected " + std::to_string(h));

    std::vector<T> z(p.b_z.data.begin(), p.b_z.data.end());
    std::vector<T> r(p.b_r.data.begin(), p.b_r.data.end());
    matvec_acc(p.W_z, x.data(), z.data());
    matvec_acc(p.U_z, h_prev.data(), z.data());
    matvec_acc(p.W_r, x.data(), r.data());
    matvec_acc(p.U_r, h_prev.data(), r.data());
    for (std::size_t i = 0; i < h; ++i) {
        z[i] = sigmoid(z[i]);
        r[i] = sigmoid(r[i]);
    }

    std::vector<T> rh(h);
    for (std::size_t i = 0; i < h; ++i) rh[i] = r[i] * h_prev[i];

    std::vector<T> hc(p.b_c.data.begin(), p.b_c.data.end());
    matvec_acc(p.W_c, x.data(), hc.data());
    matvec_acc(p.U_c, rh.data(), hc.data());
    for (std::size_t i = 0; i < h; ++i) hc[i] = std::tanh(hc[i]);

    std::vector<T> h_new(h);
    for (std::size_t i = 0; i < h; ++i)
        h_new[i] = (T(1) - z[i]) * h_prev[i] + z[i] * hc[i];

    if (cache) {
        cache->x = x;
        cache->h_prev = h_prev;
        cache->z = z;
        cache->r = r;
        cache->rh = rh;
        cache->hc = hc;
        cache->h_pre = h_new;
        cache->mask = mask ? *mask : std::vector<T>();
    }

    if (mask)
        for (std::size_t i = 0; i < h; ++i) h_new[i] *= (*mask)[i];
    return h_new;
}

// Accumulates parameter gradients into `grads` (same shapes as the params);
// returns (grad_x, grad_h_prev) and requires the cache of the matching forward.
template <typename T>
void gru_cell_backward(const std::vector<T>& grad_h_new, const GruCacheT<T>& cache,
                       const GruParamsT<T>& p, GruParamsT<T>& grads,
                       std::vector<T>& grad_x, std::vector<T>& grad_h_prev) {
    if (cache.x.empty() || cache.z.empty())
        throw UsageError("gru_cell_backward: cache is empty or not from a forward call");
    const std::size_t h = p.hidden_dim(), d = p.input_dim();
    require_shape(grad_h_new.size() == h, "gru_cell_backward",
                  "grad_h_new has " + std::to_string(grad_h_new.size()) + " entries, expected " + std::to_string(h));

    std::vector<T> g(grad_h_new);
    if (!cache.mask.empty())
        for (std::size_t i = 0; i < h; ++i) g[i] *= cache.mask[i];

    std::vector<T> da_z(h), da_r(h), da_c(h), drh(h);
    grad_h_prev.assign(h, T(0));
    for (std::size_t i = 0; i < h; ++i) {
        const T dz = g[i] * (cache.hc[i] - cache.h_prev[i]);
        const T dhc = g[i] * cache.z[i];
        grad_h_prev[i] = g[i] * (T(1) - cache.z[i]);
        da_c[i] = dhc * (T(1) - cache.hc[i] * cache.hc[i]);
        da_z[i] = dz * cache.z[i] * (T(1) - cache.z[i]);
    }

    // candidate path: a_c = W_c x + U_c (r.h_prev) + b_c
    drh.assign(h, T(0));
    matvec_transpose_acc(p.U_c, da_c.data(), drh.data());
    for (std::size_t i = 0; i < h; ++i) {
        const T dr = drh[i] * cache.h_prev[i];
        grad_h_prev[i] += drh[i] * cache.r[i];
        da_r[i] = dr * cache.r[i] * (T(1) - cache.r[i]);
    }

    outer_acc(da_z.data(), h, cache.x.data(), d, grads.W_z);
    outer_acc(da_r.data(), h, cache.x.data(), d, grads.W_r);
    outer_acc(da_c.data(), h, cache.x.data(), d, grads.W_c);
    outer_acc(da_z.data(), h, cache.h_prev.data(), h, grads.U_z);
    outer_acc(da_r.data(), h, cache.h_prev.data(), h, grads.U_r);
    outer_acc(da_c.data(), h, cache.rh.data(), h, grads.U_c);
    for (std::size_t i = 0; i < h; ++i) {
        grads.b_z.data[i] += da_z[i];
        grads.b_r.data[i] += da_r[i];
        grads.b_c.data[i] += da_c[i];
    }

    matvec_transpose_acc(p.U_z, da_z.data(), grad_h_prev.data());
    matvec_transpose_acc(p.U_r, da_r.data(), grad_h_prev.data());

    grad_x.assign(d, T(0));
    matvec_transpose_acc(p.W_z, da_z.data(), grad_x.data());
    matvec_transpose_acc(p.W_r, da_r.data(), grad_x.data());
    matvec_transpose_acc(p.W_c, da_c.data(), grad_x.data());
}

}  // namespace iirnn
