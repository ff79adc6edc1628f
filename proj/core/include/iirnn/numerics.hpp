#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "iirnn/dense.hpp"
#include "iirnn/error.hpp"
#include "iirnn/rand.hpp"

namespace iirnn {

// logits = W h + b, W is (num_items x hidden)
template <typename T>
std::vector<T> output_layer_forward(const std::vector<T>& h, const DenseArrayT<T>& w,
                                    const DenseArrayT<T>& b) {
    require_shape(w.cols() == h.size(), "output_layer_forward",
                  "W is " + w.shape_str() + " but h has " + std::to_string(h.size()) + " entries");
    require_shape(b.size() == w.rows(), "output_layer_forward",
                  "b is " + b.shape_str() + " but W has " + std::to_string(w.rows()) + " rows");
    std::vector<T> logits(b.data.begin(), b.data.end());
    matvec_acc(w, h.data(), logits.data());
    return logits;
}

template <typename T>
void output_layer_backward(const std::vector<T>& grad_logits, const std::vector<T>& h,
                           const DenseArrayT<T>& w, DenseArrayT<T>& grad_w,
                           DenseArrayT<T>& grad_b, std::vector<T>& grad_h) {
    outer_acc(grad_logits.data(), grad_logits.size(), h.data(), h.size(), grad_w);
    for (std::size_t i = 0; i < grad_logits.size(); ++i) grad_b.data[i] += grad_logits[i];
    grad_h.assign(h.size(), T(0));
    matvec_transpose_acc(w, grad_logits.data(), grad_h.data());
}

// target is a 1-based item id in 1..|N|. Max-subtracted softmax;
// grad_logits = softmax(logits) - onehot(target).
template <typename T>
std::pair<T, std::vector<T>> softmax_cross_entropy(const std::vector<T>& logits, int target) {
    const std::size_t n = logits.size();
    if (target < 1 || static_cast<std::size_t>(target) > n)
        throw IndexError("softmax_cross_entropy: target " + std::to_string(target) +
                         " out of range 1.." + std::to_string(n));
    T maxv = logits[0];
    for (T v : logits) maxv = std::max(maxv, v);
    std::vector<T> grad(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const T e = std::exp(logits[i] - maxv);
        grad[i] = e;
        sum += static_cast<double>(e);
    }
    const T inv = static_cast<T>(1.0 / sum);
    for (auto& v : grad) v *= inv;
    const std::size_t ti = static_cast<std::size_t>(target - 1);
    const T loss = static_cast<T>(std::log(sum)) - (logits[ti] - maxv);
    grad[ti] -= T(1);
    return {loss, std::move(grad)};
}

// Inverted dropout: entries are 0 with probability 1-keep_prob, else 1/keep_prob.
template <typename T>
std::vector<T> make_dropout_mask(std::size_t size, double keep_prob, Rng& rng) {
    if (!(keep_prob > 0.0 && keep_prob <= 1.0))
        throw ConfigError("make_dropout_mask: keep_prob must be in (0, 1], got " +
                          std::to_string(keep_prob));
    if (keep_prob == 1.0) return std::vector<T>(size, T(1));
    std::vector<T> mask(size);
    const T scale = static_cast<T>(1.0 / keep_prob);
    for (std::size_t i = 0; i < size; ++i)
        mask[i] = rng.uniform01() < keep_prob ? scale : T(0);
    return mask;
}

// ---- finite-difference gradient checking (64-bit shadow path) ----

using NamedArraysD = std::vector<std::pair<std::string, DenseArrayT<double>>>;

// |a - n| / max(1, |a|, |n|): relative where gradients are large,
// absolute below magnitude 1 so near-zero gradients do not blow up the ratio.
inline double grad_rel_error(double analytic, double numeric) {
    const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

// Central differences of f around `point`, compared coordinate-by-coordinate
// against `analytic`. Returns the worst relative error.
inline double gradient_check(const std::function<double(const NamedArraysD&)>& f,
                             const NamedArraysD& point, const NamedArraysD& analytic,
                             double step) {
    double worst = 0.0;
    NamedArraysD work = point;
    for (std::size_t a = 0; a < work.size(); ++a) {
        auto& arr = work[a].second;
        const auto& grad = analytic[a].second;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const double saved = arr.data[i];
            arr.data[i] = saved + step;
            const double up = f(work);
            arr.data[i] = saved - step;
            const double down = f(work);
            arr.data[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            worst = std::max(worst, grad_rel_error(grad.data[i], numeric));
        }
    }
    return worst;
}

}  // namespace iirnn
