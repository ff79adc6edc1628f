#pragma once

// Shared fixtures and independent reference implementations used as test
// oracles. Everything here recomputes results with naive scalar loops so the
// production paths are checked against genuinely separate code.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "iirnn/corpus.hpp"
#include "iirnn/nets.hpp"
#include "iirnn/numerics.hpp"
#include "iirnn/rand.hpp"

namespace testutil {

using iirnn::DenseArrayT;
using iirnn::NamedArraysD;

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Naive per-coordinate GRU reference: one flat loop per output coordinate,
// no shared intermediates with the production kernel.
inline std::vector<double> ref_gru_cell(const std::vector<double>& x,
                                        const std::vector<double>& h_prev,
                                        const iirnn::GruParamsT<double>& p,
                                        const std::vector<double>* mask = nullptr) {
    const std::size_t hd = p.hidden_dim(), d = p.input_dim();
    std::vector<double> z(hd), r(hd);
    for (std::size_t i = 0; i < hd; ++i) {
        double az = p.b_z.data[i], ar = p.b_r.data[i];
        for (std::size_t j = 0; j < d; ++j) {
            az += p.W_z.at(i, j) * x[j];
            ar += p.W_r.at(i, j) * x[j];
        }
        for (std::size_t j = 0; j < hd; ++j) {
            az += p.U_z.at(i, j) * h_prev[j];
            ar += p.U_r.at(i, j) * h_prev[j];
        }
        z[i] = ref_sigmoid(az);
        r[i] = ref_sigmoid(ar);
    }
    std::vector<double> out(hd);
    for (std::size_t i = 0; i < hd; ++i) {
        double ac = p.b_c.data[i];
        for (std::size_t j = 0; j < d; ++j) ac += p.W_c.at(i, j) * x[j];
        for (std::size_t j = 0; j < hd; ++j) ac += p.U_c.at(i, j) * (r[j] * h_prev[j]);
        const double hc = std::tanh(ac);
        out[i] = (1.0 - z[i]) * h_prev[i] + z[i] * hc;
        if (mask) out[i] *= (*mask)[i];
    }
    return out;
}

inline std::vector<double> ref_output_layer(const std::vector<double>& h,
                                            const DenseArrayT<double>& w,
                                            const DenseArrayT<double>& b) {
    std::vector<double> logits(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double acc = b.data[i];
        for (std::size_t j = 0; j < w.cols(); ++j) acc += w.at(i, j) * h[j];
        logits[i] = acc;
    }
    return logits;
}

template <typename T>
DenseArrayT<T> random_array(std::vector<std::size_t> dims, iirnn::Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
    DenseArrayT<T> a(std::move(dims));
    for (auto& v : a.data) v = static_cast<T>(rng.uniform(lo, hi));
    return a;
}

inline iirnn::GruParamsT<double> random_gru(std::size_t d, std::size_t h, iirnn::Rng& rng,
                                            double lo = -0.8, double hi = 0.8) {
    auto p = iirnn::make_gru_params<double>(d, h);
    for (auto* m : {&p.W_z, &p.W_r, &p.W_c, &p.U_z, &p.U_r, &p.U_c, &p.b_z, &p.b_r, &p.b_c})
        for (auto& v : m->data) v = rng.uniform(lo, hi);
    return p;
}

inline iirnn::ModelParamsT<double> random_model(iirnn::Variant variant, int num_items, int d,
                                                int h, iirnn::Rng& rng) {
    auto p = iirnn::make_model_params<double>(variant, num_items, d, h);
    for (auto& [name, arr] : iirnn::named_arrays(p))
        for (auto& v : arr->data) v = rng.uniform(-0.6, 0.6);
    for (int j = 0; j < d; ++j) p.embeddings.at(0, j) = 0.0;
    return p;
}

// Bridge between a parameter struct and the flat named-array form the
// gradient checker perturbs.
inline NamedArraysD to_named(iirnn::ModelParamsT<double>& p) {
    NamedArraysD out;
    for (auto& [name, arr] : iirnn::named_arrays(p)) out.emplace_back(name, *arr);
    return out;
}

inline iirnn::ModelParamsT<double> from_named(const iirnn::ModelParamsT<double>& shape,
                                              const NamedArraysD& arrays) {
    iirnn::ModelParamsT<double> p = shape;
    auto named = iirnn::named_arrays(p);
    for (std::size_t i = 0; i < named.size(); ++i) *named[i].second = arrays[i].second;
    return p;
}

// In-memory corpus with vocabulary ids 1..num_items and synthetic user names.
inline iirnn::Corpus make_corpus(int num_items,
                                 const std::vector<std::vector<std::vector<iirnn::ItemId>>>& train,
                                 const std::vector<std::vector<std::vector<iirnn::ItemId>>>& test) {
    iirnn::Corpus corpus;
    for (int i = 1; i <= num_items; ++i) corpus.vocab.add("item" + std::to_string(i));
    for (std::size_t u = 0; u < train.size(); ++u) {
        iirnn::UserHistory hist;
        hist.user = "user" + std::to_string(u + 1);
        std::int64_t ts = 1000;
        for (const auto& items : train[u]) {
            hist.train_sessions.push_back(iirnn::Session{items, ts});
            ts += 10000;
        }
        if (u < test.size()) {
            for (const auto& items : test[u]) {
                hist.test_sessions.push_back(iirnn::Session{items, ts});
                ts += 10000;
            }
        }
        corpus.users.push_back(std::move(hist));
    }
    return corpus;
}

// Random well-formed corpus: every session has 2..max_len items, every user
// has at least one train and (optionally) test session.
inline iirnn::Corpus random_corpus(iirnn::Rng& rng, int max_users = 10, int max_sessions = 5,
                                   int num_items = 8, int max_len = 6) {
    const int users = 1 + static_cast<int>(rng.below(max_users));
    std::vector<std::vector<std::vector<iirnn::ItemId>>> train(users), test(users);
    for (int u = 0; u < users; ++u) {
        const int n_train = 1 + static_cast<int>(rng.below(max_sessions));
        const int n_test = 1 + static_cast<int>(rng.below(max_sessions));
        auto gen_session = [&]() {
            const int len = 2 + static_cast<int>(rng.below(max_len - 1));
            std::vector<iirnn::ItemId> items(len);
            for (auto& it : items) it = 1 + static_cast<iirnn::ItemId>(rng.below(num_items));
            return items;
        };
        for (int s = 0; s < n_train; ++s) train[u].push_back(gen_session());
        for (int s = 0; s < n_test; ++s) test[u].push_back(gen_session());
    }
    return make_corpus(num_items, train, test);
}

}  // namespace testutil
