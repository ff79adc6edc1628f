#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "iirnn/error.hpp"
#include "iirnn/rand.hpp"

namespace iirnn {

// Row-major dense array. Production storage is 32-bit (DenseArray);
// gradient checks instantiate the same code with T = double.
template <typename T>
struct DenseArrayT {
    std::vector<std::size_t> dims;
    std::vector<T> data;

    DenseArrayT() = default;

    explicit DenseArrayT(std::vector<std::size_t> d) : dims(std::move(d)) {
        data.assign(element_count(dims), T(0));
    }

    static std::size_t element_count(const std::vector<std::size_t>& d) {
        std::size_t n = 1;
        for (std::size_t x : d) n *= x;
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return dims.empty() ? 0 : dims[0]; }
    std::size_t cols() const { return dims.size() < 2 ? 1 : dims[1]; }

    T& at(std::size_t i) { return data[i]; }
    const T& at(std::size_t i) const { return data[i]; }
    T& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

    const T* row_ptr(std::size_t i) const { return data.data() + i * cols(); }
    T* row_ptr(std::size_t i) { return data.data() + i * cols(); }

    void fill(T v) { data.assign(data.size(), v); }

    bool shape_equals(const DenseArrayT& other) const { return dims == other.dims; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(dims[i]);
        }
        return s + "]";
    }

    template <typename U>
    DenseArrayT<U> cast() const {
        DenseArrayT<U> out(dims);
        for (std::size_t i = 0; i < data.size(); ++i)
            out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using DenseArray = DenseArrayT<float>;

template <typename T>
DenseArrayT<T> make_matrix(std::size_t rows, std::size_t cols) {
    return DenseArrayT<T>({rows, cols});
}

template <typename T>
DenseArrayT<T> make_vector(std::size_t n) {
    return DenseArrayT<T>({n});
}

template <typename T>
void fill_uniform(DenseArrayT<T>& a, Rng& rng, double lo, double hi) {
    for (auto& v : a.data) v = static_cast<T>(rng.uniform(lo, hi));
}

inline void require_shape(bool ok, const std::string& op, const std::string& detail) {
    if (!ok) throw DimensionError(op + ": " + detail);
}

// y += W x, W is (rows x cols) row-major, x has cols entries, y has rows entries
template <typename T>
void matvec_acc(const DenseArrayT<T>& w, const T* x, T* y) {
    const std::size_t r = w.rows(), c = w.cols();
    const T* p = w.data.data();
    for (std::size_t i = 0; i < r; ++i) {
        T acc = T(0);
        const T* row = p + i * c;
        for (std::size_t j = 0; j < c; ++j) acc += row[j] * x[j];
        y[i] += acc;
    }
}

// y += W^T s, s has rows entries, y has cols entries
template <typename T>
void matvec_transpose_acc(const DenseArrayT<T>& w, const T* s, T* y) {
    const std::size_t r = w.rows(), c = w.cols();
    const T* p = w.data.data();
    for (std::size_t i = 0; i < r; ++i) {
        const T si = s[i];
        const T* row = p + i * c;
        for (std::size_t j = 0; j < c; ++j) y[j] += row[j] * si;
    }
}

// G += a b^T, G is (len(a) x len(b))
template <typename T>
void outer_acc(const T* a, std::size_t an, const T* b, std::size_t bn, DenseArrayT<T>& g) {
    T* p = g.data.data();
    for (std::size_t i = 0; i < an; ++i) {
        const T ai = a[i];
        T* row = p + i * bn;
        for (std::size_t j = 0; j < bn; ++j) row[j] += ai * b[j];
    }
}

template <typename T>
void axpy(T alpha, const DenseArrayT<T>& x, DenseArrayT<T>& y) {
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

template <typename T>
void scale(DenseArrayT<T>& a, T alpha) {
    for (auto& v : a.data) v *= alpha;
}

}  // namespace iirnn
