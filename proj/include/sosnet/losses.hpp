#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sosnet/errors.hpp"

namespace sosnet::losses {

// All objectives work on plain scalars/vectors so they can run in float for
// training and double for gradient checking.

// -log softmax(logits)[y] for 2 classes, max-subtracted for stability
template <typename T>
T softmax_ce(T l0, T l1, int y) {
    if (y != 0 && y != 1) throw DataError("softmax_ce: class index must be 0 or 1");
    T m = l0 > l1 ? l0 : l1;
    T z = std::exp(l0 - m) + std::exp(l1 - m);
    T ly = (y == 0) ? l0 : l1;
    return -(ly - m) + std::log(z);
}

// logistic loss on the score difference: 1 / (1 + exp(s_r - s_s)).
// Zero when the sunrise-stream score dominates; overflow-safe both ways.
template <typename T>
T ranking_loss(T s_r, T s_s) {
    T d = s_r - s_s;
    if (d >= T(0)) {
        T e = std::exp(-d);
        return e / (T(1) + e);
    }
    return T(1) / (T(1) + std::exp(d));
}

// squared distance for same labels, hinged margin for different labels
template <typename T>
T contrast_loss(const T* v_i, const T* v_j, std::size_t dim, int c_i, int c_j,
                T margin = T(1)) {
    T d2 = T(0);
    for (std::size_t k = 0; k < dim; ++k) {
        T d = v_i[k] - v_j[k];
        d2 += d * d;
    }
    if (c_i == c_j) return d2;
    T h = margin - d2;
    return h > T(0) ? h : T(0);
}

template <typename T>
T contrast_loss(const std::vector<T>& v_i, const std::vector<T>& v_j, int c_i, int c_j,
                T margin = T(1)) {
    if (v_i.size() != v_j.size()) throw DataError("contrast_loss: dimension mismatch");
    return contrast_loss(v_i.data(), v_j.data(), v_i.size(), c_i, c_j, margin);
}

template <typename T>
T square_loss(T pred, T target) {
    T d = pred - target;
    return d * d;
}

// Batch-mean breakdown of the combined objective. The invariant
// total == softmax_r + softmax_s + lambda * ranking holds exactly because
// total is computed from the accumulated components, never separately.
template <typename T>
struct LossValueT {
    T softmax_r = T(0);
    T softmax_s = T(0);
    T ranking = T(0);
    T total = T(0);
};

// One pair's head outputs, already oriented (R = Sunrise member).
template <typename T>
struct PairHeads {
    T logits_r[2];
    T logits_s[2];
    int y_r = 0;
    int y_s = 1;
    T score_r = T(0);
    T score_s = T(0);
};

template <typename T>
LossValueT<T> combined_loss(const std::vector<PairHeads<T>>& batch, T lambda) {
    if (lambda < T(0)) throw DataError("combined_loss: lambda must be >= 0");
    if (batch.empty()) throw DataError("combined_loss: empty batch");
    LossValueT<T> v;
    for (const PairHeads<T>& p : batch) {
        v.softmax_r += softmax_ce(p.logits_r[0], p.logits_r[1], p.y_r);
        v.softmax_s += softmax_ce(p.logits_s[0], p.logits_s[1], p.y_s);
        v.ranking += ranking_loss(p.score_r, p.score_s);
    }
    T n = T(batch.size());
    v.softmax_r /= n;
    v.softmax_s /= n;
    v.ranking /= n;
    v.total = v.softmax_r + v.softmax_s + lambda * v.ranking;
    return v;
}

}  // namespace sosnet::losses
