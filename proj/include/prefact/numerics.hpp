#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "prefact/matrix.hpp"
#include "prefact/rng.hpp"

namespace prefact {

// ---------------------------------------------------------------------------
// Fully connected layer
// ---------------------------------------------------------------------------

/// y = x W + b, bias broadcast per row. x: N x in, W: in x out, b: 1 x out.
inline Matrix affine_forward(const Matrix& x, const Parameter& w, const Parameter& b) {
    if (x.cols() != w.value.rows())
        throw ShapeError("affine_forward: input " + x.shape_str() + " vs weight " +
                         w.value.shape_str());
    if (b.value.rows() != 1 || b.value.cols() != w.value.cols())
        throw ShapeError("affine_forward: bias " + b.value.shape_str() + " vs weight " +
                         w.value.shape_str());
    Matrix y = matmul(x, w.value);
    for (int i = 0; i < y.rows(); ++i)
        for (int j = 0; j < y.cols(); ++j) y(i, j) += b.value(0, j);
    return y;
}

/// Accumulates dL/dW and dL/db, returns dL/dx.
inline Matrix affine_backward(const Matrix& upstream, const Matrix& x, Parameter& w,
                              Parameter& b) {
    w.grad += matmul_tn(x, upstream);
    for (int i = 0; i < upstream.rows(); ++i)
        for (int j = 0; j < upstream.cols(); ++j) b.grad(0, j) += upstream(i, j);
    return matmul_nt(upstream, w.value);
}

// ---------------------------------------------------------------------------
// ReLU (subgradient at 0 is 0)
// ---------------------------------------------------------------------------

inline Matrix relu_forward(const Matrix& x) {
    Matrix y = x;
    for (double& v : y.data()) v = std::max(0.0, v);
    return y;
}

inline Matrix relu_backward(const Matrix& upstream, const Matrix& x) {
    upstream.require_same_shape(x, "relu_backward");
    Matrix dx = upstream;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (x.data()[i] <= 0.0) dx.data()[i] = 0.0;
    return dx;
}

// ---------------------------------------------------------------------------
// Stable softmax / log-softmax
// ---------------------------------------------------------------------------

/// Row-wise log softmax via the max-shifted log-sum-exp.
inline Matrix log_softmax(const Matrix& logits) {
    Matrix out = logits;
    for (int i = 0; i < out.rows(); ++i) {
        double m = out(i, 0);
        for (int j = 1; j < out.cols(); ++j) m = std::max(m, out(i, j));
        double s = 0.0;
        for (int j = 0; j < out.cols(); ++j) s += std::exp(out(i, j) - m);
        double lse = m + std::log(s);
        for (int j = 0; j < out.cols(); ++j) out(i, j) -= lse;
    }
    return out;
}

inline Matrix softmax(const Matrix& logits) {
    Matrix out = log_softmax(logits);
    for (double& v : out.data()) v = std::exp(v);
    return out;
}

inline std::vector<double> softmax_row(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    double m = *std::max_element(out.begin(), out.end());
    double s = 0.0;
    for (double& v : out) {
        v = std::exp(v - m);
        s += v;
    }
    for (double& v : out) v /= s;
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian sampling
// ---------------------------------------------------------------------------

inline Matrix gaussian_sample(Rng& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.next_gaussian();
    return m;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification
// ---------------------------------------------------------------------------

/// Checks the gradients already stored in `params` against central finite
/// differences of `f`. `f` must re-evaluate the scalar objective from the
/// current parameter values without touching the stored gradients
/// (stochastic objectives must capture frozen noise). Returns
/// max |analytic - numeric| / max(1, |analytic|, |numeric|).
inline double grad_check(const std::function<double()>& f, const std::vector<Parameter*>& params,
                         double h = 1e-5) {
    double worst = 0.0;
    for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            double saved = p->value.data()[i];
            p->value.data()[i] = saved + h;
            double fp = f();
            p->value.data()[i] = saved - h;
            double fm = f();
            p->value.data()[i] = saved;
            double numeric = (fp - fm) / (2.0 * h);
            double analytic = p->grad.data()[i];
            double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
            worst = std::max(worst, std::fabs(analytic - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace prefact
