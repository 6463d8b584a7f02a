#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "uwofdm/errors.hpp"

namespace uwofdm {

using cplx = std::complex<double>;
using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;
using rvec = Eigen::VectorXd;

/// Reciprocal condition below which a linear system is rejected.
inline constexpr double singular_rcond = 1e-12;

/**
 * N-point DFT with the unnormalized convention
 *
 *   forward:  X[m] = sum_n x[n] w^{mn},  w = exp(-j 2 pi / N)
 *   inverse:  x[n] = (1/N) sum_m X[m] w^{-mn}
 *
 * so that F_N F_N^H = N I. Every energy and noise-variance formula in the
 * library depends on this scaling (e.g. ZF noise variance N sigma_n^2 / |H|^2).
 *
 * Power-of-two sizes use an iterative radix-2 transform, other sizes fall back
 * to direct summation with a precomputed twiddle table.
 */
class DftPlan {
public:
    explicit DftPlan(int size) : size_(size) {
        if (size < 1) {
            throw invalid_argument_error("DftPlan: size must be positive");
        }
        twiddle_.resize(static_cast<std::size_t>(size));
        for (int k = 0; k < size; ++k) {
            const double phase = -2.0 * std::numbers::pi * k / size;
            twiddle_[static_cast<std::size_t>(k)] = cplx(std::cos(phase), std::sin(phase));
        }
        radix2_ = (size & (size - 1)) == 0;
        if (radix2_) {
            bitrev_.resize(static_cast<std::size_t>(size));
            int bits = 0;
            while ((1 << bits) < size) {
                ++bits;
            }
            for (int i = 0; i < size; ++i) {
                int r = 0;
                for (int b = 0; b < bits; ++b) {
                    r |= ((i >> b) & 1) << (bits - 1 - b);
                }
                bitrev_[static_cast<std::size_t>(i)] = r;
            }
        }
    }

    int size() const noexcept { return size_; }

    cvec forward(const cvec& v) const {
        check(v);
        return transform(v, false);
    }

    cvec inverse(const cvec& v) const {
        check(v);
        cvec out = transform(v, true);
        out /= static_cast<double>(size_);
        return out;
    }

    /// Dense F_N, mostly for building M = F_N^{-1} B P and for tests.
    cmat matrix() const {
        cmat f(size_, size_);
        for (int m = 0; m < size_; ++m) {
            for (int n = 0; n < size_; ++n) {
                f(m, n) = twiddle_[static_cast<std::size_t>((static_cast<long>(m) * n) % size_)];
            }
        }
        return f;
    }

    /// Dense F_N^{-1} = F_N^H / N.
    cmat inverse_matrix() const { return matrix().adjoint() / static_cast<double>(size_); }

private:
    void check(const cvec& v) const {
        if (v.size() != size_) {
            throw invalid_argument_error("DFT: vector length " + std::to_string(v.size()) +
                                         " does not match plan size " + std::to_string(size_));
        }
    }

    cplx twiddle(long k, bool conj) const {
        const cplx w = twiddle_[static_cast<std::size_t>(k % size_)];
        return conj ? std::conj(w) : w;
    }

    cvec transform(const cvec& v, bool conj) const {
        if (!radix2_) {
            cvec out = cvec::Zero(size_);
            for (int m = 0; m < size_; ++m) {
                cplx acc{0.0, 0.0};
                for (int n = 0; n < size_; ++n) {
                    acc += v[n] * twiddle(static_cast<long>(m) * n, conj);
                }
                out[m] = acc;
            }
            return out;
        }
        cvec a(size_);
        for (int i = 0; i < size_; ++i) {
            a[bitrev_[static_cast<std::size_t>(i)]] = v[i];
        }
        for (int len = 2; len <= size_; len <<= 1) {
            const int half = len / 2;
            const int stride = size_ / len;
            for (int start = 0; start < size_; start += len) {
                for (int k = 0; k < half; ++k) {
                    const cplx t = twiddle(static_cast<long>(k) * stride, conj) * a[start + k + half];
                    const cplx u = a[start + k];
                    a[start + k] = u + t;
                    a[start + k + half] = u - t;
                }
            }
        }
        return a;
    }

    int size_;
    bool radix2_ = false;
    std::vector<cplx> twiddle_;
    std::vector<int> bitrev_;
};

inline cvec forward_dft(const cvec& v, const DftPlan& plan) { return plan.forward(v); }
inline cvec inverse_dft(const cvec& v, const DftPlan& plan) { return plan.inverse(v); }

struct LinearSolution {
    cmat x;
    double rcond = 0.0;
};

/// Solves A X = B with partial-pivot LU. Throws numerically_singular_error when
/// the reciprocal condition estimate drops below singular_rcond.
inline LinearSolution solve_linear(const cmat& a, const cmat& b) {
    if (a.rows() != a.cols()) {
        throw invalid_argument_error("solve_linear: matrix is not square");
    }
    if (b.rows() != a.rows()) {
        throw invalid_argument_error("solve_linear: right-hand side has wrong row count");
    }
    if (a.rows() == 0) {
        return {cmat(0, b.cols()), 1.0};
    }
    Eigen::PartialPivLU<cmat> lu(a);
    // Eigen's estimate misses exact zero pivots, so bound it by the pivot ratio as well.
    const Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
    const double pivot_ratio = pivots.maxCoeff() > 0.0 ? pivots.minCoeff() / pivots.maxCoeff() : 0.0;
    const double rcond = std::min(lu.rcond(), pivot_ratio);
    if (!(rcond >= singular_rcond)) {
        throw numerically_singular_error("solve_linear: matrix is numerically singular", std::isfinite(rcond) ? rcond : 0.0);
    }
    return {lu.solve(b), rcond};
}

/// Solves A X = B for Hermitian positive definite A via Cholesky.
inline LinearSolution solve_hermitian(const cmat& a, const cmat& b) {
    if (a.rows() != a.cols() || b.rows() != a.rows()) {
        throw invalid_argument_error("solve_hermitian: dimension mismatch");
    }
    Eigen::LLT<cmat> llt(a);
    const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (!(rcond >= singular_rcond)) {
        throw numerically_singular_error("solve_hermitian: matrix is not numerically positive definite",
                                         std::isfinite(rcond) ? rcond : 0.0);
    }
    return {llt.solve(b), rcond};
}

/// 2-norm condition number from the singular values.
inline double condition_number(const cmat& a) {
    if (a.size() == 0) {
        return 1.0;
    }
    Eigen::JacobiSVD<cmat> svd(a);
    const auto& s = svd.singularValues();
    const double smin = s[s.size() - 1];
    return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

inline double max_abs(const cmat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

} // namespace uwofdm
