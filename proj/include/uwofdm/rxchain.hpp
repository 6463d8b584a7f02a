#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uwofdm/channel.hpp"
#include "uwofdm/frame.hpp"
#include "uwofdm/txchain.hpp"

namespace uwofdm {

/// |H(f_i)| below this on an active carrier makes ZF undefined.
inline constexpr double channel_zero_threshold = 1e-9;
/// Optional floor applied instead of failing, relative to max |H|.
inline constexpr double channel_floor_fraction = 1e-6;

struct ChannelInversionOptions {
    bool floor_weak_carriers = false;
};

namespace detail {

/// 1/H on active carriers, flooring or rejecting near-zero entries.
inline cvec invert_active_response(const cvec& h, ChannelInversionOptions opts) {
    const double hmax = h.size() ? h.cwiseAbs().maxCoeff() : 0.0;
    cvec inv(h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        cplx hi = h[i];
        const double mag = std::abs(hi);
        if (mag < channel_zero_threshold) {
            if (!opts.floor_weak_carriers) {
                throw near_singular_channel_error("active carrier " + std::to_string(i) + " has |H| = " +
                                                      std::to_string(mag) + ", zero forcing is undefined",
                                                  static_cast<int>(i), mag);
            }
        }
        if (opts.floor_weak_carriers && mag < channel_floor_fraction * hmax) {
            const double floor = channel_floor_fraction * hmax;
            hi = mag > 0.0 ? hi * (floor / mag) : cplx(floor, 0.0);
        }
        inv[i] = 1.0 / hi;
    }
    return inv;
}

} // namespace detail

/**
 * Per-channel receiver state. With v = H~^{-1} B^T F n the ZF noise has
 *
 *   C_vv = N sigma_n^2 diag(1/|H(f_i)|^2)
 *   W    = C_ss (C_ss + C_vv)^{-1}
 *   C_ee = (I - W) C_ss
 *
 * and the combined operator W H~^{-1} is applied once per symbol. C_ss =
 * sigma_d^2 U U^H has rank N_d, so W and C_ee are evaluated in the data domain,
 *
 *   G = U^H C_vv^{-1} U + I / sigma_d^2,   C_ee = U G^{-1} U^H,   W = C_ee C_vv^{-1},
 *
 * whose conditioning does not degrade as sigma_n^2 -> 0.
 */
struct WienerEqualizer {
    cvec h_active;
    cvec h_inverse;
    rvec noise_diag;        ///< diag(C_vv)
    cmat smoother;          ///< W
    cmat error_covariance;  ///< C_ee
    cmat combined;          ///< W diag(h_inverse)
    rvec error_diag;        ///< real part of diag(C_ee)
    double noise_variance = 0.0;
    double rcond = 1.0;

    cmat noise_covariance() const { return noise_diag.cast<cplx>().asDiagonal(); }
};

inline WienerEqualizer build_equalizer(const ChannelRealization& ch, const RedundancyGenerator& gen,
                                       double noise_variance, ChannelInversionOptions opts = {}) {
    if (!(noise_variance >= 0.0)) {
        throw invalid_argument_error("build_equalizer: noise variance must be non-negative");
    }
    const auto k = gen.data_covariance.rows();
    if (ch.active.size() != k) {
        throw invalid_argument_error("build_equalizer: channel and generator disagree on active carriers");
    }
    WienerEqualizer eq;
    eq.noise_variance = noise_variance;
    eq.h_active = ch.active;
    eq.h_inverse = detail::invert_active_response(ch.active, opts);
    eq.noise_diag = static_cast<double>(gen.dft_size) * noise_variance * eq.h_inverse.cwiseAbs2();
    if (noise_variance == 0.0) {
        eq.smoother = cmat::Identity(k, k);
        eq.error_covariance = cmat::Zero(k, k);
    } else {
        const rvec inv_noise = eq.noise_diag.cwiseInverse();
        cmat g = gen.U.adjoint() * inv_noise.cast<cplx>().asDiagonal() * gen.U;
        g.diagonal().array() += 1.0 / gen.data_variance;
        auto sol = solve_hermitian(g, cmat(gen.U.adjoint()));
        eq.rcond = sol.rcond;
        eq.error_covariance = gen.U * sol.x;
        // W = C_ee C_vv^{-1}
        eq.smoother = eq.error_covariance * inv_noise.cast<cplx>().asDiagonal();
    }
    eq.combined = eq.smoother * eq.h_inverse.asDiagonal();
    eq.error_diag = eq.error_covariance.diagonal().real();
    return eq;
}

struct RxSymbolResult {
    cvec smoothed;        ///< s^
    cvec data;            ///< d^
    rvec variances;       ///< diag(C_ee) on all active carriers
    rvec data_variances;  ///< diag(C_ee) on the data carriers, in data order
};

enum class UwRemoval { before_zf, after_zf };

/// B^T F y_t
inline cvec received_active(const cvec& y, const SubcarrierMap& map, const DftPlan& plan) {
    if (y.size() != map.dft_size()) {
        throw invalid_argument_error("received symbol has length " + std::to_string(y.size()) + ", expected " +
                                     std::to_string(map.dft_size()));
    }
    return map.gather(plan.forward(y));
}

/// s^ = W H~^{-1} (y~ - H~ B^T x_u~). Both UW-removal orders give the same s^.
inline RxSymbolResult equalize_symbol(const cvec& y, const WienerEqualizer& eq, const SubcarrierMap& map,
                                      const UniqueWord& uw, const DftPlan& plan,
                                      UwRemoval order = UwRemoval::before_zf) {
    const cvec yt = received_active(y, map, plan);
    const cvec uw_active = map.gather(uw.freq);
    RxSymbolResult r;
    if (order == UwRemoval::before_zf) {
        r.smoothed = eq.combined * (yt - eq.h_active.cwiseProduct(uw_active));
    } else {
        r.smoothed = eq.smoother * (eq.h_inverse.cwiseProduct(yt) - uw_active);
    }
    r.data = map.extract_data(r.smoothed);
    r.variances = eq.error_diag;
    r.data_variances.resize(map.data_count());
    for (int j = 0; j < map.data_count(); ++j) {
        r.data_variances[j] = eq.error_diag[map.position_of_data(j)];
    }
    return r;
}

/// y~'' = H~^{-1} y~ - B^T x_u~ = s + v, the ZF output before smoothing.
inline cvec zf_only_symbol(const cvec& y, const ChannelRealization& ch, const SubcarrierMap& map, const UniqueWord& uw,
                           const DftPlan& plan, ChannelInversionOptions opts = {}) {
    const cvec inv = detail::invert_active_response(ch.active, opts);
    return inv.cwiseProduct(received_active(y, map, plan)) - map.gather(uw.freq);
}

/// Running per-carrier E|estimate - truth|^2.
class SubcarrierMseAccumulator {
public:
    explicit SubcarrierMseAccumulator(int carriers) : sum_(rvec::Zero(carriers)) {}

    void add(const cvec& estimate, const cvec& truth) {
        if (estimate.size() != sum_.size() || truth.size() != sum_.size()) {
            throw invalid_argument_error("SubcarrierMseAccumulator: length mismatch");
        }
        sum_ += (estimate - truth).cwiseAbs2();
        ++count_;
    }

    void merge(const SubcarrierMseAccumulator& other) {
        sum_ += other.sum_;
        count_ += other.count_;
    }

    long count() const noexcept { return count_; }
    rvec mse() const { return count_ ? rvec(sum_ / static_cast<double>(count_)) : rvec(rvec::Zero(sum_.size())); }

private:
    rvec sum_;
    long count_ = 0;
};

enum class MseMode { pre_smoothing, post_smoothing };

/**
 * Empirical per-carrier MSE over a stream of (transmitted, received) symbols:
 * pre_smoothing measures the ZF output y~'', post_smoothing the Wiener output s^.
 */
inline rvec measure_subcarrier_mse(const std::vector<TxSymbol>& sent, const std::vector<cvec>& received,
                                   const WienerEqualizer& eq, const ChannelRealization& ch, const SubcarrierMap& map,
                                   const UniqueWord& uw, const DftPlan& plan, MseMode mode) {
    if (sent.size() != received.size()) {
        throw invalid_argument_error("measure_subcarrier_mse: sent/received count mismatch");
    }
    SubcarrierMseAccumulator acc(map.active_count());
    for (std::size_t i = 0; i < sent.size(); ++i) {
        if (mode == MseMode::pre_smoothing) {
            acc.add(zf_only_symbol(received[i], ch, map, uw, plan), sent[i].active);
        } else {
            acc.add(equalize_symbol(received[i], eq, map, uw, plan).smoothed, sent[i].active);
        }
    }
    return acc.mse();
}

} // namespace uwofdm
