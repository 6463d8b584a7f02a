#pragma once

#include <string>
#include <vector>

#include "uwofdm/channel.hpp"
#include "uwofdm/frame.hpp"
#include "uwofdm/rxchain.hpp"

namespace uwofdm {

/// IEEE 802.11a-shaped CP-OFDM: 48 data + 4 BPSK pilots, 16-sample prefix.
struct CpConfig {
    int dft_size = 64;
    int cp_length = 16;
    double sample_rate = 20e6;
    std::vector<int> zero_subcarriers = ieee80211a_zero_subcarriers();
    /// Pilots at -21, -7, +7, +21 carrying 1, 1, 1, -1.
    std::vector<int> pilot_subcarriers{43, 57, 7, 21};
    std::vector<double> pilot_values{1.0, 1.0, 1.0, -1.0};
    std::vector<int> data_subcarriers;

    CpConfig() {
        std::vector<char> used(static_cast<std::size_t>(dft_size), 0);
        for (int k : zero_subcarriers) {
            used[static_cast<std::size_t>(k)] = 1;
        }
        for (int k : pilot_subcarriers) {
            used[static_cast<std::size_t>(k)] = 1;
        }
        for (int k = 0; k < dft_size; ++k) {
            if (!used[static_cast<std::size_t>(k)]) {
                data_subcarriers.push_back(k);
            }
        }
    }

    int data_count() const noexcept { return static_cast<int>(data_subcarriers.size()); }
    int symbol_length() const noexcept { return dft_size + cp_length; }
    double guard_duration() const noexcept { return cp_length / sample_rate; }
};

/// Mean time-domain energy of one CP symbol, prefix included: (N + cp)/N * (48 sigma_d^2 + 4)/N.
inline double cp_mean_symbol_energy(const CpConfig& cfg, double data_variance = 1.0) {
    double pilot = 0.0;
    for (double p : cfg.pilot_values) {
        pilot += p * p;
    }
    const double freq = cfg.data_count() * data_variance + pilot;
    return static_cast<double>(cfg.symbol_length()) / cfg.dft_size * freq / cfg.dft_size;
}

inline cvec cp_encode_symbol(const cvec& data, const CpConfig& cfg, const DftPlan& plan) {
    if (data.size() != cfg.data_count()) {
        throw invalid_argument_error("cp_encode_symbol: expected " + std::to_string(cfg.data_count()) +
                                     " data symbols, got " + std::to_string(data.size()));
    }
    cvec freq = cvec::Zero(cfg.dft_size);
    for (int j = 0; j < cfg.data_count(); ++j) {
        freq[cfg.data_subcarriers[static_cast<std::size_t>(j)]] = data[j];
    }
    for (std::size_t p = 0; p < cfg.pilot_subcarriers.size(); ++p) {
        freq[cfg.pilot_subcarriers[p]] = cfg.pilot_values[p];
    }
    const cvec body = plan.inverse(freq);
    cvec out(cfg.symbol_length());
    out.head(cfg.cp_length) = body.tail(cfg.cp_length);
    out.tail(cfg.dft_size) = body;
    return out;
}

/// Channel frequency response on all N carriers for a tap vector.
inline cvec cp_channel_response(const cvec& taps, const CpConfig& cfg) {
    if (taps.size() > cfg.cp_length + 1) {
        throw invalid_argument_error("CP-OFDM: channel longer than cp_length + 1 taps");
    }
    cvec padded = cvec::Zero(cfg.dft_size);
    padded.head(taps.size()) = taps;
    return DftPlan(cfg.dft_size).forward(padded);
}

struct CpRxResult {
    cvec data;
    rvec variances;  ///< N sigma_n^2 / |H(f_i)|^2 per data carrier
};

/// Drops the prefix, transforms, and divides each data carrier by H(f_i).
inline CpRxResult cp_decode_symbol(const cvec& received, const cvec& channel_freq, double noise_variance,
                                   const CpConfig& cfg, const DftPlan& plan, ChannelInversionOptions opts = {}) {
    if (received.size() != cfg.symbol_length()) {
        throw invalid_argument_error("cp_decode_symbol: expected " + std::to_string(cfg.symbol_length()) +
                                     " samples, got " + std::to_string(received.size()));
    }
    if (channel_freq.size() != cfg.dft_size) {
        throw invalid_argument_error("cp_decode_symbol: channel response has wrong length");
    }
    const cvec spec = plan.forward(received.tail(cfg.dft_size));
    cvec h(cfg.data_count());
    for (int j = 0; j < cfg.data_count(); ++j) {
        h[j] = channel_freq[cfg.data_subcarriers[static_cast<std::size_t>(j)]];
    }
    const cvec inv = detail::invert_active_response(h, opts);
    CpRxResult r;
    r.data.resize(cfg.data_count());
    r.variances.resize(cfg.data_count());
    for (int j = 0; j < cfg.data_count(); ++j) {
        r.data[j] = spec[cfg.data_subcarriers[static_cast<std::size_t>(j)]] * inv[j];
        r.variances[j] = cfg.dft_size * noise_variance * std::norm(inv[j]);
    }
    return r;
}

} // namespace uwofdm
