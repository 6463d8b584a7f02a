#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "uwofdm/frame.hpp"

namespace uwofdm {

enum class UwKind { chirp, zero };

/// Known time-domain tail x_u and its spectrum F_N [0; x_u].
struct UniqueWord {
    cvec time;
    cvec freq;
    double energy = 0.0;

    int length() const noexcept { return static_cast<int>(time.size()); }
};

/// Mean energy of the zero-tail part: E||F^{-1} B s||^2 = trace(C_ss) / N.
inline double mean_data_symbol_energy(const RedundancyGenerator& gen) {
    return gen.data_covariance.trace().real() / gen.dft_size;
}

/**
 * Builds the unique word. Its energy is fixed relative to the mean total
 * symbol energy E_total = E_data + E_uw:
 *
 *   E_uw = ratio * E_total   =>   E_uw = ratio / (1 - ratio) * trace(C_ss) / N
 *
 * The default word is the polyphase chirp exp(j pi k^2 / l); `zero` or a zero
 * ratio gives x_u = 0.
 */
inline UniqueWord build_unique_word(int length, double target_ratio, const RedundancyGenerator& gen,
                                    UwKind kind = UwKind::chirp) {
    if (length < 1) {
        throw invalid_argument_error("build_unique_word: length must be at least 1");
    }
    if (!(target_ratio >= 0.0 && target_ratio < 1.0)) {
        throw invalid_argument_error("build_unique_word: energy ratio must lie in [0, 1)");
    }
    if (length >= gen.dft_size) {
        throw invalid_argument_error("build_unique_word: word longer than the DFT window");
    }
    const int n = gen.dft_size;
    UniqueWord uw;
    uw.time = cvec::Zero(length);
    if (kind == UwKind::chirp && target_ratio > 0.0) {
        const double energy = target_ratio / (1.0 - target_ratio) * mean_data_symbol_energy(gen);
        const double amplitude = std::sqrt(energy / length);
        for (int k = 0; k < length; ++k) {
            const double phase = std::numbers::pi * static_cast<double>(k) * k / length;
            uw.time[k] = amplitude * cplx(std::cos(phase), std::sin(phase));
        }
    }
    uw.energy = uw.time.squaredNorm();
    cvec padded = cvec::Zero(n);
    padded.tail(length) = uw.time;
    uw.freq = DftPlan(n).forward(padded);
    return uw;
}

/// trace(C_ss)/N + E_uw, the ensemble-mean energy of x'.
inline double mean_total_symbol_energy(const RedundancyGenerator& gen, const UniqueWord& uw) {
    return mean_data_symbol_energy(gen) + uw.energy;
}

struct TxSymbol {
    cvec data;       ///< d, length N_d
    cvec active;     ///< s = U d, length N_d + l
    cvec time;       ///< x' = F^{-1} B s + [0; x_u], length N
    cvec uw;         ///< x_u carried in the tail
};

/// Two-step construction: zero-tail symbol from s = U d, then UW added in time.
inline TxSymbol encode_symbol(const cvec& data, const RedundancyGenerator& gen, const SubcarrierMap& map,
                              const UniqueWord& uw, const DftPlan& plan) {
    if (data.size() != map.data_count()) {
        throw invalid_argument_error("encode_symbol: expected " + std::to_string(map.data_count()) +
                                     " data symbols, got " + std::to_string(data.size()));
    }
    if (uw.length() != map.redundant_count() || plan.size() != map.dft_size()) {
        throw invalid_argument_error("encode_symbol: unique word or DFT plan does not match the map");
    }
    TxSymbol sym;
    sym.data = data;
    sym.active = gen.encode(data);
    sym.time = plan.inverse(map.scatter(sym.active));
    sym.time.tail(uw.length()) += uw.time;
    sym.uw = uw.time;
    return sym;
}

/// Same symbol through x' = F^{-1}(x_u~ + B s).
inline cvec encode_symbol_frequency_form(const cvec& data, const RedundancyGenerator& gen, const SubcarrierMap& map,
                                         const UniqueWord& uw, const DftPlan& plan) {
    if (data.size() != map.data_count()) {
        throw invalid_argument_error("encode_symbol_frequency_form: data length mismatch");
    }
    return plan.inverse(uw.freq + map.scatter(gen.encode(data)));
}

} // namespace uwofdm
