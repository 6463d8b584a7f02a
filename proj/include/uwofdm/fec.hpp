#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "uwofdm/numerics.hpp"

namespace uwofdm {

using bits_t = std::vector<std::uint8_t>;

/// Industry-standard rate 1/2, K = 7 mother code (133, 171 octal).
struct ConvCode {
    static constexpr int constraint_length = 7;
    static constexpr int memory = constraint_length - 1;
    static constexpr int states = 1 << memory;
    static constexpr unsigned g0 = 0133;
    static constexpr unsigned g1 = 0171;
};

enum class CodeRate { none, half, three_quarters };

inline std::string to_string(CodeRate r) {
    switch (r) {
    case CodeRate::none: return "none";
    case CodeRate::half: return "1/2";
    case CodeRate::three_quarters: return "3/4";
    }
    return "?";
}

/// Information bits per coded bit.
inline double rate_value(CodeRate r) {
    switch (r) {
    case CodeRate::none: return 1.0;
    case CodeRate::half: return 0.5;
    case CodeRate::three_quarters: return 0.75;
    }
    return 1.0;
}

inline bits_t with_zero_tail(bits_t info) {
    info.insert(info.end(), ConvCode::memory, 0);
    return info;
}

namespace detail {

/// Shift register: bit 6 is the current input, bits 5..0 the previous six (newest first).
inline unsigned conv_outputs(unsigned reg) {
    return (static_cast<unsigned>(std::popcount(reg & ConvCode::g0) & 1) << 1) |
           static_cast<unsigned>(std::popcount(reg & ConvCode::g1) & 1);
}

} // namespace detail

/// Feedforward encoding starting from the zero state; outputs g0 then g1 per input bit.
/// Termination is the caller's job (see with_zero_tail).
inline bits_t conv_encode(std::span<const std::uint8_t> bits) {
    bits_t out;
    out.reserve(bits.size() * 2);
    unsigned state = 0;
    for (std::uint8_t b : bits) {
        const unsigned reg = (static_cast<unsigned>(b & 1) << ConvCode::memory) | state;
        const unsigned o = detail::conv_outputs(reg);
        out.push_back(static_cast<std::uint8_t>(o >> 1));
        out.push_back(static_cast<std::uint8_t>(o & 1));
        state = reg >> 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Puncturing. Rate 3/4 keeps A0 B0 A1 B2 out of each A0 B0 A1 B1 A2 B2 group.

inline constexpr std::array<std::uint8_t, 6> puncture_pattern_3_4{1, 1, 1, 0, 0, 1};

template <typename T>
std::vector<T> puncture(std::span<const T> coded, CodeRate rate) {
    if (rate != CodeRate::three_quarters) {
        return {coded.begin(), coded.end()};
    }
    if (coded.size() % puncture_pattern_3_4.size() != 0) {
        throw invalid_argument_error("puncture: length " + std::to_string(coded.size()) +
                                     " is not a multiple of the 6-bit pattern");
    }
    std::vector<T> out;
    out.reserve(coded.size() / 6 * 4);
    for (std::size_t i = 0; i < coded.size(); ++i) {
        if (puncture_pattern_3_4[i % 6]) {
            out.push_back(coded[i]);
        }
    }
    return out;
}

inline bits_t puncture(const bits_t& coded, CodeRate rate) { return puncture<std::uint8_t>(std::span(coded), rate); }

/// Reinserts zero LLRs at the punctured positions.
inline std::vector<double> depuncture(std::span<const double> llr, CodeRate rate) {
    if (rate != CodeRate::three_quarters) {
        return {llr.begin(), llr.end()};
    }
    if (llr.size() % 4 != 0) {
        throw invalid_argument_error("depuncture: length " + std::to_string(llr.size()) +
                                     " is not a multiple of 4 surviving bits");
    }
    std::vector<double> out;
    out.reserve(llr.size() / 4 * 6);
    std::size_t src = 0;
    for (std::size_t group = 0; group < llr.size() / 4; ++group) {
        for (std::uint8_t keep : puncture_pattern_3_4) {
            out.push_back(keep ? llr[src++] : 0.0);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Block interleaver

/// Permutation k -> j of one OFDM symbol's coded bits.
struct InterleaverSpec {
    int block_size = 0;
    int columns = 0;
    std::vector<int> permutation;
};

/**
 * Two-step IEEE 802.11a interleaver generalized to `columns` columns:
 *
 *   i = (N_cbps / C) (k mod C) + floor(k / C)
 *   j = s floor(i / s) + (i + N_cbps - floor(C i / N_cbps)) mod s,  s = max(N_bpsc / 2, 1)
 *
 * C = 16 is the standard; 72-bit UW-OFDM blocks use C = 12.
 */
inline InterleaverSpec make_interleaver(int block_size, int columns, int bits_per_carrier = 2) {
    if (block_size <= 0 || columns <= 0 || block_size % columns != 0) {
        throw invalid_argument_error("interleaver: block size must be a positive multiple of the column count");
    }
    const int s = std::max(bits_per_carrier / 2, 1);
    InterleaverSpec spec{block_size, columns, std::vector<int>(static_cast<std::size_t>(block_size))};
    for (int k = 0; k < block_size; ++k) {
        const int i = (block_size / columns) * (k % columns) + k / columns;
        const int j = s * (i / s) + (i + block_size - (columns * i) / block_size) % s;
        spec.permutation[static_cast<std::size_t>(k)] = j;
    }
    return spec;
}

inline InterleaverSpec ieee80211a_interleaver(int block_size = 96) { return make_interleaver(block_size, 16); }
inline InterleaverSpec uw_ofdm_interleaver(int block_size = 72) { return make_interleaver(block_size, 12); }

inline InterleaverSpec identity_interleaver(int block_size) {
    InterleaverSpec spec{block_size, 1, std::vector<int>(static_cast<std::size_t>(block_size))};
    for (int k = 0; k < block_size; ++k) {
        spec.permutation[static_cast<std::size_t>(k)] = k;
    }
    return spec;
}

template <typename T>
std::vector<T> interleave(std::span<const T> in, const InterleaverSpec& spec) {
    if (static_cast<int>(in.size()) != spec.block_size) {
        throw invalid_argument_error("interleave: block of " + std::to_string(in.size()) + " bits, expected " +
                                     std::to_string(spec.block_size));
    }
    std::vector<T> out(in.size());
    for (std::size_t k = 0; k < in.size(); ++k) {
        out[static_cast<std::size_t>(spec.permutation[k])] = in[k];
    }
    return out;
}

template <typename T>
std::vector<T> deinterleave(std::span<const T> in, const InterleaverSpec& spec) {
    if (static_cast<int>(in.size()) != spec.block_size) {
        throw invalid_argument_error("deinterleave: block of " + std::to_string(in.size()) + " bits, expected " +
                                     std::to_string(spec.block_size));
    }
    std::vector<T> out(in.size());
    for (std::size_t k = 0; k < in.size(); ++k) {
        out[k] = in[static_cast<std::size_t>(spec.permutation[k])];
    }
    return out;
}

// ---------------------------------------------------------------------------
// QPSK, Gray mapped, unit energy: first bit -> sign of I, second -> sign of Q,
// 0 -> +, so 00 -> (1 + j)/sqrt(2).

inline cvec qpsk_map(std::span<const std::uint8_t> bits) {
    if (bits.size() % 2 != 0) {
        throw invalid_argument_error("qpsk_map: odd number of bits");
    }
    constexpr double a = std::numbers::sqrt2 / 2.0;
    cvec out(static_cast<Eigen::Index>(bits.size() / 2));
    for (std::size_t i = 0; i < bits.size() / 2; ++i) {
        out[static_cast<Eigen::Index>(i)] = cplx(bits[2 * i] ? -a : a, bits[2 * i + 1] ? -a : a);
    }
    return out;
}

/**
 * Max-log LLRs (positive favours bit 0) for symbols with per-symbol complex
 * noise variance sigma_i^2:  llr = 4 (1/sqrt 2) Re(s_i) / sigma_i^2, same for Im.
 */
inline std::vector<double> qpsk_soft_demap(const cvec& symbols, std::span<const double> variances) {
    if (static_cast<std::size_t>(symbols.size()) != variances.size()) {
        throw invalid_argument_error("qpsk_soft_demap: one variance per symbol required");
    }
    constexpr double scale = 4.0 * std::numbers::sqrt2 / 2.0;
    std::vector<double> llr(static_cast<std::size_t>(symbols.size()) * 2);
    for (Eigen::Index i = 0; i < symbols.size(); ++i) {
        const double v = variances[static_cast<std::size_t>(i)];
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw invalid_argument_error("qpsk_soft_demap: variance must be positive and finite");
        }
        llr[2 * static_cast<std::size_t>(i)] = scale * symbols[i].real() / v;
        llr[2 * static_cast<std::size_t>(i) + 1] = scale * symbols[i].imag() / v;
    }
    return llr;
}

inline bits_t hard_decisions(std::span<const double> llr) {
    bits_t out(llr.size());
    for (std::size_t i = 0; i < llr.size(); ++i) {
        out[i] = llr[i] < 0.0 ? 1 : 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Soft Viterbi

/**
 * Maximum-likelihood decoding of a zero-terminated mother-code stream. The
 * path metric is sum (1 - 2c) llr over the coded bits c on the path; zero LLRs
 * (punctured positions) contribute nothing. Full-block traceback from state 0.
 * Returns every decoded input bit, tail included.
 */
inline bits_t viterbi_decode(std::span<const double> llr, bool terminated = true) {
    if (llr.size() % 2 != 0) {
        throw invalid_argument_error("viterbi_decode: LLR stream length must be even");
    }
    constexpr int ns = ConvCode::states;
    const std::size_t steps = llr.size() / 2;
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();

    // Branch outputs for (state, input) pairs.
    std::array<std::array<unsigned, 2>, ns> outputs{};
    for (unsigned s = 0; s < ns; ++s) {
        for (unsigned b = 0; b < 2; ++b) {
            outputs[s][b] = detail::conv_outputs((b << ConvCode::memory) | s);
        }
    }

    std::array<double, ns> metric;
    metric.fill(neg_inf);
    metric[0] = 0.0;
    std::array<double, ns> next{};
    // bit s of decisions[t] = which predecessor (low bit) won for next-state s
    std::vector<std::uint64_t> decisions(steps, 0);

    for (std::size_t t = 0; t < steps; ++t) {
        const double la = llr[2 * t];
        const double lb = llr[2 * t + 1];
        // signed gains for outputs 00, 01, 10, 11
        const std::array<double, 4> gain{la + lb, la - lb, -la + lb, -la - lb};
        std::uint64_t dec = 0;
        for (unsigned nsx = 0; nsx < ns; ++nsx) {
            const unsigned b = nsx >> (ConvCode::memory - 1);
            const unsigned p0 = (nsx << 1) & (ns - 1);
            const unsigned p1 = p0 | 1u;
            const double m0 = metric[p0] + gain[outputs[p0][b]];
            const double m1 = metric[p1] + gain[outputs[p1][b]];
            if (m1 > m0) {
                next[nsx] = m1;
                dec |= std::uint64_t{1} << nsx;
            } else {
                next[nsx] = m0;
            }
        }
        metric = next;
        decisions[t] = dec;
    }

    unsigned state = 0;
    if (!terminated) {
        double best = neg_inf;
        for (unsigned s = 0; s < ns; ++s) {
            if (metric[s] > best) {
                best = metric[s];
                state = s;
            }
        }
    }
    bits_t out(steps);
    for (std::size_t t = steps; t-- > 0;) {
        out[t] = static_cast<std::uint8_t>(state >> (ConvCode::memory - 1));
        const unsigned low = static_cast<unsigned>((decisions[t] >> state) & 1u);
        state = ((state << 1) & (ns - 1)) | low;
    }
    return out;
}

} // namespace uwofdm
