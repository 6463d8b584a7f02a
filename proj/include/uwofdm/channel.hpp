#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "uwofdm/frame.hpp"
#include "uwofdm/rng.hpp"
#include "uwofdm/txchain.hpp"

namespace uwofdm {

/// One multipath draw: taps at 1/f_s spacing and the sampled frequency response.
struct ChannelRealization {
    cvec taps;
    cvec freq;    ///< H(f) on all N carriers, F_N zero-pad(h)
    cvec active;  ///< B^T freq, the diagonal of H~
    double rms_delay_spread = 0.0;
    double sample_rate = 0.0;
    bool exceeds_guard = false;  ///< L - 1 > l: the guard does not absorb the ISI

    int tap_count() const noexcept { return static_cast<int>(taps.size()); }
};

struct NoiseSpec {
    double variance = 0.0;  ///< per complex time-domain sample
};

inline ChannelRealization make_channel(const cvec& taps, const SubcarrierMap& map, double rms_delay_spread = 0.0,
                                       double sample_rate = 0.0) {
    const int n = map.dft_size();
    if (taps.size() < 1 || taps.size() > n) {
        throw invalid_argument_error("make_channel: need 1 <= taps <= N");
    }
    ChannelRealization ch;
    ch.taps = taps;
    cvec padded = cvec::Zero(n);
    padded.head(taps.size()) = taps;
    ch.freq = DftPlan(n).forward(padded);
    ch.active = map.gather(ch.freq);
    ch.rms_delay_spread = rms_delay_spread;
    ch.sample_rate = sample_rate;
    ch.exceeds_guard = taps.size() - 1 > map.redundant_count();
    return ch;
}

/// Rescales the taps to unit energy, sum |h_k|^2 = 1 (per-snapshot calibration).
inline ChannelRealization calibrate_energy(const ChannelRealization& ch, const SubcarrierMap& map) {
    const double e = ch.taps.squaredNorm();
    if (!(e > 0.0)) {
        throw invalid_argument_error("calibrate_energy: channel has no energy");
    }
    ChannelRealization out = make_channel(ch.taps / std::sqrt(e), map, ch.rms_delay_spread, ch.sample_rate);
    return out;
}

inline ChannelRealization flat_channel(const SubcarrierMap& map) { return make_channel(cvec::Ones(1), map); }

/// Exponential power delay profile p_k proportional to exp(-k T_s / tau), sum 1.
inline rvec exponential_pdp(double rms_delay_spread, double sample_rate, int taps) {
    if (taps < 1 || !(rms_delay_spread > 0.0) || !(sample_rate > 0.0)) {
        throw invalid_argument_error("exponential_pdp: need taps >= 1, tau > 0, f_s > 0");
    }
    rvec p(taps);
    const double decay = 1.0 / (sample_rate * rms_delay_spread);
    for (int k = 0; k < taps; ++k) {
        p[k] = std::exp(-k * decay);
    }
    return p / p.sum();
}

/// Rayleigh taps h_k = sqrt(p_k) g_k, g_k ~ CN(0, 1); unit energy on average.
inline ChannelRealization sample_channel(RngStream& rng, double rms_delay_spread, double sample_rate, int taps,
                                         const SubcarrierMap& map) {
    const rvec p = exponential_pdp(rms_delay_spread, sample_rate, taps);
    cvec h(taps);
    for (int k = 0; k < taps; ++k) {
        h[k] = std::sqrt(p[k]) * rng.complex_gaussian(1.0);
    }
    return make_channel(h, map, rms_delay_spread, sample_rate);
}

/// y = h (*)_N x + n with cyclic convolution over the DFT window.
inline cvec apply_channel_cyclic(const cvec& x, const ChannelRealization& ch, const NoiseSpec& noise, RngStream& rng) {
    const auto n = x.size();
    if (ch.taps.size() > n) {
        throw invalid_argument_error("apply_channel_cyclic: channel longer than the symbol");
    }
    cvec y = cvec::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        cplx acc{0.0, 0.0};
        for (Eigen::Index k = 0; k < ch.taps.size(); ++k) {
            acc += ch.taps[k] * x[(i - k + n) % n];
        }
        y[i] = acc;
    }
    if (noise.variance > 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            y[i] += rng.complex_gaussian(noise.variance);
        }
    }
    return y;
}

/// Linear convolution truncated to the input length (isolated symbol, zero history) plus noise.
inline cvec apply_channel_linear(const cvec& x, const ChannelRealization& ch, const NoiseSpec& noise, RngStream& rng) {
    const auto n = x.size();
    cvec y = cvec::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        cplx acc{0.0, 0.0};
        const Eigen::Index kmax = std::min<Eigen::Index>(ch.taps.size() - 1, i);
        for (Eigen::Index k = 0; k <= kmax; ++k) {
            acc += ch.taps[k] * x[i - k];
        }
        y[i] = acc;
    }
    if (noise.variance > 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            y[i] += rng.complex_gaussian(noise.variance);
        }
    }
    return y;
}

/**
 * Concatenates the symbols, convolves the stream linearly with h, and adds
 * noise. Output length is S N + L - 1. Symbols must all carry the same UW.
 */
inline cvec apply_channel_stream(const std::vector<TxSymbol>& symbols, const ChannelRealization& ch,
                                 const NoiseSpec& noise, RngStream& rng) {
    if (symbols.empty()) {
        return cvec(0);
    }
    const auto n = symbols.front().time.size();
    for (const auto& s : symbols) {
        if (s.time.size() != n) {
            throw invalid_argument_error("apply_channel_stream: symbols differ in length");
        }
        if (s.uw.size() != symbols.front().uw.size() || s.uw != symbols.front().uw) {
            throw invalid_argument_error("apply_channel_stream: symbols carry different unique words");
        }
    }
    const Eigen::Index total = static_cast<Eigen::Index>(symbols.size()) * n;
    cvec stream(total);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        stream.segment(static_cast<Eigen::Index>(i) * n, n) = symbols[i].time;
    }
    const Eigen::Index len = total + ch.taps.size() - 1;
    cvec y = cvec::Zero(len);
    for (Eigen::Index i = 0; i < total; ++i) {
        for (Eigen::Index k = 0; k < ch.taps.size(); ++k) {
            y[i + k] += ch.taps[k] * stream[i];
        }
    }
    if (noise.variance > 0.0) {
        for (Eigen::Index i = 0; i < len; ++i) {
            y[i] += rng.complex_gaussian(noise.variance);
        }
    }
    return y;
}

/// DFT window of symbol `index` in a stream produced by apply_channel_stream.
inline cvec stream_window(const cvec& stream, int index, int dft_size) {
    const Eigen::Index start = static_cast<Eigen::Index>(index) * dft_size;
    if (index < 0 || start + dft_size > stream.size()) {
        throw invalid_argument_error("stream_window: index out of range");
    }
    return stream.segment(start, dft_size);
}

// ---------------------------------------------------------------------------
// Notches and pinned snapshots

/// Contiguous run of active carriers (in signed-frequency order) below the notch threshold.
struct NotchRegion {
    std::vector<int> positions;  ///< positions in s
    int deepest = -1;            ///< position of the minimum |H|^2
    double depth_db = 0.0;       ///< |H|^2 at `deepest` relative to the mean, dB
};

/// Active positions sorted by signed frequency (-N/2 .. N/2-1).
inline std::vector<int> frequency_order(const SubcarrierMap& map) {
    std::vector<int> order(static_cast<std::size_t>(map.active_count()));
    std::iota(order.begin(), order.end(), 0);
    const int n = map.dft_size();
    auto signed_freq = [&](int pos) {
        const int k = map.active_carriers()[static_cast<std::size_t>(pos)];
        return k < (n + 1) / 2 ? k : k - n;
    };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return signed_freq(a) < signed_freq(b); });
    return order;
}

/// Notch regions with |H|^2 below `threshold_db` relative to the mean |H|^2 over active carriers,
/// deepest first.
inline std::vector<NotchRegion> find_notches(const ChannelRealization& ch, const SubcarrierMap& map,
                                             double threshold_db) {
    const rvec power = ch.active.cwiseAbs2();
    const double mean = power.mean();
    const double limit = mean * std::pow(10.0, threshold_db / 10.0);
    std::vector<NotchRegion> regions;
    NotchRegion cur;
    auto flush = [&]() {
        if (!cur.positions.empty()) {
            cur.depth_db = 10.0 * std::log10(power[cur.deepest] / mean);
            regions.push_back(cur);
            cur = NotchRegion{};
        }
    };
    for (int pos : frequency_order(map)) {
        if (power[pos] < limit) {
            cur.positions.push_back(pos);
            if (cur.deepest < 0 || power[pos] < power[cur.deepest]) {
                cur.deepest = pos;
            }
        } else {
            flush();
        }
    }
    flush();
    std::stable_sort(regions.begin(), regions.end(),
                     [](const NotchRegion& a, const NotchRegion& b) { return a.depth_db < b.depth_db; });
    return regions;
}

using ChannelPredicate = std::function<bool(const ChannelRealization&, const SubcarrierMap&)>;

inline constexpr double default_notch_threshold_db = -15.0;

/// At least `count` separate notches at or below `threshold_db` of the mean.
inline ChannelPredicate notch_predicate(double threshold_db = default_notch_threshold_db, int count = 2) {
    return [threshold_db, count](const ChannelRealization& ch, const SubcarrierMap& map) {
        return static_cast<int>(find_notches(ch, map, threshold_db).size()) >= count;
    };
}

struct ChannelSnapshot {
    ChannelRealization channel;
    std::uint64_t seed = 0;
    std::uint64_t draw = 0;
};

class snapshot_budget_error : public numerical_error {
public:
    snapshot_budget_error(const std::string& what, std::uint64_t budget) : numerical_error(what), budget_(budget) {}
    std::uint64_t budget() const noexcept { return budget_; }

private:
    std::uint64_t budget_;
};

/// Walks seeded draws (draw i uses substream (seed, snapshot, i)) until the predicate holds.
inline ChannelSnapshot pinned_snapshot(std::uint64_t seed, const ChannelPredicate& accept, const SubcarrierMap& map,
                                       double rms_delay_spread = 100e-9, double sample_rate = 20e6, int taps = 16,
                                       std::uint64_t budget = 100000) {
    for (std::uint64_t draw = 0; draw < budget; ++draw) {
        RngStream rng(derive_seed(seed, {tag(StreamTag::snapshot), draw}));
        ChannelRealization ch = sample_channel(rng, rms_delay_spread, sample_rate, taps, map);
        if (accept(ch, map)) {
            return {std::move(ch), seed, draw};
        }
    }
    throw snapshot_budget_error("no channel draw satisfied the snapshot predicate within " + std::to_string(budget) +
                                    " draws",
                                budget);
}

// ---------------------------------------------------------------------------
// Fixture files: '#'-prefixed "key value" metadata, then one "re im" tap per line.

inline void write_fixture(std::ostream& os, const ChannelSnapshot& snap) {
    os << "# uwofdm channel fixture\n";
    os << "# seed " << snap.seed << "\n";
    os << "# draw " << snap.draw << "\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "# rms_delay_spread %.17g\n", snap.channel.rms_delay_spread);
    os << buf;
    std::snprintf(buf, sizeof buf, "# sample_rate %.17g\n", snap.channel.sample_rate);
    os << buf;
    for (Eigen::Index k = 0; k < snap.channel.taps.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", snap.channel.taps[k].real(), snap.channel.taps[k].imag());
        os << buf;
    }
}

inline ChannelSnapshot read_fixture(std::istream& is, const SubcarrierMap& map) {
    ChannelSnapshot snap;
    std::vector<cplx> taps;
    double tau = 0.0, fs = 0.0;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream ls(line);
        if (line.front() == '#') {
            std::string hash, key;
            ls >> hash >> key;
            if (key == "seed") {
                ls >> snap.seed;
            } else if (key == "draw") {
                ls >> snap.draw;
            } else if (key == "rms_delay_spread") {
                ls >> tau;
            } else if (key == "sample_rate") {
                ls >> fs;
            }
            continue;
        }
        double re = 0.0, im = 0.0;
        if (!(ls >> re >> im)) {
            throw invalid_config_error("channel fixture: malformed tap on line " + std::to_string(line_no));
        }
        taps.emplace_back(re, im);
    }
    if (taps.empty()) {
        throw invalid_config_error("channel fixture: no taps");
    }
    cvec h(static_cast<Eigen::Index>(taps.size()));
    for (std::size_t k = 0; k < taps.size(); ++k) {
        h[static_cast<Eigen::Index>(k)] = taps[k];
    }
    snap.channel = make_channel(h, map, tau, fs);
    return snap;
}

inline ChannelSnapshot load_fixture(const std::string& path, const SubcarrierMap& map) {
    std::ifstream in(path);
    if (!in) {
        throw invalid_config_error("cannot open channel fixture '" + path + "'");
    }
    return read_fixture(in, map);
}

} // namespace uwofdm
