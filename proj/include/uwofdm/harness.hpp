#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "uwofdm/channel.hpp"
#include "uwofdm/config_file.hpp"
#include "uwofdm/cpref.hpp"
#include "uwofdm/fec.hpp"
#include "uwofdm/frame.hpp"
#include "uwofdm/rng.hpp"
#include "uwofdm/rxchain.hpp"
#include "uwofdm/txchain.hpp"

namespace uwofdm {

/// Runs body(i) for i in [0, count) on `workers` threads. Results must be written per index.
template <typename Body>
void parallel_for(int count, int workers, Body&& body) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto run = [&]() {
        for (int i = next.fetch_add(1); i < count && !failed.load(); i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                if (!failed.exchange(true)) {
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::jthread> pool;
    const int n = std::min(workers, count);
    pool.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) {
        pool.emplace_back(run);
    }
    pool.clear();
    if (failure) {
        std::rethrow_exception(failure);
    }
}

/// Worker count from UWOFDM_WORKERS, else hardware concurrency.
inline int default_worker_count() {
    if (const char* env = std::getenv("UWOFDM_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) {
            return v;
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Where channel realizations come from during a sweep.
struct ChannelSource {
    enum class Kind { ensemble, fixed } kind = Kind::ensemble;
    std::optional<ChannelRealization> fixed;
    std::string id = "ensemble";
};

/**
 * Immutable per-run state: the UW-OFDM frame, generator and unique word, the
 * CP reference, interleavers, and the channel source.
 */
struct SimulationSetup {
    ToolkitConfig config;
    SubcarrierMap map;
    RedundancyGenerator gen;
    UniqueWord uw;
    CpConfig cp;
    DftPlan plan{64};
    InterleaverSpec uw_interleaver;
    InterleaverSpec cp_interleaver;
    ChannelSource channel;
};

/// `base_dir` anchors relative fixture paths (the config file's directory).
inline ChannelSource resolve_channel(const std::string& spec, const SubcarrierMap& map,
                                     const std::string& base_dir = {}) {
    ChannelSource src;
    if (spec == "ensemble") {
        return src;
    }
    src.kind = ChannelSource::Kind::fixed;
    if (spec == "flat" || spec == "fixed:flat") {
        src.fixed = flat_channel(map);
        src.id = "flat";
        return src;
    }
    if (spec.rfind("fixed:", 0) == 0) {
        std::filesystem::path path = spec.substr(6);
        if (path.is_relative() && !base_dir.empty()) {
            path = std::filesystem::path(base_dir) / path;
        }
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw invalid_config_error("cannot open channel fixture '" + path.string() + "'");
        }
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        std::istringstream parse(text);
        src.fixed = calibrate_energy(read_fixture(parse, map).channel, map);
        src.id = "fixture-" + hex64(fnv1a64(text));
        return src;
    }
    throw invalid_config_error("channel must be 'ensemble', 'flat' or 'fixed:<fixture>', got '" + spec + "'");
}

inline SimulationSetup make_setup(const ToolkitConfig& cfg) {
    SimulationSetup s;
    s.config = cfg;
    s.map = build_subcarrier_map(cfg.system);
    s.gen = derive_generator(s.map, cfg.system);
    s.uw = build_unique_word(cfg.system.uw_length, cfg.system.uw_energy_ratio, s.gen, cfg.uw_kind);
    s.plan = DftPlan(cfg.system.dft_size);
    if (cfg.system.dft_size != s.cp.dft_size) {
        // the CP reference is fixed to the 64-carrier 802.11a grid
        const bool wants_cp = std::find(cfg.systems.begin(), cfg.systems.end(), SystemKind::cp) != cfg.systems.end();
        if (wants_cp) {
            throw invalid_config_error("the CP-OFDM reference requires dft_size = 64");
        }
    }
    const int uw_bits = 2 * cfg.system.data_count;
    s.uw_interleaver = uw_bits % 12 == 0 ? make_interleaver(uw_bits, 12) : identity_interleaver(uw_bits);
    s.cp_interleaver = ieee80211a_interleaver(2 * s.cp.data_count());
    s.channel = resolve_channel(cfg.channel, s.map, cfg.base_dir);
    return s;
}

inline bool is_uw(SystemKind k) { return k != SystemKind::cp; }

/// Eb = mean transmit energy per symbol (guard and pilot/redundant energy included) / info bits per symbol.
inline double energy_per_bit(const SimulationSetup& s, SystemKind kind, CodeRate rate) {
    if (is_uw(kind)) {
        return mean_total_symbol_energy(s.gen, s.uw) / (2.0 * s.map.data_count() * rate_value(rate));
    }
    return cp_mean_symbol_energy(s.cp, s.config.system.data_variance) / (2.0 * s.cp.data_count() * rate_value(rate));
}

inline double noise_variance_for(const SimulationSetup& s, SystemKind kind, CodeRate rate, double ebn0_db) {
    return energy_per_bit(s, kind, rate) / std::pow(10.0, ebn0_db / 10.0);
}

/// Bit budget of one frame of `symbols` OFDM symbols carrying `coded_per_symbol` coded bits each.
struct FrameLayout {
    int symbols = 0;
    int coded_per_symbol = 0;
    int coded_bits = 0;
    int mother_bits = 0;
    int info_bits = 0;
};

inline FrameLayout frame_layout(int symbols, int coded_per_symbol, CodeRate rate) {
    FrameLayout f{symbols, coded_per_symbol, symbols * coded_per_symbol, 0, 0};
    switch (rate) {
    case CodeRate::none:
        f.mother_bits = f.coded_bits;
        f.info_bits = f.coded_bits;
        return f;
    case CodeRate::half:
        f.mother_bits = f.coded_bits;
        break;
    case CodeRate::three_quarters:
        if (f.coded_bits % 4 != 0) {
            throw invalid_config_error("rate 3/4 needs a multiple of 4 coded bits per frame");
        }
        f.mother_bits = f.coded_bits / 4 * 6;
        break;
    }
    f.info_bits = f.mother_bits / 2 - ConvCode::memory;
    if (f.info_bits < 1) {
        throw invalid_config_error("frame too short for the code tail");
    }
    return f;
}

/// Receiver state for one channel realization at one noise level.
struct ReceiverState {
    ChannelRealization channel;
    std::optional<WienerEqualizer> wiener;  ///< uw systems
    rvec uw_data_variances;                 ///< diag(C_ee) or diag(C_vv) at data carriers
    cvec uw_h_inverse;
    cvec cp_freq;
};

inline ReceiverState make_receiver(const SimulationSetup& s, SystemKind kind, const ChannelRealization& ch,
                                   double noise_variance) {
    ReceiverState r;
    r.channel = ch;
    const ChannelInversionOptions opts{s.config.channel_floor};
    if (is_uw(kind)) {
        WienerEqualizer eq = build_equalizer(ch, s.gen, kind == SystemKind::uw_lmmse ? noise_variance : 0.0, opts);
        r.uw_h_inverse = eq.h_inverse;
        const rvec noise_diag = static_cast<double>(s.map.dft_size()) * noise_variance * eq.h_inverse.cwiseAbs2();
        const rvec& diag = kind == SystemKind::uw_lmmse ? eq.error_diag : noise_diag;
        r.uw_data_variances.resize(s.map.data_count());
        for (int j = 0; j < s.map.data_count(); ++j) {
            r.uw_data_variances[j] = diag[s.map.position_of_data(j)];
        }
        r.wiener = std::move(eq);
    } else {
        r.cp_freq = cp_channel_response(ch.taps, s.cp);
    }
    return r;
}

struct FrameOutcome {
    long bits = 0;
    long errors = 0;
};

/**
 * One frame through encode -> puncture -> interleave -> map -> modulate ->
 * channel -> receive -> demap -> deinterleave -> depuncture -> decode.
 * Uncoded frames skip the code and the interleaver and use hard decisions.
 */
inline FrameOutcome simulate_frame(const SimulationSetup& s, SystemKind kind, CodeRate rate, const ReceiverState& rx,
                                   double noise_variance, RngStream& bit_rng, RngStream& noise_rng) {
    const bool uw = is_uw(kind);
    const int carriers = uw ? s.map.data_count() : s.cp.data_count();
    const FrameLayout layout = frame_layout(s.config.frame_symbols, 2 * carriers, rate);
    const InterleaverSpec& il = uw ? s.uw_interleaver : s.cp_interleaver;
    const double sd = std::sqrt(s.config.system.data_variance);

    bits_t info(static_cast<std::size_t>(layout.info_bits));
    for (auto& b : info) {
        b = static_cast<std::uint8_t>(bit_rng.bit());
    }
    bits_t coded;
    if (rate == CodeRate::none) {
        coded = info;
    } else {
        coded = puncture(conv_encode(with_zero_tail(info)), rate);
    }

    std::vector<double> llr;
    llr.reserve(coded.size());
    const NoiseSpec noise{noise_variance};
    for (int sym = 0; sym < layout.symbols; ++sym) {
        std::span<const std::uint8_t> block(coded.data() + static_cast<std::size_t>(sym) * layout.coded_per_symbol,
                                            static_cast<std::size_t>(layout.coded_per_symbol));
        const bits_t mapped_bits = rate == CodeRate::none ? bits_t(block.begin(), block.end()) : interleave(block, il);
        const cvec d = sd * qpsk_map(mapped_bits);

        cvec est;
        rvec var;
        if (uw) {
            const TxSymbol tx = encode_symbol(d, s.gen, s.map, s.uw, s.plan);
            const cvec y = apply_channel_cyclic(tx.time, rx.channel, noise, noise_rng);
            cvec shat;
            if (kind == SystemKind::uw_lmmse) {
                shat = equalize_symbol(y, *rx.wiener, s.map, s.uw, s.plan).smoothed;
            } else {
                shat = rx.uw_h_inverse.cwiseProduct(received_active(y, s.map, s.plan)) - s.map.gather(s.uw.freq);
            }
            est = s.map.extract_data(shat);
            var = rx.uw_data_variances;
        } else {
            const cvec tx = cp_encode_symbol(d, s.cp, s.plan);
            const cvec y = apply_channel_linear(tx, rx.channel, noise, noise_rng);
            CpRxResult r = cp_decode_symbol(y, rx.cp_freq, noise_variance, s.cp, s.plan,
                                            ChannelInversionOptions{s.config.channel_floor});
            est = std::move(r.data);
            var = std::move(r.variances);
        }
        est /= sd;
        var /= s.config.system.data_variance;
        if (noise_variance == 0.0) {
            var.setOnes();
        }
        std::vector<double> sym_llr =
            qpsk_soft_demap(est, std::span<const double>(var.data(), static_cast<std::size_t>(var.size())));
        if (rate != CodeRate::none) {
            sym_llr = deinterleave(std::span<const double>(sym_llr), il);
        }
        llr.insert(llr.end(), sym_llr.begin(), sym_llr.end());
    }

    bits_t decoded;
    if (rate == CodeRate::none) {
        decoded = hard_decisions(llr);
    } else {
        decoded = viterbi_decode(depuncture(llr, rate));
    }
    FrameOutcome out;
    out.bits = layout.info_bits;
    for (int i = 0; i < layout.info_bits; ++i) {
        out.errors += decoded[static_cast<std::size_t>(i)] != info[static_cast<std::size_t>(i)];
    }
    return out;
}

struct BerPoint {
    SystemKind system = SystemKind::uw_lmmse;
    CodeRate rate = CodeRate::none;
    double ebn0_db = 0.0;
    long frames = 0;
    long bits = 0;
    long errors = 0;
    double ber = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool converged = false;
};

/// 95% binomial interval, normal approximation.
inline std::pair<double, double> binomial_ci95(long errors, long bits) {
    if (bits <= 0) {
        return {0.0, 1.0};
    }
    const double p = static_cast<double>(errors) / bits;
    const double half = 1.959963984540054 * std::sqrt(p * (1.0 - p) / bits);
    return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

struct BerReport {
    std::vector<BerPoint> points;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string channel_id;

    const BerPoint* find(SystemKind sys, double ebn0_db) const {
        for (const auto& p : points) {
            if (p.system == sys && p.ebn0_db == ebn0_db) {
                return &p;
            }
        }
        return nullptr;
    }
};

struct SweepSpec {
    std::vector<SystemKind> systems;
    std::vector<double> ebn0_db;
    CodeRate rate = CodeRate::none;
    long min_errors = 200;
    long max_bits = 10'000'000;
    std::uint64_t seed = 1;

    static SweepSpec from_config(const ToolkitConfig& c) {
        return {c.systems, c.ebn0_db, c.code_rate, c.min_errors, c.max_bits, c.seed};
    }
};

inline constexpr int frames_per_batch = 32;

/**
 * Monte-Carlo BER sweep. Frame f at grid point p draws its bits and noise from
 * substreams (seed, bits|noise, p, f) and, for ensemble channels, its channel
 * from (seed, channel, f), so every system at a grid point sees the same
 * realizations. Frames are evaluated in fixed batches and merged in frame
 * order; a point stops at the first frame where errors >= min_errors or
 * bits >= max_bits. The result does not depend on the worker count.
 */
inline BerReport run_ber_sweep(const SimulationSetup& s, const SweepSpec& spec, int workers = 1) {
    if (spec.ebn0_db.empty() || spec.systems.empty()) {
        throw invalid_config_error("sweep needs at least one system and one Eb/N0 point");
    }
    BerReport report;
    report.config_hash = config_hash(s.config);
    report.seed = spec.seed;
    report.channel_id = s.channel.id;
    const bool ensemble = s.channel.kind == ChannelSource::Kind::ensemble;

    for (SystemKind sys : spec.systems) {
        for (std::size_t pi = 0; pi < spec.ebn0_db.size(); ++pi) {
            const double ebn0 = spec.ebn0_db[pi];
            const double nv = noise_variance_for(s, sys, spec.rate, ebn0);
            std::optional<ReceiverState> fixed_rx;
            if (!ensemble) {
                fixed_rx = make_receiver(s, sys, *s.channel.fixed, nv);
            }
            BerPoint pt;
            pt.system = sys;
            pt.rate = spec.rate;
            pt.ebn0_db = ebn0;
            bool done = false;
            long next_frame = 0;
            std::vector<FrameOutcome> batch(frames_per_batch);
            while (!done) {
                parallel_for(frames_per_batch, workers, [&](int i) {
                    const auto f = static_cast<std::uint64_t>(next_frame + i);
                    RngStream bits(derive_seed(spec.seed, {tag(StreamTag::bits), pi, f}));
                    RngStream noise(derive_seed(spec.seed, {tag(StreamTag::noise), pi, f}));
                    if (ensemble) {
                        RngStream chrng(derive_seed(spec.seed, {tag(StreamTag::channel), f}));
                        const ChannelRealization ch = sample_channel(chrng, s.config.rms_delay_spread,
                                                                     s.config.system.sample_rate,
                                                                     s.config.channel_taps, s.map);
                        const ReceiverState rx = make_receiver(s, sys, ch, nv);
                        batch[static_cast<std::size_t>(i)] = simulate_frame(s, sys, spec.rate, rx, nv, bits, noise);
                    } else {
                        batch[static_cast<std::size_t>(i)] =
                            simulate_frame(s, sys, spec.rate, *fixed_rx, nv, bits, noise);
                    }
                });
                for (const auto& o : batch) {
                    pt.bits += o.bits;
                    pt.errors += o.errors;
                    ++pt.frames;
                    if (pt.errors >= spec.min_errors || pt.bits >= spec.max_bits) {
                        done = true;
                        break;
                    }
                }
                next_frame += frames_per_batch;
            }
            pt.ber = static_cast<double>(pt.errors) / static_cast<double>(pt.bits);
            std::tie(pt.ci_low, pt.ci_high) = binomial_ci95(pt.errors, pt.bits);
            pt.converged = pt.errors >= spec.min_errors;
            report.points.push_back(pt);
        }
    }
    return report;
}

inline constexpr const char* ber_csv_header =
    "system,code_rate,ebn0_db,frames,bits,errors,ber,ci_low,ci_high,converged,seed,config_hash,channel_id";

inline void write_ber_csv(std::ostream& os, const BerReport& r) {
    os << ber_csv_header << "\n";
    char buf[512];
    for (const auto& p : r.points) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%ld,%ld,%ld,%.9e,%.9e,%.9e,%d,%llu,%s,%s\n",
                      to_string(p.system).c_str(), to_string(p.rate).c_str(), p.ebn0_db, p.frames, p.bits, p.errors,
                      p.ber, p.ci_low, p.ci_high, p.converged ? 1 : 0, static_cast<unsigned long long>(r.seed),
                      r.config_hash.c_str(), r.channel_id.c_str());
        os << buf;
    }
}

// ---------------------------------------------------------------------------
// MSE probe

struct MseRow {
    int carrier = 0;  ///< position among the N_d + l active carriers
    double mse_pre = 0.0;
    double mse_post = 0.0;
    double analytic_pre = 0.0;
    double analytic_post = 0.0;
};

inline constexpr int mse_chunk_symbols = 1000;

/**
 * Per-carrier MSE of the ZF output (pre) and the Wiener output (post) against
 * the transmitted s, next to diag(C_vv) and diag(C_ee). Noise is set from the
 * UW-OFDM Eb/N0 (uncoded Eb). Symbols are processed in fixed chunks with their
 * own substreams and merged in chunk order.
 */
inline std::vector<MseRow> run_mse_probe(const SimulationSetup& s, const ChannelRealization& ch, double ebn0_db,
                                         long symbols, std::uint64_t seed, int workers = 1) {
    const double nv = noise_variance_for(s, SystemKind::uw_lmmse, CodeRate::none, ebn0_db);
    const WienerEqualizer eq = build_equalizer(ch, s.gen, nv, ChannelInversionOptions{s.config.channel_floor});
    const int k = s.map.active_count();
    const int chunks = static_cast<int>((symbols + mse_chunk_symbols - 1) / mse_chunk_symbols);
    std::vector<SubcarrierMseAccumulator> pre(static_cast<std::size_t>(chunks), SubcarrierMseAccumulator(k));
    std::vector<SubcarrierMseAccumulator> post(static_cast<std::size_t>(chunks), SubcarrierMseAccumulator(k));
    const double sd = std::sqrt(s.config.system.data_variance);
    const cvec uw_active = s.map.gather(s.uw.freq);

    parallel_for(chunks, workers, [&](int c) {
        RngStream rng(derive_seed(seed, {tag(StreamTag::symbols), static_cast<std::uint64_t>(c)}));
        const long begin = static_cast<long>(c) * mse_chunk_symbols;
        const long end = std::min<long>(symbols, begin + mse_chunk_symbols);
        bits_t b(static_cast<std::size_t>(2 * s.map.data_count()));
        for (long i = begin; i < end; ++i) {
            for (auto& x : b) {
                x = static_cast<std::uint8_t>(rng.bit());
            }
            const TxSymbol tx = encode_symbol(sd * qpsk_map(b), s.gen, s.map, s.uw, s.plan);
            const cvec y = apply_channel_cyclic(tx.time, ch, NoiseSpec{nv}, rng);
            const cvec yt = received_active(y, s.map, s.plan);
            const cvec zf = eq.h_inverse.cwiseProduct(yt) - uw_active;
            pre[static_cast<std::size_t>(c)].add(zf, tx.active);
            post[static_cast<std::size_t>(c)].add(eq.smoother * zf, tx.active);
        }
    });

    SubcarrierMseAccumulator pre_all(k), post_all(k);
    for (int c = 0; c < chunks; ++c) {
        pre_all.merge(pre[static_cast<std::size_t>(c)]);
        post_all.merge(post[static_cast<std::size_t>(c)]);
    }
    const rvec mp = pre_all.mse();
    const rvec mq = post_all.mse();
    std::vector<MseRow> rows;
    for (int i = 0; i < k; ++i) {
        rows.push_back({i, mp[i], mq[i], eq.noise_diag[i], eq.error_diag[i]});
    }
    return rows;
}

inline constexpr const char* mse_csv_header = "carrier_index,mse_pre,mse_post,analytic_pre,analytic_post";

inline void write_mse_csv(std::ostream& os, const std::vector<MseRow>& rows) {
    os << mse_csv_header << "\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%.9e,%.9e,%.9e,%.9e\n", r.carrier, r.mse_pre, r.mse_post, r.analytic_pre,
                      r.analytic_post);
        os << buf;
    }
}

} // namespace uwofdm
