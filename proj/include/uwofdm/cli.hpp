#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "uwofdm/harness.hpp"

namespace uwofdm {

enum exit_code : int { exit_ok = 0, exit_failure = 1, exit_config = 2, exit_numerical = 3 };

namespace detail {

struct CliOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    std::optional<int> workers;
    std::string channel;
};

inline void add_common(CLI::App* sub, CliOptions& o) {
    sub->add_option("--config", o.config_path, "configuration file (key = value)");
    sub->add_option("--seed", o.seed, "master seed (u64), overrides the config");
    sub->add_option("--out", o.out_path, "output path (CSV or fixture); stdout when omitted");
    sub->add_option("--workers", o.workers, "worker threads (default: UWOFDM_WORKERS or hardware concurrency)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--channel", o.channel, "fixed:<fixture> | flat | ensemble, overrides the config");
}

inline ToolkitConfig effective_config(const CliOptions& o) {
    ToolkitConfig cfg = o.config_path.empty() ? ToolkitConfig{} : load_config(o.config_path);
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (!o.channel.empty()) {
        cfg.channel = o.channel;
        cfg.base_dir.clear();
    }
    return cfg;
}

template <typename Writer>
void emit(const std::string& path, std::ostream& out, Writer&& write) {
    if (path.empty()) {
        write(out);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw invalid_config_error("cannot write '" + path + "'");
    }
    write(f);
}

inline ChannelSnapshot snapshot_for(const ToolkitConfig& cfg, const SubcarrierMap& map) {
    return pinned_snapshot(cfg.seed, notch_predicate(cfg.snapshot_notch_db, cfg.snapshot_notches), map,
                           cfg.rms_delay_spread, cfg.system.sample_rate, cfg.channel_taps,
                           static_cast<std::uint64_t>(cfg.snapshot_budget));
}

} // namespace detail

/**
 * Command-line entry point. Subcommands: derive, optimize-placement,
 * ber-sweep, mse-probe, snapshot. Returns 0 on success, 2 on usage or
 * configuration errors, 3 on numerical failures.
 */
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"UW-OFDM link simulator"};
    app.name("uwofdm");
    app.require_subcommand(1);
    detail::CliOptions opt;

    auto* derive = app.add_subcommand("derive", "derive T for the configured placement and report its figures");
    auto* optimize = app.add_subcommand("optimize-placement", "search the redundant-carrier set minimizing trace(TT^H)");
    auto* sweep = app.add_subcommand("ber-sweep", "Monte-Carlo BER sweep");
    auto* mse = app.add_subcommand("mse-probe", "per-carrier MSE before and after Wiener smoothing");
    auto* snap = app.add_subcommand("snapshot", "search and write a pinned two-notch channel fixture");
    for (auto* sub : {derive, optimize, sweep, mse, snap}) {
        detail::add_common(sub, opt);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return exit_config;
    }

    try {
        const ToolkitConfig cfg = detail::effective_config(opt);
        const int workers = opt.workers.value_or(default_worker_count());

        if (*derive) {
            const SubcarrierMap map = build_subcarrier_map(cfg.system);
            const RedundancyGenerator gen = derive_generator(map, cfg.system);
            detail::emit(opt.out_path, out, [&](std::ostream& os) {
                char buf[256];
                os << "key,value\n";
                os << "T_shape," << gen.T.rows() << "x" << gen.T.cols() << "\n";
                std::snprintf(buf, sizeof buf, "trace_TTH,%.12g\nm22_condition,%.12g\n", redundant_energy_metric(gen),
                              gen.m22_condition);
                os << buf;
            });
        } else if (*optimize) {
            const PlacementResult res = optimize_placement(cfg.system, cfg.placement_strategy);
            detail::emit(opt.out_path, out, [&](std::ostream& os) {
                os << "strategy,metric,evaluated,redundant_subcarriers\n";
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.12g", res.metric);
                os << (cfg.placement_strategy == PlacementStrategy::greedy ? "greedy" : "exhaustive") << "," << buf
                   << "," << res.evaluated << ",";
                for (std::size_t i = 0; i < res.redundant_subcarriers.size(); ++i) {
                    os << (i ? " " : "") << res.redundant_subcarriers[i];
                }
                os << "\n";
            });
        } else if (*sweep) {
            const SimulationSetup setup = make_setup(cfg);
            const BerReport report = run_ber_sweep(setup, SweepSpec::from_config(cfg), workers);
            detail::emit(opt.out_path, out, [&](std::ostream& os) { write_ber_csv(os, report); });
        } else if (*mse) {
            const SimulationSetup setup = make_setup(cfg);
            const ChannelRealization ch = setup.channel.kind == ChannelSource::Kind::fixed
                                              ? *setup.channel.fixed
                                              : calibrate_energy(detail::snapshot_for(cfg, setup.map).channel, setup.map);
            const auto rows = run_mse_probe(setup, ch, cfg.mse_ebn0_db, cfg.mse_symbols, cfg.seed, workers);
            detail::emit(opt.out_path, out, [&](std::ostream& os) { write_mse_csv(os, rows); });
        } else if (*snap) {
            const SubcarrierMap map = build_subcarrier_map(cfg.system);
            const ChannelSnapshot s = detail::snapshot_for(cfg, map);
            detail::emit(opt.out_path, out, [&](std::ostream& os) { write_fixture(os, s); });
            if (!opt.out_path.empty()) {
                out << "seed " << s.seed << " draw " << s.draw << "\n";
                for (const auto& n : find_notches(s.channel, map, cfg.snapshot_notch_db)) {
                    out << "notch at carrier " << map.active_carriers()[static_cast<std::size_t>(n.deepest)]
                        << " (position " << n.deepest << "), " << n.depth_db << " dB\n";
                }
            }
        }
    } catch (const invalid_config_error& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const invalid_argument_error& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const numerical_error& e) {
        err << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_failure;
    }
    return exit_ok;
}

} // namespace uwofdm
