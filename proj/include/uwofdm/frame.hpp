#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "uwofdm/numerics.hpp"

namespace uwofdm {

/// Static UW-OFDM system parameters.
struct OfdmSystemConfig {
    int dft_size = 64;
    int data_count = 36;
    int uw_length = 16;
    std::vector<int> zero_subcarriers;
    std::vector<int> redundant_subcarriers;
    double sample_rate = 20e6;
    double data_variance = 1.0;
    double uw_energy_ratio = 4.0 / 52.0;

    int active_count() const noexcept { return data_count + uw_length; }
};

/// IEEE 802.11a null carriers for N = 64: DC plus indices 27..37 (band edges).
inline std::vector<int> ieee80211a_zero_subcarriers() {
    std::vector<int> z{0};
    for (int k = 27; k <= 37; ++k) {
        z.push_back(k);
    }
    return z;
}

/// N = 64, 36 data and 16 redundant carriers on the published minimum-energy positions.
inline OfdmSystemConfig paper_config() {
    OfdmSystemConfig c;
    c.zero_subcarriers = ieee80211a_zero_subcarriers();
    c.redundant_subcarriers = {2, 6, 10, 14, 17, 21, 24, 26, 38, 40, 43, 47, 50, 54, 58, 62};
    return c;
}

namespace detail {

inline void check_index_set(const std::vector<int>& set, int n, const char* name, std::vector<char>& used) {
    for (int k : set) {
        if (k < 0 || k >= n) {
            throw invalid_config_error(std::string(name) + ": index " + std::to_string(k) + " outside 0.." +
                                       std::to_string(n - 1));
        }
        if (used[static_cast<std::size_t>(k)]) {
            throw invalid_config_error(std::string(name) + ": index " + std::to_string(k) +
                                       " is duplicated or overlaps another set");
        }
        used[static_cast<std::size_t>(k)] = 1;
    }
}

} // namespace detail

/// Checks the index-set invariants. With `require_redundant` false the redundant
/// set may be empty (placement search input).
inline void validate(const OfdmSystemConfig& c, bool require_redundant = true) {
    const int n = c.dft_size;
    if (n < 1) {
        throw invalid_config_error("dft_size must be positive");
    }
    if (c.data_count < 0 || c.uw_length < 0 || c.data_count + c.uw_length > n) {
        throw invalid_config_error("need 0 <= data_count, 0 <= uw_length, data_count + uw_length <= dft_size");
    }
    if (static_cast<int>(c.zero_subcarriers.size()) != n - c.data_count - c.uw_length) {
        throw invalid_config_error("zero_subcarriers must hold dft_size - data_count - uw_length = " +
                                   std::to_string(n - c.data_count - c.uw_length) + " indices, got " +
                                   std::to_string(c.zero_subcarriers.size()));
    }
    if (c.uw_length >= n) {
        throw invalid_config_error("uw_length must be smaller than dft_size");
    }
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    detail::check_index_set(c.zero_subcarriers, n, "zero_subcarriers", used);
    if (require_redundant || !c.redundant_subcarriers.empty()) {
        if (static_cast<int>(c.redundant_subcarriers.size()) != c.uw_length) {
            throw invalid_config_error("redundant_subcarriers must hold uw_length = " + std::to_string(c.uw_length) +
                                       " indices, got " + std::to_string(c.redundant_subcarriers.size()));
        }
        detail::check_index_set(c.redundant_subcarriers, n, "redundant_subcarriers", used);
    }
    if (!(c.sample_rate > 0.0)) {
        throw invalid_config_error("sample_rate must be positive");
    }
    if (!(c.data_variance > 0.0)) {
        throw invalid_config_error("data_variance must be positive");
    }
    if (!(c.uw_energy_ratio >= 0.0 && c.uw_energy_ratio < 1.0)) {
        throw invalid_config_error("uw_energy_ratio must lie in [0, 1)");
    }
}

/**
 * Placement of data and redundant symbols on the DFT grid.
 *
 * The non-zero part s of a frequency-domain symbol lists the active carriers in
 * ascending absolute index (the columns of B). The stacked vector [d; r] is
 * mapped onto s by P: data symbols take the non-redundant active carriers in
 * ascending order, redundant symbols the configured indices in ascending order.
 * B and P are kept as index tables; the dense matrices are built on request.
 */
class SubcarrierMap {
public:
    SubcarrierMap() = default;

    SubcarrierMap(int dft_size, std::vector<int> active, std::vector<int> data_abs, std::vector<int> redundant_abs)
        : dft_size_(dft_size), active_(std::move(active)), data_abs_(std::move(data_abs)),
          redundant_abs_(std::move(redundant_abs)) {
        position_of_.assign(static_cast<std::size_t>(dft_size_), -1);
        for (std::size_t i = 0; i < active_.size(); ++i) {
            position_of_[static_cast<std::size_t>(active_[i])] = static_cast<int>(i);
        }
        stacked_to_position_.reserve(active_.size());
        for (int k : data_abs_) {
            stacked_to_position_.push_back(position_of_[static_cast<std::size_t>(k)]);
        }
        for (int k : redundant_abs_) {
            stacked_to_position_.push_back(position_of_[static_cast<std::size_t>(k)]);
        }
    }

    int dft_size() const noexcept { return dft_size_; }
    int active_count() const noexcept { return static_cast<int>(active_.size()); }
    int data_count() const noexcept { return static_cast<int>(data_abs_.size()); }
    int redundant_count() const noexcept { return static_cast<int>(redundant_abs_.size()); }

    /// Absolute carrier index of each position of s.
    const std::vector<int>& active_carriers() const noexcept { return active_; }
    const std::vector<int>& data_carriers() const noexcept { return data_abs_; }
    const std::vector<int>& redundant_carriers() const noexcept { return redundant_abs_; }

    /// Position in s of entry j of [d; r].
    int position_of_stacked(int j) const { return stacked_to_position_.at(static_cast<std::size_t>(j)); }
    int position_of_data(int j) const { return position_of_stacked(j); }
    int position_of_redundant(int j) const { return position_of_stacked(data_count() + j); }

    /// Position in s of an absolute carrier, -1 for zero carriers.
    int position_of_carrier(int k) const { return position_of_.at(static_cast<std::size_t>(k)); }

    /// x = B s
    cvec scatter(const cvec& s) const {
        check_active(s);
        cvec x = cvec::Zero(dft_size_);
        for (std::size_t i = 0; i < active_.size(); ++i) {
            x[active_[i]] = s[static_cast<Eigen::Index>(i)];
        }
        return x;
    }

    /// B^T x
    cvec gather(const cvec& x) const {
        if (x.size() != dft_size_) {
            throw invalid_argument_error("gather: expected a length-" + std::to_string(dft_size_) + " vector");
        }
        cvec s(active_count());
        for (std::size_t i = 0; i < active_.size(); ++i) {
            s[static_cast<Eigen::Index>(i)] = x[active_[i]];
        }
        return s;
    }

    /// s = P [d; r]
    cvec permute(const cvec& d, const cvec& r) const {
        if (d.size() != data_count() || r.size() != redundant_count()) {
            throw invalid_argument_error("permute: data/redundant length mismatch");
        }
        cvec s(active_count());
        for (int j = 0; j < data_count(); ++j) {
            s[position_of_data(j)] = d[j];
        }
        for (int j = 0; j < redundant_count(); ++j) {
            s[position_of_redundant(j)] = r[j];
        }
        return s;
    }

    /// [I 0] P^{-1} s
    cvec extract_data(const cvec& s) const {
        check_active(s);
        cvec d(data_count());
        for (int j = 0; j < data_count(); ++j) {
            d[j] = s[position_of_data(j)];
        }
        return d;
    }

    cmat selection_matrix() const {
        cmat b = cmat::Zero(dft_size_, active_count());
        for (std::size_t i = 0; i < active_.size(); ++i) {
            b(active_[i], static_cast<Eigen::Index>(i)) = 1.0;
        }
        return b;
    }

    cmat permutation_matrix() const {
        const int k = active_count();
        cmat p = cmat::Zero(k, k);
        for (int j = 0; j < k; ++j) {
            p(position_of_stacked(j), j) = 1.0;
        }
        return p;
    }

private:
    void check_active(const cvec& s) const {
        if (s.size() != active_count()) {
            throw invalid_argument_error("expected a length-" + std::to_string(active_count()) +
                                         " active-carrier vector, got " + std::to_string(s.size()));
        }
    }

    int dft_size_ = 0;
    std::vector<int> active_;
    std::vector<int> data_abs_;
    std::vector<int> redundant_abs_;
    std::vector<int> position_of_;
    std::vector<int> stacked_to_position_;
};

inline SubcarrierMap build_subcarrier_map(const OfdmSystemConfig& config) {
    validate(config);
    const int n = config.dft_size;
    std::vector<char> is_zero(static_cast<std::size_t>(n), 0);
    std::vector<char> is_red(static_cast<std::size_t>(n), 0);
    for (int k : config.zero_subcarriers) {
        is_zero[static_cast<std::size_t>(k)] = 1;
    }
    for (int k : config.redundant_subcarriers) {
        is_red[static_cast<std::size_t>(k)] = 1;
    }
    std::vector<int> active, data, red;
    for (int k = 0; k < n; ++k) {
        if (is_zero[static_cast<std::size_t>(k)]) {
            continue;
        }
        active.push_back(k);
        (is_red[static_cast<std::size_t>(k)] ? red : data).push_back(k);
    }
    return SubcarrierMap(n, std::move(active), std::move(data), std::move(red));
}

/**
 * Redundant-subcarrier generator r = T d and the derived code matrix
 * U = P [I; T] with s = U d. `data_covariance` is C_ss = sigma_d^2 U U^H,
 * computed once per system and shared by every receiver.
 */
struct RedundancyGenerator {
    int dft_size = 0;
    double data_variance = 1.0;
    cmat T;
    cmat U;
    cmat data_covariance;
    double redundant_energy = 0.0;
    double m22_rcond = 1.0;
    double m22_condition = 1.0;

    int data_count() const noexcept { return static_cast<int>(T.cols()); }
    int uw_length() const noexcept { return static_cast<int>(T.rows()); }

    cvec encode(const cvec& d) const {
        if (d.size() != U.cols()) {
            throw invalid_argument_error("encode: data vector has length " + std::to_string(d.size()) + ", expected " +
                                         std::to_string(U.cols()));
        }
        return U * d;
    }
};

namespace detail {

/// Last `rows` rows of F_N^{-1} restricted to the given absolute carrier columns.
inline cmat tail_rows(int n, int rows, const std::vector<int>& columns) {
    cmat m(rows, static_cast<Eigen::Index>(columns.size()));
    for (int r = 0; r < rows; ++r) {
        const int t = n - rows + r;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const double phase = 2.0 * std::numbers::pi * static_cast<double>((static_cast<long>(t) * columns[c]) % n) / n;
            m(r, static_cast<Eigen::Index>(c)) = cplx(std::cos(phase), std::sin(phase)) / static_cast<double>(n);
        }
    }
    return m;
}

/// trace(T T^H) for redundant carriers `red` zeroing the last `rows` samples,
/// with every other active carrier treated as data. +inf if M22 is singular.
inline double partial_metric(int n, int rows, const std::vector<int>& data, const std::vector<int>& red) {
    if (red.empty()) {
        return 0.0;
    }
    const cmat m21 = tail_rows(n, rows, data);
    const cmat m22 = tail_rows(n, rows, red);
    Eigen::PartialPivLU<cmat> lu(m22);
    const double rc = lu.rcond();
    if (!(rc >= singular_rcond)) {
        return std::numeric_limits<double>::infinity();
    }
    return lu.solve(m21).squaredNorm();
}

} // namespace detail

inline RedundancyGenerator derive_generator(const SubcarrierMap& map, const OfdmSystemConfig& config) {
    const int n = map.dft_size();
    const int nd = map.data_count();
    const int l = map.redundant_count();
    if (nd != config.data_count || l != config.uw_length || n != config.dft_size) {
        throw invalid_argument_error("derive_generator: map does not belong to this config");
    }
    RedundancyGenerator g;
    g.dft_size = n;
    g.data_variance = config.data_variance;
    if (l == 0) {
        g.T = cmat(0, nd);
    } else {
        // Rows of M = F^{-1} B P that must vanish: the last l time samples.
        const cmat m21 = detail::tail_rows(n, l, map.data_carriers());
        const cmat m22 = detail::tail_rows(n, l, map.redundant_carriers());
        try {
            auto sol = solve_linear(m22, m21);
            g.T = -sol.x;
            g.m22_rcond = sol.rcond;
        } catch (const numerically_singular_error& e) {
            throw placement_infeasible_error("redundant carrier placement leaves M22 singular", e.rcond());
        }
        g.m22_condition = condition_number(m22);
    }
    const int k = nd + l;
    g.U = cmat::Zero(k, nd);
    for (int j = 0; j < nd; ++j) {
        g.U(map.position_of_data(j), j) = 1.0;
    }
    for (int j = 0; j < l; ++j) {
        g.U.row(map.position_of_redundant(j)) = g.T.row(j);
    }
    g.data_covariance = config.data_variance * (g.U * g.U.adjoint());
    g.redundant_energy = g.T.squaredNorm();
    return g;
}

/// trace(T T^H): mean redundant-carrier energy per unit data variance.
inline double redundant_energy_metric(const RedundancyGenerator& gen) { return gen.T.squaredNorm(); }

enum class PlacementStrategy { exhaustive, greedy };

struct PlacementResult {
    std::vector<int> redundant_subcarriers;
    double metric = 0.0;
    std::uint64_t evaluated = 0;
};

class search_space_too_large_error : public invalid_argument_error {
public:
    search_space_too_large_error(const std::string& what, double count)
        : invalid_argument_error(what), count_(count) {}
    double count() const noexcept { return count_; }

private:
    double count_;
};

inline constexpr double max_exhaustive_placements = 1e6;

inline double binomial(int n, int k) {
    if (k < 0 || k > n) {
        return 0.0;
    }
    double c = 1.0;
    for (int i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
    }
    return c;
}

/**
 * Searches the redundant-carrier set minimizing trace(T T^H). The
 * redundant_subcarriers field of `config` is ignored.
 *
 * greedy: step k adds the carrier that minimizes the metric of the system
 * whose k redundant carriers zero the last k time samples; ties go to the
 * lowest index. exhaustive: all C(active, l) sets, refused above 1e6.
 */
inline PlacementResult optimize_placement(OfdmSystemConfig config, PlacementStrategy strategy) {
    config.redundant_subcarriers.clear();
    validate(config, false);
    const int n = config.dft_size;
    const int l = config.uw_length;
    std::vector<int> active;
    {
        std::vector<char> z(static_cast<std::size_t>(n), 0);
        for (int k : config.zero_subcarriers) {
            z[static_cast<std::size_t>(k)] = 1;
        }
        for (int k = 0; k < n; ++k) {
            if (!z[static_cast<std::size_t>(k)]) {
                active.push_back(k);
            }
        }
    }
    const int na = static_cast<int>(active.size());
    PlacementResult best;
    best.metric = std::numeric_limits<double>::infinity();
    if (l == 0) {
        best.metric = 0.0;
        return best;
    }

    auto split = [&](const std::vector<char>& chosen, std::vector<int>& data, std::vector<int>& red) {
        data.clear();
        red.clear();
        for (int i = 0; i < na; ++i) {
            (chosen[static_cast<std::size_t>(i)] ? red : data).push_back(active[static_cast<std::size_t>(i)]);
        }
    };

    std::vector<int> data, red;
    if (strategy == PlacementStrategy::exhaustive) {
        const double count = binomial(na, l);
        if (count > max_exhaustive_placements) {
            throw search_space_too_large_error("exhaustive placement search over " + std::to_string(count) +
                                                   " sets exceeds the limit of 1e6; use the greedy strategy",
                                               count);
        }
        std::vector<char> chosen(static_cast<std::size_t>(na), 0);
        std::fill(chosen.begin(), chosen.begin() + l, 1);
        // prev_permutation over a descending-sorted mask enumerates sets in lexicographic order
        do {
            split(chosen, data, red);
            const double m = detail::partial_metric(n, l, data, red);
            ++best.evaluated;
            if (m < best.metric) {
                best.metric = m;
                best.redundant_subcarriers = red;
            }
        } while (std::prev_permutation(chosen.begin(), chosen.end()));
    } else {
        std::vector<char> chosen(static_cast<std::size_t>(na), 0);
        for (int step = 1; step <= l; ++step) {
            double step_best = std::numeric_limits<double>::infinity();
            int pick = -1;
            for (int i = 0; i < na; ++i) {
                if (chosen[static_cast<std::size_t>(i)]) {
                    continue;
                }
                chosen[static_cast<std::size_t>(i)] = 1;
                split(chosen, data, red);
                const double m = detail::partial_metric(n, step, data, red);
                ++best.evaluated;
                chosen[static_cast<std::size_t>(i)] = 0;
                if (m < step_best * (1.0 - 1e-12)) {
                    step_best = m;
                    pick = i;
                }
            }
            if (pick < 0) {
                throw placement_infeasible_error("greedy placement found no admissible carrier at step " +
                                                     std::to_string(step),
                                                 0.0);
            }
            chosen[static_cast<std::size_t>(pick)] = 1;
            best.metric = step_best;
        }
        split(chosen, data, red);
        best.redundant_subcarriers = red;
    }
    if (!std::isfinite(best.metric)) {
        throw placement_infeasible_error("no admissible redundant carrier placement", 0.0);
    }
    return best;
}

} // namespace uwofdm
