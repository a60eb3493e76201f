#ifndef DPEXPR_DIFFEXPR_HPP
#define DPEXPR_DIFFEXPR_HPP

#include "dataset.hpp"
#include "dp_core.hpp"
#include "errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cstdint>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

/**
 * @file diffexpr.hpp
 * @brief Ranking of probes by posterior predictive probability and selection of the signature panel.
 */

namespace dpexpr {

/**
 * Per-probe predictive probabilities and the resulting ranking.
 */
struct ProbeRanking {
    /**
     * `q[j]` is the predictive probability that a new case's expression at probe `j` is at most a new control's.
     */
    std::vector<double> q;

    /**
     * Probe indices sorted by decreasing `q`, ties broken by increasing probe index.
     * Leading entries are down-regulated in cases, trailing entries are up-regulated.
     */
    std::vector<std::size_t> order;

    /**
     * In the weak-prior limit, the exact numerators of `q` over a common denominator `pair_total`.
     * Ordering then compares these integers rather than the rounded `q`.
     */
    std::optional<std::vector<std::uint64_t>> leq_counts;
    std::uint64_t pair_total = 0;
};

/**
 * The `k` most down-regulated and `k` most up-regulated probes.
 */
struct SignaturePanel {
    std::size_t k = 0;

    /**
     * `down[i]` is the probe at rank position `i`.
     */
    std::vector<std::size_t> down;

    /**
     * `up[i]` is the probe at rank position `p - 1 - i`.
     */
    std::vector<std::size_t> up;
};

struct RankOptions {
    QuadratureSpec quadrature;
    int num_threads = 1;
};

namespace detail {

inline Error with_probe_context(const Error& e, const ExpressionMatrix& mat, std::size_t probe) {
    return Error(e.code(), std::string("probe ") + std::to_string(probe) + " ('" + mat.probe_ids[probe] + "'): " + e.what());
}

inline std::vector<std::size_t> descending_order(std::size_t p, const auto& greater) {
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (greater(a, b)) {
            return true;
        }
        if (greater(b, a)) {
            return false;
        }
        return a < b;
    });
    return order;
}

template<class ConfigFor_>
ProbeRanking rank_probes_impl(const ExpressionMatrix& mat, bool weak_prior, const ConfigFor_& config_for, bool shared_config, const RankOptions& options) {
    const auto p = mat.num_probes();
    const auto case_cols = group_columns(mat, Group::Case);
    const auto control_cols = group_columns(mat, Group::Control);

    ProbeRanking out;
    out.q.resize(p);

    if (weak_prior) {
        std::vector<std::uint64_t> counts(p);
        parallelize(p, options.num_threads, [&](std::size_t start, std::size_t end) {
            std::vector<double> x(case_cols.size()), y(control_cols.size());
            for (std::size_t j = start; j < end; ++j) {
                auto row = mat.row(j);
                for (std::size_t i = 0; i < x.size(); ++i) {
                    x[i] = row[case_cols[i]];
                }
                for (std::size_t i = 0; i < y.size(); ++i) {
                    y[i] = row[control_cols[i]];
                }
                auto pc = count_leq(x, y);
                counts[j] = pc.leq;
                out.q[j] = pc.proportion();
            }
        });
        out.pair_total = static_cast<std::uint64_t>(case_cols.size()) * control_cols.size();
        out.order = descending_order(p, [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
        out.leq_counts = std::move(counts);
        return out;
    }

    // A shared prior has one base overlap for every probe; compute it at most once.
    std::once_flag overlap_once;
    double shared_overlap = 0;

    parallelize(p, options.num_threads, [&](std::size_t start, std::size_t end) {
        std::vector<double> x(case_cols.size()), y(control_cols.size());
        for (std::size_t j = start; j < end; ++j) {
            auto row = mat.row(j);
            for (std::size_t i = 0; i < x.size(); ++i) {
                x[i] = row[case_cols[i]];
            }
            for (std::size_t i = 0; i < y.size(); ++i) {
                y[i] = row[control_cols[i]];
            }
            try {
                const DPConfig& config = config_for(j);
                auto fhat = posterior_predictive_cdf(x, config.c, config.f0);
                auto ghat = posterior_predictive_cdf(y, config.d, config.g0);
                out.q[j] = prob_leq(fhat, ghat, [&]() {
                    if (shared_config) {
                        std::call_once(overlap_once, [&]() { shared_overlap = base_overlap(config.f0, config.g0, options.quadrature); });
                        return shared_overlap;
                    }
                    return base_overlap(config.f0, config.g0, options.quadrature);
                });
            } catch (const Error& e) {
                throw with_probe_context(e, mat, j);
            }
        }
    });

    out.order = descending_order(p, [&](std::size_t a, std::size_t b) { return out.q[a] > out.q[b]; });
    return out;
}

}

/**
 * Computes `q` for every probe of a validated matrix under a prior shared by all probes, and ranks the probes.
 * The result is identical for any `options.num_threads`.
 */
inline ProbeRanking rank_probes(const ExpressionMatrix& mat, const DPConfig& config, const RankOptions& options = {}) {
    return detail::rank_probes_impl(mat, config.weak_prior, [&](std::size_t) -> const DPConfig& { return config; }, true, options);
}

/**
 * Per-probe variant; `configs` must have one entry per probe and must agree on `weak_prior`.
 */
inline ProbeRanking rank_probes(const ExpressionMatrix& mat, std::span<const DPConfig> configs, const RankOptions& options = {}) {
    if (configs.size() != mat.num_probes()) {
        throw Error(ErrorCode::InvalidArgument, "need one prior configuration per probe");
    }
    bool weak = configs.empty() || configs.front().weak_prior;
    for (const auto& c : configs) {
        if (c.weak_prior != weak) {
            throw Error(ErrorCode::InvalidArgument, "per-probe configurations must all use, or all not use, the weak-prior limit");
        }
    }
    return detail::rank_probes_impl(mat, weak, [&](std::size_t j) -> const DPConfig& { return configs[j]; }, false, options);
}

/**
 * First `k` and last `k` probes of the ranking. Throws `PanelTooLarge` if `2k > p`.
 */
inline SignaturePanel select_panel(const ProbeRanking& ranking, std::size_t k) {
    const auto p = ranking.order.size();
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "k must be positive");
    }
    if (2 * k > p) {
        throw Error(ErrorCode::PanelTooLarge, "2k = " + std::to_string(2 * k) + " exceeds the number of probes (" + std::to_string(p) + ")");
    }
    SignaturePanel out;
    out.k = k;
    for (std::size_t i = 0; i < k; ++i) {
        out.down.push_back(ranking.order[i]);
        out.up.push_back(ranking.order[p - 1 - i]);
    }
    return out;
}

}

#endif
