#ifndef DPEXPR_CROSSVAL_HPP
#define DPEXPR_CROSSVAL_HPP

#include "classifier.hpp"
#include "dataset.hpp"
#include "diffexpr.hpp"
#include "dp_core.hpp"
#include "errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

/**
 * @file crossval.hpp
 * @brief Leave-one-out cross-validation of the classifier and choice of the panel size.
 */

namespace dpexpr {

enum class CvMode {
    /**
     * Rank and select the panel once on all individuals; only the critical value is recomputed per fold.
     */
    OracleFaithful,

    /**
     * Recompute `q`, the ranking and the panel inside every fold, without the held-out individual.
     */
    RefitPanel
};

struct CrossValOptions {
    CvMode mode = CvMode::OracleFaithful;
    RankOptions rank;

    /**
     * Threads used across folds.
     */
    int num_threads = 1;
};

struct ConfusionTable {
    std::size_t case_unhealthy = 0;
    std::size_t case_healthy = 0;
    std::size_t control_unhealthy = 0;
    std::size_t control_healthy = 0;

    std::size_t m() const { return case_unhealthy + case_healthy; }
    std::size_t n() const { return control_unhealthy + control_healthy; }

    double sensitivity() const { return static_cast<double>(case_unhealthy) / static_cast<double>(m()); }
    double specificity() const { return static_cast<double>(control_healthy) / static_cast<double>(n()); }

    /**
     * Fraction of cases classified healthy.
     */
    double false_negative_rate() const { return static_cast<double>(case_healthy) / static_cast<double>(m()); }

    /**
     * Fraction of controls classified unhealthy.
     */
    double false_positive_rate() const { return static_cast<double>(control_unhealthy) / static_cast<double>(n()); }

    bool operator==(const ConfusionTable&) const = default;
};

namespace detail {

inline void check_cv_preconditions(const ExpressionMatrix& mat, CvMode mode) {
    if (mat.num_controls() < 2) {
        throw Error(ErrorCode::EmptyGroup, "leave-one-out needs at least two controls");
    }
    if (mat.num_cases() < 1) {
        throw Error(ErrorCode::EmptyGroup, "no case samples");
    }
    if (mode == CvMode::RefitPanel && mat.num_cases() < 2) {
        throw Error(ErrorCode::EmptyGroup, "refitting the panel without the held-out case needs at least two cases");
    }
}

inline void tally(ConfusionTable& table, Group group, Label label) {
    if (group == Group::Case) {
        (label == Label::Unhealthy ? table.case_unhealthy : table.case_healthy) += 1;
    } else {
        (label == Label::Unhealthy ? table.control_unhealthy : table.control_healthy) += 1;
    }
}

// Threshold for a held-out individual: the (remaining controls)-th smallest T among the remaining individuals.
inline double fold_threshold(std::vector<double> remaining_t, std::size_t remaining_controls) {
    auto nth = remaining_t.begin() + (remaining_controls - 1);
    std::nth_element(remaining_t.begin(), nth, remaining_t.end());
    return *nth;
}

}

/**
 * Leave-one-out cross-validation with a fixed panel, which is the oracle-faithful procedure.
 * Each held-out individual is compared against the `n`-th smallest T of the remaining individuals if it is a case,
 * or the `(n - 1)`-th smallest if it is a control.
 */
inline ConfusionTable loocv(const ExpressionMatrix& mat, const SignaturePanel& panel, int num_threads = 1) {
    detail::check_cv_preconditions(mat, CvMode::OracleFaithful);
    const auto total = mat.num_samples();
    const auto n = mat.num_controls();
    const auto all_t = t_statistics(mat, panel);

    std::vector<Label> labels(total);
    parallelize(total, num_threads, [&](std::size_t start, std::size_t end) {
        std::vector<double> remaining;
        remaining.reserve(total - 1);
        for (std::size_t z = start; z < end; ++z) {
            remaining.clear();
            for (std::size_t s = 0; s < total; ++s) {
                if (s != z) {
                    remaining.push_back(all_t[s]);
                }
            }
            std::size_t remaining_controls = (mat.groups[z] == Group::Control ? n - 1 : n);
            double threshold = detail::fold_threshold(remaining, remaining_controls);
            labels[z] = (all_t[z] <= threshold ? Label::Healthy : Label::Unhealthy);
        }
    });

    ConfusionTable out;
    for (std::size_t z = 0; z < total; ++z) {
        detail::tally(out, mat.groups[z], labels[z]);
    }
    return out;
}

/**
 * Leave-one-out cross-validation of the whole pipeline with panel size `k`.
 * In `OracleFaithful` mode the ranking is computed once from all individuals;
 * in `RefitPanel` mode each fold ranks the probes without its held-out individual.
 */
inline ConfusionTable loocv(const ExpressionMatrix& mat, std::size_t k, const DPConfig& config, const CrossValOptions& options = {}) {
    detail::check_cv_preconditions(mat, options.mode);
    if (options.mode == CvMode::OracleFaithful) {
        auto ranking = rank_probes(mat, config, options.rank);
        return loocv(mat, select_panel(ranking, k), options.num_threads);
    }

    if (2 * k > mat.num_probes()) {
        throw Error(ErrorCode::PanelTooLarge, "2k = " + std::to_string(2 * k) + " exceeds the number of probes (" + std::to_string(mat.num_probes()) + ")");
    }

    const auto total = mat.num_samples();
    std::vector<Label> labels(total);

    // Folds run sequentially; the per-probe ranking inside each fold uses the worker threads.
    std::vector<std::size_t> keep;
    keep.reserve(total - 1);
    for (std::size_t z = 0; z < total; ++z) {
        keep.clear();
        for (std::size_t s = 0; s < total; ++s) {
            if (s != z) {
                keep.push_back(s);
            }
        }
        auto training = select_columns(mat, keep);
        RankOptions rank_opts = options.rank;
        rank_opts.num_threads = std::max(options.num_threads, options.rank.num_threads);
        auto panel = select_panel(rank_probes(training, config, rank_opts), k);
        double threshold = detail::fold_threshold(t_statistics(training, panel), training.num_controls());
        labels[z] = (t_statistic(panel, mat.column(z)) <= threshold ? Label::Healthy : Label::Unhealthy);
    }

    ConfusionTable out;
    for (std::size_t z = 0; z < total; ++z) {
        detail::tally(out, mat.groups[z], labels[z]);
    }
    return out;
}

struct KSelectionEntry {
    std::size_t k;
    ConfusionTable table;

    /**
     * `|FNR - FPR|`.
     */
    double balance;

    /**
     * `FNR + FPR`.
     */
    double total_error;
};

struct KSelectionReport {
    std::vector<KSelectionEntry> per_k;
    std::size_t chosen_k = 0;
};

/**
 * Chooses the panel size among `1..k_max` by leave-one-out cross-validation:
 * the smallest `|FNR - FPR|`, then the smallest `FNR + FPR`, then the smallest `k`.
 * Comparisons are made on exact integer numerators over the common denominator `m * n`.
 */
inline KSelectionReport select_k(const ExpressionMatrix& mat, std::size_t k_max, const DPConfig& config, const CrossValOptions& options = {}) {
    if (k_max == 0) {
        throw Error(ErrorCode::InvalidArgument, "k_max must be positive");
    }
    if (2 * k_max > mat.num_probes()) {
        throw Error(ErrorCode::PanelTooLarge, "2 * k_max = " + std::to_string(2 * k_max) + " exceeds the number of probes (" + std::to_string(mat.num_probes()) + ")");
    }
    detail::check_cv_preconditions(mat, options.mode);

    std::optional<ProbeRanking> ranking;
    if (options.mode == CvMode::OracleFaithful) {
        ranking = rank_probes(mat, config, options.rank);
    }

    const std::int64_t m = mat.num_cases(), n = mat.num_controls();
    KSelectionReport out;
    std::int64_t best_balance = 0, best_total = 0;

    for (std::size_t k = 1; k <= k_max; ++k) {
        ConfusionTable table = ranking ? loocv(mat, select_panel(*ranking, k), options.num_threads) : loocv(mat, k, config, options);
        // FNR = case_healthy / m and FPR = control_unhealthy / n, both scaled by m * n.
        std::int64_t fnr_scaled = static_cast<std::int64_t>(table.case_healthy) * n;
        std::int64_t fpr_scaled = static_cast<std::int64_t>(table.control_unhealthy) * m;
        std::int64_t balance = std::abs(fnr_scaled - fpr_scaled), total = fnr_scaled + fpr_scaled;

        out.per_k.push_back({ k, table, std::abs(table.false_negative_rate() - table.false_positive_rate()), table.false_negative_rate() + table.false_positive_rate() });
        if (out.chosen_k == 0 || balance < best_balance || (balance == best_balance && total < best_total)) {
            out.chosen_k = k;
            best_balance = balance;
            best_total = total;
        }
    }
    return out;
}

}

#endif
