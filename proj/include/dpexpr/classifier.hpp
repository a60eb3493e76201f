#ifndef DPEXPR_CLASSIFIER_HPP
#define DPEXPR_CLASSIFIER_HPP

#include "dataset.hpp"
#include "diffexpr.hpp"
#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

/**
 * @file classifier.hpp
 * @brief Ratio statistic over the signature panel and the critical-value classifier built on it.
 */

namespace dpexpr {

enum class Label { Unhealthy, Healthy };

inline const char* to_string(Label l) {
    return l == Label::Healthy ? "healthy" : "unhealthy";
}

struct ClassifierModel {
    SignaturePanel panel;
    double t_star = 0;

    /**
     * T statistic of every training individual, ascending.
     */
    std::vector<double> training_t;

    std::size_t m = 0;
    std::size_t n = 0;
};

/**
 * `T(z) = prod_i z[up[i]] / z[down[i]]`, evaluated as the exponential of a sum of log-ratios.
 * Only the panel's entries of `individual` are read; they must be strictly positive.
 */
inline double t_statistic(const SignaturePanel& panel, std::span<const double> individual) {
    double log_t = 0;
    for (std::size_t i = 0; i < panel.k; ++i) {
        double up = individual[panel.up[i]], down = individual[panel.down[i]];
        if (!(up > 0) || !(down > 0) || !std::isfinite(up) || !std::isfinite(down)) {
            throw Error(ErrorCode::NonPositiveExpression, "panel pair " + std::to_string(i) + " has a non-positive or non-finite expression value");
        }
        log_t += std::log(up) - std::log(down);
    }
    return std::exp(log_t);
}

/**
 * T statistic of every column of `mat`, in column order.
 */
inline std::vector<double> t_statistics(const ExpressionMatrix& mat, const SignaturePanel& panel) {
    std::vector<double> out(mat.num_samples());
    std::vector<double> column(mat.num_probes());
    for (std::size_t s = 0; s < out.size(); ++s) {
        for (std::size_t i = 0; i < panel.k; ++i) {
            column[panel.up[i]] = mat.value(panel.up[i], s);
            column[panel.down[i]] = mat.value(panel.down[i], s);
        }
        try {
            out[s] = t_statistic(panel, column);
        } catch (const Error& e) {
            throw Error(e.code(), "sample '" + mat.sample_ids[s] + "': " + e.what());
        }
    }
    return out;
}

/**
 * Fits the critical value `t_star`: the `n`-th smallest T among all `m + n` training individuals,
 * so that a fraction `n / (m + n)` of the pooled empirical distribution of T lies at or below it.
 */
inline ClassifierModel fit(const ExpressionMatrix& mat, const SignaturePanel& panel) {
    for (std::size_t i = 0; i < panel.k; ++i) {
        if (panel.up[i] >= mat.num_probes() || panel.down[i] >= mat.num_probes()) {
            throw Error(ErrorCode::InvalidArgument, "panel refers to a probe outside the matrix");
        }
    }

    // Cases before controls, as in the pooled sample; order is irrelevant after sorting.
    std::vector<double> pooled;
    auto all_t = t_statistics(mat, panel);
    for (auto group : { Group::Case, Group::Control }) {
        for (auto s : group_columns(mat, group)) {
            pooled.push_back(all_t[s]);
        }
    }
    std::sort(pooled.begin(), pooled.end());

    ClassifierModel out;
    out.panel = panel;
    out.m = mat.num_cases();
    out.n = mat.num_controls();
    if (out.n == 0) {
        throw Error(ErrorCode::EmptyGroup, "no control samples");
    }
    out.t_star = pooled[out.n - 1];
    out.training_t = std::move(pooled);
    return out;
}

/**
 * Healthy when `T(individual) <= t_star`, otherwise Unhealthy.
 */
inline Label classify(const ClassifierModel& model, std::span<const double> individual) {
    return t_statistic(model.panel, individual) <= model.t_star ? Label::Healthy : Label::Unhealthy;
}

}

#endif
