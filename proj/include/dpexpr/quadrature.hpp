#ifndef DPEXPR_QUADRATURE_HPP
#define DPEXPR_QUADRATURE_HPP

#include "errors.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

/**
 * @file quadrature.hpp
 * @brief Adaptive Gauss-Legendre integration over a bounded interval.
 */

namespace dpexpr {

/**
 * Controls for the numerical integration used by `prob_leq()`.
 */
struct QuadratureSpec {
    /**
     * Absolute tolerance on the integral.
     */
    double tolerance = 1e-9;

    /**
     * Maximum number of integrand evaluations before giving up with `QuadratureFailure`.
     */
    std::size_t max_evaluations = 100000;

    /**
     * Skip closed-form shortcuts and always integrate numerically.
     */
    bool force_quadrature = false;
};

namespace detail {

// Panels narrower than this are accepted as-is; the integrands here are bounded in [0,1],
// so such a panel cannot contribute more than its width to the error.
constexpr double min_panel_width = 1e-15;

template<class Function_>
double gauss_legendre_panel(const Function_& fun, double a, double b) {
    using rule = boost::math::quadrature::gauss<double, 10>;
    const auto& nodes = rule::abscissa();
    const auto& weights = rule::weights();
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double sum = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        double dx = half * nodes[i];
        sum += weights[i] * (fun(mid - dx) + fun(mid + dx));
    }
    return sum * half;
}

}

/**
 * Integrates `fun` over `[lower, upper]` by recursive bisection, applying a 10-point Gauss-Legendre rule on each panel.
 * A panel is accepted when the refined estimate from its two halves differs from the coarse estimate by at most
 * `spec.tolerance * width / (upper - lower)`, so the accepted panels' error budgets sum to `spec.tolerance`.
 *
 * The traversal order is fixed, so the result is a deterministic function of the inputs.
 */
template<class Function_>
double integrate_adaptive(const Function_& fun, double lower, double upper, const QuadratureSpec& spec) {
    constexpr std::size_t evals_per_panel = 10;
    const double total_width = upper - lower;
    if (!(total_width > 0)) {
        return 0;
    }

    struct Panel {
        double a, b, estimate;
    };

    std::size_t evaluations = evals_per_panel;
    std::vector<Panel> stack{ Panel{ lower, upper, detail::gauss_legendre_panel(fun, lower, upper) } };
    double result = 0;

    while (!stack.empty()) {
        Panel current = stack.back();
        stack.pop_back();

        double mid = 0.5 * (current.a + current.b);
        double left = detail::gauss_legendre_panel(fun, current.a, mid);
        double right = detail::gauss_legendre_panel(fun, mid, current.b);
        evaluations += 2 * evals_per_panel;

        double width = current.b - current.a;
        double refined = left + right;
        if (std::abs(refined - current.estimate) <= spec.tolerance * width / total_width || width < detail::min_panel_width) {
            result += refined;
            continue;
        }

        if (evaluations > spec.max_evaluations) {
            throw Error(ErrorCode::QuadratureFailure, "tolerance " + std::to_string(spec.tolerance) + " not met within " + std::to_string(spec.max_evaluations) + " evaluations");
        }

        // Right half pushed first so that the left half is refined first.
        stack.push_back(Panel{ mid, current.b, right });
        stack.push_back(Panel{ current.a, mid, left });
    }

    return result;
}

}

#endif
