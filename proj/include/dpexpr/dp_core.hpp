#ifndef DPEXPR_DP_CORE_HPP
#define DPEXPR_DP_CORE_HPP

#include "errors.hpp"
#include "quadrature.hpp"

#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

/**
 * @file dp_core.hpp
 * @brief Posterior-predictive distributions under independent Dirichlet-process priors.
 *
 * If `F ~ DP(c, F0)` and `X_1, ..., X_m` are i.i.d. given `F`, then the predictive distribution of `X_{m+1}` is
 * the mixture `c/(c+m) F0 + m/(c+m) Fm` with `Fm` the empirical distribution function.
 * For two independent groups, `Pr(X_{m+1} <= Y_{n+1} | data)` is the Stieltjes integral of one predictive CDF against the other.
 */

namespace dpexpr {

/**
 * Base distribution of a Dirichlet process.
 * A default-constructed instance is "absent" and may only be paired with a zero base weight.
 */
struct BaseDistribution {
    std::function<double(double)> cdf;

    /**
     * `F0(t-)`, the left limit of the CDF at `t`.
     */
    std::function<double(double)> left_limit_cdf;

    std::function<double(double)> quantile;

    bool is_continuous = false;

    /**
     * Canonical description, e.g. `normal:0,1`.
     * Two bases with the same non-empty key are treated as the same distribution.
     */
    std::string key;

    bool present() const { return static_cast<bool>(cdf); }
};

inline BaseDistribution uniform_base(double lower, double upper) {
    if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper)) {
        throw Error(ErrorCode::InvalidArgument, "uniform base requires finite a < b");
    }
    BaseDistribution out;
    out.cdf = [lower, upper](double t) { return t <= lower ? 0.0 : (t >= upper ? 1.0 : (t - lower) / (upper - lower)); };
    out.left_limit_cdf = out.cdf;
    out.quantile = [lower, upper](double u) { return lower + std::clamp(u, 0.0, 1.0) * (upper - lower); };
    out.is_continuous = true;
    out.key = "uniform:" + std::to_string(lower) + "," + std::to_string(upper);
    return out;
}

inline BaseDistribution normal_base(double mean, double sd) {
    if (!(sd > 0) || !std::isfinite(mean) || !std::isfinite(sd)) {
        throw Error(ErrorCode::InvalidArgument, "normal base requires finite mean and sd > 0");
    }
    boost::math::normal_distribution<double> dist(mean, sd);
    BaseDistribution out;
    out.cdf = [dist](double t) {
        if (std::isinf(t)) {
            return t < 0 ? 0.0 : 1.0;
        }
        return boost::math::cdf(dist, t);
    };
    out.left_limit_cdf = out.cdf;
    out.quantile = [dist](double u) {
        if (u <= 0) {
            return -std::numeric_limits<double>::infinity();
        }
        if (u >= 1) {
            return std::numeric_limits<double>::infinity();
        }
        return boost::math::quantile(dist, u);
    };
    out.is_continuous = true;
    out.key = "normal:" + std::to_string(mean) + "," + std::to_string(sd);
    return out;
}

inline BaseDistribution lognormal_base(double meanlog, double sdlog) {
    if (!(sdlog > 0) || !std::isfinite(meanlog) || !std::isfinite(sdlog)) {
        throw Error(ErrorCode::InvalidArgument, "lognormal base requires finite meanlog and sdlog > 0");
    }
    boost::math::lognormal_distribution<double> dist(meanlog, sdlog);
    BaseDistribution out;
    out.cdf = [dist](double t) {
        if (t <= 0) {
            return 0.0;
        }
        if (std::isinf(t)) {
            return 1.0;
        }
        return boost::math::cdf(dist, t);
    };
    out.left_limit_cdf = out.cdf;
    out.quantile = [dist](double u) {
        if (u <= 0) {
            return 0.0;
        }
        if (u >= 1) {
            return std::numeric_limits<double>::infinity();
        }
        return boost::math::quantile(dist, u);
    };
    out.is_continuous = true;
    out.key = "lognormal:" + std::to_string(meanlog) + "," + std::to_string(sdlog);
    return out;
}

/**
 * Parses `normal:mu,sigma`, `uniform:a,b` or `lognormal:mu,sigma`.
 */
inline BaseDistribution parse_base(const std::string& spec) {
    auto colon = spec.find(':');
    auto comma = spec.find(',', colon == std::string::npos ? 0 : colon);
    if (colon == std::string::npos || comma == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "base must look like 'family:p1,p2', got '" + spec + "'");
    }
    std::string family = spec.substr(0, colon);
    double first, second;
    try {
        std::size_t used1 = 0, used2 = 0;
        std::string s1 = spec.substr(colon + 1, comma - colon - 1), s2 = spec.substr(comma + 1);
        first = std::stod(s1, &used1);
        second = std::stod(s2, &used2);
        if (used1 != s1.size() || used2 != s2.size()) {
            throw std::invalid_argument("trailing characters");
        }
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "cannot parse parameters of base '" + spec + "'");
    }
    if (family == "normal") {
        return normal_base(first, second);
    } else if (family == "uniform") {
        return uniform_base(first, second);
    } else if (family == "lognormal") {
        return lognormal_base(first, second);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown base family '" + family + "'");
}

/**
 * Prior settings for the case (`c`, `f0`) and control (`d`, `g0`) Dirichlet processes of one probe.
 */
struct DPConfig {
    double c = 0;
    double d = 0;
    BaseDistribution f0;
    BaseDistribution g0;

    /**
     * Take the `c, d -> 0` limit exactly; `c`, `d`, `f0` and `g0` are then ignored.
     */
    bool weak_prior = true;
};

/**
 * Posterior expectation of a Dirichlet-process distribution function:
 * `base_weight * F0(t) + sum of atom masses at locations <= t`.
 */
struct PredictiveCDF {
    struct Atom {
        double location;
        double mass;
        std::uint64_t count;
    };

    double base_weight = 0;
    BaseDistribution base;

    /**
     * Sorted by location; tied sample values share one atom.
     */
    std::vector<Atom> atoms;

    /**
     * `cumulative[i]` is the total mass of `atoms[0..i)`; one longer than `atoms`.
     */
    std::vector<double> cumulative{ 0.0 };

    std::uint64_t sample_size = 0;
};

/**
 * Predictive distribution of the next observation given `samples`, under a `DP(concentration, base)` prior.
 * Throws `EmptyWeakPrior` if `concentration` is zero and there are no samples.
 */
inline PredictiveCDF posterior_predictive_cdf(std::span<const double> samples, double concentration, const BaseDistribution& base) {
    if (!(concentration >= 0) || !std::isfinite(concentration)) {
        throw Error(ErrorCode::InvalidArgument, "concentration must be finite and nonnegative");
    }
    if (concentration == 0 && samples.empty()) {
        throw Error(ErrorCode::EmptyWeakPrior, "predictive distribution is undefined with zero concentration and no samples");
    }
    if (concentration > 0 && !base.present()) {
        throw Error(ErrorCode::InvalidArgument, "positive concentration requires a base distribution");
    }

    std::vector<double> sorted(samples.begin(), samples.end());
    for (auto v : sorted) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFiniteValue, "non-finite sample value");
        }
    }
    std::sort(sorted.begin(), sorted.end());

    PredictiveCDF out;
    const double total = concentration + static_cast<double>(sorted.size());
    out.base_weight = concentration / total;
    if (concentration > 0) {
        out.base = base;
    }
    out.sample_size = sorted.size();

    for (std::size_t i = 0; i < sorted.size(); ) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j] == sorted[i]) {
            ++j;
        }
        std::uint64_t count = j - i;
        out.atoms.push_back({ sorted[i], static_cast<double>(count) / total, count });
        out.cumulative.push_back(out.cumulative.back() + out.atoms.back().mass);
        i = j;
    }
    return out;
}

/**
 * Right-continuous CDF value at `t`.
 */
inline double eval_cdf(const PredictiveCDF& f, double t) {
    auto it = std::upper_bound(f.atoms.begin(), f.atoms.end(), t, [](double v, const PredictiveCDF::Atom& a) { return v < a.location; });
    double out = f.cumulative[it - f.atoms.begin()];
    if (f.base_weight > 0) {
        out += f.base_weight * f.base.cdf(t);
    }
    return out;
}

/**
 * Left limit of the CDF at `t`, i.e., the predictive probability of a value strictly below `t`.
 */
inline double eval_cdf_left(const PredictiveCDF& f, double t) {
    auto it = std::lower_bound(f.atoms.begin(), f.atoms.end(), t, [](const PredictiveCDF::Atom& a, double v) { return a.location < v; });
    double out = f.cumulative[it - f.atoms.begin()];
    if (f.base_weight > 0) {
        out += f.base_weight * f.base.left_limit_cdf(t);
    }
    return out;
}

/**
 * Number of pairs `(i, j)` with `x[i] <= y[j]`, out of `total = |x| * |y|`.
 */
struct PairCount {
    std::uint64_t leq = 0;
    std::uint64_t total = 0;

    double proportion() const { return static_cast<double>(leq) / static_cast<double>(total); }
};

inline PairCount count_leq(std::span<const double> x, std::span<const double> y) {
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    PairCount out;
    out.total = static_cast<std::uint64_t>(x.size()) * static_cast<std::uint64_t>(y.size());
    for (auto v : y) {
        out.leq += std::upper_bound(sorted.begin(), sorted.end(), v) - sorted.begin();
    }
    return out;
}

/**
 * `Pr(X <= Y)` in the weak-prior limit: the proportion of pairs with `x[i] <= y[j]`, ties counting as `<=`.
 * Both inputs must be nonempty.
 */
inline double prob_leq_weak_limit(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) {
        throw Error(ErrorCode::EmptyWeakPrior, "weak-prior limit needs at least one observation in each group");
    }
    return count_leq(x, y).proportion();
}

/**
 * `Pr(X0 <= Y0)` for independent `X0 ~ f0`, `Y0 ~ g0`, computed as the integral of `f0(g0^{-1}(u))` over `u` in (0, 1).
 * Identical continuous bases give exactly 1/2 unless `spec.force_quadrature` is set.
 */
inline double base_overlap(const BaseDistribution& f0, const BaseDistribution& g0, const QuadratureSpec& spec) {
    if (!spec.force_quadrature && f0.is_continuous && g0.is_continuous && !f0.key.empty() && f0.key == g0.key) {
        return 0.5;
    }
    if (!g0.quantile) {
        throw Error(ErrorCode::MissingQuantile, "control base distribution has no quantile function");
    }
    return integrate_adaptive([&](double u) { return f0.cdf(g0.quantile(u)); }, 0.0, 1.0, spec);
}

namespace detail {

inline double clamp_probability(double value) {
    constexpr double slack = 1e-9;
    if (!(value >= -slack && value <= 1 + slack)) {
        throw Error(ErrorCode::OutOfRange, "probability " + std::to_string(value) + " outside [0, 1]");
    }
    return std::clamp(value, 0.0, 1.0);
}

}

/**
 * `Pr(X <= Y)` for independent `X ~ fhat`, `Y ~ ghat`, using a precomputed `overlap = Pr(X0 <= Y0)` of the two bases.
 * `overlap` is only consulted when both base weights are positive.
 */
inline double prob_leq(const PredictiveCDF& fhat, const PredictiveCDF& ghat, const std::function<double()>& overlap) {
    if (fhat.base_weight == 0 && ghat.base_weight == 0) {
        std::uint64_t leq = 0;
        std::size_t xi = 0;
        std::uint64_t below = 0;
        for (const auto& y : ghat.atoms) {
            while (xi < fhat.atoms.size() && fhat.atoms[xi].location <= y.location) {
                below += fhat.atoms[xi].count;
                ++xi;
            }
            leq += below * y.count;
        }
        PairCount pc{ leq, fhat.sample_size * ghat.sample_size };
        return pc.proportion();
    }

    double atom_part = 0;
    for (const auto& y : ghat.atoms) {
        atom_part += y.mass * eval_cdf(fhat, y.location);
    }

    double base_part = 0;
    if (ghat.base_weight > 0) {
        const auto& g0 = ghat.base;
        double inner = 0;
        for (const auto& x : fhat.atoms) {
            inner += x.mass * (1 - g0.left_limit_cdf(x.location));
        }
        if (fhat.base_weight > 0) {
            inner += fhat.base_weight * overlap();
        }
        base_part = ghat.base_weight * inner;
    }

    return detail::clamp_probability(atom_part + base_part);
}

/**
 * `Pr(X <= Y)` for independent `X ~ fhat`, `Y ~ ghat`, i.e., the Stieltjes integral of `fhat` against `ghat`.
 * The atomic parts are summed exactly and only the base-versus-base term needs quadrature.
 */
inline double prob_leq(const PredictiveCDF& fhat, const PredictiveCDF& ghat, const QuadratureSpec& spec = {}) {
    return prob_leq(fhat, ghat, [&]() { return base_overlap(fhat.base, ghat.base, spec); });
}

/**
 * Posterior predictive probability that the next case value is at most the next control value, for one probe.
 */
inline double predictive_prob_leq(std::span<const double> cases, std::span<const double> controls, const DPConfig& config, const QuadratureSpec& spec = {}) {
    if (config.weak_prior) {
        return prob_leq_weak_limit(cases, controls);
    }
    auto fhat = posterior_predictive_cdf(cases, config.c, config.f0);
    auto ghat = posterior_predictive_cdf(controls, config.d, config.g0);
    return prob_leq(fhat, ghat, spec);
}

}

#endif
