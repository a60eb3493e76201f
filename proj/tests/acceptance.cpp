// Acceptance checks. Prints one PASS / FAIL / SKIP line per criterion and exits nonzero on any FAIL.
//
// The dataset-reproduction checks need a local copy of GDS3713.soft (optionally gzipped).
// Point DPEXPR_GDS3713 at it; DPEXPR_GDS3713_CASE / DPEXPR_GDS3713_CONTROL override the subset names.

#include "cli_fixture.hpp"
#include "dpexpr/dpexpr.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace dpexpr;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
    Outcome outcome;
    std::string detail;
};

Verdict pass(std::string detail) { return { Outcome::Pass, std::move(detail) }; }
Verdict fail(std::string detail) { return { Outcome::Fail, std::move(detail) }; }
Verdict skip(std::string detail) { return { Outcome::Skip, std::move(detail) }; }

std::string format(const char* fmt, auto... args) {
    char buffer[512];
    std::snprintf(buffer, sizeof(buffer), fmt, args...);
    return buffer;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> row_of(const ExpressionMatrix& mat, std::size_t j, Group g) {
    std::vector<double> out;
    for (std::size_t s = 0; s < mat.num_samples(); ++s) {
        if (mat.groups[s] == g) out.push_back(mat.value(j, s));
    }
    return out;
}

std::vector<double> continuous(std::size_t n, std::mt19937_64& rng) {
    std::lognormal_distribution<double> dist(1.0, 0.8);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(rng);
    return out;
}

BaseDistribution random_base(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> family(0, 2);
    std::uniform_real_distribution<double> loc(0.5, 3.0);
    switch (family(rng)) {
    case 0: {
        double a = loc(rng) - 0.5;
        return uniform_base(a, a + 2 * loc(rng));
    }
    case 1:
        return normal_base(loc(rng), loc(rng));
    default:
        return lognormal_base(loc(rng) - 1.5, 0.3 * loc(rng));
    }
}

std::function<double(double)> quantile_of(const BaseDistribution& b) { return b.quantile; }

// Criterion 1.
Verdict weak_prior_oracle() {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> probes(1, 50), sizes(1, 20);
    std::size_t checked = 0;
    for (int rep = 0; rep < 200; ++rep) {
        auto mat = oracle::random_matrix(probes(rng), sizes(rng), sizes(rng), rng, true);
        auto ranking = rank_probes(mat, DPConfig{});
        for (std::size_t j = 0; j < mat.num_probes(); ++j) {
            auto x = row_of(mat, j, Group::Case), y = row_of(mat, j, Group::Control);
            auto count = oracle::brute_force_leq(x, y);
            double expected = static_cast<double>(count) / static_cast<double>(x.size() * y.size());
            if (prob_leq_weak_limit(x, y) != expected || count_leq(x, y).leq != count || (*ranking.leq_counts)[j] != count) {
                return fail(format("matrix %d probe %zu: count %llu disagrees", rep, j, static_cast<unsigned long long>(count)));
            }
            ++checked;
        }
    }
    double elapsed = seconds_since(start);
    if (elapsed >= 5) return fail(format("%zu probes exact but took %.2f s (limit 5 s)", checked, elapsed));
    return pass(format("%zu probes over 200 matrices, integer-exact, %.2f s", checked, elapsed));
}

// Criterion 2.
Verdict dp_limit() {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<std::size_t> sizes(1, 20);
    double worst = 0;
    for (int rep = 0; rep < 50; ++rep) {
        auto x = continuous(sizes(rng), rng), y = continuous(sizes(rng), rng);
        DPConfig config;
        config.weak_prior = false;
        config.c = config.d = 1e-12;
        config.f0 = random_base(rng);
        config.g0 = (rep % 2 == 0) ? config.f0 : random_base(rng);
        worst = std::max(worst, std::abs(predictive_prob_leq(x, y, config) - prob_leq_weak_limit(x, y)));
    }
    double elapsed = seconds_since(start);
    auto detail = format("max |diff| %.3g over 50 instances, %.2f s", worst, elapsed);
    if (worst > 1e-6 || elapsed >= 10) return fail(detail);
    return pass(detail);
}

// Criterion 3.
Verdict prior_symmetry() {
    std::vector<std::pair<const char*, BaseDistribution>> bases{
        { "uniform", uniform_base(0, 3) }, { "normal", normal_base(1, 2) }, { "lognormal", lognormal_base(0.5, 1) }
    };
    std::string detail;
    bool ok = true;
    for (const auto& [name, base] : bases) {
        DPConfig config;
        config.weak_prior = false;
        config.c = config.d = 1;
        config.f0 = config.g0 = base;
        QuadratureSpec forced;
        forced.force_quadrature = true;
        double closed = predictive_prob_leq({}, {}, config);
        double quad = predictive_prob_leq({}, {}, config, forced);
        ok = ok && std::abs(closed - 0.5) <= 1e-9 && std::abs(quad - 0.5) <= 1e-7;
        detail += format("%s closed %.3g quad %.3g; ", name, std::abs(closed - 0.5), std::abs(quad - 0.5));
    }
    detail += "(deviation from 0.5)";
    return ok ? pass(detail) : fail(detail);
}

// Criterion 4.
Verdict monte_carlo() {
    std::mt19937_64 rng(404);
    const double grid[] = { 0.5, 2, 10 };
    std::uniform_int_distribution<int> pick(0, 2);
    std::uniform_int_distribution<std::size_t> sizes(0, 15);
    double worst = 0;
    for (int rep = 0; rep < 10; ++rep) {
        auto x = continuous(sizes(rng), rng), y = continuous(sizes(rng), rng);
        if (rep % 3 == 0 && !x.empty()) y.insert(y.end(), x.begin(), x.begin() + std::min<std::size_t>(2, x.size()));
        DPConfig config;
        config.weak_prior = false;
        config.c = grid[pick(rng)];
        config.d = grid[pick(rng)];
        config.f0 = random_base(rng);
        config.g0 = random_base(rng);
        double value = predictive_prob_leq(x, y, config);
        oracle::PredictiveSampler fx{ x, config.c, quantile_of(config.f0) }, gy{ y, config.d, quantile_of(config.g0) };
        auto mc = oracle::monte_carlo_leq(fx, gy, 1000000, 4000 + rep);
        double z = std::abs(value - mc.estimate) / mc.standard_error;
        worst = std::max(worst, z);
    }
    auto detail = format("max deviation %.2f standard errors over 10 configurations (limit 4)", worst);
    return worst <= 4 ? pass(detail) : fail(detail);
}

// Criterion 5.
Verdict scale_invariance() {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> log_lambda(std::log(1e-6), std::log(1e6));
    double worst = 0;
    std::size_t label_changes = 0, checks = 0;
    for (int rep = 0; rep < 50; ++rep) {
        auto mat = oracle::random_matrix(20, 10, 12, rng, false);
        auto model = fit(mat, select_panel(rank_probes(mat, DPConfig{}), 1 + rep % 5));
        for (int i = 0; i < 20; ++i) {
            auto z = continuous(mat.num_probes(), rng);
            double lambda = std::exp(log_lambda(rng));
            if (i == 0) lambda = 1e-6;
            if (i == 1) lambda = 1e6;
            auto scaled = z;
            for (auto& v : scaled) v *= lambda;
            double t = t_statistic(model.panel, z), ts = t_statistic(model.panel, scaled);
            worst = std::max(worst, std::abs(t - ts) / t);
            label_changes += classify(model, z) != classify(model, scaled);
            ++checks;
        }
    }
    auto detail = format("max relative T change %.3g, %zu label changes over %zu individuals", worst, label_changes, checks);
    return (worst <= 1e-10 && label_changes == 0) ? pass(detail) : fail(detail);
}

// Criterion 6.
Verdict critical_value() {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<std::size_t> sizes(1, 30);
    int checked = 0;
    for (int rep = 0; rep < 100; ++rep) {
        auto mat = oracle::random_matrix(12, sizes(rng), sizes(rng), rng, false);
        auto model = fit(mat, select_panel(rank_probes(mat, DPConfig{}), 1 + rep % 6));
        auto sorted = model.training_t;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) continue;
        auto below = std::count_if(model.training_t.begin(), model.training_t.end(), [&](double t) { return t <= model.t_star; });
        if (static_cast<std::size_t>(below) != model.n) {
            return fail(format("m=%zu n=%zu: %ld training T <= t*", model.m, model.n, static_cast<long>(below)));
        }
        ++checked;
    }
    return checked >= 90 ? pass(format("%d fits with distinct T, exactly n below t* each time", checked)) : fail(format("only %d fits had distinct T", checked));
}

// Criterion 7.
Verdict monotone_invariance() {
    std::mt19937_64 rng(707);
    std::uniform_real_distribution<double> slope(0.05, 5.0);
    std::vector<double> knots{ 0, 0.75, 1.5, 2.5, 4, 8, 20 }, slopes(knots.size());
    for (auto& s : slopes) s = slope(rng);
    auto piecewise = [&](double v) {
        double out = 0.01;
        for (std::size_t i = 0; i < knots.size(); ++i) {
            double hi = (i + 1 < knots.size()) ? knots[i + 1] : INFINITY;
            if (v <= knots[i]) break;
            out += slopes[i] * (std::min(v, hi) - knots[i]);
        }
        return out;
    };
    std::vector<std::pair<const char*, std::function<double(double)>>> maps{
        { "exp", [](double v) { return std::exp(v); } }, { "cube", [](double v) { return v * v * v; } }, { "piecewise-linear", piecewise }
    };
    int checked = 0;
    for (int rep = 0; rep < 40; ++rep) {
        auto mat = oracle::random_matrix(16, 3 + rep % 9, 4 + rep % 7, rng, rep % 2 == 0);
        for (auto& v : mat.values) v = std::min(v, 15.0);
        auto base = rank_probes(mat, DPConfig{});
        auto panel = select_panel(base, 3);
        for (const auto& [name, map] : maps) {
            auto transformed = mat;
            for (auto& v : transformed.values) v = map(v);
            auto ranking = rank_probes(transformed, DPConfig{});
            auto tpanel = select_panel(ranking, 3);
            if (ranking.q != base.q || ranking.order != base.order || tpanel.down != panel.down || tpanel.up != panel.up) {
                return fail(format("matrix %d: %s changed the ranking", rep, name));
            }
            ++checked;
        }
    }
    return pass(format("q, order and k=3 panel identical over %d transformed matrices", checked));
}

std::optional<std::string> gds_path() {
    if (const char* env = std::getenv("DPEXPR_GDS3713")) {
        if (std::filesystem::exists(env)) return std::string(env);
    }
    for (const char* name : { DPEXPR_TEST_DATA "/GDS3713.soft", DPEXPR_TEST_DATA "/GDS3713.soft.gz" }) {
        if (std::filesystem::exists(name)) return std::string(name);
    }
    return std::nullopt;
}

std::string env_or(const char* name, const char* fallback) {
    const char* value = std::getenv(name);
    return value ? value : fallback;
}

ExpressionMatrix gds_matrix(const SoftDataset& ds) {
    auto groups = groups_from_subsets(ds, { env_or("DPEXPR_GDS3713_CASE", "smoker") }, { env_or("DPEXPR_GDS3713_CONTROL", "non-smoker") });
    return to_matrix(ds, groups);
}

// Criterion 8.
Verdict reproduction(const std::optional<SoftDataset>& gds) {
    if (!gds) return skip("GDS3713.soft not available (set DPEXPR_GDS3713)");
    auto start = std::chrono::steady_clock::now();
    auto mat = gds_matrix(*gds);
    if (mat.num_cases() != 39 || mat.num_controls() != 40) return fail(format("groups have m=%zu n=%zu, expected 39/40", mat.num_cases(), mat.num_controls()));
    RankOptions rank;
    rank.num_threads = 4;
    auto panel = select_panel(rank_probes(mat, DPConfig{}, rank), 4);
    std::set<std::string> down, up;
    for (auto j : panel.down) down.insert(mat.probe_identifiers[j]);
    for (auto j : panel.up) up.insert(mat.probe_identifiers[j]);
    const std::set<std::string> want_down{ "EBP", "EIF4B", "H3F3AP4", "MFSD11" }, want_up{ "GPR15", "DDX3X", "CBFB", "SCAF11" };
    auto table = loocv(mat, panel, 4);
    double elapsed = seconds_since(start);
    auto join = [](const std::set<std::string>& s) {
        std::string out;
        for (const auto& v : s) out += (out.empty() ? "" : ",") + v;
        return out;
    };
    auto detail = format("down {%s} up {%s}; case %zu/%zu control %zu/%zu (unhealthy/healthy); %.1f s",
                         join(down).c_str(), join(up).c_str(), table.case_unhealthy, table.case_healthy, table.control_unhealthy, table.control_healthy, elapsed);
    bool ok = down == want_down && up == want_up && table.case_unhealthy == 39 && table.case_healthy == 0 && table.control_unhealthy == 1 && table.control_healthy == 39;
    return ok ? pass(detail) : fail(detail);
}

// Criterion 9.
Verdict k_selection(const std::optional<SoftDataset>& gds) {
    if (!gds) return skip("GDS3713.soft not available (set DPEXPR_GDS3713)");
    auto mat = gds_matrix(*gds);
    CrossValOptions options;
    options.num_threads = 4;
    auto report = select_k(mat, 8, DPConfig{}, options);
    std::string detail = format("chosen_k=%zu;", report.chosen_k);
    for (const auto& e : report.per_k) {
        detail += format(" k=%zu |FNR-FPR|=%.4f FNR+FPR=%.4f;", e.k, e.balance, e.total_error);
    }
    return report.chosen_k == 4 ? pass(detail) : fail(detail);
}

// Criterion 10.
Verdict soft_golden(const std::optional<SoftDataset>& gds, const std::optional<std::string>& gds_error) {
    auto load = [](const char* name, ParseOptions options = {}) { return load_dataset(std::string(DPEXPR_TEST_DATA) + "/" + name, options); };
    auto error_of = [&](const char* name) -> std::optional<ErrorCode> {
        try {
            load(name);
        } catch (const Error& e) {
            return e.code();
        }
        return std::nullopt;
    };
    std::vector<std::string> problems;
    auto minimal = load("minimal.soft");
    if (minimal.dataset_id != "GDS0001" || minimal.rows.size() != 2 || minimal.num_samples() != 2 || minimal.subsets.size() != 2 ||
        minimal.rows[0].identifier != "DDR1" || minimal.rows[1].values[1] != 41.0) {
        problems.push_back("minimal.soft parsed incorrectly");
    }
    const std::pair<const char*, ErrorCode> expected[] = {
        { "no_begin.soft", ErrorCode::MissingTableMarkers }, { "no_end.soft", ErrorCode::MissingTableMarkers },
        { "ragged.soft", ErrorCode::RaggedRow },             { "null_value.soft", ErrorCode::MissingValue },
        { "unparseable.soft", ErrorCode::UnparseableValue }, { "unknown_subset_sample.soft", ErrorCode::UnknownSampleId },
    };
    for (const auto& [name, code] : expected) {
        auto got = error_of(name);
        if (got != code) problems.push_back(std::string(name) + " gave " + (got ? to_string(*got) : "no error"));
    }
    ParseOptions drop;
    drop.drop_incomplete_probes = true;
    auto dropped = load("null_value.soft", drop);
    if (dropped.rows.size() != 1 || dropped.dropped_rows != 1) problems.push_back("null_value.soft with dropping kept the wrong rows");

    std::string detail = problems.empty() ? "golden files behave as specified" : problems.front();
    if (!problems.empty()) return fail(detail);
    if (gds_error) return fail("GDS3713 parse failed: " + *gds_error);
    if (!gds) return skip(detail + "; GDS3713 part not run (file not available)");
    if (gds->num_samples() != 79 || gds->subsets.empty()) return fail(format("GDS3713 has %zu columns and %zu subsets", gds->num_samples(), gds->subsets.size()));
    return pass(detail + format("; GDS3713 has 79 columns, %zu probes, %zu subsets", gds->rows.size(), gds->subsets.size()));
}

// Criterion 11.
Verdict determinism() {
    auto dir = fixture::scratch_dir("acceptance_determinism");
    std::mt19937_64 rng(1111);
    auto mat = oracle::random_matrix(120, 14, 16, rng, true);
    fixture::write_tsv_fixture(dir, mat);
    const std::vector<std::string> io{ "--input", (dir / "matrix.tsv").string(), "--groups", (dir / "groups.tsv").string() };
    const std::vector<std::vector<std::string>> commands{
        { "rank", "--format", "tsv" },
        { "rank", "--format", "json", "--concentration-c", "2", "--concentration-d", "0.5", "--base", "lognormal:1,1", "--control-base", "normal:3,2" },
        { "panel", "--k", "5", "--format", "json" },
        { "fit", "--k", "5", "--format", "json" },
        { "cv", "--k", "5", "--format", "tsv" },
        { "cv", "--k", "5", "--refit-panel", "--format", "json" },
        { "select-k", "--k-max", "8", "--format", "json" },
        { "select-k", "--k-max", "4", "--refit-panel", "--format", "tsv" },
    };
    for (const auto& cmd : commands) {
        std::vector<std::string> outputs;
        for (const char* threads : { "1", "8" }) {
            auto args = cmd;
            args.insert(args.end(), io.begin(), io.end());
            args.insert(args.end(), { "--threads", threads });
            auto res = fixture::run(args);
            if (res.code != 0) return fail(cmd[0] + " exited with " + std::to_string(res.code) + ": " + res.err);
            outputs.push_back(res.out);
        }
        if (outputs[0] != outputs[1]) return fail(cmd[0] + " output differs between 1 and 8 threads");
    }
    return pass(format("%zu command lines byte-identical with 1 and 8 threads", commands.size()));
}

}

int main() {
    std::optional<SoftDataset> gds;
    std::optional<std::string> gds_error;
    if (auto path = gds_path()) {
        try {
            gds = load_dataset(*path);
        } catch (const std::exception& e) {
            gds_error = e.what();
        }
    }
    auto gated = [&](auto check) {
        return [&, check] { return gds_error ? fail("GDS3713 parse failed: " + *gds_error) : check(gds); };
    };

    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        { "weak-prior oracle equivalence", weak_prior_oracle },
        { "DP limit convergence", dp_limit },
        { "prior symmetry", prior_symmetry },
        { "Monte Carlo cross-check", monte_carlo },
        { "T-statistic scale invariance", scale_invariance },
        { "critical-value contract", critical_value },
        { "monotone-transform invariance", monotone_invariance },
        { "GDS3713 panel and LOOCV reproduction", gated(reproduction) },
        { "GDS3713 k selection", gated(k_selection) },
        { "SOFT parser golden files", [&] { return soft_golden(gds, gds_error); } },
        { "thread-count determinism", determinism },
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict verdict;
        try {
            verdict = criteria[i].second();
        } catch (const std::exception& e) {
            verdict = fail(std::string("threw: ") + e.what());
        }
        const char* tag = verdict.outcome == Outcome::Pass ? "PASS" : verdict.outcome == Outcome::Fail ? "FAIL" : "SKIP";
        failures += verdict.outcome == Outcome::Fail;
        std::printf("%s %2zu %s: %s\n", tag, i + 1, criteria[i].first, verdict.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
