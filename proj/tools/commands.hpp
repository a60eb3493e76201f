#ifndef DPEXPR_TOOLS_COMMANDS_HPP
#define DPEXPR_TOOLS_COMMANDS_HPP

#include "dpexpr/dpexpr.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace dpexpr::cli {

/**
 * Everything that determines the output of a `dp-expr` run.
 * `threads`, `format` and `out` only affect how the result is produced and delivered,
 * so they are excluded from `manifest_hash()`.
 */
struct RunManifest {
    std::string command;
    std::string input;
    std::string groups;
    std::vector<std::string> case_subsets;
    std::vector<std::string> control_subsets;

    bool weak_prior = true;
    double c = 0;
    double d = 0;
    std::string base;

    /**
     * Base of the control process; empty means the same as `base`.
     */
    std::string control_base;

    std::size_t k = 0;
    std::size_t k_max = 0;
    bool refit_panel = false;

    std::optional<std::pair<std::size_t, std::size_t>> line_window;
    bool drop_incomplete_probes = false;

    double quadrature_tolerance = 1e-9;
    std::size_t quadrature_max_evaluations = 100000;

    std::string model;
    std::uint64_t seed = 0;

    std::string format = "human";
    std::string out;
    int threads = 1;
};

nlohmann::json manifest_to_json(const RunManifest& manifest);

RunManifest manifest_from_json(const nlohmann::json& doc);

/**
 * FNV-1a hash of the output-determining fields, as 16 hex digits.
 */
std::string manifest_hash(const RunManifest& manifest);

/**
 * Versioned JSON document for a fitted classifier.
 */
nlohmann::json model_to_json(const ClassifierModel& model, const ExpressionMatrix& mat, const std::string& hash);

struct StoredModel {
    ClassifierModel model;
    std::vector<std::string> down_probe_ids;
    std::vector<std::string> up_probe_ids;
};

StoredModel model_from_json(const nlohmann::json& doc);

/**
 * Exit codes of `dp-expr`.
 */
enum ExitCode : int {
    Success = 0,
    InputError = 2,
    NumericalError = 3,
    UsageError = 4
};

/**
 * Runs the command line given by `args` (without the program name), writing reports to `out` and diagnostics to `err`.
 */
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}

#endif
