#ifndef DPEXPR_DATASET_HPP
#define DPEXPR_DATASET_HPP

#include "errors.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

/**
 * @file dataset.hpp
 * @brief In-memory two-group expression matrix.
 */

namespace dpexpr {

enum class Group { Case, Control };

inline const char* to_string(Group g) {
    return g == Group::Case ? "case" : "control";
}

/**
 * Dense probes-by-samples matrix of strictly positive expression levels.
 * Values are stored probe-major, so that `row(j)` is the expression of probe `j` across all samples.
 */
struct ExpressionMatrix {
    std::vector<std::string> probe_ids;
    std::vector<std::string> probe_identifiers;
    std::vector<std::string> sample_ids;
    std::vector<Group> groups;
    std::vector<double> values;

    std::size_t num_probes() const { return probe_ids.size(); }
    std::size_t num_samples() const { return sample_ids.size(); }

    std::size_t num_cases() const {
        std::size_t out = 0;
        for (auto g : groups) {
            out += (g == Group::Case);
        }
        return out;
    }

    std::size_t num_controls() const { return groups.size() - num_cases(); }

    double value(std::size_t probe, std::size_t sample) const {
        return values[probe * num_samples() + sample];
    }

    std::span<const double> row(std::size_t probe) const {
        return std::span<const double>(values).subspan(probe * num_samples(), num_samples());
    }

    /**
     * Expression profile of one individual across all probes.
     */
    std::vector<double> column(std::size_t sample) const {
        std::vector<double> out(num_probes());
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] = value(j, sample);
        }
        return out;
    }
};

/**
 * Explicit partition of sample identifiers into cases and controls.
 */
struct GroupAssignment {
    std::vector<std::string> case_sample_ids;
    std::vector<std::string> control_sample_ids;
};

/**
 * Checks every invariant of `ExpressionMatrix` and returns the matrix unchanged.
 * Throws `Error` with `NonPositiveValue`, `NonFiniteValue`, `DuplicateId`, `EmptyGroup` or `ShapeMismatch`.
 */
inline const ExpressionMatrix& validate(const ExpressionMatrix& mat) {
    const auto p = mat.num_probes();
    const auto ns = mat.num_samples();
    if (mat.probe_identifiers.size() != p || mat.groups.size() != ns || mat.values.size() != p * ns) {
        throw Error(ErrorCode::ShapeMismatch, "matrix dimensions are inconsistent with its metadata");
    }
    if (p == 0) {
        throw Error(ErrorCode::EmptyGroup, "matrix has no probes");
    }
    if (mat.num_cases() == 0) {
        throw Error(ErrorCode::EmptyGroup, "no case samples");
    }
    if (mat.num_controls() == 0) {
        throw Error(ErrorCode::EmptyGroup, "no control samples");
    }

    auto check_unique = [](const std::vector<std::string>& ids, const char* what) {
        std::unordered_set<std::string> seen;
        seen.reserve(ids.size());
        for (const auto& id : ids) {
            if (!seen.insert(id).second) {
                throw Error(ErrorCode::DuplicateId, std::string("duplicate ") + what + " '" + id + "'");
            }
        }
    };
    check_unique(mat.probe_ids, "probe id");
    check_unique(mat.sample_ids, "sample id");

    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t s = 0; s < ns; ++s) {
            double v = mat.value(j, s);
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::NonFiniteValue, "probe '" + mat.probe_ids[j] + "', sample '" + mat.sample_ids[s] + "'");
            }
            if (v <= 0) {
                throw Error(ErrorCode::NonPositiveValue, "probe '" + mat.probe_ids[j] + "', sample '" + mat.sample_ids[s] + "'");
            }
        }
    }
    return mat;
}

/**
 * Column subset of `mat`, in the order given by `columns`.
 */
inline ExpressionMatrix select_columns(const ExpressionMatrix& mat, std::span<const std::size_t> columns) {
    ExpressionMatrix out;
    out.probe_ids = mat.probe_ids;
    out.probe_identifiers = mat.probe_identifiers;
    out.sample_ids.reserve(columns.size());
    out.groups.reserve(columns.size());
    for (auto c : columns) {
        out.sample_ids.push_back(mat.sample_ids[c]);
        out.groups.push_back(mat.groups[c]);
    }
    out.values.resize(mat.num_probes() * columns.size());
    for (std::size_t j = 0; j < mat.num_probes(); ++j) {
        auto src = mat.row(j);
        double* dest = out.values.data() + j * columns.size();
        for (std::size_t i = 0; i < columns.size(); ++i) {
            dest[i] = src[columns[i]];
        }
    }
    return out;
}

/**
 * Column indices belonging to `group`, in original order.
 */
inline std::vector<std::size_t> group_columns(const ExpressionMatrix& mat, Group group) {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < mat.groups.size(); ++s) {
        if (mat.groups[s] == group) {
            out.push_back(s);
        }
    }
    return out;
}

/**
 * Splits a validated matrix into its case columns and its control columns.
 * Probe order and the relative order of columns within each group are preserved.
 */
inline std::pair<ExpressionMatrix, ExpressionMatrix> split_by_group(const ExpressionMatrix& mat) {
    auto cases = group_columns(mat, Group::Case);
    auto controls = group_columns(mat, Group::Control);
    return { select_columns(mat, cases), select_columns(mat, controls) };
}

}

#endif
