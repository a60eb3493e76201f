#ifndef DPEXPR_DPEXPR_HPP
#define DPEXPR_DPEXPR_HPP

/**
 * @file dpexpr.hpp
 * @brief Umbrella header for the dpexpr library.
 */

#include "classifier.hpp"
#include "crossval.hpp"
#include "dataset.hpp"
#include "diffexpr.hpp"
#include "dp_core.hpp"
#include "errors.hpp"
#include "quadrature.hpp"
#include "soft.hpp"

#endif
