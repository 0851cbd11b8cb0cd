#pragma once

#include <vector>

#include "dnr/integration.hpp"
#include "dnr/temporal.hpp"

namespace dnr {

struct SolveConfig {
    double bilateral_k = 2.0;
    int irls_max_iters = 100;
    double irls_tol = 1e-5;
    int cg_max_iters = 5000;
    double cg_tol = 1e-9;

    void validate() const;
};

struct FixedWeightSolution {
    std::vector<double> x;
    bool converged = true;
    int cg_iters = 0;
};

/// Minimize (Ad - b)^T W (Ad - b) + sum lambda (d - t)^2 by preconditioned
/// conjugate gradients on the normal equations, warm-started at init. With no
/// active diagonal term the constant-shift gauge is fixed by pinning the mean
/// of the solution to the mean of init.
FixedWeightSolution solve_fixed_weights(const SparseConstraintSystem& sys, const WeightVector& W,
                                        const DiagonalQuadratic& q, const std::vector<double>& init,
                                        const SolveConfig& cfg);

struct RefineResult {
    std::vector<double> d_log;
    std::vector<double> energy_trace;  // total (spatial + temporal) per IRLS iteration
    int iters_used = 0;
    bool converged = true;
};

/// Outer reweighting loop: recompute bilateral weights at the current
/// iterate, solve the fixed-weight quadratic, stop on relative energy change
/// below irls_tol or after irls_max_iters.
RefineResult irls_refine(const SparseConstraintSystem& sys, const DiagonalQuadratic& q,
                         const std::vector<double>& init_log_depth, const SolveConfig& cfg);

}  // namespace dnr
