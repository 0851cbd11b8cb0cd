#include "dnr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dnr {

void SolveConfig::validate() const {
    if (!(bilateral_k >= 0.0)) throw std::invalid_argument("SolveConfig: bilateral_k must be nonnegative");
    if (irls_max_iters <= 0 || cg_max_iters <= 0) throw std::invalid_argument("SolveConfig: iteration counts must be positive");
    if (!(irls_tol > 0.0 && irls_tol < 1.0)) throw std::invalid_argument("SolveConfig: irls_tol must be in (0, 1)");
    if (!(cg_tol > 0.0 && cg_tol < 1.0)) throw std::invalid_argument("SolveConfig: cg_tol must be in (0, 1)");
}

namespace {

// y = (A^T W A + Lambda) x, matrix-free over the constraint rows.
void apply_normal_matrix(const SparseConstraintSystem& sys, const WeightVector& W, const DiagonalQuadratic& q,
                         const std::vector<double>& x, std::vector<double>& y) {
    std::fill(y.begin(), y.end(), 0.0);
    for (size_t i = 0; i < sys.rows.size(); ++i) {
        const ConstraintRow& row = sys.rows[i];
        const double r = W.w[i] * (row.coeff_p * x[row.p] + row.coeff_q * x[row.q]);
        y[row.p] += row.coeff_p * r;
        y[row.q] += row.coeff_q * r;
    }
    for (size_t i = 0; i < x.size(); ++i) {
        if (q.active[i]) y[i] += q.lambda_diag[i] * x[i];
    }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

FixedWeightSolution solve_fixed_weights(const SparseConstraintSystem& sys, const WeightVector& W,
                                        const DiagonalQuadratic& q, const std::vector<double>& init,
                                        const SolveConfig& cfg) {
    cfg.validate();
    const size_t n = init.size();
    if (static_cast<int>(n) != sys.num_unknowns && sys.num_unknowns != 0) {
        throw std::invalid_argument("solve_fixed_weights: init size mismatch");
    }
    if (W.w.size() != sys.rows.size()) throw std::invalid_argument("solve_fixed_weights: weight count mismatch");
    if (q.lambda_diag.size() != n) throw std::invalid_argument("solve_fixed_weights: quadratic size mismatch");

    // Normal-equation right-hand side A^T W b + Lambda t.
    std::vector<double> rhs(n, 0.0);
    for (size_t i = 0; i < sys.rows.size(); ++i) {
        const ConstraintRow& row = sys.rows[i];
        const double wb = W.w[i] * row.rhs;
        rhs[row.p] += row.coeff_p * wb;
        rhs[row.q] += row.coeff_q * wb;
    }
    for (size_t i = 0; i < n; ++i) {
        if (q.active[i]) rhs[i] += q.lambda_diag[i] * q.target[i];
    }

    // Jacobi preconditioner.
    std::vector<double> diag(n, 0.0);
    for (size_t i = 0; i < sys.rows.size(); ++i) {
        const ConstraintRow& row = sys.rows[i];
        diag[row.p] += W.w[i] * row.coeff_p * row.coeff_p;
        diag[row.q] += W.w[i] * row.coeff_q * row.coeff_q;
    }
    double max_diag = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (q.active[i]) diag[i] += q.lambda_diag[i];
        if (diag[i] <= 0.0) diag[i] = 1.0;  // isolated unknown: keep it at its init value
        max_diag = std::max(max_diag, diag[i]);
    }

    FixedWeightSolution sol;
    sol.x = init;

    std::vector<double> r(n), z(n), p(n), Ap(n);
    apply_normal_matrix(sys, W, q, sol.x, Ap);
    for (size_t i = 0; i < n; ++i) r[i] = rhs[i] - Ap[i];

    // Stop at the requested relative residual, but never chase residuals
    // below the rounding floor of the normal equations; doing so amplifies
    // noise along near-null directions.
    double init_scale = 1.0;
    for (double x : init) init_scale = std::max(init_scale, std::abs(x));
    const double noise_floor = 1e-13 * max_diag * init_scale;
    const double rhs_norm = std::sqrt(dot(rhs, rhs));
    const double stop_norm = std::max(cfg.cg_tol * rhs_norm, noise_floor);

    double rz = 0.0;
    for (size_t i = 0; i < n; ++i) {
        z[i] = r[i] / diag[i];
        p[i] = z[i];
    }
    rz = dot(r, z);

    int it = 0;
    while (it < cfg.cg_max_iters && std::sqrt(dot(r, r)) > stop_norm) {
        ++it;
        apply_normal_matrix(sys, W, q, p, Ap);
        const double pAp = dot(p, Ap);
        if (!(pAp > 0.0)) break;  // null-space direction or rounding breakdown
        const double step = rz / pAp;
        for (size_t i = 0; i < n; ++i) {
            sol.x[i] += step * p[i];
            r[i] -= step * Ap[i];
        }
        double rz_next = 0.0;
        for (size_t i = 0; i < n; ++i) {
            z[i] = r[i] / diag[i];
        }
        rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    sol.cg_iters = it;
    sol.converged = std::sqrt(dot(r, r)) <= stop_norm;

    if (!q.any_active() && !sol.x.empty()) {
        // Gauge anchor: A annihilates constants, so shift to the init mean.
        const double shift = mean(init) - mean(sol.x);
        for (double& x : sol.x) x += shift;
    }
    return sol;
}

RefineResult irls_refine(const SparseConstraintSystem& sys, const DiagonalQuadratic& q,
                         const std::vector<double>& init_log_depth, const SolveConfig& cfg) {
    cfg.validate();
    for (double d : init_log_depth) {
        if (!std::isfinite(d)) throw std::invalid_argument("irls_refine: non-finite init");
    }

    RefineResult res;
    res.d_log = init_log_depth;

    double prev_energy = 0.0;
    for (int t = 0; t < cfg.irls_max_iters; ++t) {
        const WeightVector W = bilateral_weights(sys, res.d_log, cfg.bilateral_k);
        const FixedWeightSolution sol = solve_fixed_weights(sys, W, q, res.d_log, cfg);
        res.converged = res.converged && sol.converged;
        res.d_log = sol.x;

        const double energy = spatial_energy(sys, W, res.d_log) + temporal_energy(res.d_log, q);
        res.energy_trace.push_back(energy);
        res.iters_used = t + 1;

        if (energy < 1e-30) break;
        if (t > 0) {
            const double rel_change = std::abs(prev_energy - energy) / std::max(prev_energy, 1e-30);
            if (rel_change < cfg.irls_tol) break;
        }
        prev_energy = energy;
    }
    return res;
}

}  // namespace dnr
