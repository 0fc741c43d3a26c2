#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "bethebox/errors.hpp"
#include "bethebox/model.hpp"

namespace bethebox {

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// -p log p with h(0) = 0 by continuity.
inline double neg_p_log_p(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

inline double binary_entropy(double q) {
    return neg_p_log_p(q) + neg_p_log_p(1.0 - q);
}

// Singleton pseudo-marginals q_i = p(X_i = 1). Values must stay strictly
// inside (0,1); the Bethe box guarantees that for finite parameters.
using PseudoMarginals = std::vector<double>;

constexpr double kInteriorGuard = 1e-9;

inline void check_interior(double q) {
    if (!(q >= kInteriorGuard && q <= 1.0 - kInteriorGuard))
        throw ValidationError("pseudo-marginal " + std::to_string(q) +
                              " outside interior guard [1e-9, 1-1e-9]");
}

// ---------------------------------------------------------------------------
// Pairwise belief xi = mu_11, picked out of the quadratic
//   alpha xi^2 - [1 + alpha (q_i + q_j)] xi + (1 + alpha) q_i q_j = 0
// as the lower root for alpha > 0 and the higher root for alpha < 0.
// ---------------------------------------------------------------------------

// Stable root selection: with b = -[1 + alpha (q_i + q_j)] and
// c = (1 + alpha) q_i q_j, compute s = -(b + sign(b) sqrt(b^2 - 4 alpha c))/2
// and take the root c/s (or s/alpha when b >= 0, only reachable for
// alpha < 0). Avoids the cancellation the textbook formula hits for large
// |alpha|. Near alpha = 0 the quadratic degenerates; use the tangent
// expansion xi = q_i q_j + alpha q_i q_j (1-q_i)(1-q_j) / (1 + alpha s).
inline double solve_xi(double alpha, double qi, double qj) {
    const double lo = std::max(0.0, qi + qj - 1.0);
    const double hi = std::min(qi, qj);
    double xi;
    if (std::abs(alpha) < 1e-12) {
        double s = qi + qj - 2.0 * qi * qj;
        xi = qi * qj + alpha * qi * qj * (1.0 - qi) * (1.0 - qj) / (1.0 + alpha * s);
    } else {
        const double b = -(1.0 + alpha * (qi + qj));
        const double c = (1.0 + alpha) * qi * qj;
        double disc = b * b - 4.0 * alpha * c;
        if (disc < 0.0) disc = 0.0;  // roots are real; clamp rounding dust
        const double root = std::sqrt(disc);
        const double s = -(b + std::copysign(root, b)) / 2.0;
        if (s == 0.0)
            xi = 0.0;
        else if (alpha > 0.0 || b < 0.0)
            xi = c / s;
        else
            xi = s / alpha;
    }
    if (xi < lo) {
        if (xi < lo - 1e-12 * (1.0 + std::abs(xi)))
            throw InternalError("xi root fell below feasible interval");
        xi = lo;
    }
    if (xi > hi) {
        if (xi > hi + 1e-12 * (1.0 + std::abs(xi)))
            throw InternalError("xi root fell above feasible interval");
        xi = hi;
    }
    return xi;
}

// Closed-form bracket for xi when alpha > 0:
//   lower: tangent bound  q_i q_j + alpha q_i q_j (1-q_i)(1-q_j) / (1+alpha s)
//   upper: m (alpha + M) / (1 + alpha) with m = min(q_i,q_j), M = max.
struct XiBracket {
    double lower;
    double upper;
};

inline XiBracket xi_bounds(double alpha, double qi, double qj) {
    if (!(alpha > 0.0))
        throw ValidationError("xi_bounds requires alpha > 0");
    double s = qi + qj - 2.0 * qi * qj;
    double lower = qi * qj + alpha * qi * qj * (1.0 - qi) * (1.0 - qj) / (1.0 + alpha * s);
    double m = std::min(qi, qj), M = std::max(qi, qj);
    double upper = m * (alpha + M) / (1.0 + alpha);
    return {lower, upper};
}

// 2x2 pairwise pseudo-marginal.
//   mu[a][b] = p(X_i = a, X_j = b)
struct EdgeMarginal {
    double mu[2][2];

    double operator()(int a, int b) const { return mu[a][b]; }
};

inline EdgeMarginal edge_marginal(double alpha, double qi, double qj) {
    double xi = solve_xi(alpha, qi, qj);
    double e[4] = {1.0 + xi - qi - qj, qj - xi, qi - xi, xi};
    for (double& v : e) {
        if (v < 0.0) {
            if (v < -1e-12) throw InternalError("pairwise marginal entry " +
                                                std::to_string(v) + " < -1e-12");
            v = 0.0;
        }
    }
    return EdgeMarginal{{{e[0], e[1]}, {e[2], e[3]}}};
}

inline double edge_entropy(const EdgeMarginal& mu) {
    return neg_p_log_p(mu.mu[0][0]) + neg_p_log_p(mu.mu[0][1]) +
           neg_p_log_p(mu.mu[1][0]) + neg_p_log_p(mu.mu[1][1]);
}

// Pairwise term of the Bethe free energy for one edge:
//   f_ij(q_i, q_j) = -w xi(q_i, q_j) - S_ij(q_i, q_j).
inline double edge_free_energy(double w, double qi, double qj) {
    double alpha = std::expm1(w);
    EdgeMarginal mu = edge_marginal(alpha, qi, qj);
    return -w * mu.mu[1][1] - edge_entropy(mu);
}

// Singleton term: f_i(q) = -theta_i q + (z_i - 1) S_i(q).
inline double node_free_energy(double theta, int degree, double q) {
    return -theta * q + (degree - 1) * binary_entropy(q);
}

inline double bethe_free_energy(const Mrf& m, const PseudoMarginals& q) {
    double f = 0.0;
    for (const Edge& e : m.edges()) f += edge_free_energy(e.w, q[e.i], q[e.j]);
    for (int i = 0; i < m.size(); ++i)
        f += node_free_energy(m.theta(i), m.degree(i), q[i]);
    return f;
}

// dF/dq_i = -theta_i + log Q_i with
//   Q_i = [(1-q_i)/q_i]^{z_i-1} prod_j (q_i - xi_ij) / (1 + xi_ij - q_i - q_j).
// If a pairwise entry underflows to zero the result is +-infinity (numerator
// zero -> -inf, denominator zero -> +inf, both -> -inf), never NaN.
inline std::vector<double> bethe_gradient(const Mrf& m, const PseudoMarginals& q) {
    const int n = m.size();
    for (int i = 0; i < n; ++i) check_interior(q[i]);
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) {
        double acc = -m.theta(i) +
                     (m.degree(i) - 1) * (std::log(1.0 - q[i]) - std::log(q[i]));
        int num_zero = 0, den_zero = 0;
        for (auto [j, w] : m.neighbors(i)) {
            double xi = solve_xi(std::expm1(w), q[i], q[j]);
            double num = q[i] - xi;
            double den = 1.0 + xi - q[i] - q[j];
            if (num <= 0.0)
                ++num_zero;
            else
                acc += std::log(num);
            if (den <= 0.0)
                ++den_zero;
            else
                acc -= std::log(den);
        }
        if (num_zero > 0)
            g[i] = -std::numeric_limits<double>::infinity();
        else if (den_zero > 0)
            g[i] = std::numeric_limits<double>::infinity();
        else
            g[i] = acc;
    }
    return g;
}

// Second derivatives of f_ij. T = q_i q_j (1-q_i)(1-q_j) - (xi - q_i q_j)^2
// is strictly positive in the open square; f_ij has the sign of -alpha.
struct EdgeSecondDerivs {
    double f_ii;
    double f_ij;
    double f_jj;
    double T;
};

inline EdgeSecondDerivs edge_second_derivs(double alpha, double qi, double qj) {
    check_interior(qi);
    check_interior(qj);
    double xi = solve_xi(alpha, qi, qj);
    double T = qi * qj * (1.0 - qi) * (1.0 - qj) - (xi - qi * qj) * (xi - qi * qj);
    if (!(T > 0.0)) throw InternalError("T_ij not strictly positive");
    return {qj * (1.0 - qj) / T, (qi * qj - xi) / T, qi * (1.0 - qi) / T, T};
}

// Hessian of F: diagonal per node plus one off-diagonal entry per edge
// (aligned with Mrf::edges()).
struct SparseHessian {
    std::vector<double> diag;
    std::vector<double> off;

    std::vector<std::vector<double>> dense(const Mrf& m) const {
        int n = m.size();
        std::vector<std::vector<double>> h(n, std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i) h[i][i] = diag[i];
        for (size_t k = 0; k < m.edges().size(); ++k) {
            const Edge& e = m.edges()[k];
            h[e.i][e.j] = h[e.j][e.i] = off[k];
        }
        return h;
    }
};

inline SparseHessian bethe_hessian(const Mrf& m, const PseudoMarginals& q) {
    const int n = m.size();
    SparseHessian h;
    h.diag.assign(n, 0.0);
    h.off.assign(m.edges().size(), 0.0);
    for (int i = 0; i < n; ++i) {
        check_interior(q[i]);
        h.diag[i] = -(m.degree(i) - 1) / (q[i] * (1.0 - q[i]));
    }
    for (size_t k = 0; k < m.edges().size(); ++k) {
        const Edge& e = m.edges()[k];
        EdgeSecondDerivs d = edge_second_derivs(std::expm1(e.w), q[e.i], q[e.j]);
        h.off[k] = d.f_ij;
        h.diag[e.i] += d.f_ii;
        h.diag[e.j] += d.f_jj;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Entry and eigenvalue bounds for H over a Bethe box, associative models only.
// ---------------------------------------------------------------------------

struct HessianBounds {
    double a;       // off-diagonal magnitude: -a <= H_ij
    double b;       // diagonal bound: H_ii <= b
    double omega;   // max(a, b)
    double sigma;   // nonzero fraction of H, (n + 2|E|)/n^2 <= (max_degree+1)/n
    double lambda;  // n * omega * sqrt(sigma) >= max |eigenvalue| over the box
    std::vector<double> k_edge;  // per-edge lower bound K_ij on T_ij
    std::vector<double> eta;     // per-node min(A_i, B_i)
};

// Needs the box, not the full BBP state; kept as a free struct so mesh and
// bbp can share it without a dependency cycle.
struct Box {
    std::vector<double> lower;  // A_i
    std::vector<double> upper;  // 1 - B_i

    int size() const { return static_cast<int>(lower.size()); }
    double width(int i) const { return upper[i] - lower[i]; }
};

inline HessianBounds hessian_bounds(const Mrf& m, const Box& box) {
    const int n = m.size();
    for (const Edge& e : m.edges())
        if (e.w <= 0)
            throw UnsupportedModelError("hessian_bounds requires an associative "
                                        "model; edge (" + std::to_string(e.i) +
                                        "," + std::to_string(e.j) + ") has w <= 0");
    HessianBounds hb;
    hb.eta.resize(n);
    for (int i = 0; i < n; ++i) {
        double A = box.lower[i], B = 1.0 - box.upper[i];
        double eta = std::min(A, B);
        if (!(eta > 0.0))
            throw ValidationError("Bethe box touches the boundary at node " +
                                  std::to_string(i));
        hb.eta[i] = eta;
    }

    hb.a = 0.0;
    hb.k_edge.resize(m.edges().size());
    for (size_t k = 0; k < m.edges().size(); ++k) {
        const Edge& e = m.edges()[k];
        double al = std::expm1(e.w);
        double ei = hb.eta[e.i], ej = hb.eta[e.j];
        double prod = ei * ej * (1.0 - ei) * (1.0 - ej);
        hb.k_edge[k] = prod * (2.0 * al + 1.0) / ((al + 1.0) * (al + 1.0));
        double a_edge = al * (al + 1.0) / (4.0 * (2.0 * al + 1.0) * prod);
        hb.a = std::max(hb.a, a_edge);
    }

    hb.b = 0.0;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (auto [j, w] : m.neighbors(i)) {
            double al = std::expm1(w);
            s += (al + 1.0) * (al + 1.0) / (2.0 * al + 1.0);
        }
        double b_node = (1.0 - m.degree(i) + s) / (hb.eta[i] * (1.0 - hb.eta[i]));
        hb.b = std::max(hb.b, b_node);
    }

    hb.omega = std::max(hb.a, hb.b);
    double nz = n + 2.0 * static_cast<double>(m.edges().size());
    hb.sigma = nz / (static_cast<double>(n) * n);
    hb.lambda = n * hb.omega * std::sqrt(hb.sigma);
    return hb;
}

}  // namespace bethebox
