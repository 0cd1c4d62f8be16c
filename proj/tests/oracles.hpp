#pragma once
// Independent reference implementations for the tests. Written directly from
// the closed forms in long double, sharing no code with the library.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using real = long double;

inline real alpha(real t) { return std::exp(-t); }
inline real beta_sq(real t) { return 1.0L - std::exp(-2.0L * t); }

/// Posterior weights of 1D atoms given X_t = x, by direct Gaussian densities.
inline std::vector<real> atom_posterior(const std::vector<real>& atoms, const std::vector<real>& w,
                                        real x, real t) {
    std::vector<real> p(atoms.size());
    real total = 0.0L;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const real d = x - alpha(t) * atoms[i];
        p[i] = w[i] * std::exp(-d * d / (2.0L * beta_sq(t)));
        total += p[i];
    }
    for (auto& v : p) v /= total;
    return p;
}

inline real xbar0(const std::vector<real>& atoms, const std::vector<real>& w, real x, real t) {
    const auto p = atom_posterior(atoms, w, x, t);
    real m = 0.0L;
    for (std::size_t i = 0; i < atoms.size(); ++i) m += p[i] * atoms[i];
    return m;
}

/// log of sum_i w_i N(x; alpha a_i, beta^2) in 1D.
inline real log_density(const std::vector<real>& atoms, const std::vector<real>& w, real x, real t) {
    real total = 0.0L;
    const real b2 = beta_sq(t);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const real d = x - alpha(t) * atoms[i];
        total += w[i] * std::exp(-d * d / (2.0L * b2)) / std::sqrt(2.0L * 3.14159265358979323846L * b2);
    }
    return std::log(total);
}

/// DDPM posterior of X_{t_to} given X_{t_from} = x and X_0 = x0 (Bayes on the
/// forward chain): mean = a * x + b * x0, variance v.
struct Ddpm {
    real a, b, v;
};
inline Ddpm ddpm(real t_from, real t_to) {
    const real ds = t_from - t_to;
    const real bt = beta_sq(t_from), bp = beta_sq(t_to), bd = beta_sq(ds);
    return {alpha(ds) * bp / bt, alpha(t_to) * bd / bt, bp * bd / bt};
}

/// Law of the exact reverse chain for a single atom x0 when X at s = 0 is
/// N(m0, v0): composes `substeps` Gaussian transitions from s = 0 to s.
inline void single_atom_law(real x0, real m0, real v0, real horizon, real s, int substeps, real& mean,
                            real& var) {
    mean = m0;
    var = v0;
    for (int k = 0; k < substeps; ++k) {
        const real t_from = horizon - s * k / substeps;
        const real t_to = horizon - s * (k + 1) / substeps;
        const auto c = ddpm(t_from, t_to);
        mean = c.a * mean + c.b * x0;
        var = c.a * c.a * var + c.v;
    }
}

/// Conditional law of X_{t1} given X_{t2} = y for X_0 ~ N(0, v0), t1 < t2.
inline void ou_conditional(real v0, real t1, real t2, real y, real& mean, real& var) {
    const real var1 = v0 * alpha(t1) * alpha(t1) + beta_sq(t1);
    const real var2 = v0 * alpha(t2) * alpha(t2) + beta_sq(t2);
    const real cov = alpha(t2 - t1) * var1;
    mean = cov / var2 * y;
    var = var1 - cov * cov / var2;
}

inline real phi(real z) { return 0.5L * std::erfc(-z / std::sqrt(2.0L)); }

/// P(X_{t1} in [a, b) | X_{t2} in [ylo, yhi)) for X_0 ~ N(0, v0), by
/// Gauss-Legendre quadrature over y weighted by the marginal density.
inline real bridge_bin_probability(real v0, real t1, real t2, real a, real b, real ylo, real yhi) {
    static const real nodes[5] = {-0.9061798459386640L, -0.5384693101056831L, 0.0L, 0.5384693101056831L,
                                  0.9061798459386640L};
    static const real weights[5] = {0.2369268850561891L, 0.4786286704993665L, 0.5688888888888889L,
                                    0.4786286704993665L, 0.2369268850561891L};
    const real var2 = v0 * alpha(t2) * alpha(t2) + beta_sq(t2);
    const int panels = 64;
    real num = 0.0L, den = 0.0L;
    for (int p = 0; p < panels; ++p) {
        const real lo = ylo + (yhi - ylo) * p / panels, hi = ylo + (yhi - ylo) * (p + 1) / panels;
        for (int q = 0; q < 5; ++q) {
            const real y = 0.5L * (lo + hi) + 0.5L * (hi - lo) * nodes[q];
            const real wy = 0.5L * (hi - lo) * weights[q] * std::exp(-y * y / (2.0L * var2));
            real m, v;
            ou_conditional(v0, t1, t2, y, m, v);
            const real sd = std::sqrt(v);
            const real pa = std::isinf(a) ? 0.0L : phi((a - m) / sd);
            const real pb = std::isinf(b) ? 1.0L : phi((b - m) / sd);
            num += wy * (pb - pa);
            den += wy;
        }
    }
    return num / den;
}

}  // namespace oracle
