#pragma once

// Monotone wide-stencil finite-difference solver for det D^2 u = f with
// oblique, Robin, Dirichlet, and mixed boundary conditions.

#include "malab/common.hpp"
#include "malab/convexcore.hpp"
#include "malab/geometry.hpp"
#include "malab/grid.hpp"

#include <chrono>
#include <functional>
#include <numeric>
#include <optional>

namespace malab {

// ---------------------------------------------------------------------------
// Wide stencil: orthogonal bases of integer directions with |v|_inf <= W
// ---------------------------------------------------------------------------

struct Stencil {
    int n = 2;
    int W = 2;
    std::vector<std::vector<int>> directions;         // unique directions
    std::vector<std::vector<int>> bases;              // index lists into directions
    std::vector<double> dir_sqnorm;

    static Stencil make(int n, int W = 2) {
        Stencil s;
        s.n = n;
        s.W = W;
        if (n == 1) {
            s.directions = {{1}};
            s.dir_sqnorm = {1.0};
            s.bases = {{0}};
            return s;
        }
        auto canon = [](std::vector<int> v) {
            for (int c : v) {
                if (c > 0) break;
                if (c < 0) {
                    for (auto& x : v) x = -x;
                    break;
                }
            }
            return v;
        };
        auto gcd_all = [](const std::vector<int>& v) {
            int g = 0;
            for (int c : v) g = std::gcd(g, std::abs(c));
            return g;
        };
        // enumerate primitive canonical directions
        std::vector<std::vector<int>> dirs;
        std::vector<int> d(n, -W);
        while (true) {
            bool nonzero = false;
            for (int c : d) nonzero |= (c != 0);
            if (nonzero && gcd_all(d) == 1) {
                auto c = canon(d);
                if (std::find(dirs.begin(), dirs.end(), c) == dirs.end()) dirs.push_back(c);
            }
            int j = 0;
            for (; j < n; ++j) {
                if (++d[j] <= W) break;
                d[j] = -W;
            }
            if (j == n) break;
        }
        std::sort(dirs.begin(), dirs.end());
        auto dot = [n](const std::vector<int>& a, const std::vector<int>& b) {
            long s = 0;
            for (int j = 0; j < n; ++j) s += long(a[j]) * b[j];
            return s;
        };
        std::vector<std::vector<int>> basis_sets;
        if (n == 2) {
            for (std::size_t i = 0; i < dirs.size(); ++i)
                for (std::size_t j = i + 1; j < dirs.size(); ++j)
                    if (dot(dirs[i], dirs[j]) == 0)
                        basis_sets.push_back({int(i), int(j)});
        } else {
            for (std::size_t i = 0; i < dirs.size(); ++i)
                for (std::size_t j = i + 1; j < dirs.size(); ++j) {
                    if (dot(dirs[i], dirs[j]) != 0) continue;
                    // third direction parallel to the cross product
                    std::vector<int> c = {
                        dirs[i][1] * dirs[j][2] - dirs[i][2] * dirs[j][1],
                        dirs[i][2] * dirs[j][0] - dirs[i][0] * dirs[j][2],
                        dirs[i][0] * dirs[j][1] - dirs[i][1] * dirs[j][0]};
                    int g = gcd_all(c);
                    if (g == 0) continue;
                    for (auto& x : c) x /= g;
                    bool fits = true;
                    for (int x : c) fits &= (std::abs(x) <= W);
                    if (!fits) continue;
                    auto cc = canon(c);
                    auto it = std::find(dirs.begin(), dirs.end(), cc);
                    if (it == dirs.end()) continue;
                    int k = int(it - dirs.begin());
                    std::vector<int> b = {int(i), int(j), k};
                    std::sort(b.begin(), b.end());
                    if (b[0] == b[1] || b[1] == b[2]) continue;
                    if (std::find(basis_sets.begin(), basis_sets.end(), b) == basis_sets.end())
                        basis_sets.push_back(b);
                }
        }
        std::sort(basis_sets.begin(), basis_sets.end());
        s.directions = std::move(dirs);
        s.bases = std::move(basis_sets);
        for (const auto& v : s.directions) {
            double q = 0;
            for (int c : v) q += double(c) * c;
            s.dir_sqnorm.push_back(q);
        }
        return s;
    }
};

// ---------------------------------------------------------------------------
// The discrete MA operator
// ---------------------------------------------------------------------------

struct MaApply {
    double residual = 0;
    bool clipped = false;  // some direction fell back to unequal arms
};

namespace detail {

// Arm pair (k+, k-) along ±v available in the mask; (0,0) when unusable.
inline std::pair<int, int> arms_for(const ConvexGridFunction& u, std::int64_t f,
                                    const std::vector<int>& v) {
    auto probe = [&](int k, int sgn) {
        std::vector<int> d(v.size());
        for (std::size_t j = 0; j < v.size(); ++j) d[j] = sgn * k * v[j];
        return u.offset_node(f, d) >= 0;
    };
    if (probe(1, +1) && probe(1, -1)) return {1, 1};
    if (probe(1, +1) && probe(2, -1)) return {1, 2};
    if (probe(2, +1) && probe(1, -1)) return {2, 1};
    return {0, 0};
}

// Unequal-arm centered second difference along v (exact on quadratics):
//   Delta = 2[(u(x + k+ v) - u(x))/k+ + (u(x - k- v) - u(x))/k-]
//           / ((k+ + k-) h^2 |v|^2)
inline bool second_difference(const ConvexGridFunction& u, std::int64_t f,
                              const std::vector<int>& v, double sqnorm,
                              double* delta, bool* clipped) {
    auto [kp, km] = arms_for(u, f, v);
    if (kp <= 0 || km <= 0) return false;
    std::vector<int> dp(v.size()), dm(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        dp[j] = kp * v[j];
        dm[j] = -km * v[j];
    }
    std::int64_t a = u.offset_node(f, dp);
    std::int64_t b = u.offset_node(f, dm);
    if (a < 0 || b < 0) return false;
    const double h2 = u.h() * u.h() * sqnorm;
    const double uc = u.value(f);
    *delta = 2.0 * ((u.value(a) - uc) / kp + (u.value(b) - uc) / km) /
             ((kp + km) * h2);
    if (kp != km) *clipped = true;
    return true;
}

}  // namespace detail

/// min over orthogonal bases of prod_i max(Delta_{v_i} u, 0) - f(node).
/// Drops bases with unusable directions; falls back to unequal arms near the
/// boundary (flagged clipped, first-order there).
inline MaApply ma_operator_apply(const ConvexGridFunction& u, std::int64_t node,
                                 double f_value, const Stencil& st) {
    MaApply r;
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& basis : st.bases) {
        double prod = 1.0;
        bool ok = true;
        bool clip = false;
        for (int di : basis) {
            double delta;
            if (!detail::second_difference(u, node, st.directions[di], st.dir_sqnorm[di],
                                           &delta, &clip)) {
                ok = false;
                break;
            }
            prod *= std::max(delta, 0.0);
        }
        if (!ok) {
            r.clipped = true;  // basis dropped: reduced directional resolution
            continue;
        }
        any = true;
        if (clip) r.clipped = true;
        best = std::min(best, prod);
    }
    if (!any) throw StencilClipped("ma_operator_apply: no usable basis at node");
    r.residual = best - f_value;
    return r;
}

// ---------------------------------------------------------------------------
// Problem specification
// ---------------------------------------------------------------------------

enum class BcType { Oblique, Robin, Dirichlet };

struct BoundaryRegion {
    BcType type = BcType::Oblique;
    std::function<bool(const BoundarySample&)> covers;  // nullptr = covers all
    std::function<Vec(const Vec&)> beta;
    std::function<double(const Vec&)> phi;
    std::function<double(const Vec&)> gamma;      // Robin only, >= gamma0 > 0
    std::function<double(const Vec&)> dirichlet;  // ambient extension of the data
};

struct ProblemSpec {
    ConvexDomain domain{ConvexDomain::ball(Vec::Zero(2), 1.0)};
    std::function<double(const Vec&)> f;
    double lambda = 1.0, Lambda = 1.0;
    std::vector<BoundaryRegion> regions;
    std::optional<Vec> anchor;  // pins u = 0 there for pure-oblique problems

    void validate() const {
        if (!(lambda > 0)) throw ConfigError("ProblemSpec: lambda must be positive");
        if (regions.empty()) throw ConfigError("ProblemSpec: no boundary regions");
        for (const auto& r : regions)
            if (r.type == BcType::Robin && !r.gamma)
                throw ConfigError("ProblemSpec: Robin region without gamma");
    }

    bool pure_oblique() const {
        for (const auto& r : regions)
            if (r.type != BcType::Oblique) return false;
        return true;
    }
};

struct SolverOptions {
    double h = 1.0 / 32.0;
    double tol = 1e-8;          // on the max residual (defaults scaled by Lambda)
    int max_iter = 100000;      // sweeps
    double omega = 0.9;         // damping
    bool jacobi = false;        // Jacobi (symmetry-preserving) vs Gauss-Seidel
    int env_every = 50;         // directional re-envelope cadence; 0 = off
    int bc_order = 2;           // 1 = single-foot upwind, 2 = two-foot upwind
    int stencil_W = 2;
    int coarse_levels = 2;      // cascadic initialization levels
    bool trace = false;         // print residual progress (debugging aid)
    std::function<double(const Vec&)> initial_guess;  // optional, clamped to u-
};

struct ConvergenceReport {
    int iterations = 0;
    double final_residual = 0;
    bool converged = false;
    bool barrier_certified = false;
    double wall_time_s = 0;
    double anchor_defect = 0;      // MA residual at the pinned anchor node
    double lower_barrier_gap = 0;  // min(u - u^-) over nodes
    double upper_bound = 0;        // max u (vs the constant supersolution)
};

struct SolveResult {
    ConvexGridFunction u;
    ConvergenceReport report;
    double subsolution_a = 0;  // u^- = a|x - y|^2 - K2
    Vec subsolution_y;
    double subsolution_K2 = 0;
};

// ---------------------------------------------------------------------------
// Boundary operator
// ---------------------------------------------------------------------------

namespace detail {

struct BcNode {
    std::int64_t node = -1;
    BcType type = BcType::Oblique;
    double phi = 0, gamma = 0, dirichlet = 0;
    // single-foot upwind: residual = (I1 - u0)/tau + corr - phi - gamma u0.
    // corr is a frozen Taylor correction, re-estimated from the iterate:
    //   corr = -(tau/2) beta^T H beta + (y - x_b)^T H beta
    // cancelling the one-sided truncation and the band offset to the
    // projected boundary point y (exact on quadratics).
    std::vector<std::pair<std::int64_t, double>> w1;
    double tau = 0;
    double corr = 0;
    Vec beta;
    Vec offset;               // y - x_b
    std::int64_t hess_at = -1;  // interior node used for the frozen Hessian
};

inline double bc_residual(const ConvexGridFunction& u, const BcNode& b) {
    const double u0 = u.value(b.node);
    if (b.type == BcType::Dirichlet) return u0 - b.dirichlet;
    double i1 = 0;
    for (const auto& [f, w] : b.w1) i1 += w * u.value(f);
    return (i1 - u0) / b.tau + b.corr - b.phi - b.gamma * u0;
}

// Value at the node that zeroes the boundary residual (neighbors frozen).
inline double bc_lift(const ConvexGridFunction& u, const BcNode& b) {
    if (b.type == BcType::Dirichlet) return b.dirichlet;
    double i1 = 0, wself = 0;
    for (const auto& [f, w] : b.w1) {
        if (f == b.node) wself += w;
        else i1 += w * u.value(f);
    }
    const double denom = (1.0 - wself) / b.tau + b.gamma;
    return (i1 / b.tau + b.corr - b.phi) / denom;
}

inline void refresh_bc_correction(const ConvexGridFunction& u, BcNode& b, double relax) {
    if (b.type == BcType::Dirichlet || b.hess_at < 0) return;
    Mat H;
    if (!u.hessian(b.hess_at, &H)) return;
    const double est = -(0.5 * b.tau) * b.beta.dot(H * b.beta) + b.offset.dot(H * b.beta);
    b.corr = (1.0 - relax) * b.corr + relax * est;
}

}  // namespace detail

/// The spec-level oblique/Robin residual at a boundary node: single foot at
/// x0 + tau beta0 with convex (multilinear) interpolation.
inline double apply_oblique_bc(const ConvexGridFunction& u, std::int64_t x0, const Vec& beta0,
                               double phi0, double gamma0, double tau) {
    Vec x = u.point(x0);
    double v;
    Vec foot = x + tau * beta0;
    if (!u.interpolate(foot, &v))
        throw FootOutside("apply_oblique_bc: foot point not interpolable");
    return (v - u.value(x0)) / tau - phi0 - gamma0 * u.value(x0);
}

// ---------------------------------------------------------------------------
// The solve
// ---------------------------------------------------------------------------

namespace detail {

struct Workspace {
    ConvexGridFunction u;
    std::vector<std::int64_t> ma_nodes;       // nodes with MA equations
    std::vector<BcNode> bc;                   // boundary nodes with operators
    std::vector<double> fvals;                // f at ma nodes
    std::int64_t anchor_node = -1;
    Stencil st;
};

inline BcNode make_bc_node(const ConvexGridFunction& g, const ConvexDomain& dom,
                           std::int64_t f, const BoundaryRegion& reg,
                           const BoundarySample& bs, bool taylor_correction) {
    BcNode b;
    b.node = f;
    b.type = reg.type;
    if (reg.type == BcType::Dirichlet) {
        b.dirichlet = reg.dirichlet(bs.x);
        return b;
    }
    Vec x = g.point(f);
    Vec beta = reg.beta ? reg.beta(bs.x) : bs.normal;
    b.phi = reg.phi ? reg.phi(bs.x) : 0.0;
    b.gamma = (reg.type == BcType::Robin && reg.gamma) ? reg.gamma(bs.x) : 0.0;
    b.beta = beta;
    b.offset = bs.x - x;

    const double binf = beta.lpNorm<Eigen::Infinity>();
    if (binf < 1e-12) throw FootOutside("boundary beta vanishes");
    double tau = 1.1 * g.h() / binf;  // first foot clears the node's own cell
    bool placed = false;
    for (int attempt = 0; attempt < 10 && !placed; ++attempt) {
        Vec foot1 = x + tau * beta;
        double v;
        std::vector<std::pair<std::int64_t, double>> w1;
        if (g.interpolate(foot1, &v, &w1)) {
            b.tau = tau;
            b.w1 = std::move(w1);
            placed = true;
        } else {
            tau *= (attempt < 4 ? 1.4 : 0.6);  // probe farther in, then closer
        }
    }
    if (!placed) throw FootOutside("boundary foot not interpolable along beta");

    if (taylor_correction) {
        // interior node with a full difference ring, walked inward along beta
        for (double s = 2.0; s <= 8.0; s += 1.0) {
            std::int64_t q = g.node_at(Vec(x + s * g.h() * beta / beta.norm()));
            Mat H;
            if (q >= 0 && g.hessian(q, &H)) {
                b.hess_at = q;
                break;
            }
        }
    }
    return b;
}

// Root of prod_i max(a_i - b_i t, 0) = f over the positive-factor region.
inline double basis_root(const std::vector<double>& a, const std::vector<double>& bb,
                         double f) {
    const int n = int(a.size());
    double tmax = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) tmax = std::min(tmax, a[i] / bb[i]);
    if (f <= 0) return tmax;
    if (n == 1) return (a[0] - f) / bb[0];
    if (n == 2) {
        const double A = bb[0] * bb[1];
        const double B = a[0] * bb[1] + a[1] * bb[0];
        const double C = a[0] * a[1] - f;
        const double disc = std::max(0.0, B * B - 4.0 * A * C);
        return (B - std::sqrt(disc)) / (2.0 * A);
    }
    // n == 3: safeguarded Newton on g(t) = prod(a - b t) - f, decreasing left of tmax
    double hi = tmax;
    double lo = hi - 1.0;
    auto val = [&](double t) {
        double p = 1;
        for (int i = 0; i < n; ++i) p *= (a[i] - bb[i] * t);
        return p - f;
    };
    int guard = 0;
    while (val(lo) < 0 && guard++ < 200) lo -= 2.0 * (hi - lo);
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        double g = val(t);
        if (g > 0) lo = t;
        else hi = t;
        // Newton step
        double dg = 0;
        for (int i = 0; i < n; ++i) {
            double p = -bb[i];
            for (int j = 0; j < n; ++j)
                if (j != i) p *= (a[j] - bb[j] * t);
            dg += p;
        }
        double tn = (std::abs(dg) > 1e-300) ? t - g / dg : 0.5 * (lo + hi);
        if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
        if (std::abs(tn - t) < 1e-15 * (1.0 + std::abs(t))) return tn;
        t = tn;
    }
    return t;
}

// Largest value at the node making the local MA residual <= 0.
inline double ma_lift(const ConvexGridFunction& u, std::int64_t node, double f,
                      const Stencil& st) {
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    const double h2 = u.h() * u.h();
    for (const auto& basis : st.bases) {
        std::vector<double> a, bb;
        a.reserve(basis.size());
        bb.reserve(basis.size());
        bool ok = true;
        for (int di : basis) {
            const auto& v = st.directions[di];
            auto [kp, km] = arms_for(u, node, v);
            if (kp <= 0 || km <= 0) { ok = false; break; }
            std::vector<int> dp(v.size()), dm(v.size());
            for (std::size_t j = 0; j < v.size(); ++j) {
                dp[j] = kp * v[j];
                dm[j] = -km * v[j];
            }
            const double up = u.value(u.offset_node(node, dp));
            const double um = u.value(u.offset_node(node, dm));
            const double s = h2 * st.dir_sqnorm[di] * (kp + km) / 2.0;
            a.push_back((up / kp + um / km) / s);
            bb.push_back((1.0 / kp + 1.0 / km) / s);
        }
        if (!ok) continue;
        any = true;
        best = std::min(best, basis_root(a, bb, f));
    }
    if (!any) throw StencilClipped("ma_lift: no usable basis");
    return best;
}

// One-dimensional lower convex envelope along every stencil direction
// (only lowers values; preserves >= of any convex minorant).
inline void directional_envelope(ConvexGridFunction& u, const Stencil& st) {
    for (const auto& v : st.directions) {
        for (std::int64_t f : u.nodes()) {
            // walk each maximal line once: only start at line heads
            std::vector<int> mv(v.size());
            for (std::size_t j = 0; j < v.size(); ++j) mv[j] = -v[j];
            if (u.offset_node(f, mv) >= 0) continue;
            std::vector<std::int64_t> line{f};
            std::int64_t g = f;
            while (true) {
                g = u.offset_node(g, v);
                if (g < 0) break;
                line.push_back(g);
            }
            if (line.size() < 3) continue;
            // monotone-chain lower hull over (index, value)
            std::vector<std::size_t> hull;
            for (std::size_t i = 0; i < line.size(); ++i) {
                while (hull.size() >= 2) {
                    std::size_t i1 = hull[hull.size() - 2], i2 = hull[hull.size() - 1];
                    double cr = (double(i2) - double(i1)) * (u.value(line[i]) - u.value(line[i1])) -
                                (double(i) - double(i1)) * (u.value(line[i2]) - u.value(line[i1]));
                    if (cr <= 0) hull.pop_back();
                    else break;
                }
                hull.push_back(i);
            }
            std::size_t seg = 0;
            for (std::size_t i = 0; i < line.size(); ++i) {
                while (seg + 1 < hull.size() && hull[seg + 1] < i) ++seg;
                if (seg + 1 >= hull.size()) break;
                std::size_t i1 = hull[seg], i2 = hull[seg + 1];
                if (i <= i1 || i >= i2) continue;
                double t = (double(i) - double(i1)) / (double(i2) - double(i1));
                double env = (1 - t) * u.value(line[i1]) + t * u.value(line[i2]);
                if (env < u.value(line[i])) u.value(line[i]) = env;
            }
        }
    }
}

}  // namespace detail

/// Damped nonlinear Gauss-Seidel/Jacobi sweep solver (Perron-style lift from
/// the subsolution barrier u^- = a|x−y|^2 − K2, Theorem 1.5's shape).
inline SolveResult solve_bvp(const ProblemSpec& spec, const SolverOptions& opt) {
    spec.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const int n = spec.domain.dim();

    // subsolution barrier parameters
    const double bar_a = std::pow(spec.Lambda, 1.0 / n) / 2.0;
    Vec bar_y = spec.anchor ? *spec.anchor : spec.domain.anchor();
    double phi_scale = 1.0;

    SolveResult res;
    ConvexGridFunction* u = nullptr;

    const int levels = std::max(0, opt.coarse_levels);
    std::optional<ConvexGridFunction> prev;

    Stencil st = Stencil::make(n, opt.stencil_W);
    ConvergenceReport rep;

    for (int lev = levels; lev >= 0; --lev) {
        const double h = opt.h * double(1 << lev);
        ConvexGridFunction g(lattice_covering(spec.domain, h), spec.domain);
        if (g.nodes().empty()) throw ConfigError("solve_bvp: empty grid");

        // classify boundary nodes
        std::vector<detail::BcNode> bc;
        for (std::int64_t f : g.boundary_nodes()) {
            BoundarySample bs = spec.domain.project_boundary(g.point(f));
            const BoundaryRegion* reg = nullptr;
            for (const auto& r : spec.regions)
                if (!r.covers || r.covers(bs)) { reg = &r; break; }
            if (!reg) throw ConfigError("solve_bvp: boundary node not covered by any region");
            bc.push_back(detail::make_bc_node(g, spec.domain, f, *reg, bs, opt.bc_order >= 2));
            phi_scale = std::max(phi_scale, std::abs(bc.back().phi));
        }

        // interior equations (MA at interior nodes; boundary nodes carry BCs)
        std::vector<std::int64_t> ma_nodes = g.interior_nodes();
        std::vector<double> fvals(ma_nodes.size());
        for (std::size_t i = 0; i < ma_nodes.size(); ++i) fvals[i] = spec.f(g.point(ma_nodes[i]));

        // anchor node for pure-oblique problems: every equation stays in the
        // system; the constant mode is removed by a global shift each sweep
        std::int64_t anchor_node = -1;
        if (spec.pure_oblique()) {
            Vec y = spec.anchor ? *spec.anchor : spec.domain.anchor();
            anchor_node = g.node_at(y);
            if (anchor_node < 0) {
                auto mi = g.lattice().nearest(y);
                anchor_node = g.lattice().flat(mi);
            }
            if (!g.in_mask(anchor_node))
                throw ConfigError("solve_bvp: anchor outside the grid mask");
        }

        // barrier and initialization
        const double K2 = bar_a * sqr(2.0 * spec.domain.diameter()) +
                          10.0 * (1.0 + phi_scale) * (1.0 + spec.domain.diameter());
        auto barrier = [&](const Vec& x) { return bar_a * (x - bar_y).squaredNorm() - K2; };
        for (std::int64_t f : g.nodes()) {
            double v = barrier(g.point(f));
            if (opt.initial_guess) v = std::max(v, opt.initial_guess(g.point(f)));
            g.value(f) = v;
        }
        if (prev) {
            for (std::int64_t f : g.nodes()) {
                double v;
                if (!prev->interpolate(g.point(f), &v))
                    v = prev->envelope_value(g.point(f));  // P.L. extension off-mask
                g.value(f) = std::max(g.value(f), v);
            }
        }
        for (const auto& b : bc)
            if (b.type == BcType::Dirichlet) g.value(b.node) = b.dirichlet;

        // sweep loop
        const double tol = (lev == 0) ? opt.tol : std::max(opt.tol, 1e-2 * h * h);
        const int max_iter = (lev == 0) ? opt.max_iter : std::min(opt.max_iter, 4000);
        std::vector<double> buf;
        double total_shift = 0, last_shift = 0;
        double true_res = std::numeric_limits<double>::infinity();
        int it = 0;
        const double barrier_slack = 1e-9 * (1.0 + std::abs(K2));
        auto residual_pass = [&]() {
            double r = 0;
            for (std::size_t i = 0; i < ma_nodes.size(); ++i)
                r = std::max(r,
                             std::abs(ma_operator_apply(g, ma_nodes[i], fvals[i], st).residual));
            for (const auto& b : bc)
                if (b.type != BcType::Dirichlet)
                    r = std::max(r, std::abs(detail::bc_residual(g, b)));
            return r;
        };
        for (; it < max_iter; ++it) {
            for (auto& b : bc) detail::refresh_bc_correction(g, b, 0.5);
            if (opt.jacobi) buf = g.raw_values();
            auto put = [&](std::int64_t f, double v) {
                if (opt.jacobi) buf[f] = v;
                else g.value(f) = v;
            };
            for (std::size_t i = 0; i < ma_nodes.size(); ++i) {
                const std::int64_t f = ma_nodes[i];
                // Perron semantics: the iterate never drops below u^-
                const double lift =
                    std::max(detail::ma_lift(g, f, fvals[i], st),
                             barrier(g.point(f)) - total_shift);
                const double old = g.value(f);
                put(f, old + opt.omega * (lift - old));
            }
            for (const auto& b : bc) {
                if (b.type == BcType::Dirichlet) continue;
                const double lift = std::max(detail::bc_lift(g, b),
                                             barrier(g.point(b.node)) - total_shift);
                const double old = g.value(b.node);
                put(b.node, old + opt.omega * (lift - old));
            }
            if (opt.jacobi) g.raw_values() = buf;
            if (anchor_node >= 0) {
                last_shift = g.value(anchor_node);
                total_shift += last_shift;
                for (std::int64_t f : g.nodes()) g.value(f) -= last_shift;
            }
            if (opt.env_every > 0 && (it + 1) % opt.env_every == 0)
                detail::directional_envelope(g, st);
            // barrier integrity (the anchored iterate carries the accumulated shift)
            for (std::int64_t f : g.nodes())
                if (g.value(f) + total_shift < barrier(g.point(f)) - barrier_slack) {
#ifdef MALAB_DEBUG_BARRIER
                    std::printf("barrier break it=%d node=%lld val=%g shift=%g bar=%g\n", it,
                                (long long)f, g.value(f), total_shift, barrier(g.point(f)));
#endif
                    throw SubsolutionViolation("solve_bvp: iterate dropped below u^-");
                }
            if ((it + 1) % 20 == 0 || it + 1 == max_iter) {
                true_res = residual_pass();
                if (opt.trace && (it + 1) % 200 < 20)
                    std::printf("  [solve] lev=%d h=%.5f it=%d res=%.3e shift=%.2e\n", lev, h,
                                it + 1, true_res, last_shift);
                if (true_res <= tol) { ++it; break; }
            }
        }
        if (!(true_res <= tol) || std::isinf(true_res)) true_res = residual_pass();

        if (lev == 0) {
            rep.iterations = it;
            rep.final_residual = true_res;
            rep.converged = (true_res <= tol);
            rep.anchor_defect = std::abs(last_shift);
            double lower_gap = std::numeric_limits<double>::infinity();
            double upper = -std::numeric_limits<double>::infinity();
            for (std::int64_t f : g.nodes()) {
                lower_gap = std::min(lower_gap, g.value(f) + total_shift - barrier(g.point(f)));
                upper = std::max(upper, g.value(f));
            }
            rep.lower_barrier_gap = lower_gap;
            rep.upper_bound = upper;
            rep.barrier_certified = rep.converged && lower_gap > -barrier_slack && upper < K2;
            res.u = std::move(g);
            res.subsolution_a = bar_a;
            res.subsolution_y = bar_y;
            res.subsolution_K2 = K2;
        } else {
            prev = std::move(g);
        }
    }

    rep.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    res.report = rep;
    return res;
}

// ---------------------------------------------------------------------------
// Discrete comparison verification (Lemma 2.6 / Lemma 3.3 systems)
// ---------------------------------------------------------------------------

struct ComparisonReport {
    bool hypotheses_hold = true;
    bool conclusion_holds = true;
    std::int64_t witness = -1;  // first failing node of the conclusion
    double worst_gap = 0;       // max(u - v)
};

/// Checks the discrete mixed-system hypotheses (ordered MA residuals in the
/// interior, u < v on the Dirichlet part, ordered single-foot boundary
/// operators on the oblique part) and then the conclusion u < v everywhere.
inline ComparisonReport verify_sub_super(
    const ConvexGridFunction& u, const ConvexGridFunction& v, const Stencil& st,
    const std::vector<std::int64_t>& dirichlet_part,
    const std::vector<std::tuple<std::int64_t, Vec, double>>& oblique_part /* node, beta, tau */) {
    if (u.dim() != v.dim() || u.nodes().size() != v.nodes().size() ||
        u.lattice().size() != v.lattice().size())
        throw MaskMismatch("verify_sub_super: masks differ");
    for (std::size_t i = 0; i < u.nodes().size(); ++i)
        if (u.nodes()[i] != v.nodes()[i]) throw MaskMismatch("verify_sub_super: masks differ");

    ComparisonReport r;
    for (std::int64_t f : u.interior_nodes()) {
        double ru = ma_operator_apply(u, f, 0.0, st).residual;
        double rv = ma_operator_apply(v, f, 0.0, st).residual;
        if (rv > ru + 1e-10 * (1 + std::abs(ru))) r.hypotheses_hold = false;
    }
    for (std::int64_t f : dirichlet_part)
        if (!(u.value(f) < v.value(f))) r.hypotheses_hold = false;
    for (const auto& [f, beta, tau] : oblique_part) {
        double du = apply_oblique_bc(u, f, beta, 0.0, 0.0, tau);
        double dv = apply_oblique_bc(v, f, beta, 0.0, 0.0, tau);
        if (!(dv < du)) r.hypotheses_hold = false;
    }
    for (std::int64_t f : u.nodes()) {
        double gap = u.value(f) - v.value(f);
        if (gap > r.worst_gap) r.worst_gap = gap;
        if (gap >= 0 && r.witness < 0) {
            r.witness = f;
            r.conclusion_holds = false;
        }
    }
    return r;
}

}  // namespace malab
