#pragma once

// The scenario registry: fully-populated problem specifications with their
// reference data (closed forms, expected exponents, symmetry claims).

#include "malab/examples.hpp"
#include "malab/solver.hpp"

#include <map>
#include <sstream>

namespace malab {

struct Scenario {
    std::string name;
    ProblemSpec spec;
    SolverOptions options;
    std::function<double(const Vec&)> reference;  // exact solution when known
    std::optional<QuadraticModel> quadratic;      // exact quadratic when known
    double expected_boundary_exponent = 0;        // gradient Hölder exponent, 0 = n/a
    double reference_alignment_anchor = 0;        // anchored comparisons subtract this
    SingularParams singular;                      // populated for example_10_3
    double fd_det_floor = 0;                      // empirical c(delta) for example_10_3
};

namespace detail {

inline double empirical_det_floor(const SingularParams& p, int samples, std::uint64_t seed) {
    Rng rng(seed);
    auto W = [&](const Vec& x) { return eval_singular_W(x, p).value; };
    double cmin = std::numeric_limits<double>::infinity();
    int accepted = 0;
    while (accepted < samples) {
        Vec x(p.n);
        x[0] = rng.uniform(-0.7, 0.7);
        for (int j = 1; j + 1 < p.n; ++j) x[j] = rng.uniform(-0.7, 0.7);
        x[p.n - 1] = rng.uniform(-0.9 * p.rho, 0.9 * p.rho);
        const double x1 = std::abs(x[0]);
        const double xpp = x.segment(1, p.n - 2).norm();
        if (x1 < 0.05 || xpp < 0.05) continue;
        // keep clear of the branch interface
        const double sA = std::pow(xpp, p.a), sB = std::pow(x1, p.b);
        if (std::abs(sA - sB) < 0.02 * (sA + sB)) continue;
        Mat H = fd_hessian(W, x, 1e-5);
        const double det = H.determinant();
        if (det < cmin) cmin = det;
        ++accepted;
    }
    return cmin;
}

}  // namespace detail

inline Scenario scenario_library(const std::string& name,
                                 const std::map<std::string, double>& params = {}) {
    auto get = [&](const std::string& key, double dflt) {
        auto it = params.find(key);
        return it == params.end() ? dflt : it->second;
    };

    Scenario sc;
    sc.name = name;

    if (name == "disk_neumann") {
        const int n = 2;
        sc.spec.domain = ConvexDomain::ball(Vec::Zero(n), 1.0);
        sc.spec.f = [](const Vec&) { return 1.0; };
        sc.spec.lambda = sc.spec.Lambda = 1.0;
        BoundaryRegion r;
        r.type = BcType::Oblique;
        r.beta = [dom = sc.spec.domain](const Vec& x) { return dom.project_boundary(x).normal; };
        r.phi = [](const Vec&) { return -1.0; };
        sc.spec.regions = {r};
        sc.spec.anchor = Vec::Zero(n);
        sc.reference = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
        sc.options.h = 1.0 / 64.0;
        sc.options.tol = 2e-7;
        return sc;
    }

    if (name == "halfball_liouville") {
        const int n = 2;
        const double a = get("a", 1.0);
        QuadraticModel Q = QuadraticModel::normal_form(n, a);
        sc.quadratic = Q;
        sc.spec.domain = ConvexDomain::half_ball(n, 1.0);
        sc.spec.f = [](const Vec&) { return 1.0; };
        sc.spec.lambda = sc.spec.Lambda = 1.0;
        BoundaryRegion flat;
        flat.type = BcType::Oblique;
        flat.covers = [](const BoundarySample& s) { return s.region == 0; };
        flat.beta = [n](const Vec&) { return Vec(Vec::Unit(n, n - 1)); };
        flat.phi = [a](const Vec& x) { return a * x[0]; };
        BoundaryRegion arc;
        arc.type = BcType::Dirichlet;
        arc.dirichlet = [Q](const Vec& x) { return Q.value(x); };
        sc.spec.regions = {flat, arc};
        sc.reference = [Q](const Vec& x) { return Q.value(x); };
        sc.options.h = 1.0 / 64.0;
        sc.options.tol = 2e-7;
        return sc;
    }

    if (name == "robin_disk") {
        const int n = 2;
        const double gamma = get("gamma", 1.0);
        sc.spec.domain = ConvexDomain::ball(Vec::Zero(n), 1.0);
        sc.spec.f = [](const Vec&) { return 1.0; };
        sc.spec.lambda = sc.spec.Lambda = 1.0;
        BoundaryRegion r;
        r.type = BcType::Robin;
        r.beta = [dom = sc.spec.domain](const Vec& x) { return dom.project_boundary(x).normal; };
        r.phi = [](const Vec&) { return 0.0; };
        r.gamma = [gamma](const Vec&) { return gamma; };
        sc.spec.regions = {r};
        if (std::abs(gamma - 1.0) < 1e-12)
            sc.reference = [](const Vec& x) { return 0.5 * x.squaredNorm() - 1.5; };
        sc.options.h = 1.0 / 32.0;
        sc.options.tol = 1e-7;
        return sc;
    }

    if (name == "degenerate_7_2") {
        const int n = 2;
        const double gap = get("gap", 0.25);
        std::vector<Halfspace> hs;
        for (int j = 0; j < n; ++j)
            for (double s : {1.0, -1.0}) {
                Vec a = Vec::Zero(n);
                a[j] = s;
                hs.push_back({a, 1.0});
            }
        sc.spec.domain = ConvexDomain::polytope(std::move(hs), n);
        sc.spec.f = [gap, n](const Vec& x) { return std::abs(x[n - 1]) >= gap ? 1.0 : 0.0; };
        sc.spec.lambda = 1e-12;  // degenerate right-hand side by construction
        sc.spec.Lambda = 1.0;
        BoundaryRegion r;
        r.type = BcType::Dirichlet;
        r.dirichlet = [](const Vec&) { return 0.0; };
        sc.spec.regions = {r};
        sc.options.h = 1.0 / 32.0;
        sc.options.tol = 1e-9;
        sc.options.jacobi = true;   // preserves the reflection symmetry exactly
        sc.options.env_every = 0;   // degenerate f: lift handles flat directions
        sc.options.omega = 1.0;
        return sc;
    }

    if (name == "example_10_3") {
        const double delta = get("delta", 0.1);
        const int n = int(get("n", 3));
        SingularParams p = SingularParams::make(delta, n, get("rho", 0.2));
        sc.singular = p;
        const double cfloor = detail::empirical_det_floor(p, 1000, 1234);
        sc.fd_det_floor = cfloor;
        sc.spec.domain = ConvexDomain::cylinder_polytope(get("R", 1.0), p.rho, 64);
        sc.spec.f = [cfloor](const Vec&) { return cfloor; };
        sc.spec.lambda = sc.spec.Lambda = cfloor;
        BoundaryRegion r;
        r.type = BcType::Dirichlet;
        r.dirichlet = [p](const Vec& x) { return eval_singular_W(x, p).value; };
        sc.spec.regions = {r};
        sc.expected_boundary_exponent = p.a - 1.0;
        sc.options.h = 1.0 / 40.0;
        sc.options.tol = 5e-5;
        sc.options.jacobi = true;  // x1-symmetry of the data is preserved exactly
        sc.options.omega = 1.0;
        sc.options.env_every = 0;
        sc.options.initial_guess = [p](const Vec& x) { return eval_singular_W(x, p).value; };
        return sc;
    }

    throw UnknownScenario("scenario_library: unknown scenario '" + name + "'");
}

}  // namespace malab
