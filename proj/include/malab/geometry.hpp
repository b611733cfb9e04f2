#pragma once

// Convex domains, oblique vector fields, John ellipsoids and quasi-symmetry:
// the set-level substrate everything else runs on.

#include "malab/common.hpp"
#include "malab/lp.hpp"

#include <functional>
#include <memory>
#include <utility>

namespace malab {

/// Invertible affine map x -> M x + t with cached determinant.
struct AffineMap {
    Mat M;
    Vec t;
    double det = 0;

    AffineMap() = default;
    AffineMap(Mat M_, Vec t_) : M(std::move(M_)), t(std::move(t_)) { det = M.determinant(); }

    static AffineMap identity(int n) { return {Mat::Identity(n, n), Vec::Zero(n)}; }

    Vec operator()(const Vec& x) const { return M * x + t; }
    AffineMap inverse() const {
        Mat Mi = M.inverse();
        return {Mi, -(Mi * t)};
    }
    AffineMap compose(const AffineMap& inner) const {  // this ∘ inner
        return {M * inner.M, M * inner.t + t};
    }
};

struct BoundarySample {
    Vec x;        // point on the boundary
    Vec normal;   // inward unit normal (or a representative for corners)
    int region = 0;  // boundary-region id (used by the solver's BC table)
};

/// Bounded convex region. Variants cover the analytic shapes the scenarios
/// use plus a generic halfspace polytope.
class ConvexDomain {
public:
    enum class Kind { Ball, Ellipsoid, HalfBall, Epigraph, Polytope };

    static ConvexDomain ball(Vec center, double radius) {
        ConvexDomain d;
        d.kind_ = Kind::Ball;
        d.n_ = int(center.size());
        d.center_ = std::move(center);
        d.radius_ = radius;
        d.finish();
        return d;
    }

    /// {x : (x-c)^T A (x-c) <= 1}, A SPD.
    static ConvexDomain ellipsoid(Vec center, Mat A) {
        ConvexDomain d;
        d.kind_ = Kind::Ellipsoid;
        d.n_ = int(center.size());
        d.center_ = std::move(center);
        d.A_ = std::move(A);
        d.finish();
        return d;
    }

    /// {|x| <= radius, x_n >= 0}
    static ConvexDomain half_ball(int n, double radius) {
        ConvexDomain d;
        d.kind_ = Kind::HalfBall;
        d.n_ = n;
        d.center_ = Vec::Zero(n);
        d.radius_ = radius;
        d.finish();
        return d;
    }

    /// Local epigraph {x_n >= g(x'), |x'|_inf <= extent, x_n <= cap} with g a
    /// convex piecewise-linear function given as max of affine pieces
    /// g(x') = max_k (slope_k · x' + off_k), g(0) = 0, 0 <= g <= C|x'|.
    static ConvexDomain epigraph(int n, std::vector<std::pair<Vec, double>> pieces,
                                 double extent, double cap) {
        ConvexDomain d;
        d.kind_ = Kind::Epigraph;
        d.n_ = n;
        d.pieces_ = std::move(pieces);
        d.extent_ = extent;
        d.cap_ = cap;
        d.center_ = Vec::Zero(n);
        d.center_[n - 1] = cap / 2;
        d.finish();
        return d;
    }

    static ConvexDomain polytope(std::vector<Halfspace> hs, int n) {
        ConvexDomain d;
        d.kind_ = Kind::Polytope;
        d.n_ = n;
        d.hs_ = std::move(hs);
        // crude interior point: average of per-face foot points
        Vec c = Vec::Zero(n);
        for (const auto& h : d.hs_) c += h.a * (h.b / h.a.squaredNorm());
        d.center_ = c / double(d.hs_.size());
        d.finish();
        return d;
    }

    /// Regular m-gon approximation of a disk cross a slab: the Example-10.3
    /// cylinder B'_R x [-rho, rho] in 3D.
    static ConvexDomain cylinder_polytope(double R, double rho, int m = 64) {
        std::vector<Halfspace> hs;
        for (int k = 0; k < m; ++k) {
            double th = 2.0 * M_PI * k / m;
            Vec a = Vec::Zero(3);
            a[0] = std::cos(th);
            a[1] = std::sin(th);
            hs.push_back({a, R});
        }
        for (double s : {1.0, -1.0}) {
            Vec a = Vec::Zero(3);
            a[2] = s;
            hs.push_back({a, rho});
        }
        return polytope(std::move(hs), 3);
    }

    int dim() const { return n_; }
    Kind kind() const { return kind_; }
    double tolerance() const { return tol_; }
    void set_tolerance(double t) { tol_ = t; }
    double diameter() const { return diam_; }
    const Vec& anchor() const { return center_; }

    /// Signed "outside-ness": <= 0 inside, units of length (approximately).
    double boundary_excess(const Vec& x) const {
        switch (kind_) {
            case Kind::Ball:
                return (x - center_).norm() - radius_;
            case Kind::Ellipsoid: {
                double q = std::sqrt(std::max(0.0, (x - center_).dot(A_ * (x - center_))));
                return (q - 1.0) * radius_;  // radius_ caches 1/sqrt(lambda_max)
            }
            case Kind::HalfBall:
                return std::max(x.norm() - radius_, -x[n_ - 1]);
            case Kind::Epigraph: {
                Vec xp = x.head(n_ - 1);
                double e = g_eval(xp) - x[n_ - 1];
                e = std::max(e, x[n_ - 1] - cap_);
                e = std::max(e, xp.lpNorm<Eigen::Infinity>() - extent_);
                return e;
            }
            case Kind::Polytope: {
                double e = -std::numeric_limits<double>::infinity();
                for (const auto& h : hs_) e = std::max(e, (h.a.dot(x) - h.b) / h.a.norm());
                return e;
            }
        }
        return 0;
    }

    bool contains(const Vec& x, double slack) const { return boundary_excess(x) <= slack; }
    bool contains(const Vec& x) const { return contains(x, tol_); }

    /// Nearest boundary point (first order for non-analytic variants) plus
    /// the inward unit normal there.
    BoundarySample project_boundary(const Vec& x) const {
        BoundarySample s;
        switch (kind_) {
            case Kind::Ball: {
                Vec d = x - center_;
                double r = d.norm();
                if (r < 1e-14) { d = Vec::Zero(n_); d[0] = 1; r = 1; }
                s.x = center_ + d * (radius_ / r);
                s.normal = -d / r;
                return s;
            }
            case Kind::HalfBall: {
                // pick the closer of the flat part and the arc
                Vec flat = x;
                flat[n_ - 1] = 0.0;
                double df = std::abs(x[n_ - 1]);
                bool flat_ok = flat.norm() <= radius_;
                Vec d = x - center_;
                double r = d.norm();
                Vec arc = (r < 1e-14) ? center_ + radius_ * Vec::Unit(n_, n_ - 1)
                                      : Vec(center_ + d * (radius_ / r));
                if (arc[n_ - 1] < 0) {  // clamp to the rim
                    arc[n_ - 1] = 0;
                    double pn = arc.norm();
                    if (pn > 1e-14) arc *= radius_ / pn;
                }
                double da = (x - arc).norm();
                if (flat_ok && df <= da) {
                    s.x = flat;
                    s.normal = Vec::Unit(n_, n_ - 1);
                    s.region = 0;  // flat part
                } else {
                    s.x = arc;
                    double an = arc.norm();
                    s.normal = (an > 1e-14) ? Vec(-arc / an) : Vec::Unit(n_, n_ - 1);
                    s.region = 1;  // arc
                }
                return s;
            }
            case Kind::Ellipsoid: {
                Vec d = x - center_;
                double q = std::sqrt(std::max(1e-30, d.dot(A_ * d)));
                s.x = center_ + d / q;
                Vec nrm = -(A_ * (s.x - center_));
                s.normal = nrm / std::max(nrm.norm(), 1e-30);
                return s;
            }
            case Kind::Epigraph: {
                Vec xp = x.head(n_ - 1);
                s.x = x;
                s.x[n_ - 1] = g_eval(xp);
                Vec slope = g_slope(xp);
                Vec nrm(n_);
                nrm.head(n_ - 1) = -slope;
                nrm[n_ - 1] = 1.0;
                s.normal = nrm / nrm.norm();
                return s;
            }
            case Kind::Polytope: {
                int best = 0;
                double bd = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < hs_.size(); ++i) {
                    double e = (hs_[i].a.dot(x) - hs_[i].b) / hs_[i].a.norm();
                    if (e > bd) { bd = e; best = int(i); }
                }
                const auto& h = hs_[best];
                double nn = h.a.norm();
                s.x = x - ((h.a.dot(x) - h.b) / (nn * nn)) * h.a;
                s.normal = -h.a / nn;
                s.region = best;
                return s;
            }
        }
        return s;
    }

    /// Deterministic boundary sample set: rays from the anchor point.
    std::vector<BoundarySample> boundary_samples(int count) const {
        std::vector<BoundarySample> out;
        auto dirs = sample_directions(n_, count);
        for (const auto& d : dirs) {
            double lo = 0, hi = 4.0 * diam_ + 1.0;
            for (int it = 0; it < 80; ++it) {
                double mid = 0.5 * (lo + hi);
                if (contains(center_ + mid * d, 0.0)) lo = mid;
                else hi = mid;
            }
            out.push_back(project_boundary(center_ + lo * d));
        }
        return out;
    }

    /// Axis-aligned bounding box [lo, hi].
    std::pair<Vec, Vec> bounding_box() const {
        Vec lo(n_), hi(n_);
        for (int j = 0; j < n_; ++j) {
            lo[j] = support(-Vec::Unit(n_, j)) * -1.0;
            hi[j] = support(Vec::Unit(n_, j));
        }
        return {lo, hi};
    }

    /// Support function h(w) = max_{x in domain} w·x (bisection on rays; exact
    /// for balls).
    double support(const Vec& w) const {
        if (kind_ == Kind::Ball) return w.dot(center_) + radius_ * w.norm();
        double lo = 0, hi = 4.0 * diam_ + 1.0;
        // max over sampled boundary directions: ray-march in direction w
        Vec d = w / std::max(w.norm(), 1e-30);
        for (int it = 0; it < 80; ++it) {
            double mid = 0.5 * (lo + hi);
            if (contains(center_ + mid * d, 0.0)) lo = mid;
            else hi = mid;
        }
        // polytopes and half-balls are not symmetric around the anchor; refine
        // with a few extra probe directions mixed toward w
        double best = w.dot(center_ + lo * d);
        for (const auto& s : cached_support_probes()) {
            Vec y = s;
            if (contains(y, tol_)) best = std::max(best, w.dot(y));
        }
        return best;
    }

    /// Midpoint-convexity sanity check on sampled members (the invariant).
    bool midpoint_convex(Rng& rng, int trials) const {
        auto [lo, hi] = bounding_box();
        auto sample_member = [&]() {
            for (int k = 0; k < 10000; ++k) {
                Vec x(n_);
                for (int j = 0; j < n_; ++j) x[j] = rng.uniform(lo[j], hi[j]);
                if (contains(x, 0.0)) return x;
            }
            return center_;
        };
        for (int k = 0; k < trials; ++k) {
            Vec p = sample_member(), q = sample_member();
            if (!contains(0.5 * (p + q), tol_)) return false;
        }
        return true;
    }

    // Epigraph accessors (used by local-problem scenarios)
    double g_eval(const Vec& xp) const {
        double v = 0.0;
        for (const auto& pc : pieces_) v = std::max(v, pc.first.dot(xp) + pc.second);
        return v;
    }
    Vec g_slope(const Vec& xp) const {
        double v = 0.0;
        Vec s = Vec::Zero(n_ - 1);
        for (const auto& pc : pieces_) {
            double w = pc.first.dot(xp) + pc.second;
            if (w > v) { v = w; s = pc.first; }
        }
        return s;
    }
    const std::vector<Halfspace>& halfspaces() const { return hs_; }
    double radius() const { return radius_; }

private:
    void finish() {
        switch (kind_) {
            case Kind::Ball: diam_ = 2 * radius_; break;
            case Kind::HalfBall: diam_ = 2 * radius_; break;
            case Kind::Ellipsoid: {
                Eigen::SelfAdjointEigenSolver<Mat> es(A_);
                radius_ = 1.0 / std::sqrt(es.eigenvalues().maxCoeff());
                diam_ = 2.0 / std::sqrt(es.eigenvalues().minCoeff());
                break;
            }
            case Kind::Epigraph:
                diam_ = std::sqrt(sqr(2 * extent_) * (n_ - 1) + sqr(cap_));
                break;
            case Kind::Polytope: {
                double r = 0;
                for (const auto& d : sample_directions(n_, n_ == 2 ? 256 : 512)) {
                    double lo = 0, hi = 1e6;
                    for (int it = 0; it < 60; ++it) {
                        double mid = 0.5 * (lo + hi);
                        bool in = true;
                        for (const auto& h : hs_)
                            if (h.a.dot(center_ + mid * d) > h.b) { in = false; break; }
                        if (in) lo = mid;
                        else hi = mid;
                    }
                    r = std::max(r, lo);
                }
                diam_ = 2 * r;
                break;
            }
        }
        tol_ = 1e-9 * std::max(diam_, 1e-9);
        probes_.clear();
    }

    const std::vector<Vec>& cached_support_probes() const {
        if (probes_.empty()) {
            auto dirs = sample_directions(n_, n_ == 2 ? 512 : 2048);
            for (const auto& d : dirs) {
                double lo = 0, hi = 4.0 * diam_ + 1.0;
                for (int it = 0; it < 60; ++it) {
                    double mid = 0.5 * (lo + hi);
                    if (contains(center_ + mid * d, 0.0)) lo = mid;
                    else hi = mid;
                }
                probes_.push_back(center_ + lo * d);
            }
        }
        return probes_;
    }

    Kind kind_ = Kind::Ball;
    int n_ = 2;
    Vec center_;
    double radius_ = 1.0;
    Mat A_;
    std::vector<std::pair<Vec, double>> pieces_;
    double extent_ = 1.0, cap_ = 1.0;
    std::vector<Halfspace> hs_;
    double tol_ = 1e-9;
    double diam_ = 2.0;
    mutable std::vector<Vec> probes_;
};

/// Oblique boundary vector field with its declared constants.
struct ObliqueField {
    std::function<Vec(const Vec&)> beta;
    double a = 1.0;    // norm bounds a <= |beta| <= 1/a
    double eta = 0.5;  // inner-cone radius

    static ObliqueField inward_normal(const ConvexDomain& dom, double a = 1.0,
                                      double eta = 0.5) {
        ObliqueField f;
        f.beta = [dom](const Vec& x) { return dom.project_boundary(x).normal; };
        f.a = a;
        f.eta = eta;
        return f;
    }
    static ObliqueField constant(Vec b, double a, double eta) {
        ObliqueField f;
        f.beta = [b](const Vec&) { return b; };
        f.a = a;
        f.eta = eta;
        return f;
    }
};

/// Minimum-volume enclosing ellipsoid by Khachiyan barycentric ascent.
/// Returns the affine map T with T(hull) ⊂ B_1 (normalized to touch) and the
/// sampled inner ratio max{s : s·B_1 ⊂ T(hull)}.
inline std::pair<AffineMap, double> john_ellipsoid(const std::vector<Vec>& points,
                                                   double dual_gap_tol = 1e-7,
                                                   int max_iter = 200000) {
    if (points.empty()) throw DegenerateHull("john_ellipsoid: empty input");
    const int n = int(points[0].size());
    const int m = int(points.size());
    if (m < n + 1) throw DegenerateHull("john_ellipsoid: need at least n+1 points");

    // affine-dependence test
    Vec mean = Vec::Zero(n);
    for (const auto& p : points) mean += p;
    mean /= double(m);
    Mat X(n, m);
    double scale = 1e-30;
    for (int i = 0; i < m; ++i) {
        X.col(i) = points[i] - mean;
        scale = std::max(scale, X.col(i).norm());
    }
    Eigen::JacobiSVD<Mat> svd(X);
    if (svd.singularValues()[n - 1] <= 1e-10 * scale)
        throw DegenerateHull("john_ellipsoid: points are affinely dependent");

    // Khachiyan iteration on lifted points q = (p, 1)
    Mat Q(n + 1, m);
    for (int i = 0; i < m; ++i) {
        Q.col(i).head(n) = points[i];
        Q(n, i) = 1.0;
    }
    Vec u = Vec::Constant(m, 1.0 / m);
    for (int it = 0; it < max_iter; ++it) {
        Mat M = Q * u.asDiagonal() * Q.transpose();
        Mat Mi = M.inverse();
        int j = 0;
        double kmax = -1;
        for (int i = 0; i < m; ++i) {
            double k = Q.col(i).dot(Mi * Q.col(i));
            if (k > kmax) { kmax = k; j = i; }
        }
        if (kmax <= (n + 1) * (1.0 + dual_gap_tol)) break;
        double step = (kmax - (n + 1)) / ((n + 1) * (kmax - 1.0));
        u *= (1.0 - step);
        u[j] += step;
    }

    Vec c = Vec::Zero(n);
    for (int i = 0; i < m; ++i) c += u[i] * points[i];
    Mat S = Mat::Zero(n, n);
    for (int i = 0; i < m; ++i) S += u[i] * (points[i] - c) * (points[i] - c).transpose();
    Mat A = S.inverse() / double(n);  // ellipsoid {x : (x-c)^T A (x-c) <= 1}

    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    Mat T = es.operatorSqrt();

    // normalize so the image exactly touches the unit sphere
    double rmax = 0;
    for (const auto& p : points) rmax = std::max(rmax, (T * (p - c)).norm());
    if (rmax > 1e-300) T /= rmax;

    AffineMap map{T, -(T * c)};
    // inner ratio about the origin of the image: exact via hull edges in 2D,
    // dense sampling with local refinement in 3D
    std::vector<Vec> img;
    img.reserve(m);
    for (const auto& p : points) img.push_back(map(p));
    double inner = std::numeric_limits<double>::infinity();
    if (n == 1) {
        double lo = 0, hi = 0;
        for (const auto& q : img) {
            lo = std::min(lo, q[0]);
            hi = std::max(hi, q[0]);
        }
        inner = std::min(-lo, hi);
    } else if (n == 2) {
        std::vector<Eigen::Vector2d> p2;
        for (const auto& q : img) p2.emplace_back(q[0], q[1]);
        for (const auto& e : poly_halfspaces(convex_hull_2d(p2)))
            inner = std::min(inner, e.b / e.a.norm());
    } else {
        auto support = [&](const Vec& w) {
            double h = -std::numeric_limits<double>::infinity();
            for (const auto& q : img) h = std::max(h, w.dot(q));
            return h;
        };
        std::vector<std::pair<double, Vec>> seeds;
        for (const auto& w : sample_directions(n, 8192)) seeds.push_back({support(w), w});
        std::sort(seeds.begin(), seeds.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t k = 0; k < std::min<std::size_t>(24, seeds.size()); ++k) {
            Vec w = seeds[k].second;
            double best = seeds[k].first;
            double step = 0.05;
            while (step > 1e-7) {
                bool improved = false;
                for (int j = 0; j < n; ++j)
                    for (double sgn : {1.0, -1.0}) {
                        Vec w2 = (w + sgn * step * Vec::Unit(n, j)).normalized();
                        double h2 = support(w2);
                        if (h2 < best) {
                            best = h2;
                            w = w2;
                            improved = true;
                        }
                    }
                if (!improved) step *= 0.5;
            }
            inner = std::min(inner, best);
        }
    }
    return {map, std::max(0.0, inner)};
}

/// Projection of a point set along beta0 onto the tangent hyperplane through
/// x0 with the given normal; affine in the input.
inline std::vector<Vec> project_along_beta(const std::vector<Vec>& E, const Vec& x0,
                                           const Vec& beta0, const Vec& tangent_normal) {
    const double denom = beta0.dot(tangent_normal);
    if (std::abs(denom) < 1e-12)
        throw TangentParallel("project_along_beta: beta parallel to tangent plane");
    std::vector<Vec> out;
    out.reserve(E.size());
    for (const auto& p : E) {
        const double t = (p - x0).dot(tangent_normal) / denom;
        out.push_back(p - t * beta0);
    }
    return out;
}

/// Largest t with t(x - E) ⊂ E - x (hull containment sampled at the points of
/// E). Definition 2.3's raw symmetry constant about x.
inline double quasi_symmetry_kappa(const std::vector<Vec>& E, const Vec& x) {
    if (E.empty()) throw NotMember("quasi_symmetry_kappa: empty set");
    double diam = 1e-12;
    for (const auto& p : E)
        for (const auto& q : E) diam = std::max(diam, (p - q).norm());
    const double slack = 1e-9 * diam;
    if (separation_margin(E, x) > slack)
        throw NotMember("quasi_symmetry_kappa: x outside hull(E)");

    auto ok = [&](double t) {
        for (const auto& v : E) {
            Vec y = x + t * (x - v);
            if (separation_margin(E, y) > slack) return false;
        }
        return true;
    };
    if (!ok(0.0)) return 0.0;
    double lo = 0.0, hi = 1.0;
    if (ok(1.0)) return 1.0;
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        if (ok(mid)) lo = mid;
        else hi = mid;
    }
    return lo;
}

/// Largest (a, eta) for which the oblique invariants hold on sampled boundary
/// points. a is capped by the norm bounds; eta found by bisection.
inline std::pair<double, double> oblique_constants(
    const ConvexDomain& dom, const ObliqueField& field, int boundary_samples = 64,
    const std::function<bool(const BoundarySample&)>& restrict_to = nullptr) {
    auto samples = dom.boundary_samples(boundary_samples);
    if (restrict_to) {
        std::vector<BoundarySample> kept;
        for (auto& s : samples)
            if (restrict_to(s)) kept.push_back(s);
        samples = std::move(kept);
    }
    if (samples.empty()) throw NotOblique("oblique_constants: no boundary samples");
    double a_norm = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        double nb = field.beta(s.x).norm();
        if (nb < 1e-300) throw NotOblique("oblique_constants: zero field");
        a_norm = std::min({a_norm, nb, 1.0 / nb});
    }
    a_norm = std::min(a_norm, 1.0);

    auto cone_ok = [&](double a, double eta, double slack) {
        std::vector<double> ts;
        for (int k = 1; k <= 12; ++k) ts.push_back(a * k / 12.0 * (k == 12 ? 0.999 : 1.0));
        auto ds = sample_directions(dom.dim(), dom.dim() == 2 ? 16 : 48);
        for (const auto& s : samples) {
            Vec b = field.beta(s.x);
            for (double t : ts)
                for (const auto& d : ds)
                    if (!dom.contains(s.x + t * (b + eta * d), slack)) return false;
        }
        return true;
    };

    // hard floor: (a, eta) = (1e-6, 1e-6) with exact membership
    const double floor_c = 1e-6;
    if (!cone_ok(floor_c, floor_c, 0.0))
        throw NotOblique("oblique_constants: field fails the inner-cone test at the floor");

    // grid search down the a-ladder; "largest pair" = maximal min(a, eta),
    // ties to the larger a (the disk normal keeps a ~ 1, the half-ball flat
    // field trades a down for a fat cone)
    double best_a = 0, best_eta = 0;
    for (double a = a_norm; a >= floor_c * 0.999; a *= 0.5) {
        double a_eff = std::max(a, floor_c);
        if (!cone_ok(a_eff, floor_c, dom.tolerance())) continue;
        double lo = floor_c, hi = 2.0;
        for (int it = 0; it < 30; ++it) {
            double mid = 0.5 * (lo + hi);
            if (cone_ok(a_eff, mid, dom.tolerance())) lo = mid;
            else hi = mid;
        }
        if (std::min(a_eff, lo) > std::min(best_a, best_eta) + 1e-12) {
            best_a = a_eff;
            best_eta = lo;
        }
        if (lo >= a_eff) break;  // eta can only shrink as a grows back; ladder done
    }
    if (best_eta < floor_c || best_a < floor_c)
        throw NotOblique("oblique_constants: field fails the inner-cone test at the floor");
    return {best_a, best_eta};
}

}  // namespace malab
