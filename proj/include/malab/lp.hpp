#pragma once

// Low-dimensional linear programming (Seidel's algorithm) and the small
// polytope utilities built on it: hull membership by separation margin,
// halfspace-intersection volumes in 2D/3D, minimax affine fits.

#include "malab/common.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

namespace malab {

struct Halfspace {
    Vec a;      // outward normal
    double b;   // a·x <= b
};

/// Seidel-style incremental LP for dimension <= 4.
/// maximize c·x  s.t.  a_i·x <= b_i  and  |x_j| <= box.
/// Returns nullopt when infeasible. Deterministic (fixed shuffle seed).
class SmallLp {
public:
    // maximize c·x st A x <= b (rows), |x_i| <= box
    static std::optional<Vec> solve(const std::vector<Vec>& A, const std::vector<double>& b,
                                    const Vec& c, double box) {
        std::vector<Vec> a2 = A;
        std::vector<double> b2 = b;
        // deterministic shuffle for expected-linear behaviour
        std::mt19937_64 eng(0x5eed11u + a2.size());
        std::vector<std::size_t> idx(a2.size());
        std::iota(idx.begin(), idx.end(), 0u);
        std::shuffle(idx.begin(), idx.end(), eng);
        std::vector<Vec> as(a2.size());
        std::vector<double> bs(a2.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            as[i] = a2[idx[i]];
            bs[i] = b2[idx[i]];
        }
        return rec(as, bs, c, box);
    }

private:
    static std::optional<Vec> rec(const std::vector<Vec>& A, const std::vector<double>& b,
                                  const Vec& c, double box) {
        const int d = int(c.size());
        if (d == 1) return solve1d(A, b, c, box);

        // start at the box corner optimal for c
        Vec x(d);
        for (int j = 0; j < d; ++j) x[j] = (c[j] >= 0 ? box : -box);

        for (std::size_t i = 0; i < A.size(); ++i) {
            if (A[i].dot(x) <= b[i] + 1e-11 * (1.0 + std::abs(b[i]))) continue;
            // optimum lies on a_i·x = b_i: eliminate the largest-coefficient var
            int k = 0;
            for (int j = 1; j < d; ++j)
                if (std::abs(A[i][j]) > std::abs(A[i][k])) k = j;
            if (std::abs(A[i][k]) < 1e-13) return std::nullopt;  // contradictory row

            std::vector<Vec> A2;
            std::vector<double> b2;
            A2.reserve(i + 2 * std::size_t(d));
            b2.reserve(i + 2 * std::size_t(d));
            auto reduce_row = [&](Vec a, double rhs) {
                const double f = a[k] / A[i][k];
                a -= f * A[i];
                double r2 = rhs - f * b[i];
                Vec ar(d - 1);
                for (int j = 0, t = 0; j < d; ++j)
                    if (j != k) ar[t++] = a[j];
                A2.push_back(ar);
                b2.push_back(r2);
            };
            for (std::size_t m = 0; m < i; ++m) reduce_row(A[m], b[m]);
            // the box constraints on x_k become linear constraints on the rest
            {
                Vec e = Vec::Zero(d);
                e[k] = 1.0;
                reduce_row(e, box);
                reduce_row(-e, box);
            }
            Vec c2r(d - 1);
            {
                Vec cc = c;
                const double f = cc[k] / A[i][k];
                cc -= f * A[i];
                for (int j = 0, t = 0; j < d; ++j)
                    if (j != k) c2r[t++] = cc[j];
            }
            auto sub = rec(A2, b2, c2r, box);
            if (!sub) return std::nullopt;
            Vec full(d);
            for (int j = 0, t = 0; j < d; ++j)
                if (j != k) full[j] = (*sub)[t++];
            full[k] = (b[i] - [&] {
                double s = 0;
                for (int j = 0; j < d; ++j)
                    if (j != k) s += A[i][j] * full[j];
                return s;
            }()) / A[i][k];
            x = full;
        }
        return x;
    }

    static std::optional<Vec> solve1d(const std::vector<Vec>& A, const std::vector<double>& b,
                                      const Vec& c, double box) {
        double lo = -box, hi = box;
        for (std::size_t i = 0; i < A.size(); ++i) {
            const double a = A[i][0];
            if (std::abs(a) < 1e-14) {
                if (b[i] < -1e-11) return std::nullopt;
                continue;
            }
            if (a > 0) hi = std::min(hi, b[i] / a);
            else lo = std::max(lo, b[i] / a);
        }
        if (lo > hi + 1e-11) return std::nullopt;
        Vec x(1);
        x[0] = (c[0] >= 0 ? hi : lo);
        return x;
    }
};

/// Signed separation margin of p from hull(points): the optimum of
///   max over (w, d), |w|_inf <= 1, of  d   s.t.  w·v_i + d <= w·p.
/// Positive => p lies strictly outside the hull (roughly by that distance);
/// <= 0 => p is inside (or on the boundary).
inline double separation_margin(const std::vector<Vec>& points, const Vec& p) {
    if (points.empty()) return std::numeric_limits<double>::infinity();
    const int n = int(p.size());
    std::vector<Vec> A;
    std::vector<double> b;
    A.reserve(points.size());
    for (const auto& v : points) {
        Vec row(n + 1);
        row.head(n) = v - p;
        row[n] = 1.0;
        A.push_back(row);  // w·(v-p) + d <= 0
        b.push_back(0.0);
    }
    // |w_j| <= 1 explicitly; the box only needs to bound d
    for (int j = 0; j < n; ++j) {
        for (double s : {1.0, -1.0}) {
            Vec row = Vec::Zero(n + 1);
            row[j] = s;
            A.push_back(row);
            b.push_back(1.0);
        }
    }
    Vec c = Vec::Zero(n + 1);
    c[n] = 1.0;
    double scale = 1.0;
    for (const auto& v : points) scale = std::max(scale, (v - p).lpNorm<Eigen::Infinity>());
    auto x = SmallLp::solve(A, b, c, 4.0 * double(n) * scale + 4.0);
    if (!x) return -std::numeric_limits<double>::infinity();
    return (*x)[n];
}

inline bool in_hull(const std::vector<Vec>& points, const Vec& p, double slack) {
    return separation_margin(points, p) <= slack;
}

/// Best minimax affine fit through the origin: minimize over coefficients
/// beta of max_i |r_i - beta·x_i|. Returns (beta, minimax value).
inline std::pair<Vec, double> chebyshev_linear_fit(const std::vector<Vec>& xs,
                                                   const std::vector<double>& rs) {
    const int k = xs.empty() ? 0 : int(xs[0].size());
    if (xs.empty()) return {Vec::Zero(0), 0.0};
    std::vector<Vec> A;
    std::vector<double> b;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Vec r1(k + 1), r2(k + 1);
        r1.head(k) = xs[i];
        r1[k] = -1.0;
        A.push_back(r1);
        b.push_back(rs[i]);  //  beta·x - m <= r
        r2.head(k) = -xs[i];
        r2[k] = -1.0;
        A.push_back(r2);
        b.push_back(-rs[i]);  // -beta·x - m <= -r
    }
    Vec c = Vec::Zero(k + 1);
    c[k] = -1.0;  // minimize m
    double scale = 1.0;
    for (double r : rs) scale = std::max(scale, std::abs(r));
    for (const auto& x : xs) scale = std::max(scale, x.lpNorm<Eigen::Infinity>());
    auto sol = SmallLp::solve(A, b, c, 1e4 * scale + 10.0);
    if (!sol) throw OptimizerStall("chebyshev_linear_fit: infeasible");
    Vec beta = sol->head(k);
    return {beta, (*sol)[k]};
}

// ---------------------------------------------------------------------------
// Polygon (2D) machinery: halfplane clipping, area, centroid.
// ---------------------------------------------------------------------------

using Poly2 = std::vector<Eigen::Vector2d>;

inline Poly2 box_poly(double r) {
    return {{-r, -r}, {r, -r}, {r, r}, {-r, r}};
}

/// Clip polygon by a·x <= b (Sutherland–Hodgman).
inline Poly2 clip_halfplane(const Poly2& poly, const Eigen::Vector2d& a, double b) {
    Poly2 out;
    const std::size_t m = poly.size();
    if (m == 0) return out;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % m];
        const double dp = a.dot(p) - b, dq = a.dot(q) - b;
        if (dp <= 0) out.push_back(p);
        if ((dp < 0 && dq > 0) || (dp > 0 && dq < 0)) {
            const double t = dp / (dp - dq);
            out.push_back(p + t * (q - p));
        }
    }
    return out;
}

inline double poly_area(const Poly2& p) {
    double s = 0;
    const std::size_t m = p.size();
    for (std::size_t i = 0; i < m; ++i) {
        const auto& u = p[i];
        const auto& v = p[(i + 1) % m];
        s += u.x() * v.y() - v.x() * u.y();
    }
    return 0.5 * std::abs(s);
}

/// Intersection of halfplanes within a starting box of half-width `box`.
/// touched_box is set when the result still leans on the box (unbounded set).
inline Poly2 halfplane_intersection(const std::vector<Halfspace>& hs, double box,
                                    bool* touched_box = nullptr) {
    Poly2 poly = box_poly(box);
    for (const auto& h : hs) {
        Eigen::Vector2d a(h.a[0], h.a[1]);
        const double nn = a.norm();
        if (nn < 1e-300) continue;
        poly = clip_halfplane(poly, a / nn, h.b / nn);
        if (poly.empty()) break;
    }
    if (touched_box) {
        *touched_box = false;
        for (const auto& v : poly)
            if (std::abs(v.x()) > 0.999 * box || std::abs(v.y()) > 0.999 * box)
                *touched_box = true;
    }
    return poly;
}

/// Volume of the intersection of 3D halfspaces (clipped to a box); the
/// divergence theorem over clipped planar faces. touched_box as above.
inline double halfspace_volume_3d(const std::vector<Halfspace>& hs_in, double box,
                                  bool* touched_box = nullptr) {
    std::vector<Halfspace> hs = hs_in;
    for (int j = 0; j < 3; ++j) {
        for (double s : {1.0, -1.0}) {
            Vec a = Vec::Zero(3);
            a[j] = s;
            hs.push_back({a, box});
        }
    }
    if (touched_box) *touched_box = false;
    double vol = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        Eigen::Vector3d n(hs[i].a[0], hs[i].a[1], hs[i].a[2]);
        const double nn = n.norm();
        if (nn < 1e-300) continue;
        n /= nn;
        const double d = hs[i].b / nn;
        // in-plane frame
        Eigen::Vector3d t1 = std::abs(n.z()) < 0.9 ? n.cross(Eigen::Vector3d(0, 0, 1))
                                                   : n.cross(Eigen::Vector3d(1, 0, 0));
        t1.normalize();
        Eigen::Vector3d t2 = n.cross(t1);
        const Eigen::Vector3d p0 = d * n;
        Poly2 face = box_poly(4.0 * box);
        for (std::size_t j = 0; j < hs.size() && !face.empty(); ++j) {
            if (j == i) continue;
            Eigen::Vector3d m(hs[j].a[0], hs[j].a[1], hs[j].a[2]);
            Eigen::Vector2d a2(m.dot(t1), m.dot(t2));
            const double rhs = hs[j].b - m.dot(p0);
            const double a2n = a2.norm();
            if (a2n < 1e-13) {
                if (rhs < -1e-11) { face.clear(); break; }
                continue;
            }
            face = clip_halfplane(face, a2 / a2n, rhs / a2n);
        }
        const double area = poly_area(face);
        if (area <= 0) continue;
        if (touched_box && i >= hs.size() - 6 && area > 1e-12) *touched_box = true;
        vol += d * area / 3.0;
    }
    return std::max(0.0, vol);
}

/// Monotone-chain convex hull, CCW. Collinear points are dropped.
inline Poly2 convex_hull_2d(std::vector<Eigen::Vector2d> pts) {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const auto& a, const auto& b) {
                              return (a - b).norm() < 1e-14;
                          }),
              pts.end());
    const std::size_t m = pts.size();
    if (m <= 2) return pts;
    auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                    const Eigen::Vector2d& b) {
        return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    Poly2 hull(2 * m);
    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = m - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

/// Edge halfspaces of a CCW polygon (outward normals).
inline std::vector<Halfspace> poly_halfspaces(const Poly2& hull) {
    std::vector<Halfspace> hs;
    const std::size_t m = hull.size();
    for (std::size_t i = 0; i < m; ++i) {
        const auto& p = hull[i];
        const auto& q = hull[(i + 1) % m];
        Eigen::Vector2d e = q - p;
        if (e.norm() < 1e-14) continue;
        Vec a(2);
        a << e.y(), -e.x();  // outward for CCW
        hs.push_back({a, a[0] * p.x() + a[1] * p.y()});
    }
    return hs;
}

/// Volume of a halfspace intersection in dimension 2 or 3.
inline double halfspace_volume(const std::vector<Halfspace>& hs, int n, double box,
                               bool* touched_box = nullptr) {
    if (n == 2) return poly_area(halfplane_intersection(hs, box, touched_box));
    if (n == 3) return halfspace_volume_3d(hs, box, touched_box);
    if (n == 1) {
        double lo = -box, hi = box;
        for (const auto& h : hs) {
            if (std::abs(h.a[0]) < 1e-300) continue;
            if (h.a[0] > 0) hi = std::min(hi, h.b / h.a[0]);
            else lo = std::max(lo, h.b / h.a[0]);
        }
        if (touched_box) *touched_box = (lo <= -0.999 * box || hi >= 0.999 * box);
        return std::max(0.0, hi - lo);
    }
    throw std::runtime_error("halfspace_volume: dimension not supported");
}

}  // namespace malab
