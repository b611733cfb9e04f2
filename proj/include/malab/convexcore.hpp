#pragma once

// Discrete convex-function calculus: subdifferentials, the Aleksandrov
// Monge-Ampère measure, sections and their Neumann parts, the normalization
// family, maximum-height sections, engulfing, and growth certificates.

#include "malab/common.hpp"
#include "malab/geometry.hpp"
#include "malab/grid.hpp"
#include "malab/lp.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

namespace malab {

// ---------------------------------------------------------------------------
// Subdifferential cells
// ---------------------------------------------------------------------------

/// ∂u(x0) of the piecewise-linear lower hull: intersection of the halfspaces
/// p·(x_i - x0) <= u_i - u0.
struct SubdiffCell {
    int n = 0;
    bool bounded = true;
    std::vector<Vec> vertices;        // exact for n<=2; face-vertex set for n==3
    std::vector<Halfspace> planes;    // active constraint planes
    double volume = 0;                // +inf encoded as infinity() when unbounded
    Vec centroid;                     // affine-equivariant representative
};

namespace detail {

struct CellScratch {
    std::vector<Halfspace> hs;
};

// Gather cell constraints locally, then verify against every node; grow until
// stable. Exact because dropping a satisfied constraint never changes the cell.
inline SubdiffCell compute_cell(const ConvexGridFunction& u, std::int64_t x0,
                                double box_hint) {
    const int n = u.dim();
    const Vec p0 = u.point(x0);
    const double u0 = u.value(x0);
    const double scale = std::max(1.0, u.oscillation());
    const double tol = 1e-11 * scale;
    const double box = box_hint;

    std::set<std::int64_t> cset;
    auto mi0 = u.lattice().multi(x0);
    // start with the immediate rings
    for (int ring = 1; ring <= 2; ++ring) {
        const int nn = n;
        std::vector<int> d(nn, -ring);
        while (true) {
            bool on_ring = false;
            for (int j = 0; j < nn; ++j)
                if (std::abs(d[j]) == ring) on_ring = true;
            if (on_ring) {
                std::int64_t f = u.offset_node(x0, d);
                if (f >= 0 && f != x0) cset.insert(f);
            }
            int j = 0;
            for (; j < nn; ++j) {
                if (++d[j] <= ring) break;
                d[j] = -ring;
            }
            if (j == nn) break;
        }
    }

    SubdiffCell cell;
    cell.n = n;
    for (int pass = 0; pass < 256; ++pass) {
        std::vector<Halfspace> base_hs;
        base_hs.reserve(cset.size());
        for (std::int64_t f : cset)
            base_hs.push_back({u.point(f) - p0, u.value(f) - u0});

        // realize the cell geometry; zero-width cells need a little slack to
        // survive the clipping, retried on a ladder
        std::vector<Vec> verts;
        bool touched = false;
        for (double eps : {0.0, 1e-12 * scale, 1e-10 * scale, 1e-8 * scale}) {
        std::vector<Halfspace> hs = base_hs;
        if (eps > 0)
            for (auto& h : hs) h.b += eps * h.a.norm();
        verts.clear();
        touched = false;
        if (n == 1) {
            double lo = -box, hi = box;
            for (const auto& h : hs) {
                if (std::abs(h.a[0]) < 1e-300) continue;
                if (h.a[0] > 0) hi = std::min(hi, h.b / h.a[0]);
                else lo = std::max(lo, h.b / h.a[0]);
            }
            touched = (lo <= -0.999 * box || hi >= 0.999 * box);
            Vec a(1), b(1);
            a[0] = lo;
            b[0] = hi;
            verts = {a, b};
            cell.volume = std::max(0.0, hi - lo);
            cell.centroid = 0.5 * (a + b);
        } else if (n == 2) {
            Poly2 poly = halfplane_intersection(hs, box, &touched);
            double A = poly_area(poly);
            Eigen::Vector2d c2(0, 0);
            if (A > 1e-300) {
                // area centroid
                double sx = 0, sy = 0, sa = 0;
                for (std::size_t i = 0; i < poly.size(); ++i) {
                    const auto& pa = poly[i];
                    const auto& pb = poly[(i + 1) % poly.size()];
                    double cr = pa.x() * pb.y() - pb.x() * pa.y();
                    sa += cr;
                    sx += (pa.x() + pb.x()) * cr;
                    sy += (pa.y() + pb.y()) * cr;
                }
                if (std::abs(sa) > 1e-300) c2 = Eigen::Vector2d(sx, sy) / (3 * sa);
            } else if (!poly.empty()) {
                for (const auto& v : poly) c2 += v;
                c2 /= double(poly.size());
            }
            for (const auto& v : poly) {
                Vec w(2);
                w << v.x(), v.y();
                verts.push_back(w);
            }
            cell.volume = A;
            cell.centroid = Vec(2);
            cell.centroid << c2.x(), c2.y();
        } else {
            // n == 3: vertices from clipped faces; volume by divergence
            std::vector<Halfspace> all = hs;
            for (int j = 0; j < 3; ++j)
                for (double s : {1.0, -1.0}) {
                    Vec a = Vec::Zero(3);
                    a[j] = s;
                    all.push_back({a, box});
                }
            double vol = 0;
            Vec csum = Vec::Zero(3);
            double wsum = 0;
            for (std::size_t i = 0; i < all.size(); ++i) {
                Eigen::Vector3d nv(all[i].a[0], all[i].a[1], all[i].a[2]);
                double nn2 = nv.norm();
                if (nn2 < 1e-300) continue;
                nv /= nn2;
                double dd = all[i].b / nn2;
                Eigen::Vector3d t1 = std::abs(nv.z()) < 0.9
                                         ? nv.cross(Eigen::Vector3d(0, 0, 1)).normalized()
                                         : nv.cross(Eigen::Vector3d(1, 0, 0)).normalized();
                Eigen::Vector3d t2 = nv.cross(t1);
                Eigen::Vector3d q0 = dd * nv;
                Poly2 face = box_poly(4.0 * box);
                for (std::size_t j = 0; j < all.size() && !face.empty(); ++j) {
                    if (j == i) continue;
                    Eigen::Vector3d mm(all[j].a[0], all[j].a[1], all[j].a[2]);
                    Eigen::Vector2d a2(mm.dot(t1), mm.dot(t2));
                    double rhs = all[j].b - mm.dot(q0);
                    double a2n = a2.norm();
                    if (a2n < 1e-13) {
                        if (rhs < -1e-11) { face.clear(); }
                        continue;
                    }
                    face = clip_halfplane(face, a2 / a2n, rhs / a2n);
                }
                if (face.empty()) continue;
                if (i >= all.size() - 6 && poly_area(face) > 1e-12) touched = true;
                for (const auto& v2 : face) {
                    Eigen::Vector3d v3 = q0 + v2.x() * t1 + v2.y() * t2;
                    Vec w(3);
                    w << v3.x(), v3.y(), v3.z();
                    verts.push_back(w);
                    csum += w;
                    wsum += 1;
                }
                vol += dd * poly_area(face) / 3.0;
            }
            cell.volume = std::max(0.0, vol);
            cell.centroid = wsum > 0 ? Vec(csum / wsum) : Vec(Vec::Zero(3));
        }
        if (!verts.empty()) break;
        }  // eps ladder

        // verify against every other node
        bool grew = false;
        for (std::int64_t f : u.nodes()) {
            if (f == x0 || cset.count(f)) continue;
            const Vec a = u.point(f) - p0;
            const double b = u.value(f) - u0;
            for (const auto& v : verts) {
                if (a.dot(v) > b + tol) {
                    cset.insert(f);
                    grew = true;
                    break;
                }
            }
            if (grew && cset.size() > u.nodes().size()) break;
        }
        if (!grew) {
            cell.vertices = std::move(verts);
            cell.planes = std::move(base_hs);
            cell.bounded = !touched;
            if (touched) cell.volume = std::numeric_limits<double>::infinity();
            return cell;
        }
    }
    throw NotInMask("subdifferential cell did not stabilize");
}

}  // namespace detail

/// Subdifferential polytope at a node, plus the boundary gradient selection:
/// with beta0 given, p0 maximizes p·beta0 over the cell (ties broken
/// lexicographically); otherwise p0 is the cell centroid.
struct Subdifferential {
    SubdiffCell cell;
    Vec p0;
};

inline Subdifferential subdifferential_at(const ConvexGridFunction& u, std::int64_t x0,
                                          const std::optional<Vec>& beta0 = std::nullopt) {
    if (!u.in_mask(x0)) throw NotInMask("subdifferential_at: node outside mask");
    const double box = 16.0 * std::max(1.0, u.oscillation()) / u.h() + 16.0;
    Subdifferential s;
    s.cell = detail::compute_cell(u, x0, box);
    if (beta0) {
        if (s.cell.vertices.empty()) {
            s.p0 = s.cell.centroid;  // degenerate (zero-width) cell
            return s;
        }
        Vec bv = s.cell.vertices.front();
        double best = bv.dot(*beta0);
        for (const auto& v : s.cell.vertices) {
            const double d = v.dot(*beta0);
            const double tol = 1e-12 * (1.0 + std::abs(best));
            if (d > best + tol) {
                best = d;
                bv = v;
            } else if (d >= best - tol) {  // lexicographic tie-break
                for (int j = 0; j < s.cell.n; ++j) {
                    if (v[j] > bv[j] + 1e-12) { bv = v; break; }
                    if (v[j] < bv[j] - 1e-12) break;
                }
            }
        }
        s.p0 = bv;
    } else {
        s.p0 = s.cell.centroid;
    }
    return s;
}

/// Aleksandrov Monge-Ampère mass of a node set: Vol(∂u(E)) for the
/// piecewise-linear lower hull, cells summed (they tile the gradient image).
inline double ma_measure(const ConvexGridFunction& u, const std::vector<std::int64_t>& E) {
    const double box = 16.0 * std::max(1.0, u.oscillation()) / u.h() + 16.0;
    double mass = 0;
    for (std::int64_t f : E) {
        if (!u.in_mask(f)) throw NotInMask("ma_measure: node outside mask");
        auto cell = detail::compute_cell(u, f, box);
        if (!cell.bounded) return std::numeric_limits<double>::infinity();
        mass += cell.volume;
    }
    return mass;
}

// ---------------------------------------------------------------------------
// Sections
// ---------------------------------------------------------------------------

struct Section {
    std::int64_t base = -1;
    double height = 0;
    Vec p0;
    std::vector<std::int64_t> members;  // nodes with u < plane + h (strict)
    std::vector<std::int64_t> neumann;  // members flagged boundary (G_h)
    std::vector<Halfspace> hull;        // exact edge halfspaces when n == 2

    bool contains(std::int64_t f) const {
        return std::binary_search(members.begin(), members.end(), f);
    }
};

namespace detail {

inline Section section_raw(const ConvexGridFunction& u, std::int64_t x0, double h,
                           const Vec& p0) {
    Section s;
    s.base = x0;
    s.height = h;
    s.p0 = p0;
    const Vec q0 = u.point(x0);
    const double u0 = u.value(x0);
    const double slack = 1e-12 * std::max(1.0, u.oscillation());
    for (std::int64_t f : u.nodes()) {
        const double plane = u0 + p0.dot(u.point(f) - q0) + h;
        if (u.value(f) < plane - slack) {
            s.members.push_back(f);
            if (u.kind(f) == NodeKind::Boundary) s.neumann.push_back(f);
        }
    }
    if (!s.contains(x0)) {
        s.members.push_back(x0);
        std::sort(s.members.begin(), s.members.end());
        if (u.kind(x0) == NodeKind::Boundary) {
            s.neumann.push_back(x0);
            std::sort(s.neumann.begin(), s.neumann.end());
        }
    }
    if (u.dim() == 2 && s.members.size() >= 3) {
        std::vector<Eigen::Vector2d> pts;
        pts.reserve(s.members.size());
        for (std::int64_t f : s.members) {
            Vec x = u.point(f);
            pts.emplace_back(x[0], x[1]);
        }
        s.hull = poly_halfspaces(convex_hull_2d(pts));
    }
    return s;
}

}  // namespace detail

/// S_h^u(x0) as a masked node set; beta0 selects the boundary gradient
/// (3.11-style). Throws EmptySection when only the base node qualifies.
inline Section section(const ConvexGridFunction& u, std::int64_t x0, double h,
                       const std::optional<Vec>& beta0 = std::nullopt) {
    if (h <= 0) throw EmptySection("section: nonpositive height");
    if (!u.in_mask(x0)) throw NotInMask("section: base outside mask");
    Vec p0 = subdifferential_at(u, x0, beta0).p0;
    Section s = detail::section_raw(u, x0, h, p0);
    if (s.members.size() <= 1)
        throw EmptySection("section: height below the local increment of u");
    return s;
}

inline double node_volume(const ConvexGridFunction& u, std::size_t count) {
    return double(count) * std::pow(u.h(), u.dim());
}

inline double section_volume(const ConvexGridFunction& u, const Section& s) {
    return node_volume(u, s.members.size());
}

/// (n-1)-volume of the image of `nodes` projected along beta0 onto the
/// tangent plane with the given inward normal (hull measure of the images).
inline double projected_volume(const ConvexGridFunction& u,
                               const std::vector<std::int64_t>& nodes, const Vec& x0,
                               const Vec& beta0, const Vec& normal) {
    std::vector<Vec> pts;
    pts.reserve(nodes.size());
    for (std::int64_t f : nodes) pts.push_back(u.point(f));
    auto proj = project_along_beta(pts, x0, beta0, normal);
    const int n = u.dim();
    // orthonormal tangent frame
    Mat T(n, n - 1);
    {
        Mat B(n, n);
        B.col(0) = normal / normal.norm();
        int c = 1;
        for (int j = 0; j < n && c < n; ++j) {
            Vec e = Vec::Unit(n, j);
            for (int k = 0; k < c; ++k) e -= e.dot(B.col(k)) * B.col(k);
            if (e.norm() > 1e-8) B.col(c++) = e / e.norm();
        }
        T = B.rightCols(n - 1);
    }
    if (n == 2) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& p : proj) {
            double t = T.col(0).dot(p - x0);
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
        return std::max(0.0, hi - lo);
    }
    std::vector<Eigen::Vector2d> q;
    q.reserve(proj.size());
    for (const auto& p : proj) {
        Vec t = T.transpose() * (p - x0);
        q.emplace_back(t[0], t[1]);
    }
    return poly_area(convex_hull_2d(q));
}

// ---------------------------------------------------------------------------
// Normalization family
// ---------------------------------------------------------------------------

struct NormalizationTransform {
    AffineMap to_physical;  // y -> x
    Mat frame;              // orthogonal frame columns (after the slide)
    Vec diag;               // d_1..d_n, det = h^{n/2}
    double height = 0;
    Vec base;
    double inner_c = 0, outer_C = 0;  // reported sandwich constants

    double det() const { return diag.prod(); }
};

struct Normalization {
    NormalizationTransform transform;
    ConvexGridFunction u_tilde;
    Section source;  // the physical section that was normalized
};

/// Definition 4.7-style normalization at a boundary node: slide beta0 to e_n,
/// John frame of the projected section, diagonal rescale to det = h^{n/2},
/// then pull u back by convex interpolation.
inline Normalization normalize_at_height(const ConvexGridFunction& u,
                                         const ConvexDomain& dom, std::int64_t x0,
                                         double h, const Vec& beta0,
                                         double tilde_spacing = 1.0 / 24.0) {
    const int n = u.dim();
    Section S = section(u, x0, h, beta0);
    const Vec xb = u.point(x0);

    // rotation taking the inward normal to e_n
    Vec nu = dom.project_boundary(xb).normal;
    Mat R(n, n);
    {
        Mat B(n, n);
        B.col(0) = nu / nu.norm();
        int c = 1;
        for (int j = 0; j < n && c < n; ++j) {
            Vec e = Vec::Unit(n, j);
            for (int k = 0; k < c; ++k) e -= e.dot(B.col(k)) * B.col(k);
            if (e.norm() > 1e-8) B.col(c++) = e / e.norm();
        }
        // columns: tangents then normal last
        Mat P(n, n);
        P.col(n - 1) = B.col(0);
        for (int j = 1; j < n; ++j) P.col(j - 1) = B.col(j);
        R = P.transpose();  // maps nu to e_n
    }

    Vec bt = R * beta0;
    if (bt[n - 1] <= 1e-12)
        throw DegenerateSection("normalize_at_height: beta not inward in frame");
    Vec slide = bt.head(n - 1) / bt[n - 1];

    // slid coordinates of the members
    std::vector<Vec> slid;
    slid.reserve(S.members.size());
    double dn = 0;
    for (std::int64_t f : S.members) {
        Vec y = R * (u.point(f) - xb);
        Vec z = y;
        z.head(n - 1) -= slide * y[n - 1];
        slid.push_back(z);
        dn = std::max(dn, z[n - 1]);
    }
    if (dn <= 0) dn = u.h();

    // John frame of the projection
    std::vector<Vec> proj;
    proj.reserve(slid.size());
    for (const auto& z : slid) proj.push_back(z.head(n - 1));
    Mat Rp = Mat::Identity(n - 1, n - 1);
    Vec dtan = Vec::Constant(n - 1, u.h());
    if (n >= 2) {
        try {
            auto [T, inner] = john_ellipsoid(proj);
            (void)inner;
            // T = U * diag(1/a_i) * U^T; semiaxes a_i along columns of U
            Eigen::SelfAdjointEigenSolver<Mat> es(T.M);
            Rp = es.eigenvectors();
            for (int j = 0; j < n - 1; ++j)
                dtan[j] = 1.0 / std::max(es.eigenvalues()[j], 1e-300);
        } catch (const DegenerateHull&) {
            throw DegenerateSection("normalize_at_height: projected section is degenerate");
        }
    }

    Vec d(n);
    d.head(n - 1) = dtan;
    d[n - 1] = dn;
    const double target = std::pow(h, n / 2.0);
    const double scale = std::pow(target / d.prod(), 1.0 / n);
    d *= scale;

    // frame in slid coordinates: tangential John directions + e_n
    Mat F = Mat::Identity(n, n);
    F.topLeftCorner(n - 1, n - 1) = Rp;

    // physical map: x = xb + R^T * Slide * F * diag(d) * y
    Mat Slide = Mat::Identity(n, n);
    Slide.topRightCorner(n - 1, 1) = slide;
    Mat M = R.transpose() * Slide * F * d.asDiagonal();
    AffineMap to_phys{M, xb};

    NormalizationTransform tr;
    tr.to_physical = to_phys;
    tr.frame = F;
    tr.diag = d;
    tr.height = h;
    tr.base = xb;

    // normalized images of the members; (c, C) sandwich report
    AffineMap inv = to_phys.inverse();
    std::vector<Vec> img;
    img.reserve(S.members.size());
    double C = 0;
    for (std::int64_t f : S.members) {
        img.push_back(inv(u.point(f)));
        C = std::max(C, img.back().norm());
    }
    double c_in = std::numeric_limits<double>::infinity();
    for (const auto& w : sample_directions(n, n <= 2 ? 512 : 1024)) {
        double s = 0;
        for (const auto& q : img) s = std::max(s, w.dot(q));
        c_in = std::min(c_in, s);
    }
    tr.inner_c = std::max(0.0, c_in);
    tr.outer_C = C;

    // pull back u on a fresh lattice by convex interpolation of the section
    const double u0 = u.value(x0);
    ConvexGridFunction local = u;  // interpolation source restricted below

    Lattice lt;
    lt.n = n;
    lt.h = tilde_spacing;
    double Rbox = std::max(1.5, 1.1 * C);
    lt.origin = Vec::Constant(n, -(std::ceil(Rbox / lt.h) * lt.h));
    lt.dims.assign(n, int(2 * std::ceil(Rbox / lt.h)) + 1);

    std::vector<NodeKind> kind(lt.size(), NodeKind::Outside);
    std::vector<double> vals(lt.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<Vec> mem_pts;
    mem_pts.reserve(img.size());
    for (const auto& q : img) mem_pts.push_back(q);

    for (std::int64_t fy = 0; fy < lt.size(); ++fy) {
        Vec y = lt.point(fy);
        if (separation_margin(mem_pts, y) > 1e-9) continue;
        Vec x = to_phys(y);
        if (!dom.contains(x, dom.tolerance())) continue;
        kind[fy] = NodeKind::Interior;
    }
    ConvexGridFunction ut(lt, std::move(kind));
    for (std::int64_t fy : ut.nodes()) {
        Vec x = to_phys(ut.point(fy));
        double v;
        if (!local.interpolate(x, &v)) v = local.envelope_value(x);
        ut.value(fy) = (v - u0 - S.p0.dot(x - xb)) / h;
    }

    Normalization out;
    out.transform = tr;
    out.u_tilde = std::move(ut);
    out.source = std::move(S);
    return out;
}

// ---------------------------------------------------------------------------
// Maximum-height sections, modified sections, engulfing
// ---------------------------------------------------------------------------

struct MaxHeight {
    double h_q = 0;
    std::int64_t contact = -1;
    Section section;
};

namespace detail {

inline bool compactly_inside(const ConvexGridFunction& u, const Section& s) {
    return s.neumann.empty();
}

}  // namespace detail

/// Definition 6.1: the largest height whose section at interior q stays
/// compactly inside; contact point = nearest boundary node of the section at
/// the critical height (relative bisection tolerance 1e-3).
inline MaxHeight max_height_section(const ConvexGridFunction& u, std::int64_t q) {
    if (!u.in_mask(q)) throw NotInMask("max_height_section: node outside mask");
    Vec p0 = subdifferential_at(u, q).p0;

    auto sec = [&](double t) { return detail::section_raw(u, q, t, p0); };
    double lo = 0.5 * u.h() * std::max(1.0, p0.norm());
    // grow until the section touches the boundary band
    double hi = lo;
    int guard = 0;
    while (detail::compactly_inside(u, sec(hi))) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 200 || hi > 1e12 * std::max(1.0, u.oscillation()))
            throw DomainExhausted("max_height_section: section never reaches the boundary");
    }
    for (int it = 0; it < 60; ++it) {
        if ((hi - lo) <= 1e-3 * hi) break;
        double mid = 0.5 * (lo + hi);
        if (detail::compactly_inside(u, sec(mid))) lo = mid;
        else hi = mid;
    }
    MaxHeight mh;
    mh.h_q = hi;
    mh.section = sec(hi);
    // contact: nearest boundary member, ties to the lexicographically first
    double best = std::numeric_limits<double>::infinity();
    Vec qx = u.point(q);
    for (std::int64_t f : mh.section.neumann) {
        double d = (u.point(f) - qx).norm();
        if (d < best - 1e-15) {
            best = d;
            mh.contact = f;
        }
    }
    if (mh.contact < 0) {
        // fall back to the nearest boundary node of the slightly larger section
        Section s2 = sec(hi * 1.01);
        for (std::int64_t f : s2.neumann) {
            double d = (u.point(f) - qx).norm();
            if (d < best) {
                best = d;
                mh.contact = f;
            }
        }
    }
    return mh;
}

/// Definition 6.5 modified sections with the crossover band [h_q/2, 2 h_q].
inline Section modified_section(const ConvexGridFunction& u, std::int64_t q, double h) {
    if (u.kind(q) == NodeKind::Boundary) {
        Vec p0 = subdifferential_at(u, q).p0;
        return detail::section_raw(u, q, h, p0);
    }
    MaxHeight mh = max_height_section(u, q);
    if (h <= 0.5 * mh.h_q) {
        Vec p0 = subdifferential_at(u, q).p0;
        return detail::section_raw(u, q, h, p0);
    }
    std::int64_t c = mh.contact;
    Vec pc = subdifferential_at(u, c).p0;
    if (h >= 2.0 * mh.h_q) return detail::section_raw(u, c, h, pc);
    return detail::section_raw(u, c, 2.0 * mh.h_q, pc);
}

struct EngulfingResult {
    bool applicable = false;  // the two delta-sections intersect
    bool pass = true;
    std::int64_t witness = -1;
};

/// Lemma 6.8 check: overlap of the delta-scaled modified sections forces
/// containment in the h2-section.
inline EngulfingResult engulfing_check(const ConvexGridFunction& u, std::int64_t p,
                                       std::int64_t q, double h1, double h2, double delta) {
    if (!(h1 < 2.0 * h2)) throw EmptySection("engulfing_check: requires h1 < 2 h2");
    Section sp = modified_section(u, p, delta * h1);
    Section sq = modified_section(u, q, delta * h2);
    Section big = modified_section(u, q, h2);

    EngulfingResult r;
    std::vector<std::int64_t> inter;
    std::set_intersection(sp.members.begin(), sp.members.end(), sq.members.begin(),
                          sq.members.end(), std::back_inserter(inter));
    r.applicable = !inter.empty();
    if (!r.applicable) return r;
    for (std::int64_t f : sp.members) {
        if (!big.contains(f)) {
            r.pass = false;
            r.witness = f;
            return r;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Quadratic growth certificates
// ---------------------------------------------------------------------------

struct GrowthCertificate {
    Vec base;
    double C0 = 0, eps = 0;
    bool pass = true;        // (1.6)-form with the chosen subgradient
    bool pass_nabla = true;  // (1.5)-form with Lemma 3.12's modified constants
    Vec worst;               // worst-offending boundary point
    double worst_excess = 0;
};

/// Core check on an explicit boundary sample set.
inline GrowthCertificate quadratic_growth_core(const std::vector<Vec>& bpts,
                                               const std::vector<double>& bvals,
                                               const Vec& x0, double u0, const Vec& p0,
                                               double C0, double eps) {
    GrowthCertificate g;
    g.base = x0;
    g.C0 = C0;
    g.eps = eps;
    g.worst = x0;
    const double mod = std::sqrt(std::max(0.0, C0 * eps));
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < bpts.size(); ++i) {
        const double d2 = (bpts[i] - x0).squaredNorm();
        const double lin = bvals[i] - u0 - p0.dot(bpts[i] - x0);
        const double excess = lin - (C0 * d2 + eps);
        if (excess > 1e-12) g.pass = false;
        const double excess2 = lin - ((C0 + mod) * d2 + eps + mod);
        if (excess2 > 1e-12) g.pass_nabla = false;
        if (excess > worst) {
            worst = excess;
            g.worst = bpts[i];
            g.worst_excess = excess;
        }
    }
    return g;
}

/// Grid version: every boundary-band node is a sample; p0 via the (3.11)
/// selection along beta0.
inline GrowthCertificate quadratic_growth_check(const ConvexGridFunction& u,
                                                std::int64_t x0, const Vec& beta0,
                                                double C0, double eps) {
    if (!u.in_mask(x0)) throw NotInMask("quadratic_growth_check: base outside mask");
    Vec p0 = subdifferential_at(u, x0, beta0).p0;
    std::vector<Vec> pts;
    std::vector<double> vals;
    for (std::int64_t f : u.boundary_nodes()) {
        pts.push_back(u.point(f));
        vals.push_back(u.value(f));
    }
    return quadratic_growth_core(pts, vals, u.point(x0), u.value(x0), p0, C0, eps);
}

/// Lemma 2.2 slicing inequality for an extracted section, with the axis line
/// through the base and the axis projection; asserted with C = 2^n * n.
struct SlicingReport {
    double lhs = 0, rhs = 0;
    bool pass = true;
};

inline SlicingReport slicing_check(const ConvexGridFunction& u, const Section& s) {
    const int n = u.dim();
    SlicingReport r;
    auto mi0 = u.lattice().multi(s.base);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::set<std::vector<int>> columns;
    for (std::int64_t f : s.members) {
        auto mi = u.lattice().multi(f);
        bool same_col = true;
        for (int j = 0; j + 1 < n; ++j)
            if (mi[j] != mi0[j]) { same_col = false; break; }
        if (same_col) {
            double xn = u.point(f)[n - 1];
            lo = std::min(lo, xn);
            hi = std::max(hi, xn);
        }
        std::vector<int> col(mi.begin(), mi.end() - 1);
        columns.insert(col);
    }
    const double seg = std::max(0.0, hi - lo);
    const double voln1 = double(columns.size()) * std::pow(u.h(), n - 1);
    const double vol = node_volume(u, s.members.size());
    r.lhs = seg * voln1;
    r.rhs = std::pow(2.0, n) * n * vol;
    r.pass = r.lhs <= r.rhs + 1e-12;
    return r;
}

}  // namespace malab
