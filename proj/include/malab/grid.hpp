#pragma once

// Convex functions sampled on a lattice restricted to a domain: the single
// representation all discrete calculus runs on.

#include "malab/common.hpp"
#include "malab/geometry.hpp"
#include "malab/lp.hpp"

#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace malab {

struct Lattice {
    int n = 0;
    double h = 0;
    Vec origin;
    std::vector<int> dims;

    std::int64_t size() const {
        std::int64_t s = 1;
        for (int d : dims) s *= d;
        return s;
    }
    std::int64_t flat(const std::vector<int>& mi) const {
        std::int64_t f = 0;
        for (int j = 0; j < n; ++j) f = f * dims[j] + mi[j];
        return f;
    }
    std::vector<int> multi(std::int64_t f) const {
        std::vector<int> mi(n);
        for (int j = n - 1; j >= 0; --j) {
            mi[j] = int(f % dims[j]);
            f /= dims[j];
        }
        return mi;
    }
    Vec point(const std::vector<int>& mi) const {
        Vec x = origin;
        for (int j = 0; j < n; ++j) x[j] += h * mi[j];
        return x;
    }
    Vec point(std::int64_t f) const { return point(multi(f)); }
    bool in_bounds(const std::vector<int>& mi) const {
        for (int j = 0; j < n; ++j)
            if (mi[j] < 0 || mi[j] >= dims[j]) return false;
        return true;
    }
    std::vector<int> nearest(const Vec& x) const {
        std::vector<int> mi(n);
        for (int j = 0; j < n; ++j) {
            mi[j] = int(std::lround((x[j] - origin[j]) / h));
            mi[j] = std::max(0, std::min(dims[j] - 1, mi[j]));
        }
        return mi;
    }
};

/// Lattice with spacing h whose nodes include the origin and cover the domain
/// box with a one-cell margin.
inline Lattice lattice_covering(const ConvexDomain& dom, double h) {
    auto [lo, hi] = dom.bounding_box();
    Lattice lat;
    lat.n = dom.dim();
    lat.h = h;
    lat.origin = Vec(lat.n);
    lat.dims.resize(lat.n);
    for (int j = 0; j < lat.n; ++j) {
        std::int64_t k0 = std::int64_t(std::floor(lo[j] / h)) - 1;
        std::int64_t k1 = std::int64_t(std::ceil(hi[j] / h)) + 1;
        lat.origin[j] = h * double(k0);
        lat.dims[j] = int(k1 - k0 + 1);
    }
    return lat;
}

enum class NodeKind : std::int8_t { Outside = 0, Interior = 1, Boundary = 2 };

class ConvexGridFunction {
public:
    ConvexGridFunction() = default;

    /// Mask = lattice ∩ Ω; nodes with a missing axis neighbor are flagged as
    /// boundary-band nodes.
    ConvexGridFunction(Lattice lat, const ConvexDomain& dom)
        : lat_(std::move(lat)) {
        const std::int64_t m = lat_.size();
        kind_.assign(m, NodeKind::Outside);
        val_.assign(m, std::numeric_limits<double>::quiet_NaN());
        for (std::int64_t f = 0; f < m; ++f)
            if (dom.contains(lat_.point(f), dom.tolerance()))
                kind_[f] = NodeKind::Interior;
        mark_boundary();
        collect();
    }

    /// Explicit mask (values NaN until assigned).
    ConvexGridFunction(Lattice lat, std::vector<NodeKind> kind)
        : lat_(std::move(lat)), kind_(std::move(kind)) {
        val_.assign(lat_.size(), std::numeric_limits<double>::quiet_NaN());
        mark_boundary();
        collect();
    }

    static ConvexGridFunction sample(const ConvexDomain& dom, double h,
                                     const std::function<double(const Vec&)>& f) {
        ConvexGridFunction g(lattice_covering(dom, h), dom);
        for (std::int64_t idx : g.nodes_) g.val_[idx] = f(g.lat_.point(idx));
        return g;
    }

    const Lattice& lattice() const { return lat_; }
    int dim() const { return lat_.n; }
    double h() const { return lat_.h; }
    const std::vector<std::int64_t>& nodes() const { return nodes_; }
    const std::vector<std::int64_t>& boundary_nodes() const { return bnodes_; }
    const std::vector<std::int64_t>& interior_nodes() const { return inodes_; }

    bool in_mask(std::int64_t f) const {
        return f >= 0 && f < std::int64_t(kind_.size()) && kind_[f] != NodeKind::Outside;
    }
    NodeKind kind(std::int64_t f) const { return kind_[f]; }
    double value(std::int64_t f) const { return val_[f]; }
    double& value(std::int64_t f) { return val_[f]; }
    Vec point(std::int64_t f) const { return lat_.point(f); }
    const std::vector<double>& raw_values() const { return val_; }
    std::vector<double>& raw_values() { return val_; }

    std::int64_t neighbor(std::int64_t f, int axis, int step) const {
        auto mi = lat_.multi(f);
        mi[axis] += step;
        if (!lat_.in_bounds(mi)) return -1;
        std::int64_t g = lat_.flat(mi);
        return in_mask(g) ? g : -1;
    }
    std::int64_t offset_node(std::int64_t f, const std::vector<int>& d) const {
        auto mi = lat_.multi(f);
        for (int j = 0; j < lat_.n; ++j) mi[j] += d[j];
        if (!lat_.in_bounds(mi)) return -1;
        std::int64_t g = lat_.flat(mi);
        return in_mask(g) ? g : -1;
    }

    std::int64_t node_at(const Vec& x) const {
        auto mi = lat_.nearest(x);
        std::int64_t f = lat_.flat(mi);
        if (!in_mask(f)) return -1;
        if ((lat_.point(mi) - x).lpNorm<Eigen::Infinity>() > 0.51 * lat_.h) return -1;
        return f;
    }

    double oscillation() const {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::int64_t f : nodes_) {
            lo = std::min(lo, val_[f]);
            hi = std::max(hi, val_[f]);
        }
        return nodes_.empty() ? 0.0 : hi - lo;
    }

    /// Multilinear interpolation (used for off-lattice boundary feet).
    /// Requires every corner of the containing cell to be masked; returns
    /// false otherwise.
    bool interpolate(const Vec& x, double* out, std::vector<std::pair<std::int64_t, double>>*
                                                    weights = nullptr) const {
        const int n = lat_.n;
        std::vector<int> base(n);
        std::vector<double> frac(n);
        for (int j = 0; j < n; ++j) {
            double s = (x[j] - lat_.origin[j]) / lat_.h;
            double fl = std::floor(s);
            base[j] = int(fl);
            frac[j] = s - fl;
            if (base[j] < 0 || base[j] + 1 >= lat_.dims[j]) return false;
        }
        double acc = 0;
        if (weights) weights->clear();
        for (int corner = 0; corner < (1 << n); ++corner) {
            auto mi = base;
            double w = 1;
            for (int j = 0; j < n; ++j) {
                if (corner & (1 << j)) {
                    mi[j] += 1;
                    w *= frac[j];
                } else {
                    w *= 1.0 - frac[j];
                }
            }
            std::int64_t f = lat_.flat(mi);
            if (!in_mask(f)) {
                if (w > 1e-12) return false;
                continue;
            }
            acc += w * val_[f];
            if (weights && w > 0) weights->push_back({f, w});
        }
        *out = acc;
        return true;
    }

    /// Value of the lower convex envelope of the masked samples at an
    /// arbitrary point: max over supporting planes. Exact (local constraint
    /// growth with global verification).
    double envelope_value(const Vec& x) const {
        const int n = lat_.n;
        double scale = std::max(1.0, oscillation());
        double box = 8.0 * scale / lat_.h + 8.0;
        std::unordered_set<std::int64_t> cset;
        auto mi0 = lat_.nearest(x);
        for (int ring = 1; ring <= 4; ++ring) {
            add_ring(mi0, ring, cset);
            if (cset.size() >= std::size_t(2 * n + 2)) break;
        }
        for (int pass = 0; pass < 64; ++pass) {
            std::vector<Vec> A;
            std::vector<double> b;
            for (std::int64_t f : cset) {
                Vec row(n + 1);
                row.head(n) = lat_.point(f);
                row[n] = 1.0;
                A.push_back(row);
                b.push_back(val_[f]);
            }
            Vec c(n + 1);
            c.head(n) = x;
            c[n] = 1.0;
            auto sol = SmallLp::solve(A, b, c, box);
            if (!sol) throw EmptyMask("envelope_value: infeasible support LP");
            // verify against all nodes, collect violators
            Vec p = sol->head(n);
            double off = (*sol)[n];
            bool ok = true;
            double tol = 1e-11 * scale;
            for (std::int64_t f : nodes_) {
                if (p.dot(lat_.point(f)) + off > val_[f] + tol && !cset.count(f)) {
                    cset.insert(f);
                    ok = false;
                }
            }
            if (ok) return p.dot(x) + off;
        }
        throw EmptyMask("envelope_value: support LP did not settle");
    }

    /// Largest convex function <= the input on the mask.
    ConvexGridFunction lower_convex_envelope() const {
        if (nodes_.empty()) throw EmptyMask("lower_convex_envelope: empty mask");
        ConvexGridFunction out = *this;
        for (std::int64_t f : nodes_) out.val_[f] = envelope_value(lat_.point(f));
        return out;
    }

    bool is_convex(double tol) const {
        ConvexGridFunction e = lower_convex_envelope();
        for (std::int64_t f : nodes_)
            if (val_[f] - e.val_[f] > tol) return false;
        return true;
    }

    /// Necessary directional check (cheap): second differences along the
    /// offered directions are nonnegative.
    bool is_directionally_convex(const std::vector<std::vector<int>>& dirs, double tol) const {
        for (std::int64_t f : nodes_) {
            for (const auto& d : dirs) {
                std::vector<int> nd(d.size());
                for (std::size_t j = 0; j < d.size(); ++j) nd[j] = -d[j];
                std::int64_t p = offset_node(f, d), q = offset_node(f, nd);
                if (p < 0 || q < 0) continue;
                if (val_[p] + val_[q] - 2 * val_[f] < -tol) return false;
            }
        }
        return true;
    }

    /// Centered gradient (one-sided at mask edges).
    Vec gradient(std::int64_t f) const {
        const int n = lat_.n;
        Vec g(n);
        for (int j = 0; j < n; ++j) {
            std::int64_t p = neighbor(f, j, +1), q = neighbor(f, j, -1);
            if (p >= 0 && q >= 0) g[j] = (val_[p] - val_[q]) / (2 * lat_.h);
            else if (p >= 0) g[j] = (val_[p] - val_[f]) / lat_.h;
            else if (q >= 0) g[j] = (val_[f] - val_[q]) / lat_.h;
            else g[j] = 0;
        }
        return g;
    }

    /// Centered-difference Hessian; requires the full 1-ring (returns false
    /// otherwise). Symmetrized by construction.
    bool hessian(std::int64_t f, Mat* H) const {
        const int n = lat_.n;
        *H = Mat::Zero(n, n);
        const double h2 = lat_.h * lat_.h;
        for (int i = 0; i < n; ++i) {
            std::int64_t p = neighbor(f, i, +1), q = neighbor(f, i, -1);
            if (p < 0 || q < 0) return false;
            (*H)(i, i) = (val_[p] + val_[q] - 2 * val_[f]) / h2;
            for (int j = i + 1; j < n; ++j) {
                std::vector<int> dpp(n, 0), dmm(n, 0), dpm(n, 0), dmp(n, 0);
                dpp[i] = 1; dpp[j] = 1;
                dmm[i] = -1; dmm[j] = -1;
                dpm[i] = 1; dpm[j] = -1;
                dmp[i] = -1; dmp[j] = 1;
                std::int64_t app = offset_node(f, dpp), amm = offset_node(f, dmm);
                std::int64_t apm = offset_node(f, dpm), amp = offset_node(f, dmp);
                if (app < 0 || amm < 0 || apm < 0 || amp < 0) return false;
                (*H)(i, j) = (*H)(j, i) =
                    (val_[app] + val_[amm] - val_[apm] - val_[amp]) / (4 * h2);
            }
        }
        return true;
    }

    // --- serialization: "n h dims... origin..." header, then "index value" ---
    void write(std::ostream& os) const {
        char buf[64];
        os << lat_.n << " ";
        std::snprintf(buf, sizeof buf, "%.17g", lat_.h);
        os << buf;
        for (int d : lat_.dims) os << " " << d;
        for (int j = 0; j < lat_.n; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", lat_.origin[j]);
            os << " " << buf;
        }
        os << "\n";
        for (std::int64_t f : nodes_) {
            std::snprintf(buf, sizeof buf, "%.17g", val_[f]);
            os << f << " " << buf << "\n";
        }
    }

    static ConvexGridFunction read(std::istream& is) {
        Lattice lat;
        std::string header;
        if (!std::getline(is, header)) throw ConfigError("grid read: empty stream");
        std::istringstream hs(header);
        hs >> lat.n >> lat.h;
        lat.dims.resize(lat.n);
        for (int j = 0; j < lat.n; ++j) hs >> lat.dims[j];
        lat.origin = Vec::Zero(lat.n);
        for (int j = 0; j < lat.n; ++j) hs >> lat.origin[j];
        if (!hs) throw ConfigError("grid read: bad header");
        std::vector<NodeKind> kind(lat.size(), NodeKind::Outside);
        std::vector<double> vals(lat.size(), std::numeric_limits<double>::quiet_NaN());
        std::int64_t idx;
        double v;
        while (is >> idx >> v) {
            if (idx < 0 || idx >= std::int64_t(kind.size()))
                throw ConfigError("grid read: index out of range");
            kind[idx] = NodeKind::Interior;
            vals[idx] = v;
        }
        ConvexGridFunction g(std::move(lat), std::move(kind));
        g.val_ = std::move(vals);
        return g;
    }

    void assert_finite() const {
        for (std::int64_t f : nodes_)
            if (!std::isfinite(val_[f]))
                throw EmptyMask("ConvexGridFunction: non-finite masked value");
    }

    /// True when every pair of masked nodes is lattice-connected (axis steps).
    bool connected() const {
        if (nodes_.empty()) return false;
        std::vector<char> seen(kind_.size(), 0);
        std::vector<std::int64_t> stack{nodes_[0]};
        seen[nodes_[0]] = 1;
        std::size_t cnt = 0;
        while (!stack.empty()) {
            std::int64_t f = stack.back();
            stack.pop_back();
            ++cnt;
            for (int j = 0; j < lat_.n; ++j)
                for (int s : {-1, 1}) {
                    std::int64_t g = neighbor(f, j, s);
                    if (g >= 0 && !seen[g]) {
                        seen[g] = 1;
                        stack.push_back(g);
                    }
                }
        }
        return cnt == nodes_.size();
    }

private:
    void mark_boundary() {
        for (std::int64_t f = 0; f < std::int64_t(kind_.size()); ++f) {
            if (kind_[f] == NodeKind::Outside) continue;
            auto mi = lat_.multi(f);
            bool bnd = false;
            for (int j = 0; j < lat_.n && !bnd; ++j) {
                for (int s : {-1, 1}) {
                    auto mj = mi;
                    mj[j] += s;
                    if (!lat_.in_bounds(mj) || kind_[lat_.flat(mj)] == NodeKind::Outside) {
                        bnd = true;
                        break;
                    }
                }
            }
            kind_[f] = bnd ? NodeKind::Boundary : NodeKind::Interior;
        }
    }
    void collect() {
        nodes_.clear();
        inodes_.clear();
        bnodes_.clear();
        for (std::int64_t f = 0; f < std::int64_t(kind_.size()); ++f) {
            if (kind_[f] == NodeKind::Outside) continue;
            nodes_.push_back(f);
            if (kind_[f] == NodeKind::Boundary) bnodes_.push_back(f);
            else inodes_.push_back(f);
        }
    }
    void add_ring(const std::vector<int>& mi0, int ring,
                  std::unordered_set<std::int64_t>& cset) const {
        const int n = lat_.n;
        std::vector<int> d(n, -ring);
        while (true) {
            auto mi = mi0;
            bool on_ring = false;
            for (int j = 0; j < n; ++j) {
                mi[j] += d[j];
                if (std::abs(d[j]) == ring) on_ring = true;
            }
            if (on_ring && lat_.in_bounds(mi)) {
                std::int64_t f = lat_.flat(mi);
                if (in_mask(f)) cset.insert(f);
            }
            int j = 0;
            for (; j < n; ++j) {
                if (++d[j] <= ring) break;
                d[j] = -ring;
            }
            if (j == n) break;
        }
    }

    Lattice lat_;
    std::vector<NodeKind> kind_;
    std::vector<double> val_;
    std::vector<std::int64_t> nodes_, inodes_, bnodes_;
};

/// The spec's lower_convex_envelope operation.
inline ConvexGridFunction lower_convex_envelope(const ConvexGridFunction& g) {
    return g.lower_convex_envelope();
}

}  // namespace malab
