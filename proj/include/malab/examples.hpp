#pragma once

// Closed-form solutions and counterexamples: the Pogorelov function, the
// singular homogeneous W_{a,b}, and the quadratic normal-form family.

#include "malab/common.hpp"

#include <optional>

namespace malab {

// ---------------------------------------------------------------------------
// Quadratic models: members of the family F^{u,0}
// ---------------------------------------------------------------------------

/// P = l + Q with det D^2 Q = 1, grad' D_n Q(0) = a e_1, l(0) = D_n l(0) = 0.
/// The Hessian is stored whole; the linear part has no e_n component.
class QuadraticModel {
public:
    QuadraticModel() = default;
    QuadraticModel(Mat H, Vec lin, double a) : H_(std::move(H)), lin_(std::move(lin)), a_(a) {
        const int n = int(H_.rows());
        if (std::abs(H_.determinant() - 1.0) > 1e-9)
            throw ConfigError("QuadraticModel: det != 1");
        for (int j = 0; j + 1 < n; ++j)
            if (std::abs(H_(n - 1, j) - (j == 0 ? a_ : 0.0)) > 1e-12)
                throw ConfigError("QuadraticModel: tangential gradient row mismatch");
    }

    /// The paper-normal-form member: Q = (1/2)[sqrt(1+a^2)(x_1^2 + x_n^2)
    /// + 2 a x_1 x_n + sum_i x_i^2].
    static QuadraticModel normal_form(int n, double a) {
        Mat H = Mat::Identity(n, n);
        const double s = std::sqrt(1.0 + a * a);
        H(0, 0) = s;
        H(n - 1, n - 1) = s;
        H(0, n - 1) = H(n - 1, 0) = a;
        return QuadraticModel(std::move(H), Vec::Zero(n), a);
    }

    /// Schur-complement construction: leading block S (SPD), last column
    /// (a, 0, .., 0); the (n,n) entry is derived so that det == 1 exactly.
    static QuadraticModel from_leading_block(const Mat& S, double a, const Vec& lin) {
        const int k = int(S.rows());
        const int n = k + 1;
        Mat H = Mat::Zero(n, n);
        H.topLeftCorner(k, k) = S;
        H(n - 1, 0) = H(0, n - 1) = a;
        Vec v = Vec::Zero(k);
        v[0] = a;
        Mat Si = S.inverse();
        H(n - 1, n - 1) = v.dot(Si * v) + 1.0 / S.determinant();
        return QuadraticModel(std::move(H), lin, a);
    }

    int dim() const { return int(H_.rows()); }
    double a() const { return a_; }
    const Mat& hessian() const { return H_; }
    const Vec& linear() const { return lin_; }

    double value(const Vec& x) const { return 0.5 * x.dot(H_ * x) + lin_.dot(x); }
    Vec gradient(const Vec& x) const { return H_ * x + lin_; }

    /// D_n of the quadratic part restricted to {x_n = 0}: a*x_1 exactly.
    double dn_on_flat(const Vec& xp) const {
        const int n = dim();
        double s = lin_.dot(Vec::Zero(n));  // zero: lin has no e_n part by contract
        (void)s;
        double v = 0;
        for (int j = 0; j + 1 < n; ++j) v += H_(n - 1, j) * xp[j];
        return v;
    }

private:
    Mat H_;
    Vec lin_;
    double a_ = 0;
};

// ---------------------------------------------------------------------------
// Pogorelov's counterexample, n >= 3:  u(x) = (1 + x_n^2) |x'|^{2 - 2/n}
// ---------------------------------------------------------------------------

struct PogorelovEval {
    double value = 0;
    Vec gradient;
    Mat hessian;
    bool singular = false;  // on the axis |x'| = 0 the Hessian does not exist
};

inline PogorelovEval eval_pogorelov(const Vec& x, int n) {
    if (n < 3) throw ConfigError("eval_pogorelov: needs n >= 3");
    if (int(x.size()) != n) throw ConfigError("eval_pogorelov: dimension mismatch");
    const double alpha = 2.0 - 2.0 / n;
    const double z = x[n - 1];
    Vec xp = x.head(n - 1);
    const double rho = xp.norm();
    PogorelovEval e;
    e.value = (1.0 + z * z) * std::pow(rho, alpha);
    e.gradient = Vec::Zero(n);
    e.hessian = Mat::Zero(n, n);
    if (rho < 1e-300) {
        e.singular = true;
        return e;  // value 0, gradient 0, Hessian flagged
    }
    const double ra = std::pow(rho, alpha - 2.0);  // rho^{-2/n}
    for (int i = 0; i + 1 < n; ++i) e.gradient[i] = (1.0 + z * z) * alpha * ra * xp[i];
    e.gradient[n - 1] = 2.0 * z * std::pow(rho, alpha);
    const double rb = std::pow(rho, alpha - 4.0);
    for (int i = 0; i + 1 < n; ++i) {
        for (int j = 0; j + 1 < n; ++j) {
            double t = (i == j ? ra : 0.0) + (alpha - 2.0) * rb * xp[i] * xp[j];
            e.hessian(i, j) = (1.0 + z * z) * alpha * t;
        }
        e.hessian(i, n - 1) = e.hessian(n - 1, i) = 2.0 * z * alpha * ra * xp[i];
    }
    e.hessian(n - 1, n - 1) = 2.0 * std::pow(rho, alpha);
    return e;
}

/// The paper's smooth oblique field associated with the example.
inline Vec pogorelov_beta(const Vec& x, int n) {
    Vec b(n);
    const double z = x[n - 1];
    b.head(n - 1) = -x.head(n - 1) * z;
    b[n - 1] = (1.0 - 1.0 / n) * (1.0 + z * z);
    return b;
}

// ---------------------------------------------------------------------------
// Singular homogeneous function W_{a,b} (Example 10.2)
// ---------------------------------------------------------------------------

struct SingularParams {
    int n = 3;
    double delta = 0.1;
    double a = 0, b = 0;
    double rho = 0.2;  // domain half-thickness; the paper only asks it small

    static SingularParams make(double delta, int n, double rho = 0.2) {
        if (n < 3) throw ConfigError("SingularParams: needs n >= 3");
        SingularParams p;
        p.n = n;
        p.delta = delta;
        p.rho = rho;
        p.a = 1.0 / (0.5 + delta / double(n - 2));
        p.b = 1.0 / (1.0 - delta);
        if (!(p.a > 1.0) || !(p.b > 1.0))
            throw ConfigError("SingularParams: derived exponents out of range");
        return p;
    }
};

enum class WRegion { E1, E2 };

struct WEval {
    double value = 0;
    WRegion region = WRegion::E1;
};

/// W_{a,b} on the tangential slice x' = (x_1, x''), exact piecewise form.
/// On the interface |x''|^a = |x_1|^b both branches agree; E1 is used there.
inline WEval eval_W_ab(double x1, double xpp_norm, const SingularParams& p) {
    const double a = p.a, b = p.b;
    const double sA = std::pow(xpp_norm, a);
    const double sB = std::pow(std::abs(x1), b);
    WEval w;
    if (sA >= sB) {
        w.region = WRegion::E1;
        w.value = sA + (xpp_norm > 0 ? std::pow(xpp_norm, a - 2.0 * a / b) * x1 * x1
                                     : (x1 == 0 ? 0.0 : std::numeric_limits<double>::infinity()));
        if (xpp_norm == 0 && x1 == 0) w.value = 0;
    } else {
        w.region = WRegion::E2;
        const double c1 = (2.0 * b + a - a * b) / b;
        const double c2 = (a * b - a) / b;
        w.value = c1 * sB + c2 * std::pow(std::abs(x1), b - 2.0 * b / a) * xpp_norm * xpp_norm;
    }
    return w;
}

/// Full W(x) = (1 + x_n^2) W_{a,b}(x'), with x = (x_1, x'', x_n).
inline WEval eval_singular_W(const Vec& x, const SingularParams& p) {
    const int n = p.n;
    if (int(x.size()) != n) throw ConfigError("eval_singular_W: dimension mismatch");
    const double x1 = x[0];
    const double xpp = x.segment(1, n - 2).norm();
    const double xn = x[n - 1];
    WEval w = eval_W_ab(x1, xpp, p);
    w.value *= (1.0 + xn * xn);
    return w;
}

/// Central finite-difference Hessian of a scalar field (the determinant
/// oracle used against closed forms).
template <typename F>
Mat fd_hessian(const F& f, const Vec& x, double step) {
    const int n = int(x.size());
    Mat H(n, n);
    for (int i = 0; i < n; ++i) {
        Vec ei = Vec::Unit(n, i) * step;
        H(i, i) = (f(x + ei) + f(x - ei) - 2.0 * f(x)) / (step * step);
        for (int j = i + 1; j < n; ++j) {
            Vec ej = Vec::Unit(n, j) * step;
            H(i, j) = H(j, i) =
                (f(x + ei + ej) + f(x - ei - ej) - f(x + ei - ej) - f(x - ei + ej)) /
                (4.0 * step * step);
        }
    }
    return H;
}

}  // namespace malab
