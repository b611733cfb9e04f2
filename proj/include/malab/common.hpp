#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace malab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Named error types; each maps to one contract violation.
#define MALAB_ERROR(Name)                                  \
    struct Name : std::runtime_error {                    \
        explicit Name(const std::string& msg = #Name)     \
            : std::runtime_error(msg) {}                  \
    }

MALAB_ERROR(DegenerateHull);
MALAB_ERROR(TangentParallel);
MALAB_ERROR(NotMember);
MALAB_ERROR(NotOblique);
MALAB_ERROR(EmptyMask);
MALAB_ERROR(NotInMask);
MALAB_ERROR(EmptySection);
MALAB_ERROR(DegenerateSection);
MALAB_ERROR(DomainExhausted);
MALAB_ERROR(FootOutside);
MALAB_ERROR(NoConvergence);
MALAB_ERROR(SubsolutionViolation);
MALAB_ERROR(MaskMismatch);
MALAB_ERROR(StencilClipped);
MALAB_ERROR(OptimizerStall);
MALAB_ERROR(InsufficientRange);
MALAB_ERROR(UnknownScenario);
MALAB_ERROR(ConfigError);
MALAB_ERROR(SingularPoint);
MALAB_ERROR(EmptyDirectory);

#undef MALAB_ERROR

inline constexpr double kTiny = 1e-12;

/// Deterministic RNG used everywhere randomness appears.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }
    double normal(double mu = 0.0, double sigma = 1.0) {
        return std::normal_distribution<double>(mu, sigma)(eng_);
    }
    int integer(int lo, int hi) {  // inclusive
        return std::uniform_int_distribution<int>(lo, hi)(eng_);
    }
    Vec point_in_ball(int n, double radius) {
        Vec v(n);
        while (true) {
            for (int i = 0; i < n; ++i) v[i] = uniform(-1.0, 1.0);
            if (v.squaredNorm() <= 1.0) return radius * v;
        }
    }
    Vec unit_vector(int n) {
        Vec v(n);
        double s = 0;
        do {
            for (int i = 0; i < n; ++i) v[i] = normal();
            s = v.norm();
        } while (s < 1e-8);
        return v / s;
    }
    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

inline double sqr(double x) { return x * x; }

/// Least-squares fit of y = slope*x + intercept, with the half-width of the
/// 95% confidence band on the slope (t-quantile approximated by 2).
struct LineFit {
    double slope = 0, intercept = 0, band = 0, residual = 0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t m = xs.size();
    if (m < 2 || ys.size() != m) throw InsufficientRange("fit_line: need >= 2 points");
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < m; ++i) { sx += xs[i]; sy += ys[i]; }
    const double mx = sx / double(m), my = sy / double(m);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 0) throw InsufficientRange("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < m; ++i)
        ss += sqr(ys[i] - f.slope * xs[i] - f.intercept);
    f.residual = std::sqrt(ss / double(m));
    if (m > 2) f.band = 2.0 * std::sqrt(ss / double(m - 2) / sxx);
    return f;
}

/// Unit directions for support-function sampling; deterministic.
inline std::vector<Vec> sample_directions(int n, int count) {
    std::vector<Vec> dirs;
    dirs.reserve(count);
    if (n == 1) {
        Vec a(1), b(1);
        a[0] = 1; b[0] = -1;
        dirs.push_back(a); dirs.push_back(b);
    } else if (n == 2) {
        for (int k = 0; k < count; ++k) {
            double th = 2.0 * M_PI * k / count;
            Vec v(2);
            v << std::cos(th), std::sin(th);
            dirs.push_back(v);
        }
    } else {
        // Fibonacci sphere
        const double ga = M_PI * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < count; ++k) {
            double z = 1.0 - 2.0 * (k + 0.5) / count;
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            double th = ga * k;
            Vec v(3);
            v << r * std::cos(th), r * std::sin(th), z;
            dirs.push_back(v);
        }
    }
    return dirs;
}

}  // namespace malab
