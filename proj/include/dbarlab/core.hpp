#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dbarlab {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

/// Library-wide error type. Thrown for precondition violations and
/// numerical failures that callers are expected to handle.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

/// Collects config/precondition violations so callers can report all
/// of them at once instead of bailing at the first one.
class issue_list {
public:
    void check(bool cond, const std::string& msg) {
        if (!cond) issues_.push_back(msg);
    }
    void add(const std::string& msg) { issues_.push_back(msg); }
    bool ok() const { return issues_.empty(); }
    const std::vector<std::string>& issues() const { return issues_; }
    /// Throws a single error enumerating every recorded violation.
    void throw_if_any(const std::string& context) const {
        if (issues_.empty()) return;
        std::string msg = context + ": " + std::to_string(issues_.size()) +
                          " invalid parameter(s):";
        for (const auto& s : issues_) msg += "\n  - " + s;
        throw error(msg);
    }

private:
    std::vector<std::string> issues_;
};

// ---------------------------------------------------------------------------
// deterministic summation

/// Kahan-compensated accumulator; summation order is the caller's.
struct kahan {
    double sum = 0.0, comp = 0.0;
    void add(double x) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

struct kahan_cplx {
    kahan re, im;
    void add(cplx x) {
        re.add(x.real());
        im.add(x.imag());
    }
    cplx value() const { return {re.value(), im.value()}; }
};

// ---------------------------------------------------------------------------
// threading

/// Worker-thread cap: min(hardware, DBARLAB_THREADS if set). At least 1.
inline int thread_budget() {
    static const int budget = [] {
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw < 1) hw = 1;
        if (const char* env = std::getenv("DBARLAB_THREADS")) {
            char* end = nullptr;
            long v = std::strtol(env, &end, 10);
            if (end != env && v >= 1) hw = std::min<long>(hw, v);
        }
        return hw;
    }();
    return budget;
}

/// Runs fn(i) for i in [0, n). Tasks must be independent; each writes only
/// its own outputs, so results do not depend on the thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    int nt = thread_budget();
    if (nt <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    nt = static_cast<int>(std::min<std::size_t>(nt, n));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// branch-cut helper

/// Argument of w on the branch that is continuous off the ray [0, +inf),
/// i.e. arg in (0, 2*pi). For w = z - 1 with |z| < 1 this lands in
/// (pi/2, 3*pi/2), the branch used for every (z-1)^(-s) in the library.
inline double arg_cut_positive_axis(cplx w) {
    double th = std::atan2(w.imag(), w.real());
    if (th <= 0.0) th += 2.0 * pi;
    return th;
}

/// w^e on the branch above (e real). All powers of (z-1) go through here
/// so every module agrees on the branch.
inline cplx pow_branch(cplx w, double e) {
    double r = std::abs(w);
    if (r == 0.0) fail("pow_branch: zero base");
    double th = arg_cut_positive_axis(w) * e;
    double m = std::pow(r, e);
    return {m * std::cos(th), m * std::sin(th)};
}

// ---------------------------------------------------------------------------
// 1-D quadrature helpers (used for oracles and kernel cell integrals)

/// Tanh-sinh quadrature on (a,b). Handles integrable endpoint
/// singularities; intended for smooth-in-the-interior integrands.
template <class F>
double tanh_sinh(F f, double a, double b, double rel_tol = 1e-12, int max_level = 12) {
    const double c = 0.5 * (a + b), d = 0.5 * (b - a);
    const double tmax = 3.8;  // abscissa weight underflows beyond this
    auto eval = [&](double t) -> double {
        double s = std::sinh(t);
        double x = std::tanh(0.5 * pi * s);
        double w = 0.5 * pi * std::cosh(t) / std::pow(std::cosh(0.5 * pi * s), 2);
        double xx = c + d * x;
        if (xx <= a || xx >= b) return 0.0;  // clamp fp spill at endpoints
        return f(xx) * w;
    };
    double h = 1.0;
    double sum = eval(0.0);
    for (int k = 1; k * h <= tmax; ++k) sum += eval(k * h) + eval(-k * h);
    double prev = sum * h * d;
    for (int level = 1; level <= max_level; ++level) {
        h *= 0.5;
        double add = 0.0;
        for (int k = 1; k * h <= tmax; k += 2) add += eval(k * h) + eval(-k * h);
        sum += add;
        double cur = sum * h * d;
        if (level >= 3 && std::abs(cur - prev) <= rel_tol * (std::abs(cur) + 1e-300))
            return cur;
        prev = cur;
    }
    return prev;
}

/// Complex-valued tanh-sinh on (a,b).
template <class F>
cplx tanh_sinh_cplx(F f, double a, double b, double rel_tol = 1e-12, int max_level = 12) {
    const double c = 0.5 * (a + b), d = 0.5 * (b - a);
    const double tmax = 3.8;
    auto eval = [&](double t) -> cplx {
        double s = std::sinh(t);
        double x = std::tanh(0.5 * pi * s);
        double w = 0.5 * pi * std::cosh(t) / std::pow(std::cosh(0.5 * pi * s), 2);
        double xx = c + d * x;
        if (xx <= a || xx >= b) return {0, 0};
        return f(xx) * w;
    };
    double h = 1.0;
    cplx sum = eval(0.0);
    for (int k = 1; k * h <= tmax; ++k) sum += eval(k * h) + eval(-k * h);
    cplx prev = sum * (h * d);
    for (int level = 1; level <= max_level; ++level) {
        h *= 0.5;
        cplx add{0, 0};
        for (int k = 1; k * h <= tmax; k += 2) add += eval(k * h) + eval(-k * h);
        sum += add;
        cplx cur = sum * (h * d);
        if (level >= 3 && std::abs(cur - prev) <= rel_tol * (std::abs(cur) + 1e-300))
            return cur;
        prev = cur;
    }
    return prev;
}

struct quad_rule {
    std::vector<double> x, w;  // nodes and weights on [-1,1]
};

/// Gauss-Legendre rule of order n (Newton iteration on P_n). Cached.
inline const quad_rule& gauss_legendre(int n) {
    static std::mutex mu;
    static std::map<int, quad_rule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    quad_rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        r.x[n - 1 - i] = x;
        r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

/// Integrates f over [a,b] with an n-point Gauss-Legendre rule.
template <class F>
double gauss_integrate(F f, double a, double b, int n = 32) {
    const quad_rule& r = gauss_legendre(n);
    double c = 0.5 * (a + b), d = 0.5 * (b - a), s = 0.0;
    for (int i = 0; i < n; ++i) s += r.w[i] * f(c + d * r.x[i]);
    return s * d;
}

// ---------------------------------------------------------------------------
// sequence diagnostics (refinement ladders, divergence protocols)

struct slope_fit_result {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;  // 1-sigma
};

/// Least-squares line through (x,y). Used on log-log data for decay slopes.
inline slope_fit_result fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    std::size_t n = x.size();
    require(n == y.size() && n >= 2, "fit_line: need >= 2 points of equal count");
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    double mx = sx / n, my = sy / n, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0, "fit_line: degenerate abscissas");
    slope_fit_result r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    if (n > 2) {
        double ss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = y[i] - (r.intercept + r.slope * x[i]);
            ss += e * e;
        }
        r.stderr_slope = std::sqrt(ss / ((n - 2) * sxx));
    }
    return r;
}

struct growth_params {
    double factor = 4.0;  // total growth across the window
    int span = 4;         // number of dyadic halvings in the window
};

/// Divergence detector for a quantity tracked along a dyadic ladder
/// (shrinking radii, shrinking inner cutoffs, doubling concentration):
/// fires when some window of `span` consecutive steps is monotone
/// nondecreasing with total growth >= factor.
inline bool dyadic_growth(const std::vector<double>& q, growth_params gp = {}) {
    if (static_cast<int>(q.size()) < gp.span + 1) return false;
    for (std::size_t k = 0; k + gp.span < q.size(); ++k) {
        bool mono = true;
        for (int j = 0; j < gp.span; ++j) {
            if (!(q[k + j + 1] >= q[k + j])) {
                mono = false;
                break;
            }
        }
        if (mono && q[k] > 0 && q[k + gp.span] >= gp.factor * q[k]) return true;
    }
    return false;
}

/// True when the last `window` consecutive relative changes are all <= tol.
inline bool stabilized(const std::vector<double>& q, int window, double rel_tol) {
    if (static_cast<int>(q.size()) < window + 1) return false;
    for (std::size_t i = q.size() - window; i < q.size(); ++i) {
        double denom = std::max(std::abs(q[i - 1]), 1e-300);
        if (std::abs(q[i] - q[i - 1]) / denom > rel_tol) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// formatting

/// Shortest round-trip decimal form; the one formatting used in CSV output
/// so reruns are byte-identical.
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace dbarlab
