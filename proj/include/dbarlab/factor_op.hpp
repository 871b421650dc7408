#pragma once

#include <Eigen/Dense>

#include <dbarlab/grid.hpp>

namespace dbarlab {

// ---------------------------------------------------------------------------
// Rotation-invariant per-factor integral operators
//
// Every kernel in the library has the shape
//     k(z, zeta) = e^{i h alpha} g(r, rho, beta - alpha)
// in factor polar coordinates z = c + r e^{i alpha}, zeta = c + rho e^{i beta}
// with an integer target harmonic h, and is singular at most at zeta = z.
// The discrete operator tabulates g on ring pairs times angle offsets with the
// source cell area folded in, fixes the near-singular entries by exact cell
// integrals, and applies as either a direct double sum or an angular-mode
// factorization (DFT in the offset, one small dense matrix per mode).

/// g(r, rho, gamma): kernel with the target phase stripped off. Must be
/// 2 pi periodic in gamma and smooth except at (rho, gamma) = (r, 0).
using radial_kernel = std::function<cplx(double r, double rho, double gamma)>;

/// (1/pi) / (z - zeta), target harmonic -1. The difference is assembled in a
/// cancellation-free form so correction quadratures can probe arbitrarily
/// close to the singularity.
inline radial_kernel cauchy_radial() {
    return [](double r, double rho, double gamma) -> cplx {
        double sh = std::sin(0.5 * gamma);
        cplx w{r - rho + 2.0 * rho * sh * sh, -rho * std::sin(gamma)};
        return (1.0 / pi) / w;
    };
}

/// |zeta - z|^(-alpha) for 0 < alpha < 2, target harmonic 0.
inline radial_kernel power_radial(double alpha) {
    require(alpha > 0.0 && alpha < 2.0, "power_radial: exponent must lie in (0, 2)");
    return [alpha](double r, double rho, double gamma) -> cplx {
        double d = r - rho, sh = std::sin(0.5 * gamma);
        double q = d * d + 4.0 * r * rho * sh * sh;
        return {std::pow(q, -0.5 * alpha), 0.0};
    };
}

namespace detail {

/// Integral of F over the box [as, ao] x [bs, bo] (signed ends) when F has an
/// integrable corner singularity at (as, bs): Duffy split into two triangles,
/// Gauss across the skew direction, tanh-sinh along the collapsing one.
template <class F>
cplx duffy_box(const F& f, double as, double ao, double bs, double bo) {
    const double ju = ao - as, jv = bo - bs;
    auto fuv = [&](double u, double v) { return f(as + ju * u, bs + jv * v); };
    const quad_rule& q = gauss_legendre(24);
    cplx acc{0, 0};
    for (std::size_t it = 0; it < q.x.size(); ++it) {
        const double t = 0.5 + 0.5 * q.x[it];
        acc += (0.5 * q.w[it]) *
               (tanh_sinh_cplx([&](double u) { return fuv(u, u * t) * u; }, 0.0, 1.0,
                               1e-9, 8) +
                tanh_sinh_cplx([&](double v) { return fuv(v * t, v) * v; }, 0.0, 1.0,
                               1e-9, 8));
    }
    return acc * std::abs(ju * jv);
}

/// Tensor Gauss rule for one smooth annular-sector cell.
inline cplx gauss_cell(const radial_kernel& g, double r, double rlo, double rhi,
                       double glo, double ghi, int n) {
    const quad_rule& q = gauss_legendre(n);
    const double cr = 0.5 * (rlo + rhi), hr = 0.5 * (rhi - rlo);
    const double cg = 0.5 * (glo + ghi), hg = 0.5 * (ghi - glo);
    cplx s{0, 0};
    for (std::size_t a = 0; a < q.x.size(); ++a) {
        double rho = cr + hr * q.x[a];
        cplx inner{0, 0};
        for (std::size_t b = 0; b < q.x.size(); ++b)
            inner += q.w[b] * g(r, rho, cg + hg * q.x[b]);
        s += q.w[a] * rho * inner;
    }
    return s * (hr * hg);
}

/// Four-way Duffy split of the cell that contains the singular point (r, 0).
inline cplx singular_cell(const radial_kernel& g, double r, double rlo, double rhi,
                          double glo, double ghi) {
    auto f = [&](double rho, double ga) { return g(r, rho, ga) * rho; };
    return duffy_box(f, r, rlo, 0.0, glo) + duffy_box(f, r, rlo, 0.0, ghi) +
           duffy_box(f, r, rhi, 0.0, glo) + duffy_box(f, r, rhi, 0.0, ghi);
}

/// Gauss order by distance to the nearest kernel pole in units of the
/// integration interval.
inline int gauss_points_for(double scaled_dist) {
    if (scaled_dist >= 8.0) return 6;
    if (scaled_dist >= 4.0) return 8;
    if (scaled_dist >= 1.5) return 12;
    return 24;
}

/// Cell integral when a kernel pole sits closer to one integration axis than
/// Gauss can resolve: tanh-sinh along the steep axis (split at the interior
/// pole projection when it falls inside), Gauss across the other.
inline cplx robust_cell(const radial_kernel& g, double r, double rlo, double rhi,
                        double glo, double ghi, bool steep_rho, bool steep_gamma) {
    auto inner = [&](double rho) -> cplx {
        auto h = [&](double ga) { return g(r, rho, ga); };
        if (!steep_gamma) {
            const quad_rule& q = gauss_legendre(24);
            const double c = 0.5 * (glo + ghi), d = 0.5 * (ghi - glo);
            cplx s{0, 0};
            for (std::size_t b = 0; b < q.x.size(); ++b) s += q.w[b] * h(c + d * q.x[b]);
            return s * d;
        }
        if (glo < 0.0 && ghi > 0.0)
            return tanh_sinh_cplx(h, glo, 0.0, 1e-10, 9) +
                   tanh_sinh_cplx(h, 0.0, ghi, 1e-10, 9);
        return tanh_sinh_cplx(h, glo, ghi, 1e-10, 9);
    };
    auto radial = [&](double rho) { return inner(rho) * rho; };
    auto outer = [&](double a, double b) -> cplx {
        if (steep_rho) return tanh_sinh_cplx(radial, a, b, 1e-10, 9);
        const quad_rule& q = gauss_legendre(24);
        const double c = 0.5 * (a + b), d = 0.5 * (b - a);
        cplx s{0, 0};
        for (std::size_t bq = 0; bq < q.x.size(); ++bq) s += q.w[bq] * radial(c + d * q.x[bq]);
        return s * d;
    };
    if (steep_rho && rlo < r && r < rhi) return outer(rlo, r) + outer(r, rhi);
    return outer(rlo, rhi);
}

}  // namespace detail

/// Integral of g(r, rho, gamma) rho drho dgamma over one annular-sector cell.
/// If the kernel's singular point (r, 0) lies strictly inside, the cell is
/// split there into four corner-singular boxes handled by Duffy transforms;
/// smooth cells take a tensor Gauss rule.
inline cplx kernel_cell_integral(const radial_kernel& g, double r, double rlo,
                                 double rhi, double glo, double ghi) {
    const bool singular = r > rlo && r < rhi && glo < 0.0 && ghi > 0.0;
    if (singular) return detail::singular_cell(g, r, rlo, rhi, glo, ghi);
    return detail::gauss_cell(g, r, rlo, rhi, glo, ghi, 32);
}

/// Tabulated one-factor operator. `table` holds c(i, j, d) = kernel between
/// target ring i and the source cell on ring j at angle offset d, source cell
/// area included; `mode` holds its DFT over d, one n_r x n_r matrix per
/// angular mode; `tau` is the target phase per sector.
struct FactorKernel {
    int n_r = 0;
    int n_theta = 0;
    int harmonic = 0;
    std::vector<cplx> table;
    std::vector<Eigen::MatrixXcd> mode;
    std::vector<cplx> tau;

    const cplx* row(int i, int j) const {
        return table.data() +
               (static_cast<std::size_t>(i) * n_r + j) * static_cast<std::size_t>(n_theta);
    }
};

/// Whether the radial kernel satisfies g(r, rho, -gamma) = conj g(r, rho,
/// gamma); both library kernels do, which halves exact table construction.
enum class GammaSymmetry { none, hermitian };

namespace detail {

inline void finalize_kernel(FactorKernel& op, const PolarGrid& f) {
    const int nr = op.n_r, nth = op.n_theta;
    using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> tab(op.table.data(), static_cast<long>(nr) * nr, nth);
    Eigen::MatrixXcd dft(nth, nth);
    for (int d = 0; d < nth; ++d)
        for (int m = 0; m < nth; ++m)
            dft(d, m) = std::polar(1.0, -2.0 * pi * d * m / nth);
    RowMat all = tab * dft;
    op.mode.assign(nth, Eigen::MatrixXcd(nr, nr));
    for (int m = 0; m < nth; ++m)
        for (int i = 0; i < nr; ++i)
            for (int j = 0; j < nr; ++j)
                op.mode[static_cast<std::size_t>(m)](i, j) =
                    all(static_cast<long>(i) * nr + j, m);
    op.tau.resize(nth);
    for (int a = 0; a < nth; ++a)
        op.tau[static_cast<std::size_t>(a)] = std::polar(1.0, op.harmonic * f.theta(a));
}

}  // namespace detail

/// Builds a midpoint-rule operator table. Entries with |i - j| and signed
/// angle offset both <= correction_stencil are replaced by exact cell
/// integrals; pass -1 to skip corrections entirely. The cell containing the
/// target node is dropped when not corrected (its midpoint value is
/// undefined; the exact contribution is O(cell size)).
inline FactorKernel build_factor_kernel(const PolarGrid& f, const radial_kernel& g,
                                        int harmonic, int correction_stencil) {
    const int nr = f.n_r(), nth = f.n_theta();
    require(2 * std::max(correction_stencil, 0) + 1 <= nth,
            "build_factor_kernel: correction stencil wider than the angular grid");
    FactorKernel op;
    op.n_r = nr;
    op.n_theta = nth;
    op.harmonic = harmonic;
    op.table.assign(static_cast<std::size_t>(nr) * nr * nth, cplx{});
    const double dth = f.dtheta();

    parallel_for(static_cast<std::size_t>(nr) * nr, [&](std::size_t p) {
        const int i = static_cast<int>(p / nr), j = static_cast<int>(p % nr);
        const double r = f.ring_radius(i), rho = f.ring_radius(j);
        const double area = f.ring_cell_area(j);
        cplx* row = op.table.data() + p * nth;
        row[0] = i == j ? cplx{0, 0} : g(r, rho, 0.0) * area;
        for (int d = 1; d < nth; ++d) row[d] = g(r, rho, d * dth) * area;
    });

    if (correction_stencil >= 0) {
        const int K = correction_stencil;
        struct Entry {
            int i, j, ds;
        };
        std::vector<Entry> todo;
        for (int i = 0; i < nr; ++i)
            for (int j = std::max(0, i - K); j <= std::min(nr - 1, i + K); ++j)
                for (int ds = -K; ds <= K; ++ds) todo.push_back({i, j, ds});
        parallel_for(todo.size(), [&](std::size_t t) {
            const auto [i, j, ds] = todo[t];
            const int d = (ds % nth + nth) % nth;
            op.table[(static_cast<std::size_t>(i) * nr + j) * nth + d] =
                kernel_cell_integral(g, f.ring_radius(i), f.edge(j), f.edge(j + 1),
                                     (ds - 0.5) * dth, (ds + 0.5) * dth);
        });
    }

    detail::finalize_kernel(op, f);
    return op;
}

/// Builds a product-integration operator table: every entry is the exact
/// integral of the kernel over its source cell (Duffy on the self cell,
/// distance-tiered Gauss elsewhere), so the discrete apply integrates the
/// piecewise-constant interpolant of the samples exactly. Quadrature error
/// then varies smoothly between neighboring targets, which is what keeps
/// finite differences of the result convergent.
inline FactorKernel build_factor_kernel_exact(const PolarGrid& f, const radial_kernel& g,
                                              int harmonic,
                                              GammaSymmetry sym = GammaSymmetry::none) {
    const int nr = f.n_r(), nth = f.n_theta();
    FactorKernel op;
    op.n_r = nr;
    op.n_theta = nth;
    op.harmonic = harmonic;
    op.table.assign(static_cast<std::size_t>(nr) * nr * nth, cplx{});
    const double dth = f.dtheta();
    const int dmax = sym == GammaSymmetry::hermitian ? nth / 2 : nth - 1;

    parallel_for(static_cast<std::size_t>(nr) * nr, [&](std::size_t p) {
        const int i = static_cast<int>(p / nr), j = static_cast<int>(p % nr);
        const double r = f.ring_radius(i);
        const double rlo = f.edge(j), rhi = f.edge(j + 1);
        const double hrho = rhi - rlo;
        const double drho = r < rlo ? rlo - r : r > rhi ? r - rhi : 0.0;
        cplx* row = op.table.data() + p * nth;
        for (int d = 0; d <= dmax; ++d) {
            const int ds = d <= nth / 2 ? d : d - nth;
            const double glo = (ds - 0.5) * dth, ghi = (ds + 0.5) * dth;
            cplx v;
            if (i == j && ds == 0) {
                v = detail::singular_cell(g, r, rlo, rhi, glo, ghi);
            } else {
                // pole distances per axis in interval units: the radial
                // integrand peaks where rho e^{i gamma} = r, which sits
                // r * (angular gap) off the real rho axis
                const double dgam = ds == 0 ? 0.0 : (std::abs(ds) - 0.5) * dth;
                const double delta_rho = (drho + r * dgam) / hrho;
                const double delta_gam = (dgam + drho / std::max(r, 1e-300)) / dth;
                if (delta_rho < 0.15 || delta_gam < 0.15)
                    v = detail::robust_cell(g, r, rlo, rhi, glo, ghi, delta_rho < 0.15,
                                            delta_gam < 0.15);
                else
                    v = detail::gauss_cell(
                        g, r, rlo, rhi, glo, ghi,
                        detail::gauss_points_for(std::min(delta_rho, delta_gam)));
            }
            row[d] = v;
            if (sym == GammaSymmetry::hermitian && d > 0) row[nth - d] = std::conj(v);
        }
    });

    detail::finalize_kernel(op, f);
    return op;
}

enum class ApplyMethod { direct, modes };

namespace detail {

/// Core application over raw buffers. The mode path copies each column block
/// into scratch before writing it back, so in == out is allowed there; the
/// direct path requires distinct buffers.
inline void apply_factor_core(const ProductGrid& grid, int axis, const FactorKernel& op,
                              const cplx* in, cplx* out, ApplyMethod method) {
    require(axis >= 0 && axis < grid.dim(), "apply_factor_op: axis out of range");
    const PolarGrid& f = grid.factor(axis);
    require(f.n_r() == op.n_r && f.n_theta() == op.n_theta,
            "apply_factor_op: kernel was built for a different factor resolution");
    const int nr = op.n_r, nth = op.n_theta;
    const std::size_t nk = static_cast<std::size_t>(f.size());
    const std::size_t s = grid.stride(axis);
    const std::size_t m_total = grid.size() / nk;

    if (method == ApplyMethod::direct) {
        require(in != out, "apply_factor_op: direct method cannot run in place");
        parallel_for(m_total, [&](std::size_t m) {
            const std::size_t base = (m / s) * nk * s + (m % s);
            for (int i = 0; i < nr; ++i)
                for (int a = 0; a < nth; ++a) {
                    kahan_cplx sum;
                    for (int j = 0; j < nr; ++j) {
                        const cplx* row = op.row(i, j);
                        const cplx* src = in + base + static_cast<std::size_t>(j) * nth * s;
                        for (int b = 0; b < nth; ++b) {
                            int d = b - a;
                            if (d < 0) d += nth;
                            sum.add(row[d] * src[static_cast<std::size_t>(b) * s]);
                        }
                    }
                    out[base + (static_cast<std::size_t>(i) * nth + a) * s] =
                        op.tau[static_cast<std::size_t>(a)] * sum.value();
                }
        });
        return;
    }

    Eigen::MatrixXcd fwd(nth, nth), inv(nth, nth);
    for (int b = 0; b < nth; ++b)
        for (int m = 0; m < nth; ++m) fwd(m, b) = std::polar(1.0, 2.0 * pi * m * b / nth);
    inv = fwd.conjugate() / static_cast<double>(nth);

    const std::size_t block =
        std::min<std::size_t>(m_total, std::max<std::size_t>(8, (std::size_t(4) << 20) / nk));
    Eigen::MatrixXcd x(nk, block), h(nk, block);
    using DynStride = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;

    for (std::size_t m0 = 0; m0 < m_total; m0 += block) {
        const std::size_t nb = std::min(block, m_total - m0);
        parallel_for(nb, [&](std::size_t c) {
            const std::size_t m = m0 + c;
            const cplx* src = in + (m / s) * nk * s + (m % s);
            for (std::size_t q = 0; q < nk; ++q) x(static_cast<long>(q), static_cast<long>(c)) = src[q * s];
        });
        parallel_for(static_cast<std::size_t>(nr), [&](std::size_t j) {
            auto rows = x.middleRows(static_cast<long>(j) * nth, nth).leftCols(static_cast<long>(nb));
            rows = (fwd * rows).eval();
        });
        parallel_for(static_cast<std::size_t>(nth), [&](std::size_t m) {
            Eigen::Map<const Eigen::MatrixXcd, 0, DynStride> gm(
                x.data() + m, nr, static_cast<long>(nb), DynStride(x.rows(), nth));
            Eigen::Map<Eigen::MatrixXcd, 0, DynStride> hm(
                h.data() + m, nr, static_cast<long>(nb), DynStride(h.rows(), nth));
            hm.noalias() = op.mode[m] * gm;
        });
        parallel_for(static_cast<std::size_t>(nr), [&](std::size_t i) {
            auto src = h.middleRows(static_cast<long>(i) * nth, nth).leftCols(static_cast<long>(nb));
            auto dst = x.middleRows(static_cast<long>(i) * nth, nth).leftCols(static_cast<long>(nb));
            dst.noalias() = inv * src;
        });
        parallel_for(nb, [&](std::size_t c) {
            const std::size_t m = m0 + c;
            cplx* dst = out + (m / s) * nk * s + (m % s);
            for (std::size_t q = 0; q < nk; ++q)
                dst[q * s] = op.tau[q % nth] * x(static_cast<long>(q), static_cast<long>(c));
        });
    }
}

}  // namespace detail

/// Applies the factor operator along one axis of a product grid:
/// out(.., z_axis, ..) = tau(z_axis) sum over cells of that factor of
/// table * in. The mode path computes the identical sums through the angular
/// DFT; the direct path is the plain double sum (small grids, cross-checks).
inline std::vector<cplx> apply_factor_op(const ProductGrid& grid, int axis,
                                         const FactorKernel& op,
                                         const std::vector<cplx>& in,
                                         ApplyMethod method = ApplyMethod::modes) {
    require(in.size() == grid.size(), "apply_factor_op: field size mismatch");
    std::vector<cplx> out(in.size());
    detail::apply_factor_core(grid, axis, op, in.data(), out.data(), method);
    return out;
}

/// Overwrites io with the operator applied along `axis`. The mode path runs
/// without a second field-sized buffer; the direct path copies first.
inline void apply_factor_op_inplace(const ProductGrid& grid, int axis,
                                    const FactorKernel& op, std::vector<cplx>& io,
                                    ApplyMethod method = ApplyMethod::modes) {
    require(io.size() == grid.size(), "apply_factor_op: field size mismatch");
    if (method == ApplyMethod::direct) {
        io = apply_factor_op(grid, axis, op, io, method);
        return;
    }
    detail::apply_factor_core(grid, axis, op, io.data(), io.data(), method);
}

/// Field-level convenience wrapper.
inline SampledField apply_factor_op(const SampledField& fld, int axis,
                                    const FactorKernel& op,
                                    ApplyMethod method = ApplyMethod::modes) {
    return SampledField(fld.grid_handle(),
                        apply_factor_op(fld.grid(), axis, op, fld.values(), method));
}

}  // namespace dbarlab
