#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <utility>

#include "core.hpp"

namespace dbarlab {

/// One planar factor of a product domain: a disc, or an annulus when
/// inner_radius > 0 (used to excise the puncture of the punctured disc).
struct DiscFactor {
    cplx center{0.0, 0.0};
    double radius = 1.0;
    double inner_radius = 0.0;

    void validate() const {
        require(radius > 0.0, "DiscFactor: radius must be positive");
        require(inner_radius >= 0.0 && inner_radius < radius,
                "DiscFactor: need 0 <= inner_radius < radius");
    }
};

inline DiscFactor unit_disc() { return DiscFactor{}; }

enum class RadialGrading { uniform, geometric };

/// Midpoint polar tensor grid on one factor. Nodes are cell-centered in
/// both r and theta, so no node ever hits the factor center or boundary;
/// per-cell area weights are exact, and their sum telescopes to the factor
/// area pi*(R^2 - r_in^2).
class PolarGrid {
public:
    static PolarGrid uniform(DiscFactor f, int n_r, int n_theta) {
        return PolarGrid(f, n_r, n_theta, RadialGrading::uniform);
    }
    /// Geometrically graded rings (requires inner_radius > 0). Used where
    /// integrands concentrate at the inner edge; not valid for finite
    /// differences, which assume uniform radial spacing.
    static PolarGrid geometric(DiscFactor f, int n_r, int n_theta) {
        require(f.inner_radius > 0.0, "PolarGrid::geometric: inner_radius must be > 0");
        return PolarGrid(f, n_r, n_theta, RadialGrading::geometric);
    }

    const DiscFactor& factor() const { return fac_; }
    int n_r() const { return nr_; }
    int n_theta() const { return nth_; }
    int size() const { return nr_ * nth_; }
    RadialGrading grading() const { return grading_; }
    double dtheta() const { return dth_; }
    /// Radial spacing; only meaningful for uniform grading.
    double dr() const { return (fac_.radius - fac_.inner_radius) / nr_; }

    int ring_of(int node) const { return node / nth_; }
    int sector_of(int node) const { return node % nth_; }
    int node_at(int ring, int sector) const { return ring * nth_ + sector; }

    double ring_radius(int ring) const { return rmid_[ring]; }
    double edge(int i) const { return edge_[i]; }
    double theta(int sector) const { return (sector + 0.5) * dth_; }
    double cos_theta(int sector) const { return cth_[sector]; }
    double sin_theta(int sector) const { return sth_[sector]; }

    cplx node(int i) const {
        int ir = ring_of(i), it = sector_of(i);
        return fac_.center + rmid_[ir] * cplx(cth_[it], sth_[it]);
    }
    /// Exact area of the node's cell.
    double weight(int i) const { return wring_[ring_of(i)]; }
    double ring_cell_area(int ring) const { return wring_[ring]; }

    /// Deterministic identity string, used as a cache key for kernel tables.
    std::string fingerprint() const {
        std::ostringstream os;
        os << fmt_g17(fac_.center.real()) << ',' << fmt_g17(fac_.center.imag()) << ','
           << fmt_g17(fac_.radius) << ',' << fmt_g17(fac_.inner_radius) << ','
           << nr_ << ',' << nth_ << ',' << (grading_ == RadialGrading::uniform ? 'u' : 'g');
        return os.str();
    }

private:
    PolarGrid(DiscFactor f, int n_r, int n_theta, RadialGrading g)
        : fac_(f), nr_(n_r), nth_(n_theta), grading_(g) {
        fac_.validate();
        require(nr_ >= 1 && nth_ >= 1, "PolarGrid: need n_r, n_theta >= 1");
        dth_ = 2.0 * pi / nth_;
        edge_.resize(nr_ + 1);
        if (g == RadialGrading::uniform) {
            double h = (fac_.radius - fac_.inner_radius) / nr_;
            for (int i = 0; i <= nr_; ++i) edge_[i] = fac_.inner_radius + i * h;
        } else {
            double q = std::pow(fac_.radius / fac_.inner_radius, 1.0 / nr_);
            edge_[0] = fac_.inner_radius;
            for (int i = 1; i < nr_; ++i) edge_[i] = edge_[i - 1] * q;
        }
        edge_[nr_] = fac_.radius;  // exact outer edge either way
        rmid_.resize(nr_);
        wring_.resize(nr_);
        for (int i = 0; i < nr_; ++i) {
            rmid_[i] = 0.5 * (edge_[i] + edge_[i + 1]);
            wring_[i] = 0.5 * (edge_[i + 1] * edge_[i + 1] - edge_[i] * edge_[i]) * dth_;
        }
        cth_.resize(nth_);
        sth_.resize(nth_);
        for (int j = 0; j < nth_; ++j) {
            cth_[j] = std::cos(theta(j));
            sth_[j] = std::sin(theta(j));
        }
    }

    DiscFactor fac_;
    int nr_, nth_;
    RadialGrading grading_;
    double dth_;
    std::vector<double> edge_, rmid_, wring_, cth_, sth_;
};

/// Tensor product of polar factor grids; node index is row-major with the
/// first factor slowest. Cheap to copy around via shared_ptr.
class ProductGrid {
public:
    explicit ProductGrid(std::vector<PolarGrid> factors) : fac_(std::move(factors)) {
        require(!fac_.empty(), "ProductGrid: need at least one factor");
        strides_.resize(fac_.size());
        std::size_t s = 1;
        for (std::size_t j = fac_.size(); j-- > 0;) {
            strides_[j] = s;
            s *= static_cast<std::size_t>(fac_[j].size());
        }
        size_ = s;
    }

    int dim() const { return static_cast<int>(fac_.size()); }
    std::size_t size() const { return size_; }
    const PolarGrid& factor(int j) const { return fac_[static_cast<std::size_t>(j)]; }
    std::size_t stride(int j) const { return strides_[static_cast<std::size_t>(j)]; }

    int factor_node(std::size_t flat, int j) const {
        return static_cast<int>((flat / strides_[static_cast<std::size_t>(j)]) %
                                static_cast<std::size_t>(fac_[static_cast<std::size_t>(j)].size()));
    }
    /// Writes the n complex coordinates of the node into out.
    void coords(std::size_t flat, cplx* out) const {
        for (int j = 0; j < dim(); ++j) out[j] = fac_[j].node(factor_node(flat, j));
    }
    double weight(std::size_t flat) const {
        double w = 1.0;
        for (int j = 0; j < dim(); ++j) w *= fac_[j].weight(factor_node(flat, j));
        return w;
    }
    /// All factor ring indices at least one cell away from radial edges;
    /// the region where centered radial stencils exist.
    bool interior(std::size_t flat) const {
        for (int j = 0; j < dim(); ++j) {
            const PolarGrid& g = fac_[j];
            int ir = g.ring_of(factor_node(flat, j));
            if (ir < 1 || ir > g.n_r() - 2) return false;
        }
        return true;
    }

    std::string fingerprint() const {
        std::string s;
        for (const auto& g : fac_) {
            s += g.fingerprint();
            s += ';';
        }
        return s;
    }

private:
    std::vector<PolarGrid> fac_;
    std::vector<std::size_t> strides_;
    std::size_t size_;
};

using grid_ptr = std::shared_ptr<const ProductGrid>;

struct Resolution {
    int n_r = 0, n_theta = 0;
};

/// Builds the product grid for the given factors at the given per-factor
/// resolutions (midpoint polar nodes). Annulus factors keep their puncture
/// excised, so singular kernels are never evaluated at excluded points.
inline grid_ptr build_grid(const std::vector<DiscFactor>& factors,
                           const std::vector<Resolution>& resolution) {
    require(!factors.empty(), "build_grid: need at least one factor");
    require(factors.size() == resolution.size(),
            "build_grid: one resolution per factor required");
    std::vector<PolarGrid> gs;
    gs.reserve(factors.size());
    for (std::size_t j = 0; j < factors.size(); ++j) {
        factors[j].validate();
        require(resolution[j].n_r >= 1 && resolution[j].n_theta >= 1,
                "build_grid: resolutions must be >= 1");
        gs.push_back(PolarGrid::uniform(factors[j], resolution[j].n_r, resolution[j].n_theta));
    }
    return std::make_shared<const ProductGrid>(std::move(gs));
}

inline grid_ptr product_of(std::vector<PolarGrid> gs) {
    return std::make_shared<const ProductGrid>(std::move(gs));
}

// ---------------------------------------------------------------------------
// fields

/// Complex values attached to every node of a grid. Values are validated
/// finite on construction (NaN/Inf is always a bug upstream).
class SampledField {
public:
    SampledField(grid_ptr grid, std::vector<cplx> values)
        : grid_(std::move(grid)), v_(std::move(values)) {
        require(grid_ != nullptr, "SampledField: null grid");
        require(v_.size() == grid_->size(), "SampledField: value count != node count");
        for (std::size_t i = 0; i < v_.size(); ++i) {
            if (!std::isfinite(v_[i].real()) || !std::isfinite(v_[i].imag())) {
                std::array<cplx, 8> c{};
                grid_->coords(i, c.data());
                std::string msg = "SampledField: non-finite value at node " + std::to_string(i) + " (";
                for (int j = 0; j < grid_->dim(); ++j) {
                    if (j) msg += ", ";
                    msg += fmt_g17(c[j].real()) + "+" + fmt_g17(c[j].imag()) + "i";
                }
                fail(msg + ")");
            }
        }
    }

    const ProductGrid& grid() const { return *grid_; }
    grid_ptr grid_handle() const { return grid_; }
    std::size_t size() const { return v_.size(); }
    cplx operator[](std::size_t i) const { return v_[i]; }
    cplx& operator[](std::size_t i) { return v_[i]; }
    const std::vector<cplx>& values() const { return v_; }
    std::vector<cplx>& values() { return v_; }

private:
    grid_ptr grid_;
    std::vector<cplx> v_;
};

/// Evaluates fn at every node, in node order. fn receives a pointer to the
/// n coordinates. Non-finite results are reported with the offending node.
template <class Fn>
SampledField sample(const grid_ptr& grid, Fn&& fn) {
    std::vector<cplx> v(grid->size());
    const std::size_t n = grid->size();
    const std::size_t chunk = 1 << 14;
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    parallel_for(nchunks, [&](std::size_t c) {
        std::array<cplx, 8> coords{};
        std::size_t lo = c * chunk, hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) {
            grid->coords(i, coords.data());
            v[i] = fn(coords.data());
        }
    });
    return SampledField(grid, std::move(v));
}

/// Convenience for one-factor grids.
template <class Fn>
SampledField sample1(const grid_ptr& grid, Fn&& fn) {
    require(grid->dim() == 1, "sample1: one-factor grid expected");
    return sample(grid, [&](const cplx* z) { return fn(z[0]); });
}

/// (0,1)-form: one component field per factor, all on the same grid.
struct Form01 {
    std::vector<SampledField> comp;

    explicit Form01(std::vector<SampledField> components) : comp(std::move(components)) {
        require(!comp.empty(), "Form01: need at least one component");
        for (const auto& f : comp)
            require(&f.grid() == &comp[0].grid(), "Form01: components must share one grid");
    }
    const ProductGrid& grid() const { return comp[0].grid(); }
    grid_ptr grid_handle() const { return comp[0].grid_handle(); }
    int dim() const { return static_cast<int>(comp.size()); }
};

// ---------------------------------------------------------------------------
// quadrature over grids

/// Sum of value * area-weight in node order, Kahan-compensated. The order
/// is fixed so repeated runs are bit-identical.
inline cplx integrate(const SampledField& f) {
    kahan_cplx acc;
    const ProductGrid& g = f.grid();
    for (std::size_t i = 0; i < f.size(); ++i) acc.add(f[i] * g.weight(i));
    return acc.value();
}

/// (integral of |f|^p mu dV)^(1/p). mu is any callable taking the node
/// coordinate array; mu >= 0 and finite is the caller's contract.
template <class Mu>
double weighted_lp_norm(const SampledField& f, Mu&& mu, double p) {
    require(p > 1.0, "weighted_lp_norm: p must be > 1");
    const ProductGrid& g = f.grid();
    kahan acc;
    std::array<cplx, 8> coords{};
    for (std::size_t i = 0; i < f.size(); ++i) {
        g.coords(i, coords.data());
        double m = mu(coords.data());
        if (!std::isfinite(m) || m < 0.0)
            fail("weighted_lp_norm: weight not finite/nonnegative at node " + std::to_string(i));
        acc.add(std::pow(std::abs(f[i]), p) * m * g.weight(i));
    }
    return std::pow(acc.value(), 1.0 / p);
}

inline double lp_norm(const SampledField& f, double p) {
    return weighted_lp_norm(f, [](const cplx*) { return 1.0; }, p);
}

/// Form norm: ||f||^p = sum_j ||f_j||^p (the convention used for (0,1)-forms).
template <class Mu>
double form_lp_norm(const Form01& f, Mu&& mu, double p) {
    double s = 0.0;
    for (const auto& c : f.comp) s += std::pow(weighted_lp_norm(c, mu, p), p);
    return std::pow(s, 1.0 / p);
}

// ---------------------------------------------------------------------------
// finite differences (Wirtinger derivative in one factor)

/// d/d(conj z_axis) of u by finite differences on the polar grid:
/// centered second-order stencils in r and theta on interior rings,
/// one-sided second-order radial stencils on the first and last ring.
/// In polar coordinates  d/dzbar = (e^{i th}/2) (d/dr + (i/r) d/dth).
inline SampledField dbar_fd(const SampledField& u, int axis) {
    const ProductGrid& g = u.grid();
    require(axis >= 0 && axis < g.dim(), "dbar_fd: axis out of range");
    const PolarGrid& pg = g.factor(axis);
    require(pg.grading() == RadialGrading::uniform, "dbar_fd: uniform radial grading required");
    require(pg.n_r() >= 3, "dbar_fd: need n_r >= 3 on the differentiated factor");
    require(pg.n_theta() >= 4, "dbar_fd: need n_theta >= 4 on the differentiated factor");

    const double dr = pg.dr();
    const double dth = pg.dtheta();
    const int nr = pg.n_r(), nth = pg.n_theta();
    const std::size_t stride = g.stride(axis);
    const std::size_t n = g.size();
    std::vector<cplx> out(n);

    const std::size_t chunk = 1 << 13;
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    parallel_for(nchunks, [&](std::size_t c) {
        std::size_t lo = c * chunk, hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) {
            int fn = g.factor_node(i, axis);
            int ir = pg.ring_of(fn), it = pg.sector_of(fn);
            std::size_t base = i - static_cast<std::size_t>(fn) * stride;
            auto at = [&](int ring, int sec) -> cplx {
                return u[base + static_cast<std::size_t>(pg.node_at(ring, sec)) * stride];
            };
            int itp = (it + 1) % nth, itm = (it + nth - 1) % nth;
            cplx du_dth = (at(ir, itp) - at(ir, itm)) / (2.0 * dth);
            cplx du_dr;
            if (ir >= 1 && ir <= nr - 2) {
                du_dr = (at(ir + 1, it) - at(ir - 1, it)) / (2.0 * dr);
            } else if (ir == 0) {
                du_dr = (-3.0 * at(0, it) + 4.0 * at(1, it) - at(2, it)) / (2.0 * dr);
            } else {
                du_dr = (3.0 * at(nr - 1, it) - 4.0 * at(nr - 2, it) + at(nr - 3, it)) / (2.0 * dr);
            }
            double r = pg.ring_radius(ir), th = pg.theta(it);
            cplx phase = 0.5 * cplx(std::cos(th), std::sin(th));
            out[i] = phase * (du_dr + cplx(0.0, 1.0) / r * du_dth);
        }
    });
    return SampledField(u.grid_handle(), std::move(out));
}

// ---------------------------------------------------------------------------
// CSV snapshots

/// Writes the documented column format:
/// re_z1,im_z1,...,re_zn,im_zn,weight,re_val,im_val
inline void write_field_csv(const std::string& path, const SampledField& f) {
    std::ofstream os(path);
    require(static_cast<bool>(os), "write_field_csv: cannot open " + path);
    const ProductGrid& g = f.grid();
    for (int j = 1; j <= g.dim(); ++j) os << "re_z" << j << ",im_z" << j << ",";
    os << "weight,re_val,im_val\n";
    std::array<cplx, 8> c{};
    for (std::size_t i = 0; i < f.size(); ++i) {
        g.coords(i, c.data());
        for (int j = 0; j < g.dim(); ++j)
            os << fmt_g17(c[j].real()) << ',' << fmt_g17(c[j].imag()) << ',';
        os << fmt_g17(g.weight(i)) << ',' << fmt_g17(f[i].real()) << ',' << fmt_g17(f[i].imag())
           << '\n';
    }
    require(static_cast<bool>(os), "write_field_csv: write failure on " + path);
}

/// Reads a snapshot back onto the grid it was written from; coordinates and
/// weights are cross-checked, value columns become the field.
inline SampledField read_field_csv(const std::string& path, const grid_ptr& grid) {
    std::ifstream is(path);
    require(static_cast<bool>(is), "read_field_csv: cannot open " + path);
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), "read_field_csv: empty file " + path);
    std::vector<cplx> v;
    v.reserve(grid->size());
    std::array<cplx, 8> c{};
    std::size_t i = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        require(i < grid->size(), "read_field_csv: more rows than grid nodes");
        std::vector<double> cols;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) cols.push_back(std::strtod(tok.c_str(), nullptr));
        require(cols.size() == static_cast<std::size_t>(2 * grid->dim() + 3),
                "read_field_csv: bad column count in row " + std::to_string(i));
        grid->coords(i, c.data());
        for (int j = 0; j < grid->dim(); ++j) {
            require(std::abs(c[j].real() - cols[2 * j]) <= 1e-12 &&
                        std::abs(c[j].imag() - cols[2 * j + 1]) <= 1e-12,
                    "read_field_csv: node coordinates do not match grid at row " + std::to_string(i));
        }
        require(std::abs(grid->weight(i) - cols[2 * grid->dim()]) <=
                    1e-12 * std::max(1.0, grid->weight(i)),
                "read_field_csv: weight mismatch at row " + std::to_string(i));
        v.emplace_back(cols[2 * grid->dim() + 1], cols[2 * grid->dim() + 2]);
        ++i;
    }
    require(i == grid->size(), "read_field_csv: fewer rows than grid nodes");
    return SampledField(grid, std::move(v));
}

}  // namespace dbarlab
