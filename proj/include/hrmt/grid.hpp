#pragma once
#include <cstdint>
#include <span>
#include <vector>

namespace hrmt {

// Values on the interior lattice of (0,1)^ndims: `res` nodes per axis at
// (i+1)/(res+1).  Integration treats each node as covering a cell of the unit
// cube (edge cells extend to the boundary), so a constant field integrates to
// that constant exactly.  Evaluation is multilinear with constant extension
// beyond the outermost nodes.
struct LatticeNd {
    int ndims = 0;
    int res = 0;
    std::vector<double> values;

    static LatticeNd zeros(int ndims, int res);

    size_t size() const { return values.size(); }

    double node(int i) const { return (i + 1) / (res + 1.0); }

    // Edges of node i's coverage cell.
    double cell_left(int i) const { return i == 0 ? 0.0 : node(i) - 0.5 / (res + 1.0); }
    double cell_right(int i) const {
        return i == res - 1 ? 1.0 : node(i) + 0.5 / (res + 1.0);
    }
    double node_weight(int i) const { return cell_right(i) - cell_left(i); }

    size_t index(std::span<const int> mi) const;
    void multi_index(size_t idx, std::span<int> mi) const;

    double weight(std::span<const int> mi) const;
    double integral() const;

    double interp(std::span<const double> x) const;

    double& at(std::span<const int> mi) { return values[index(mi)]; }
    double at(std::span<const int> mi) const { return values[index(mi)]; }
};

// Iterate all multi-indices of a lattice shape (res^ndims), calling
// fn(span<const int> mi, size_t flat_index).
template <class F>
void for_each_node(int ndims, int res, F&& fn) {
    std::vector<int> mi(ndims, 0);
    size_t flat = 0;
    while (true) {
        fn(std::span<const int>(mi), flat);
        ++flat;
        int d = ndims - 1;
        while (d >= 0 && ++mi[d] == res) mi[d--] = 0;
        if (d < 0) break;
    }
}

// A nonnegative density estimate on an interior lattice.
struct GridDensity {
    LatticeNd lat;

    double pdf(std::span<const double> x) const { return lat.interp(x); }
    double integral() const { return lat.integral(); }

    void clip_negative();
    // Rescale so the lattice integral is exactly one.
    void normalize();
};

// Marginal density over a subset of parent dimensions (bitmask `dims`,
// bit j-1 for dimension j; axes of `g` follow ascending dimension order).
struct MarginalDensity {
    uint32_t dims = 0;
    GridDensity g;

    int arity() const { return g.lat.ndims; }
};

std::vector<int> mask_to_dims(uint32_t mask);  // ascending 0-based dims

// Exact CDF of the piecewise-constant reading of a lattice density.
// Corner values are precomputed on the cell-edge grid; within a cell the CDF
// is multilinear, so interpolation reproduces it exactly.
class CumulativeLattice {
  public:
    explicit CumulativeLattice(const LatticeNd& lat);

    double cdf(std::span<const double> x) const;

    // 1-D only: inverse CDF by piecewise-linear inversion.
    double inverse(double p) const;

    double total() const { return total_; }

  private:
    int ndims_, res_;
    std::vector<double> edges_;   // res+1 edges per axis (shared across axes)
    std::vector<double> corner_;  // (res+1)^ndims cumulative masses
    double total_ = 0.0;

    size_t cindex(std::span<const int> ci) const;
};

}  // namespace hrmt
