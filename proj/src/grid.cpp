#include "hrmt/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace hrmt {

LatticeNd LatticeNd::zeros(int ndims, int res) {
    LatticeNd l;
    l.ndims = ndims;
    l.res = res;
    size_t n = 1;
    for (int d = 0; d < ndims; ++d) n *= static_cast<size_t>(res);
    l.values.assign(n, 0.0);
    return l;
}

size_t LatticeNd::index(std::span<const int> mi) const {
    size_t idx = 0;
    for (int d = 0; d < ndims; ++d) idx = idx * res + static_cast<size_t>(mi[d]);
    return idx;
}

void LatticeNd::multi_index(size_t idx, std::span<int> mi) const {
    for (int d = ndims - 1; d >= 0; --d) {
        mi[d] = static_cast<int>(idx % res);
        idx /= res;
    }
}

double LatticeNd::weight(std::span<const int> mi) const {
    double w = 1.0;
    for (int d = 0; d < ndims; ++d) w *= node_weight(mi[d]);
    return w;
}

double LatticeNd::integral() const {
    double s = 0.0;
    std::vector<int> mi(ndims);
    for (size_t i = 0; i < values.size(); ++i) {
        multi_index(i, mi);
        s += values[i] * weight(mi);
    }
    return s;
}

double LatticeNd::interp(std::span<const double> x) const {
    // Multilinear between nodes, constant beyond the outer nodes.
    std::vector<int> lo(ndims);
    std::vector<double> frac(ndims);
    const double step = 1.0 / (res + 1.0);
    for (int d = 0; d < ndims; ++d) {
        const double t = x[d] / step - 1.0;  // node i sits at t = i
        if (t <= 0.0) {
            lo[d] = 0;
            frac[d] = 0.0;
        } else if (t >= res - 1) {
            lo[d] = res - 2 >= 0 ? res - 2 : 0;
            frac[d] = res >= 2 ? 1.0 : 0.0;
        } else {
            lo[d] = static_cast<int>(t);
            frac[d] = t - lo[d];
        }
    }
    double out = 0.0;
    const uint32_t corners = 1u << ndims;
    std::vector<int> mi(ndims);
    for (uint32_t c = 0; c < corners; ++c) {
        double w = 1.0;
        for (int d = 0; d < ndims; ++d) {
            const bool hi = (c >> d) & 1u;
            w *= hi ? frac[d] : 1.0 - frac[d];
            mi[d] = lo[d] + (hi ? 1 : 0);
            if (mi[d] >= res) mi[d] = res - 1;
        }
        if (w != 0.0) out += w * values[index(mi)];
    }
    return out;
}

void GridDensity::clip_negative() {
    for (double& v : lat.values) v = std::max(v, 0.0);
}

void GridDensity::normalize() {
    const double z = lat.integral();
    if (z <= 0.0) throw std::runtime_error("GridDensity::normalize: nonpositive mass");
    for (double& v : lat.values) v /= z;
}

std::vector<int> mask_to_dims(uint32_t mask) {
    std::vector<int> out;
    for (int j = 0; j < 32; ++j)
        if ((mask >> j) & 1u) out.push_back(j);
    return out;
}

CumulativeLattice::CumulativeLattice(const LatticeNd& lat)
    : ndims_(lat.ndims), res_(lat.res) {
    edges_.resize(res_ + 1);
    for (int i = 0; i < res_; ++i) edges_[i] = lat.cell_left(i);
    edges_[res_] = 1.0;

    size_t ncorner = 1;
    for (int d = 0; d < ndims_; ++d) ncorner *= static_cast<size_t>(res_ + 1);
    corner_.assign(ncorner, 0.0);

    // corner_(ci) = sum of cell masses with cell index < ci in every axis;
    // built by a running prefix over each axis in turn.
    std::vector<int> ci(ndims_);
    for (size_t idx = 0; idx < ncorner; ++idx) {
        size_t rem = idx;
        bool boundary = false;
        for (int d = ndims_ - 1; d >= 0; --d) {
            ci[d] = static_cast<int>(rem % (res_ + 1));
            rem /= (res_ + 1);
            if (ci[d] == 0) boundary = true;
        }
        if (boundary) { corner_[idx] = 0.0; continue; }
        // mass of cell (ci-1) plus the d-dimensional prefix-sum recurrence
        std::vector<int> cell(ndims_);
        for (int d = 0; d < ndims_; ++d) cell[d] = ci[d] - 1;
        double cellmass = lat.values[lat.index(cell)];
        for (int d = 0; d < ndims_; ++d)
            cellmass *= edges_[cell[d] + 1] - edges_[cell[d]];
        double s = cellmass;
        const uint32_t subs = 1u << ndims_;
        std::vector<int> cj(ndims_);
        for (uint32_t b = 1; b < subs; ++b) {
            for (int d = 0; d < ndims_; ++d) cj[d] = ((b >> d) & 1u) ? ci[d] - 1 : ci[d];
            const double term = corner_[cindex(cj)];
            s += (std::popcount(b) % 2 == 1) ? term : -term;
        }
        corner_[idx] = s;
    }
    std::vector<int> top(ndims_, res_);
    total_ = corner_[cindex(top)];
}

size_t CumulativeLattice::cindex(std::span<const int> ci) const {
    size_t idx = 0;
    for (int d = 0; d < ndims_; ++d) idx = idx * (res_ + 1) + static_cast<size_t>(ci[d]);
    return idx;
}

double CumulativeLattice::cdf(std::span<const double> x) const {
    // Multilinear interpolation over the corner grid is exact for the
    // piecewise-constant density.
    std::vector<int> lo(ndims_);
    std::vector<double> frac(ndims_);
    for (int d = 0; d < ndims_; ++d) {
        const double v = std::clamp(x[d], 0.0, 1.0);
        const auto it = std::upper_bound(edges_.begin(), edges_.end(), v);
        int cell = static_cast<int>(it - edges_.begin()) - 1;
        cell = std::clamp(cell, 0, res_ - 1);
        lo[d] = cell;
        frac[d] = (v - edges_[cell]) / (edges_[cell + 1] - edges_[cell]);
    }
    double out = 0.0;
    const uint32_t corners = 1u << ndims_;
    std::vector<int> ci(ndims_);
    for (uint32_t c = 0; c < corners; ++c) {
        double w = 1.0;
        for (int d = 0; d < ndims_; ++d) {
            const bool hi = (c >> d) & 1u;
            w *= hi ? frac[d] : 1.0 - frac[d];
            ci[d] = lo[d] + (hi ? 1 : 0);
        }
        if (w != 0.0) out += w * corner_[cindex(ci)];
    }
    return out;
}

double CumulativeLattice::inverse(double p) const {
    if (ndims_ != 1) throw std::runtime_error("CumulativeLattice::inverse: 1-D only");
    const double target = std::clamp(p, 0.0, 1.0) * total_;
    // corner_ is nondecreasing along the single axis
    int lo = 0, hi = res_;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (corner_[mid] <= target) lo = mid;
        else hi = mid;
    }
    const double c0 = corner_[lo], c1 = corner_[hi];
    if (c1 <= c0) return edges_[lo];
    const double t = (target - c0) / (c1 - c0);
    return edges_[lo] + t * (edges_[hi] - edges_[lo]);
}

}  // namespace hrmt
