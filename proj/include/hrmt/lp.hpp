#pragma once
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "hrmt/errors.hpp"

namespace hrmt {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Optimal;
    double objective = 0.0;
    std::vector<double> x;
    int iterations = 0;
};

// Dense two-phase primal simplex with Bland's rule over free structural
// variables (internally split into nonnegative pairs).  Templated on the
// scalar so exact arithmetic types can be substituted; double is the default
// instantiation used throughout.
//
// Problem: minimize c.x subject to A x <= b (x free).
template <class Real = double>
class SimplexSolver {
  public:
    explicit SimplexSolver(int nvars) : n_(nvars) {}

    void add_row(std::span<const double> coeffs, double rhs) {
        rows_.emplace_back(coeffs.begin(), coeffs.end());
        rhs_.push_back(rhs);
    }

    size_t row_count() const { return rows_.size(); }

    LpResult minimize(std::span<const double> objective) const { return solve(objective); }

    LpResult maximize(std::span<const double> objective) const {
        std::vector<double> neg(objective.begin(), objective.end());
        for (double& v : neg) v = -v;
        LpResult r = solve(neg);
        r.objective = -r.objective;
        return r;
    }

    bool feasible() const {
        const std::vector<double> zero(n_, 0.0);
        return solve(zero).status != LpStatus::Infeasible;
    }

  private:
    int n_;
    std::vector<std::vector<double>> rows_;
    std::vector<double> rhs_;

    static constexpr Real kEps = Real(1e-9);

    // Tableau layout: columns [xp(n) | xn(n) | slack(m) | artificial(k) | rhs]
    LpResult solve(std::span<const double> objective) const {
        const int m = static_cast<int>(rows_.size());
        const int nsplit = 2 * n_;
        std::vector<int> art_of_row(m, -1);
        int nart = 0;
        for (int i = 0; i < m; ++i)
            if (rhs_[i] < 0.0) art_of_row[i] = nart++;
        const int ncols = nsplit + m + nart;

        std::vector<std::vector<Real>> T(m, std::vector<Real>(ncols + 1, Real(0)));
        std::vector<int> basis(m);
        for (int i = 0; i < m; ++i) {
            const Real sign = rhs_[i] < 0.0 ? Real(-1) : Real(1);
            for (int j = 0; j < n_; ++j) {
                T[i][j] = sign * Real(rows_[i][j]);
                T[i][n_ + j] = -T[i][j];
            }
            T[i][nsplit + i] = sign;  // slack (negated when the row was flipped)
            T[i][ncols] = sign * Real(rhs_[i]);
            if (art_of_row[i] >= 0) {
                T[i][nsplit + m + art_of_row[i]] = Real(1);
                basis[i] = nsplit + m + art_of_row[i];
            } else {
                basis[i] = nsplit + i;
            }
        }

        LpResult res;
        auto pivot = [&](int r, int c) {
            const Real p = T[r][c];
            for (int j = 0; j <= ncols; ++j) T[r][j] /= p;
            for (int i = 0; i < m; ++i) {
                if (i == r) continue;
                const Real f = T[i][c];
                if (f == Real(0)) continue;
                for (int j = 0; j <= ncols; ++j) T[i][j] -= f * T[r][j];
                if (T[i][c] != Real(0)) T[i][c] = Real(0);
            }
            basis[r] = c;
            ++res.iterations;
        };

        const int max_pivots = 2000 + 200 * (m + ncols);

        // Dantzig pricing for speed; after a streak of degenerate pivots,
        // fall back to Bland's first-index rule until progress resumes, which
        // keeps the anti-cycling guarantee.
        auto run = [&](const std::vector<Real>& cost, int maxcol) -> bool {
            // returns false on unbounded
            int degenerate_streak = 0;
            while (true) {
                if (res.iterations > max_pivots)
                    throw Error("simplex: pivot limit exceeded");
                const bool bland = degenerate_streak > 25;
                std::vector<Real> y(m);
                for (int i = 0; i < m; ++i) y[i] = cost[basis[i]];
                int enter = -1;
                Real most = -kEps;
                for (int j = 0; j < maxcol; ++j) {
                    Real red = cost[j];
                    for (int i = 0; i < m; ++i) red -= y[i] * T[i][j];
                    if (red < most) {
                        enter = j;
                        if (bland) break;  // first index
                        most = red;
                    }
                }
                if (enter < 0) return true;
                // leaving rule: exact minimum ratio, ties by the smallest
                // basic-variable index
                int leave = -1;
                Real best = Real(0);
                for (int i = 0; i < m; ++i) {
                    if (T[i][enter] <= kEps) continue;
                    const Real ratio = T[i][ncols] / T[i][enter];
                    if (leave < 0 || ratio < best ||
                        (ratio == best && basis[i] < basis[leave])) {
                        leave = i;
                        best = ratio;
                    }
                }
                if (leave < 0) return false;
                degenerate_streak = best <= kEps ? degenerate_streak + 1 : 0;
                pivot(leave, enter);
            }
        };

        if (nart > 0) {
            std::vector<Real> phase1(ncols, Real(0));
            for (int j = nsplit + m; j < ncols; ++j) phase1[j] = Real(1);
            run(phase1, ncols);
            Real infeas = Real(0);
            for (int i = 0; i < m; ++i)
                if (basis[i] >= nsplit + m) infeas += T[i][ncols];
            if (infeas > Real(1e-7)) {
                res.status = LpStatus::Infeasible;
                return res;
            }
            // drive remaining artificials out of the basis on the largest
            // available pivot; rows with no usable pivot are redundant
            for (int i = 0; i < m; ++i) {
                if (basis[i] < nsplit + m) continue;
                int c = -1;
                Real cbest = Real(0);
                for (int j = 0; j < nsplit + m; ++j) {
                    const Real a = T[i][j] < Real(0) ? -T[i][j] : T[i][j];
                    if (a > cbest && a > Real(1e-7)) {
                        cbest = a;
                        c = j;
                    }
                }
                if (c >= 0) pivot(i, c);
            }
        }

        std::vector<Real> cost(ncols, Real(0));
        for (int j = 0; j < n_; ++j) {
            cost[j] = Real(objective[j]);
            cost[n_ + j] = -Real(objective[j]);
        }
        if (!run(cost, nsplit + m)) {
            res.status = LpStatus::Unbounded;
            return res;
        }

        res.x.assign(n_, 0.0);
        for (int i = 0; i < m; ++i) {
            if (basis[i] < n_) res.x[basis[i]] += static_cast<double>(T[i][ncols]);
            else if (basis[i] < nsplit)
                res.x[basis[i] - n_] -= static_cast<double>(T[i][ncols]);
        }
        res.objective = 0.0;
        for (int j = 0; j < n_; ++j) res.objective += objective[j] * res.x[j];
        res.status = LpStatus::Optimal;
        return res;
    }
};

using LpSolver = SimplexSolver<double>;

}  // namespace hrmt
