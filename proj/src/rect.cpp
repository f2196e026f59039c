#include "hrmt/rect.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

namespace hrmt {

bool CellSpec::matches(uint32_t pattern) const {
    for (size_t j = 0; j < flags.size(); ++j) {
        const bool below = (pattern >> j) & 1u;
        if (flags[j] == Flag::Below && !below) return false;
        if (flags[j] == Flag::Above && below) return false;
    }
    return true;
}

void TreatmentRule::validate() const {
    if (J < 1 || J > kMaxDims) throw InvalidModel("rule: J must be in [1, 24]");
    if (T < 1) throw InvalidModel("rule: T must be >= 1");
    if (static_cast<int>(cells.size()) != T) throw InvalidModel("rule: cells size != T");
    for (int k = 0; k < T; ++k)
        for (const CellSpec& c : cells[k])
            if (static_cast<int>(c.flags.size()) != J)
                throw InvalidModel("rule: cell flag vector length != J");

    // Disjointness probe: on each of the 2^J sign patterns at most one cell of
    // a treatment may match.
    const uint32_t npat = 1u << J;
    for (int k = 0; k < T; ++k) {
        if (cells[k].size() < 2) continue;
        for (uint32_t s = 0; s < npat; ++s) {
            int hits = 0;
            for (const CellSpec& c : cells[k])
                if (c.matches(s) && ++hits > 1)
                    throw InvalidModel("rule: overlapping cells within treatment " +
                                       std::to_string(k + 1));
        }
    }
}

bool term_includes(const Term& a, const Term& b) { return (a.dims & b.dims) == a.dims; }

int term_rank(const Term& t) { return std::popcount(t.dims); }

int Decomposition::eval_pattern(uint32_t pattern) const {
    int v = constant;
    for (const auto& [dims, c] : terms)
        if ((pattern & dims) == dims) v += c;
    return v;
}

int Decomposition::eval(std::span<const double> v, std::span<const double> q) const {
    return eval_pattern(sign_pattern(v, q));
}

std::vector<Term> Decomposition::term_list() const {
    std::vector<Term> out;
    out.reserve(terms.size());
    for (const auto& [dims, c] : terms) out.push_back({c, dims});
    return out;
}

uint32_t sign_pattern(std::span<const double> v, std::span<const double> q) {
    uint32_t s = 0;
    for (size_t j = 0; j < v.size(); ++j)
        if (v[j] < q[j]) s |= 1u << j;
    return s;
}

Decomposition decompose(const TreatmentRule& rule, int k) {
    if (k < 1 || k > rule.T) throw InvalidModel("decompose: treatment index out of range");
    rule.validate();

    std::map<uint32_t, int> acc;  // includes the empty mask as the constant
    for (const CellSpec& cell : rule.cells[k - 1]) {
        std::map<uint32_t, int> poly{{0u, 1}};
        for (int j = 0; j < rule.J; ++j) {
            const uint32_t bit = 1u << j;
            switch (cell.flags[j]) {
                case Flag::Free:
                    break;
                case Flag::Below: {  // multiply by S_j
                    std::map<uint32_t, int> next;
                    for (const auto& [m, c] : poly) next[m | bit] += c;
                    poly = std::move(next);
                    break;
                }
                case Flag::Above: {  // multiply by (1 - S_j)
                    std::map<uint32_t, int> next;
                    for (const auto& [m, c] : poly) {
                        next[m] += c;
                        next[m | bit] -= c;
                    }
                    poly = std::move(next);
                    break;
                }
            }
        }
        for (const auto& [m, c] : poly) acc[m] += c;
    }

    Decomposition d;
    d.J = rule.J;
    d.constant = acc.count(0u) ? acc[0u] : 0;
    for (const auto& [m, c] : acc)
        if (m != 0u && c != 0) d.terms.emplace(m, c);
    return d;
}

std::vector<Decomposition> decompose_all(const TreatmentRule& rule) {
    std::vector<Decomposition> out;
    out.reserve(rule.T);
    for (int k = 1; k <= rule.T; ++k) out.push_back(decompose(rule, k));
    return out;
}

CompletenessResult check_completeness(const TreatmentRule& rule) {
    const std::vector<Decomposition> ds = decompose_all(rule);

    std::map<uint32_t, int> sum;
    int sum_const = 0;
    for (const Decomposition& d : ds) {
        sum_const += d.constant;
        for (const auto& [m, c] : d.terms) sum[m] += c;
    }
    std::erase_if(sum, [](const auto& kv) { return kv.second == 0; });

    CompletenessResult res;
    res.complete = (sum_const == 1) && sum.empty();
    if (res.complete) return res;

    // Build a witness sign pattern.  If the constant residue is off, the
    // all-above pattern already fails; otherwise pick a minimal surviving
    // term: no strictly included term survives, so its own pattern exposes it.
    uint32_t pattern = 0;
    if (sum_const == 1) {
        uint32_t best = 0;
        bool found = false;
        for (const auto& [m, c] : sum) {
            (void)c;
            bool minimal = true;
            for (const auto& [m2, c2] : sum) {
                (void)c2;
                if (m2 != m && (m2 & m) == m2) { minimal = false; break; }
            }
            if (minimal) { best = m; found = true; break; }
        }
        if (found) pattern = best;
    }
    std::vector<double> v(rule.J), q(rule.J, 0.5);
    for (int j = 0; j < rule.J; ++j) v[j] = ((pattern >> j) & 1u) ? 0.25 : 0.75;
    res.witness = std::make_pair(std::move(v), std::move(q));
    return res;
}

InvolvementResult check_involvement(const std::vector<Decomposition>& decomps) {
    uint32_t covered = 0;
    int J = 0;
    for (const Decomposition& d : decomps) {
        J = std::max(J, d.J);
        for (const auto& [m, c] : d.terms) {
            (void)c;
            covered |= m;
        }
    }
    const uint32_t all = (J >= 32) ? ~0u : ((1u << J) - 1u);
    InvolvementResult r;
    r.missing = all & ~covered;
    r.ok = (r.missing == 0);
    return r;
}

std::vector<Term> leading_terms(const Decomposition& d) {
    std::vector<Term> out;
    for (const auto& [m, c] : d.terms) {
        bool leading = true;
        for (const auto& [m2, c2] : d.terms) {
            (void)c2;
            if (m2 != m && (m & m2) == m) { leading = false; break; }
        }
        if (leading) out.push_back({c, m});
    }
    return out;
}

int eval_dk(const Decomposition& d, std::span<const double> v, std::span<const double> q) {
    const int val = d.eval(v, q);
    if (val != 0 && val != 1)
        throw InvalidModel("eval_dk: indicator evaluated to " + std::to_string(val));
    return val;
}

int eval_treatment(const std::vector<Decomposition>& decomps, std::span<const double> v,
                   std::span<const double> q) {
    const uint32_t s = sign_pattern(v, q);
    int hit = 0, count = 0;
    for (size_t k = 0; k < decomps.size(); ++k) {
        if (decomps[k].eval_pattern(s) == 1) {
            hit = static_cast<int>(k) + 1;
            ++count;
        }
    }
    if (count != 1)
        throw InvalidModel("eval_treatment: " + std::to_string(count) +
                           " treatments fire (completeness violated)");
    return hit;
}

AssignmentTable::AssignmentTable(const std::vector<Decomposition>& decomps) {
    if (decomps.empty()) throw InvalidModel("AssignmentTable: no decompositions");
    J_ = decomps.front().J;
    const uint32_t npat = 1u << J_;
    table_.assign(npat, 0);
    for (uint32_t s = 0; s < npat; ++s) {
        int hit = 0, count = 0;
        for (size_t k = 0; k < decomps.size(); ++k) {
            const int val = decomps[k].eval_pattern(s);
            if (val != 0 && val != 1)
                throw InvalidModel("AssignmentTable: non-indicator value");
            if (val == 1) {
                hit = static_cast<int>(k) + 1;
                ++count;
            }
        }
        if (count != 1) throw InvalidModel("AssignmentTable: completeness violated");
        table_[s] = hit;
    }
}

std::string to_string(const Decomposition& d) {
    std::ostringstream os;
    os << d.constant;
    for (const auto& [m, c] : d.terms) {
        os << (c >= 0 ? " +" : " -") << std::abs(c) << "*S{";
        bool first = true;
        for (int j = 0; j < d.J; ++j)
            if ((m >> j) & 1u) {
                if (!first) os << ",";
                os << (j + 1);
                first = false;
            }
        os << "}";
    }
    return os.str();
}

}  // namespace hrmt
