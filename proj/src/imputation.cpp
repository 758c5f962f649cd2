#include "ills/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ills/errors.hpp"
#include "ills/rng.hpp"

namespace ills {

namespace {

constexpr double kSingularCutoff = 1e-10;
// Normal equations are only trusted while the Cholesky factor's diagonal
// spread stays below 1e4, i.e. cond(B) of roughly 1e4 or better. Anything
// worse goes through the SVD.
constexpr double kCholeskyDiagonalRatio = 1e-4;

bool needs_estimate(Provenance tag) {
    return tag == Provenance::Missing || tag == Provenance::Imputed;
}

// Similarity-descending order of every user except `target`, ties by index.
std::vector<std::uint32_t> rank_by_similarity(std::span<const double> similarities, std::size_t target) {
    std::vector<std::uint32_t> order;
    order.reserve(similarities.size());
    for (std::size_t j = 0; j < similarities.size(); ++j) {
        if (j != target) {
            order.push_back(static_cast<std::uint32_t>(j));
        }
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return similarities[a] > similarities[b]; });
    return order;
}

Eigen::MatrixXd basis_columns(const ScoreMatrix& scores, SimilarityBasis basis) {
    if (basis == SimilarityBasis::Values) {
        return scores.values();
    }
    Eigen::MatrixXd adjacency = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(scores.n_items()),
                                                      static_cast<Eigen::Index>(scores.n_users()));
    for (std::size_t user = 0; user < scores.n_users(); ++user) {
        const auto tags = scores.provenance_column(user);
        for (std::size_t item = 0; item < tags.size(); ++item) {
            if (tags[item] == Provenance::Observed) {
                adjacency(static_cast<Eigen::Index>(item), static_cast<Eigen::Index>(user)) = 1.0;
            }
        }
    }
    return adjacency;
}

std::span<const double> column_span(const Eigen::MatrixXd& m, std::size_t col) {
    return {m.col(static_cast<Eigen::Index>(col)).data(), static_cast<std::size_t>(m.rows())};
}

template <typename Derived>
bool well_conditioned(const Eigen::MatrixBase<Derived>& diagonal) {
    if (diagonal.size() == 0 || !diagonal.allFinite()) {
        return false;
    }
    const double lo = diagonal.minCoeff();
    const double hi = diagonal.maxCoeff();
    return lo > 0.0 && lo >= kCholeskyDiagonalRatio * hi;
}

// Minimum-norm least squares through a complete orthogonal decomposition:
// a column-pivoted QR finds the rank, a second QR of the leading rows'
// transpose removes the null-space component. Cheaper than an SVD on the
// near-square systems of the row path.
Eigen::VectorXd min_norm_cod(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    qr.setThreshold(kSingularCutoff);
    const auto rank = qr.rank();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m.cols());
    if (rank == 0) {
        return y;
    }
    const Eigen::VectorXd c = (qr.householderQ().transpose() * rhs).head(rank);
    const Eigen::MatrixXd lead = qr.matrixQR().topRows(rank).triangularView<Eigen::Upper>();
    const Eigen::HouseholderQR<Eigen::MatrixXd> z(lead.transpose());
    y.head(rank) = z.matrixQR().topLeftCorner(rank, rank).triangularView<Eigen::Upper>().transpose().solve(c);
    y = z.householderQ() * y;
    return qr.colsPermutation() * y;
}

constexpr std::uint32_t kNoGroup = std::numeric_limits<std::uint32_t>::max();

// Neighbor columns restricted to the known rows often coincide: exact copies,
// or constant columns (neighbors that reach none of those rows). Each set of
// parallel columns keeps its first member as representative. Least squares
// only sees the representatives; the minimum-norm solution then shares each
// representative's weight among its members in proportion to their scale.
struct ColumnGroups {
    std::vector<Eigen::Index> representatives;  // ascending column indices
    std::vector<std::uint32_t> group;           // per column; kNoGroup for zero columns
    std::vector<double> scale;                  // column = scale * representative

    std::size_t distinct_before(std::size_t k) const {
        return static_cast<std::size_t>(
            std::lower_bound(representatives.begin(), representatives.end(), static_cast<Eigen::Index>(k)) -
            representatives.begin());
    }

    Eigen::VectorXd expand(const Eigen::VectorXd& weights, std::size_t k) const {
        std::vector<double> norm(static_cast<std::size_t>(weights.size()), 0.0);
        for (std::size_t c = 0; c < k; ++c) {
            if (group[c] != kNoGroup) {
                norm[group[c]] += scale[c] * scale[c];
            }
        }
        Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
        for (std::size_t c = 0; c < k; ++c) {
            if (group[c] != kNoGroup) {
                x(static_cast<Eigen::Index>(c)) = scale[c] * weights(group[c]) / norm[group[c]];
            }
        }
        return x;
    }
};

bool lexicographic_less(const double* x, const double* y, Eigen::Index length) {
    return std::lexicographical_compare(x, x + length, y, y + length);
}

ColumnGroups group_columns(const Eigen::MatrixXd& b) {
    const auto cols = static_cast<std::size_t>(b.cols());
    const auto rows = b.rows();
    ColumnGroups g;
    g.group.assign(cols, kNoGroup);
    g.scale.assign(cols, 0.0);
    std::vector<Eigen::Index> rep(cols, -1);
    std::vector<Eigen::Index> varying;
    Eigen::Index constant_rep = -1;
    for (std::size_t c = 0; c < cols; ++c) {
        const auto col = b.col(static_cast<Eigen::Index>(c));
        if ((col.array() == 0.0).all()) {
            continue;
        }
        if ((col.array() == col(0)).all()) {
            if (constant_rep < 0) {
                constant_rep = static_cast<Eigen::Index>(c);
            }
            rep[c] = constant_rep;
            g.scale[c] = col(0) / b(0, constant_rep);
        } else {
            varying.push_back(static_cast<Eigen::Index>(c));
        }
    }
    std::stable_sort(varying.begin(), varying.end(), [&](Eigen::Index x, Eigen::Index y) {
        return lexicographic_less(b.col(x).data(), b.col(y).data(), rows);
    });
    for (std::size_t i = 0; i < varying.size();) {
        std::size_t j = i;
        while (j < varying.size() &&
               std::equal(b.col(varying[i]).data(), b.col(varying[i]).data() + rows, b.col(varying[j]).data())) {
            rep[static_cast<std::size_t>(varying[j])] = varying[i];
            g.scale[static_cast<std::size_t>(varying[j])] = 1.0;
            ++j;
        }
        i = j;
    }
    for (std::size_t c = 0; c < cols; ++c) {
        if (rep[c] == static_cast<Eigen::Index>(c)) {
            g.representatives.push_back(rep[c]);
        }
    }
    for (std::size_t c = 0; c < cols; ++c) {
        if (rep[c] >= 0) {
            g.group[c] = static_cast<std::uint32_t>(
                std::lower_bound(g.representatives.begin(), g.representatives.end(), rep[c]) -
                g.representatives.begin());
        }
    }
    return g;
}

struct RowGroups {
    std::vector<Eigen::Index> representatives;  // ascending row indices
    Eigen::VectorXd means;                      // mean target value per group
};

// Rows identical over the first k columns of b (given transposed, one row per
// column of `bt`). Duplicated rows leave the least-squares fit unchanged when
// collapsed to one row carrying their mean target.
RowGroups group_rows(const Eigen::MatrixXd& bt, std::size_t k, const Eigen::VectorXd& a) {
    const auto len = static_cast<Eigen::Index>(k);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(bt.cols()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
        return lexicographic_less(bt.col(x).data(), bt.col(y).data(), len);
    });
    std::vector<std::pair<Eigen::Index, double>> firsts;  // (representative, mean)
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < order.size() &&
               std::equal(bt.col(order[i]).data(), bt.col(order[i]).data() + len, bt.col(order[j]).data())) {
            sum += a(order[j]);
            ++j;
        }
        firsts.emplace_back(order[i], sum / static_cast<double>(j - i));
        i = j;
    }
    std::sort(firsts.begin(), firsts.end());
    RowGroups g;
    g.means.resize(static_cast<Eigen::Index>(firsts.size()));
    for (std::size_t i = 0; i < firsts.size(); ++i) {
        g.representatives.push_back(firsts[i].first);
        g.means(static_cast<Eigen::Index>(i)) = firsts[i].second;
    }
    return g;
}

// Everything one LLS pass needs from the frozen previous-iteration matrix.
class LlsEngine {
public:
    LlsEngine(const ScoreMatrix& frozen, SimilarityBasis basis) : frozen_(frozen) {
        const auto n = frozen.n_items();
        const auto m = frozen.n_users();
        if (m < 2) {
            throw DataError("imputation needs at least 2 users");
        }
        filled_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
        unknown_.resize(m);
        for (std::size_t user = 0; user < m; ++user) {
            const auto filled = row_average_fill(frozen.column(user));
            filled_.col(static_cast<Eigen::Index>(user)) = Eigen::Map<const Eigen::VectorXd>(filled.data(), filled.size());
            const auto tags = frozen.provenance_column(user);
            for (std::size_t item = 0; item < n; ++item) {
                if (needs_estimate(tags[item])) {
                    unknown_[user].push_back(static_cast<std::uint32_t>(item));
                }
            }
        }

        gram_.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        gram_.setZero();
        gram_.selfadjointView<Eigen::Lower>().rankUpdate(filled_.transpose());
        gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();

        const Eigen::MatrixXd columns = basis_columns(frozen, basis);
        similarity_.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) {
            similarity_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 0.0;
            for (std::size_t j = i + 1; j < m; ++j) {
                const double s = similarity_dense(column_span(columns, i), column_span(columns, j));
                similarity_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
                similarity_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = s;
            }
        }
    }

    std::span<const std::uint32_t> unknown_rows(std::size_t user) const { return unknown_[user]; }

    // Estimates for `rows` (a subset of the user's unknown rows), one column
    // per entry of `ks` (ascending, each in [1, m-1]).
    Eigen::MatrixXd estimate(std::size_t target, std::span<const std::size_t> ks,
                             std::span<const std::uint32_t> rows) const {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                                    static_cast<Eigen::Index>(ks.size()));
        if (rows.empty() || ks.empty()) {
            return out;
        }
        const auto n = frozen_.n_items();
        const auto& unknown = unknown_[target];
        std::vector<Eigen::Index> known;
        known.reserve(n - unknown.size());
        {
            std::size_t u = 0;
            for (std::size_t item = 0; item < n; ++item) {
                if (u < unknown.size() && unknown[u] == item) {
                    ++u;
                } else {
                    known.push_back(static_cast<Eigen::Index>(item));
                }
            }
        }
        if (known.empty()) {
            return out;
        }

        const auto order = rank_by_similarity(column_span(similarity_, target), target);
        const auto k_max = ks.back();
        std::vector<Eigen::Index> neighbors(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_max));
        std::vector<Eigen::Index> row_index(rows.begin(), rows.end());
        const auto nk = static_cast<std::size_t>(known.size());

        const Eigen::VectorXd a = frozen_.values()(known, Eigen::Index{static_cast<Eigen::Index>(target)});
        const Eigen::MatrixXd b = filled_(known, neighbors);     // nk x k_max
        const Eigen::MatrixXd w = filled_(row_index, neighbors);  // rows x k_max
        const auto columns = group_columns(b);

        // Systems whose distinct columns fit in the known rows share one
        // Cholesky factor of the representatives' normal matrix: the factor of
        // a leading block is the leading block of the factor.
        std::size_t r_over = 0;
        for (auto k : ks) {
            const auto r = columns.distinct_before(k);
            if (r <= nk) {
                r_over = std::max(r_over, r);
            }
        }
        Eigen::MatrixXd column_l;
        bool column_ok = false;
        Eigen::VectorXd bta;
        if (r_over > 0) {
            std::vector<Eigen::Index> head(columns.representatives.begin(),
                                           columns.representatives.begin() + static_cast<std::ptrdiff_t>(r_over));
            const Eigen::MatrixXd b_head = b(Eigen::all, head);
            Eigen::MatrixXd btb;
            if (unknown.size() <= known.size()) {
                std::vector<Eigen::Index> users(r_over);
                for (std::size_t c = 0; c < r_over; ++c) {
                    users[c] = neighbors[static_cast<std::size_t>(head[c])];
                }
                btb = gram_(users, users);
                std::vector<Eigen::Index> unknown_index(unknown.begin(), unknown.end());
                const Eigen::MatrixXd removed = filled_(unknown_index, users);
                btb.noalias() -= removed.transpose() * removed;
            } else {
                btb = b_head.transpose() * b_head;
            }
            bta = b_head.transpose() * a;
            Eigen::LLT<Eigen::MatrixXd> factor(btb);
            column_ok = factor.info() == Eigen::Success;
            if (column_ok) {
                column_l = factor.matrixL();
            }
        }

        const auto n_rows = static_cast<Eigen::Index>(nk);
        Eigen::MatrixXd row_gram = Eigen::MatrixXd::Zero(n_rows, n_rows);  // lower triangle only
        Eigen::Index row_gram_cols = 0;
        Eigen::MatrixXd bt;  // rows of b, contiguous

        for (std::size_t slot = 0; slot < ks.size(); ++slot) {
            const auto k = static_cast<Eigen::Index>(ks[slot]);
            const auto r = columns.distinct_before(ks[slot]);
            Eigen::VectorXd x;
            bool solved = false;
            if (r <= nk) {
                const auto rr = static_cast<Eigen::Index>(r);
                if (column_ok && well_conditioned(column_l.diagonal().head(rr))) {
                    const auto lr = column_l.topLeftCorner(rr, rr);
                    const Eigen::VectorXd y = lr.triangularView<Eigen::Lower>().solve(bta.head(rr));
                    const Eigen::VectorXd z = lr.transpose().triangularView<Eigen::Upper>().solve(y);
                    x = columns.expand(z, ks[slot]);
                    solved = x.allFinite();
                }
            } else {
                // More distinct columns than known rows: minimum-norm
                // x = B^T (B B^T)^{-1} a over the distinct rows, each carrying
                // the mean of its duplicates' targets.
                if (k > row_gram_cols) {
                    row_gram.selfadjointView<Eigen::Lower>().rankUpdate(
                        b.middleCols(row_gram_cols, k - row_gram_cols));
                    row_gram_cols = k;
                }
                if (bt.size() == 0) {
                    bt = b.transpose();
                }
                const auto groups = group_rows(bt, ks[slot], a);
                const Eigen::MatrixXd sub = row_gram(groups.representatives, groups.representatives);
                Eigen::LLT<Eigen::MatrixXd> row_factor(sub);
                if (row_factor.info() == Eigen::Success &&
                    well_conditioned(Eigen::MatrixXd(row_factor.matrixL()).diagonal())) {
                    x = b(groups.representatives, Eigen::seqN(0, k)).transpose() * row_factor.solve(groups.means);
                    solved = x.allFinite();
                }
            }
            if (!solved) {
                // Rank-deficient or badly conditioned.
                x = min_norm_cod(b.leftCols(k), a);
            }
            out.col(static_cast<Eigen::Index>(slot)) = (w.leftCols(k) * x).cwiseMax(0.0);
        }
        return out;
    }

private:
    const ScoreMatrix& frozen_;
    Eigen::MatrixXd filled_;
    Eigen::MatrixXd gram_;
    Eigen::MatrixXd similarity_;
    std::vector<std::vector<std::uint32_t>> unknown_;
};

std::vector<double> mask_estimates(const ScoreMatrix& scores, const ValidationMask& mask) {
    std::vector<double> out;
    out.reserve(mask.entries.size());
    for (const auto& e : mask.entries) {
        out.push_back(scores.value(e.item, e.user));
    }
    return out;
}

std::vector<double> mask_truths(const ValidationMask& mask) {
    std::vector<double> out;
    out.reserve(mask.entries.size());
    for (const auto& e : mask.entries) {
        out.push_back(e.truth);
    }
    return out;
}

// Estimates from the row-average prefill: the mean of the user's nonzero
// entries in the masked matrix.
std::vector<double> prefill_estimates(const ScoreMatrix& masked, const ValidationMask& mask) {
    std::vector<double> out;
    out.reserve(mask.entries.size());
    std::size_t cached_user = static_cast<std::size_t>(-1);
    double cached_mean = 0.0;
    for (const auto& e : mask.entries) {
        if (e.user != cached_user) {
            cached_user = e.user;
            cached_mean = row_average_fill(masked.column(e.user))[e.item];
        }
        out.push_back(cached_mean);
    }
    return out;
}

}  // namespace

double similarity(const BipartiteGraph& graph, std::size_t i, std::size_t j) {
    if (i == j) {
        throw std::invalid_argument("similarity: self-similarity is undefined");
    }
    if (i >= graph.n_users() || j >= graph.n_users()) {
        throw std::out_of_range("similarity: user index out of range");
    }
    const auto pi = graph.profile(i);
    const auto pj = graph.profile(j);
    if (pi.empty() || pj.empty()) {
        return 0.0;
    }
    std::size_t common = 0;
    auto x = pi.begin();
    auto y = pj.begin();
    while (x != pi.end() && y != pj.end()) {
        if (*x < *y) {
            ++x;
        } else if (*y < *x) {
            ++y;
        } else {
            ++common;
            ++x;
            ++y;
        }
    }
    const auto ki = static_cast<double>(pi.size());
    const auto kj = static_cast<double>(pj.size());
    return static_cast<double>(common) / std::sqrt(ki * ki + kj * kj);
}

double similarity_dense(std::span<const double> left, std::span<const double> right) {
    if (left.size() != right.size()) {
        throw std::invalid_argument("similarity_dense: length mismatch");
    }
    double dot = 0.0;
    double left_sq = 0.0;
    double right_sq = 0.0;
    for (std::size_t k = 0; k < left.size(); ++k) {
        dot += left[k] * right[k];
        left_sq += left[k] * left[k];
        right_sq += right[k] * right[k];
    }
    if (left_sq == 0.0 || right_sq == 0.0) {
        return 0.0;
    }
    return dot / std::sqrt(left_sq * left_sq + right_sq * right_sq);
}

NeighborSet select_neighbors(const ScoreMatrix& scores, std::size_t target, std::size_t k, SimilarityBasis basis) {
    if (k == 0) {
        throw std::invalid_argument("select_neighbors: K must be at least 1");
    }
    if (target >= scores.n_users()) {
        throw std::out_of_range("select_neighbors: target out of range");
    }
    const Eigen::MatrixXd columns = basis_columns(scores, basis);
    std::vector<double> sims(scores.n_users(), 0.0);
    for (std::size_t j = 0; j < scores.n_users(); ++j) {
        if (j != target) {
            sims[j] = similarity_dense(column_span(columns, target), column_span(columns, j));
        }
    }
    auto order = rank_by_similarity(sims, target);
    order.resize(std::min(k, order.size()));
    NeighborSet set;
    set.target = target;
    set.neighbors = order;
    for (auto j : order) {
        set.similarities.push_back(sims[j]);
    }
    return set;
}

std::vector<double> row_average_fill(std::span<const double> column) {
    double sum = 0.0;
    std::size_t nonzero = 0;
    for (double v : column) {
        if (v != 0.0) {
            sum += v;
            ++nonzero;
        }
    }
    std::vector<double> out(column.begin(), column.end());
    if (nonzero == 0) {
        return out;
    }
    const double mean = sum / static_cast<double>(nonzero);
    for (double& v : out) {
        if (v == 0.0) {
            v = mean;
        }
    }
    return out;
}

Eigen::VectorXd lstsq_min_norm(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
    if (m.rows() != rhs.size()) {
        throw std::invalid_argument("lstsq_min_norm: dimension mismatch");
    }
    if (!m.allFinite() || !rhs.allFinite()) {
        throw NumericError("lstsq_min_norm: non-finite input");
    }
    if (m.rows() == 0 || m.cols() == 0) {
        return Eigen::VectorXd::Zero(m.cols());
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double cutoff = kSingularCutoff * (s.size() > 0 ? s(0) : 0.0);
    Eigen::VectorXd coeffs = svd.matrixU().transpose() * rhs;
    for (Eigen::Index r = 0; r < s.size(); ++r) {
        coeffs(r) = (s(r) > cutoff && s(r) > 0.0) ? coeffs(r) / s(r) : 0.0;
    }
    return svd.matrixV() * coeffs;
}

double estimate_entry(const Eigen::VectorXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& w) {
    if (b.cols() < 1 || b.cols() != w.size() || b.rows() != a.size()) {
        throw std::invalid_argument("estimate_entry: inconsistent dimensions");
    }
    const Eigen::VectorXd x = lstsq_min_norm(b, a);
    return std::max(0.0, w.dot(x));
}

ScoreMatrix impute_iteration(const ScoreMatrix& scores, std::size_t k, const ImputeOptions& options) {
    if (k == 0) {
        throw std::invalid_argument("impute_iteration: K must be at least 1");
    }
    ScoreMatrix next = scores;
    if (scores.count(Provenance::Missing) + scores.count(Provenance::Imputed) == 0) {
        return next;
    }
    const LlsEngine engine(scores, options.basis);
    const std::size_t kk = std::min(k, scores.n_users() - 1);
    const std::size_t ks[] = {kk};

    std::vector<std::size_t> order = options.user_order;
    if (order.empty()) {
        order.resize(scores.n_users());
        std::iota(order.begin(), order.end(), std::size_t{0});
    } else {
        auto sorted = order;
        std::sort(sorted.begin(), sorted.end());
        if (sorted.size() != scores.n_users() || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
            sorted.back() >= scores.n_users()) {
            throw std::invalid_argument("impute_iteration: user_order must be a permutation");
        }
    }
    for (const auto user : order) {
        const auto rows = engine.unknown_rows(user);
        if (rows.empty()) {
            continue;
        }
        const Eigen::MatrixXd est = engine.estimate(user, ks, rows);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            next.set(rows[r], user, est(static_cast<Eigen::Index>(r), 0), Provenance::Imputed);
        }
    }
    return next;
}

double nrmse(std::span<const double> estimates, std::span<const double> truths) {
    if (estimates.size() != truths.size() || truths.empty()) {
        throw std::invalid_argument("nrmse: need equal, nonzero lengths");
    }
    const auto count = static_cast<double>(truths.size());
    double mean = 0.0;
    for (double v : truths) {
        mean += v;
    }
    mean /= count;
    double err = 0.0;
    double spread = 0.0;
    for (std::size_t k = 0; k < truths.size(); ++k) {
        err += (truths[k] - estimates[k]) * (truths[k] - estimates[k]);
        spread += (truths[k] - mean) * (truths[k] - mean);
    }
    const double sd = std::sqrt(spread / count);
    if (sd < 1e-12) {
        throw NumericError("NRMSE undefined for constant truths");
    }
    return std::sqrt(err / count) / sd;
}

MaskedScores make_validation_mask(const ScoreMatrix& scores, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("mask fraction must lie in (0, 1)");
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> spread;  // (user, item)
    for (std::size_t user = 0; user < scores.n_users(); ++user) {
        const auto tags = scores.provenance_column(user);
        for (std::size_t item = 0; item < tags.size(); ++item) {
            if (tags[item] == Provenance::Spread) {
                spread.emplace_back(static_cast<std::uint32_t>(user), static_cast<std::uint32_t>(item));
            }
        }
    }
    if (spread.size() < 10) {
        throw DataError("validation mask needs at least 10 spread entries");
    }
    const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(spread.size())));
    auto picks = sample_without_replacement(spread.size(), count, seed);
    std::sort(picks.begin(), picks.end());

    MaskedScores out{scores, {}};
    out.mask.seed = seed;
    out.mask.fraction = fraction;
    out.mask.entries.reserve(picks.size());
    for (auto p : picks) {
        const auto [user, item] = spread[p];
        out.mask.entries.push_back({item, user, scores.value(item, user)});
        out.scores.set(item, user, 0.0, Provenance::Missing);
    }
    return out;
}

void IllsConfig::validate() const {
    if (k_grid.empty() && !full_k_scan) {
        throw ConfigError("k_grid must not be empty");
    }
    for (std::size_t i = 0; i < k_grid.size(); ++i) {
        if (!(k_grid[i] > 0.0 && k_grid[i] <= 1.0)) {
            throw ConfigError("k_grid fractions must lie in (0, 1]");
        }
        if (i > 0 && !(k_grid[i] > k_grid[i - 1])) {
            throw ConfigError("k_grid must be strictly increasing");
        }
    }
    if (max_iterations < 1) {
        throw ConfigError("max_iterations must be at least 1");
    }
    if (!(convergence_tol > 0.0)) {
        throw ConfigError("convergence_tol must be positive");
    }
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) {
        throw ConfigError("mask_fraction must lie in (0, 1)");
    }
}

std::vector<std::size_t> candidate_ks(const IllsConfig& config, std::size_t n_users) {
    std::vector<std::size_t> ks;
    if (n_users < 2) {
        return ks;
    }
    if (config.full_k_scan) {
        ks.resize(n_users - 1);
        std::iota(ks.begin(), ks.end(), std::size_t{1});
        return ks;
    }
    for (double f : config.k_grid) {
        const auto k = std::max<long long>(1, std::llround(f * static_cast<double>(n_users)));
        ks.push_back(std::min<std::size_t>(static_cast<std::size_t>(k), n_users - 1));
    }
    return ks;
}

std::vector<KCurvePoint> k_curve(const ScoreMatrix& masked, const ValidationMask& mask, const IllsConfig& config) {
    config.validate();
    const auto m = masked.n_users();
    const auto ks = candidate_ks(config, m);
    if (ks.empty()) {
        throw DataError("imputation needs at least 2 users");
    }
    std::vector<std::size_t> unique_ks = ks;
    std::sort(unique_ks.begin(), unique_ks.end());
    unique_ks.erase(std::unique(unique_ks.begin(), unique_ks.end()), unique_ks.end());

    const LlsEngine engine(masked, SimilarityBasis::Adjacency);
    std::vector<std::vector<double>> estimates(unique_ks.size(), std::vector<double>(mask.entries.size(), 0.0));
    std::size_t begin = 0;
    while (begin < mask.entries.size()) {
        const auto user = mask.entries[begin].user;
        std::size_t end = begin;
        std::vector<std::uint32_t> rows;
        while (end < mask.entries.size() && mask.entries[end].user == user) {
            rows.push_back(mask.entries[end].item);
            ++end;
        }
        const Eigen::MatrixXd est = engine.estimate(user, unique_ks, rows);
        for (std::size_t slot = 0; slot < unique_ks.size(); ++slot) {
            for (std::size_t r = 0; r < rows.size(); ++r) {
                estimates[slot][begin + r] = est(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(slot));
            }
        }
        begin = end;
    }

    const auto truths = mask_truths(mask);
    std::map<std::size_t, double> by_k;
    for (std::size_t slot = 0; slot < unique_ks.size(); ++slot) {
        by_k[unique_ks[slot]] = nrmse(estimates[slot], truths);
    }
    std::vector<KCurvePoint> curve;
    curve.reserve(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double fraction = config.full_k_scan ? static_cast<double>(ks[i]) / static_cast<double>(m)
                                                   : config.k_grid[i];
        curve.push_back({ks[i], fraction, by_k.at(ks[i])});
    }
    return curve;
}

std::vector<KCurvePoint> k_curve(const ScoreMatrix& scores, const IllsConfig& config) {
    config.validate();
    const auto masked = make_validation_mask(scores, config.mask_fraction, config.seed);
    return k_curve(masked.scores, masked.mask, config);
}

std::size_t best_k(std::span<const KCurvePoint> curve) {
    if (curve.empty()) {
        throw std::invalid_argument("best_k: empty curve");
    }
    const KCurvePoint* best = &curve.front();
    for (const auto& p : curve) {
        if (p.nrmse < best->nrmse || (p.nrmse == best->nrmse && p.k < best->k)) {
            best = &p;
        }
    }
    return best->k;
}

std::size_t select_k(const ScoreMatrix& scores, const IllsConfig& config) {
    return best_k(k_curve(scores, config));
}

IllsResult run_ills(const ScoreMatrix& scores, const IllsConfig& config) {
    config.validate();
    const bool has_missing = scores.count(Provenance::Missing) + scores.count(Provenance::Imputed) > 0;
    const auto masked = make_validation_mask(scores, config.mask_fraction, config.seed);
    const auto truths = mask_truths(masked.mask);

    IllsResult result;
    result.trace.chosen_k = best_k(k_curve(masked.scores, masked.mask, config));
    result.trace.initial_nrmse = nrmse(prefill_estimates(masked.scores, masked.mask), truths);

    ScoreMatrix current = masked.scores;
    double previous = result.trace.initial_nrmse;
    for (std::size_t t = 1; t <= config.max_iterations; ++t) {
        ImputeOptions options;
        options.basis = t == 1 ? SimilarityBasis::Adjacency : SimilarityBasis::Values;
        current = impute_iteration(current, result.trace.chosen_k, options);
        const double err = nrmse(mask_estimates(current, masked.mask), truths);
        if (!std::isfinite(err)) {
            throw NumericError("NRMSE is not finite at iteration " + std::to_string(t));
        }
        result.trace.nrmse_per_iteration.push_back(err);
        result.trace.iterations_run = t;
        // Without genuinely missing entries only the mask is being estimated.
        if (!has_missing || std::abs(err - previous) < config.convergence_tol) {
            break;
        }
        previous = err;
    }
    for (const auto& e : masked.mask.entries) {
        current.set(e.item, e.user, e.truth, Provenance::Spread);
    }
    result.scores = std::move(current);
    return result;
}

}  // namespace ills
