#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ills/dataset.hpp"
#include "ills/score_matrix.hpp"

namespace ills {

/// Which user vectors neighbor selection compares. The first imputation pass
/// uses the binary training adjacency; later passes use the previous
/// iteration's score columns.
enum class SimilarityBasis { Adjacency, Values };

/// Common items over sqrt(k_i^2 + k_j^2). The denominator caps the value at
/// 1/sqrt(2), reached by identical profiles. Zero if either degree is zero.
/// Throws std::invalid_argument when i == j.
double similarity(const BipartiteGraph& graph, std::size_t i, std::size_t j);

/// Real-valued form of `similarity`: dot(left, right) over
/// sqrt(|left|^4 + |right|^4), where |.|^2 is the squared Euclidean norm. On
/// 0/1 vectors |v|^2 is the degree, so both functions agree exactly.
double similarity_dense(std::span<const double> left, std::span<const double> right);

struct NeighborSet {
    std::size_t target = 0;
    std::vector<std::uint32_t> neighbors;  // similarity descending, ties by index
    std::vector<double> similarities;
};

NeighborSet select_neighbors(const ScoreMatrix& scores, std::size_t target, std::size_t k,
                             SimilarityBasis basis = SimilarityBasis::Values);

/// Replaces zeros with the mean of the nonzero entries; all-zero input is
/// returned as is.
std::vector<double> row_average_fill(std::span<const double> column);

/// Minimum-norm least-squares solution through a thin SVD. Singular values
/// below 1e-10 times the largest are treated as zero.
Eigen::VectorXd lstsq_min_norm(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs);

/// Regresses the target's known values `a` on the neighbor columns `b`, then
/// applies the weights to the neighbors' values `w` at the missing item.
/// Negative estimates clamp to 0.
double estimate_entry(const Eigen::VectorXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& w);

struct ImputeOptions {
    SimilarityBasis basis = SimilarityBasis::Values;
    /// Processing order of users; empty means ascending. The result does not
    /// depend on it.
    std::vector<std::size_t> user_order;
};

/// One Jacobi-style least-squares pass over every Missing or Imputed entry.
/// All reads come from `scores`, all writes go to the returned copy.
ScoreMatrix impute_iteration(const ScoreMatrix& scores, std::size_t k, const ImputeOptions& options = {});

/// Root-mean-square error over the population standard deviation of the
/// truths. Throws NumericError when the truths are constant.
double nrmse(std::span<const double> estimates, std::span<const double> truths);

struct MaskEntry {
    std::uint32_t item = 0;
    std::uint32_t user = 0;
    double truth = 0.0;

    friend bool operator==(const MaskEntry&, const MaskEntry&) = default;
};

/// Spread entries hidden from imputation so that NRMSE has continuous truths.
struct ValidationMask {
    std::vector<MaskEntry> entries;  // sorted by (user, item)
    std::uint64_t seed = 0;
    double fraction = 0.0;
};

struct MaskedScores {
    ScoreMatrix scores;
    ValidationMask mask;
};

MaskedScores make_validation_mask(const ScoreMatrix& scores, double fraction, std::uint64_t seed);

struct IllsConfig {
    std::vector<double> k_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    bool full_k_scan = false;  // every K in 1..m-1 instead of the grid
    std::size_t max_iterations = 10;
    double convergence_tol = 1e-4;
    double mask_fraction = 0.01;
    std::uint64_t seed = 0;

    /// Throws ConfigError.
    void validate() const;
};

struct IllsTrace {
    std::size_t chosen_k = 0;
    std::vector<double> nrmse_per_iteration;
    std::size_t iterations_run = 0;
    /// NRMSE of the row-average prefill, the reference for the first
    /// convergence check.
    double initial_nrmse = 0.0;
};

struct KCurvePoint {
    std::size_t k = 0;
    double fraction = 0.0;
    double nrmse = 0.0;
};

/// Neighbor counts evaluated for `n_users` users, ascending. Grid fractions map
/// to max(1, round(f * m)) capped at m - 1.
std::vector<std::size_t> candidate_ks(const IllsConfig& config, std::size_t n_users);

/// NRMSE of one adjacency-neighbor LLS pass per candidate K, estimated on
/// the mask entries of an already masked matrix.
std::vector<KCurvePoint> k_curve(const ScoreMatrix& masked, const ValidationMask& mask, const IllsConfig& config);

/// Same, masking `scores` with the config's seed and fraction first.
std::vector<KCurvePoint> k_curve(const ScoreMatrix& scores, const IllsConfig& config);

/// Arg-min of the curve, ties to the smaller K.
std::size_t best_k(std::span<const KCurvePoint> curve);

std::size_t select_k(const ScoreMatrix& scores, const IllsConfig& config);

struct IllsResult {
    ScoreMatrix scores;
    IllsTrace trace;
};

IllsResult run_ills(const ScoreMatrix& scores, const IllsConfig& config);

}  // namespace ills
