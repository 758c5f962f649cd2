#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ills {

enum class Provenance : std::uint8_t {
    Observed = 0,  // training link, value pinned to 1
    Spread = 1,    // positive value produced by resource spreading
    Missing = 2,   // exact zero, not yet imputed
    Imputed = 3,   // written by least-squares imputation
};

// n items x m users. Values live in an Eigen column-major matrix so that
// each user's column is contiguous; the orientation (rows = items) is the
// item-major one used throughout.
class ScoreMatrix {
public:
    ScoreMatrix() = default;
    ScoreMatrix(std::size_t n_items, std::size_t n_users);

    std::size_t n_items() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t n_users() const noexcept { return static_cast<std::size_t>(values_.cols()); }

    const Eigen::MatrixXd& values() const noexcept { return values_; }
    double value(std::size_t item, std::size_t user) const { return values_(item, user); }
    Provenance provenance(std::size_t item, std::size_t user) const {
        return provenance_[user * n_items() + item];
    }
    std::span<const Provenance> provenance_column(std::size_t user) const {
        return {provenance_.data() + user * n_items(), n_items()};
    }
    std::span<const double> column(std::size_t user) const {
        return {values_.col(static_cast<Eigen::Index>(user)).data(), n_items()};
    }

    void set(std::size_t item, std::size_t user, double value, Provenance tag);

    // Per-user resource totals before the observed-entry overwrite. Empty when
    // the matrix did not come out of spreading.
    std::span<const double> spread_mass() const noexcept { return spread_mass_; }
    void set_spread_mass(std::vector<double> mass) { spread_mass_ = std::move(mass); }

    std::size_t count(Provenance tag) const;

    friend bool operator==(const ScoreMatrix& a, const ScoreMatrix& b) {
        return a.values_ == b.values_ && a.provenance_ == b.provenance_;
    }

private:
    Eigen::MatrixXd values_;
    std::vector<Provenance> provenance_;
    std::vector<double> spread_mass_;
};

// Binary dump: 16-byte header (n, m as little-endian uint64) followed by
// little-endian float64 values in item-major order. The provenance file has
// the same header followed by one byte per entry in the same order.
void write_score_dump(const std::filesystem::path& values_path, const std::filesystem::path& provenance_path,
                      const ScoreMatrix& scores);
ScoreMatrix read_score_dump(const std::filesystem::path& values_path, const std::filesystem::path& provenance_path);

}  // namespace ills
