#include "ills/score_matrix.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "ills/errors.hpp"

namespace ills {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::array<unsigned char, sizeof(T)> bytes{};
        std::memcpy(bytes.data(), &v, sizeof(T));
        std::reverse(bytes.begin(), bytes.end());
        std::memcpy(&v, bytes.data(), sizeof(T));
    }
    return v;
}

template <typename T>
void put(std::ostream& out, T v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw DataError("score dump truncated");
    }
    return to_little(v);
}

}  // namespace

ScoreMatrix::ScoreMatrix(std::size_t n_items, std::size_t n_users)
    : values_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_items), static_cast<Eigen::Index>(n_users))),
      provenance_(n_items * n_users, Provenance::Missing) {}

void ScoreMatrix::set(std::size_t item, std::size_t user, double value, Provenance tag) {
    values_(static_cast<Eigen::Index>(item), static_cast<Eigen::Index>(user)) = value;
    provenance_[user * n_items() + item] = tag;
}

std::size_t ScoreMatrix::count(Provenance tag) const {
    return static_cast<std::size_t>(std::count(provenance_.begin(), provenance_.end(), tag));
}

void write_score_dump(const std::filesystem::path& values_path, const std::filesystem::path& provenance_path,
                      const ScoreMatrix& scores) {
    std::ofstream values(values_path, std::ios::binary);
    std::ofstream tags(provenance_path, std::ios::binary);
    if (!values || !tags) {
        throw DataError("cannot write score dump");
    }
    const auto n = static_cast<std::uint64_t>(scores.n_items());
    const auto m = static_cast<std::uint64_t>(scores.n_users());
    put(values, n);
    put(values, m);
    put(tags, n);
    put(tags, m);
    for (std::size_t item = 0; item < n; ++item) {
        for (std::size_t user = 0; user < m; ++user) {
            put(values, scores.value(item, user));
            put(tags, static_cast<std::uint8_t>(scores.provenance(item, user)));
        }
    }
}

ScoreMatrix read_score_dump(const std::filesystem::path& values_path, const std::filesystem::path& provenance_path) {
    std::ifstream values(values_path, std::ios::binary);
    std::ifstream tags(provenance_path, std::ios::binary);
    if (!values || !tags) {
        throw DataError("cannot read score dump");
    }
    const auto n = get<std::uint64_t>(values);
    const auto m = get<std::uint64_t>(values);
    if (get<std::uint64_t>(tags) != n || get<std::uint64_t>(tags) != m) {
        throw DataError("score dump headers disagree");
    }
    ScoreMatrix scores(n, m);
    for (std::size_t item = 0; item < n; ++item) {
        for (std::size_t user = 0; user < m; ++user) {
            const auto v = get<double>(values);
            const auto t = get<std::uint8_t>(tags);
            if (t > static_cast<std::uint8_t>(Provenance::Imputed)) {
                throw DataError("score dump: bad provenance byte");
            }
            scores.set(item, user, v, static_cast<Provenance>(t));
        }
    }
    return scores;
}

}  // namespace ills
