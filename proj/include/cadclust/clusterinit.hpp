#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cadclust/simgraph.hpp"

namespace cadclust {

/// n rows of d features, row-major, one row per model.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    /// Throws Error on duplicate ids, d == 0, a size mismatch or non-finite values.
    FeatureMatrix(std::vector<ModelId> ids, std::size_t dims, std::vector<double> values);

    std::size_t rows() const noexcept { return ids_.size(); }
    std::size_t dims() const noexcept { return dims_; }
    const std::vector<ModelId>& ids() const noexcept { return ids_; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * dims_, dims_}; }
    const std::vector<double>& values() const noexcept { return values_; }

    /// Row subset in the given order.
    FeatureMatrix select(std::span<const std::size_t> rows) const;

private:
    std::vector<ModelId> ids_;
    std::size_t dims_ = 0;
    std::vector<double> values_;
};

struct KMeansOptions {
    std::size_t max_iterations = 300;
    unsigned threads = 1;  ///< 0 picks the hardware concurrency
};

struct KMeansResult {
    Partition partition;
    std::vector<double> centroids;  ///< K x d, row-major
    /// Sum of squared distances to the assigned centroid after every update step.
    std::vector<double> objective;
    std::size_t iterations = 0;
    bool converged = false;  ///< assignment reached a fixpoint before the cap
};

/// Lloyd's algorithm from k-means++ seeding. Ties go to the lowest centroid
/// index; a cluster left empty is re-seeded with the point farthest from its
/// own centroid, so all K clusters are non-empty. Deterministic in `seed`
/// and independent of the thread count.
KMeansResult kmeans_run(const FeatureMatrix& features, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

inline Partition kmeans(const FeatureMatrix& features, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {}) {
    return kmeans_run(features, k, seed, options).partition;
}

/// A partition whose clusters all hold at most `capacity` models.
struct InitialClustering {
    Partition partition;
    std::size_t capacity = 12;
};

inline constexpr std::size_t kDefaultCapacity = 12;

/// Re-clusters every cluster larger than `capacity` with K = ceil(size / capacity)
/// until none remains. Output clusters are numbered by their first member in
/// the order of `p`. Every model of `p` must have a feature row.
InitialClustering capacity_split(const FeatureMatrix& features, const Partition& p, std::size_t capacity,
                                 std::uint64_t seed, const KMeansOptions& options = {});

/// `FEAT <n> <d>` header, then `model_id<TAB>f1<TAB>...<TAB>fd` rows.
FeatureMatrix parse_features(std::string_view text, const std::string& source = "<features>");
std::string format_features(const FeatureMatrix& f);
FeatureMatrix read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureMatrix& f);

}  // namespace cadclust
