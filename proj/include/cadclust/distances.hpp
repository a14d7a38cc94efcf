#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cadclust/geometry.hpp"
#include "cadclust/kdtree.hpp"
#include "cadclust/simgraph.hpp"

namespace cadclust {

/// Squared-distance Chamfer: mean over P of the squared distance to the
/// nearest point of Q, plus the same term with P and Q swapped. Nearest
/// neighbors come from a kd-tree built over each cloud.
double chamfer(const PointCloud& p, const PointCloud& q);

/// One directed Chamfer term: mean over `from` of min squared distance into `to_tree`.
double chamfer_directed(const PointCloud& from, const KdTree3& to_tree);

/// Jaccard distance 1 - |A n B| / |A u B|. Both empty gives 0, exactly one
/// empty gives 1. Throws Error when the resolutions differ.
double jaccard(const VoxelGrid& a, const VoxelGrid& b);

enum class Metric { Chamfer, Jaccard };

std::string_view metric_name(Metric metric);
/// Throws Error on an unknown name.
Metric parse_metric(std::string_view name);

using Shape = std::variant<PointCloud, VoxelGrid>;

struct NamedShape {
    ModelId id;
    Shape shape;
};

/// Symmetric n x n distances with an exact zero diagonal.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    DistanceMatrix(std::vector<ModelId> ids, Metric metric);

    std::size_t size() const noexcept { return ids_.size(); }
    Metric metric() const noexcept { return metric_; }
    const std::vector<ModelId>& ids() const noexcept { return ids_; }
    std::optional<std::size_t> find(std::string_view id) const;

    double operator()(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }
    /// Writes both (i, j) and (j, i).
    void set(std::size_t i, std::size_t j, double value);
    /// Writes only (i, j); used when filling from a row-major source.
    void set_cell(std::size_t i, std::size_t j, double value) { values_[i * ids_.size() + j] = value; }

    const std::vector<double>& values() const noexcept { return values_; }

    /// Checks symmetry, zero diagonal, finiteness and non-negativity.
    void validate() const;

    friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;

private:
    std::vector<ModelId> ids_;
    std::vector<double> values_;
    Metric metric_ = Metric::Chamfer;
};

struct DistanceOptions {
    unsigned threads = 1;  ///< 0 picks the hardware concurrency
    /// When set, finished matrices are stored here keyed by metric and shape
    /// digest, and completed rows are checkpointed so an interrupted run resumes.
    std::optional<std::filesystem::path> cache_dir;
};

/// All-pairs distances. Every cell has exactly one producer, so the result
/// does not depend on the number of threads. Cached results are returned at
/// file precision (%.12g), and so are fresh results whenever a cache is used.
DistanceMatrix distance_matrix(std::span<const NamedShape> shapes, Metric metric, const DistanceOptions& options = {});

/// Digest over the metric, the ids and the exact representation bytes.
std::uint64_t shape_digest(std::span<const NamedShape> shapes, Metric metric);

/// `DMAT <metric> <n>`, a tab-separated id line, then n rows of %.12g values.
std::string format_distance_matrix(const DistanceMatrix& m);
DistanceMatrix parse_distance_matrix(std::string_view text, const std::string& source = "<dmat>");
DistanceMatrix read_distance_matrix(const std::filesystem::path& path);
void write_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& m);

}  // namespace cadclust
