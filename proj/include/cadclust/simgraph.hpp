#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

/**
 * @file simgraph.hpp
 * @brief Similarity graph over model ids: canonical edges, sparse labeled edge
 * sets and partitions, which act as implicit dense similarity matrices.
 */

namespace cadclust {

/// Opaque model identifier, normally the file stem of the source CAD model.
using ModelId = std::string;

/// Edge label. Unknown is never stored in a LabeledEdgeSet; absence means unknown.
enum class EdgeLabel : std::int8_t { Dissimilar = -1, Unknown = 0, Similar = 1 };

constexpr int to_int(EdgeLabel label) noexcept { return static_cast<int>(label); }

/// Undirected edge between two distinct models with a < b in byte order.
class EdgeKey {
public:
    const ModelId& a() const noexcept { return a_; }
    const ModelId& b() const noexcept { return b_; }

    friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
    friend bool operator==(const EdgeKey&, const EdgeKey&) = default;

private:
    EdgeKey(ModelId a, ModelId b) : a_(std::move(a)), b_(std::move(b)) {}
    friend EdgeKey canonical_edge(std::string_view, std::string_view);

    ModelId a_;
    ModelId b_;
};

/// Orders the endpoints lexicographically. Throws Error on a self-edge.
EdgeKey canonical_edge(std::string_view i, std::string_view j);

/// Sparse map from canonical edges to +1/-1, owned by one annotator or method.
/// Single writer during construction; concurrent reads afterwards are safe.
class LabeledEdgeSet {
public:
    using Map = std::map<EdgeKey, EdgeLabel>;

    LabeledEdgeSet() = default;
    explicit LabeledEdgeSet(std::string owner) : owner_(std::move(owner)) {}

    const std::string& owner() const noexcept { return owner_; }
    void set_owner(std::string owner) { owner_ = std::move(owner); }

    /// Inserts or overwrites. Unknown labels are rejected: erase instead.
    void set(const EdgeKey& edge, EdgeLabel label);
    void set(std::string_view i, std::string_view j, EdgeLabel label) { set(canonical_edge(i, j), label); }
    bool erase(const EdgeKey& edge) { return entries_.erase(edge) > 0; }

    /// Unknown when absent.
    EdgeLabel get(const EdgeKey& edge) const;

    /// Merges `other` into this set; conflicting labels throw Error.
    void merge(const LabeledEdgeSet& other);

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const Map& entries() const noexcept { return entries_; }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    friend bool operator==(const LabeledEdgeSet& x, const LabeledEdgeSet& y) { return x.entries_ == y.entries_; }

private:
    std::string owner_;
    Map entries_;
};

/// Hard, non-overlapping assignment of models to clusters [0, K).
///
/// Model order is the order of construction and is preserved by file I/O.
/// Every cluster index in [0, K) has at least one member.
class Partition {
public:
    Partition() = default;

    /// Throws Error on duplicate or empty ids, or when the indices are not dense.
    Partition(std::vector<ModelId> ids, std::vector<std::size_t> clusters);

    /// Relabels cluster indices to be dense, keeping their relative order.
    static Partition densify(std::vector<ModelId> ids, const std::vector<std::size_t>& clusters);

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t num_clusters() const noexcept { return num_clusters_; }
    const std::vector<ModelId>& ids() const noexcept { return ids_; }
    const std::vector<std::size_t>& assignment() const noexcept { return clusters_; }

    bool contains(std::string_view id) const;
    std::optional<std::size_t> find(std::string_view id) const;
    /// Row position of `id`; throws Error when absent.
    std::size_t index_of(std::string_view id) const;
    std::size_t cluster_of(std::string_view id) const { return clusters_[index_of(id)]; }

    /// Row positions grouped by cluster, each group in row order.
    std::vector<std::vector<std::size_t>> members() const;
    std::vector<std::size_t> cluster_sizes() const;

    /// Same model set, same grouping, indices ignored.
    bool equivalent(const Partition& other) const;

private:
    std::vector<ModelId> ids_;
    std::vector<std::size_t> clusters_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t num_clusters_ = 0;
};

/// +1 when both endpoints share a cluster, -1 otherwise. Throws on unknown ids.
EdgeLabel partition_edge_label(const Partition& p, const EdgeKey& edge);

/// Number of within-cluster pairs, sum of n(n-1)/2.
std::uint64_t positive_pair_count(const Partition& p);

/// Fraction of commonly labeled edges with equal labels; nullopt when the
/// supports do not intersect.
std::optional<double> consistency(const LabeledEdgeSet& x, const LabeledEdgeSet& y);

struct LabelStats {
    std::uint64_t positive = 0;
    std::uint64_t negative = 0;
    std::uint64_t unknown = 0;

    friend bool operator==(const LabelStats&, const LabelStats&) = default;
};

/// Throws Error when `universe_size` is smaller than the number of entries.
LabelStats label_stats(const LabeledEdgeSet& x, std::uint64_t universe_size);

/// Edge-set TSV: `id_a<TAB>id_b<TAB>label`, '#' comments, canonical keys.
LabeledEdgeSet parse_edge_set(std::string_view text, const std::string& source = "<edges>");
std::string format_edge_set(const LabeledEdgeSet& edges);
LabeledEdgeSet read_edge_set(const std::filesystem::path& path);
void write_edge_set(const std::filesystem::path& path, const LabeledEdgeSet& edges);

/// Partition TSV: `model_id<TAB>cluster_index`. Sparse indices are densified.
Partition parse_partition(std::string_view text, const std::string& source = "<partition>");
std::string format_partition(const Partition& p);
Partition read_partition(const std::filesystem::path& path);
void write_partition(const std::filesystem::path& path, const Partition& p);

}  // namespace cadclust
