#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cadclust/simgraph.hpp"

namespace cadclust {

/// Smallest number of positive votes out of `voters` that yields +1: ceil((N+1)/2).
constexpr std::size_t majority_threshold(std::size_t voters) noexcept { return (voters + 2) / 2; }

/// Majority vote over N clustering-induced similarity matrices.
class MethodEnsemble {
public:
    /// Throws Error when empty or when the partitions cover different model sets.
    explicit MethodEnsemble(std::vector<Partition> partitions, std::vector<std::string> names = {});

    std::size_t size() const noexcept { return partitions_.size(); }
    const std::vector<Partition>& partitions() const noexcept { return partitions_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    /// Model order of the first partition.
    const std::vector<ModelId>& ids() const noexcept { return partitions_.front().ids(); }

    /// Partitions co-clustering the edge's endpoints, skipping `exclude` when set.
    std::size_t positive_votes(const EdgeKey& edge, std::optional<std::size_t> exclude = std::nullopt) const;

    /// Per-partition cluster index of every model, with rows in ids() order.
    /// Used by the dense evaluators to avoid string lookups per edge.
    const std::vector<std::vector<std::size_t>>& aligned_assignments() const noexcept { return aligned_; }

    /// Copy without partition `index` (leave-one-out evaluation).
    MethodEnsemble without(std::size_t index) const;

private:
    std::vector<Partition> partitions_;
    std::vector<std::string> names_;
    std::vector<std::vector<std::size_t>> aligned_;
};

/// +1 iff positive votes >= ceil((N+1)/2), otherwise -1. Never unknown.
EdgeLabel method_ensemble_label(const MethodEnsemble& e, const EdgeKey& edge,
                                std::optional<std::size_t> exclude = std::nullopt);

/// Majority vote over annotator edge sets; only sets that label the edge vote.
class HumanEnsemble {
public:
    /// Throws Error when empty.
    explicit HumanEnsemble(std::vector<LabeledEdgeSet> edge_sets);

    std::size_t size() const noexcept { return sets_.size(); }
    const std::vector<LabeledEdgeSet>& edge_sets() const noexcept { return sets_; }

    struct Votes {
        std::size_t positive = 0;
        std::size_t negative = 0;
    };
    Votes votes(const EdgeKey& edge) const;

    /// Union of all labeled edges, in canonical order.
    std::vector<EdgeKey> support() const;

private:
    std::vector<LabeledEdgeSet> sets_;
};

/// Strict majority of the votes cast; an exact tie or no votes gives unknown.
EdgeLabel human_ensemble_label(const HumanEnsemble& h, const EdgeKey& edge);

/// The human ensemble materialized as an edge set (ties and unvoted edges absent).
LabeledEdgeSet human_ensemble_edges(const HumanEnsemble& h);

/// Mean of the balanced accuracies against the method and human ensembles.
/// Throws Error when either lies outside [0, 1].
double ensemble_human_score(double ba_vs_ensemble, double ba_vs_human);

/// Manifest: one path per line, relative to the manifest's directory; blank
/// lines and '#' comments ignored.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest);
MethodEnsemble load_method_ensemble(const std::filesystem::path& manifest);
HumanEnsemble load_human_ensemble(const std::filesystem::path& manifest);

}  // namespace cadclust
