#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cadclust/error.hpp"
#include "cadclust/simgraph.hpp"

namespace cadclust {

/// One checkbox submission: the models left checked in that round.
struct AnnotationRound {
    std::size_t round_index = 0;
    std::vector<ModelId> checked;
};

/**
 * Confirm/divide state of one annotator on one initial cluster.
 *
 * Each round peels the checked models off as a confirmed subcluster. The
 * cluster is finished when at most one model remains, when everything
 * remaining was checked, or when nothing was checked; in the last case each
 * remaining model becomes its own subcluster. Peeled subclusters are final.
 */
class ClusterAnnotation {
public:
    /// Throws Error on an empty or duplicated member list.
    ClusterAnnotation(std::string cluster_id, std::vector<ModelId> members);

    const std::string& cluster_id() const noexcept { return cluster_id_; }
    const std::vector<ModelId>& members() const noexcept { return members_; }
    /// Not yet assigned to a subcluster, in member order.
    const std::vector<ModelId>& remaining() const noexcept { return remaining_; }
    const std::vector<std::vector<ModelId>>& subclusters() const noexcept { return subclusters_; }
    const std::vector<AnnotationRound>& rounds() const noexcept { return rounds_; }
    bool terminal() const noexcept { return terminal_; }

private:
    friend ClusterAnnotation apply_round(const ClusterAnnotation&, std::span<const ModelId>);

    void close_if_done(bool nothing_checked);

    std::string cluster_id_;
    std::vector<ModelId> members_;
    std::vector<ModelId> remaining_;
    std::vector<std::vector<ModelId>> subclusters_;
    std::vector<AnnotationRound> rounds_;
    bool terminal_ = false;
};

/// Thrown when a round names models outside the remaining set.
class InvalidRound : public Error {
public:
    InvalidRound(const std::string& what, std::vector<ModelId> offending)
        : Error(what), offending_(std::move(offending)) {}
    const std::vector<ModelId>& offending() const noexcept { return offending_; }

private:
    std::vector<ModelId> offending_;
};

/// Returns the state after one round. Throws InvalidRound for ids not in the
/// remaining set (or repeated), Error when the state is already terminal.
ClusterAnnotation apply_round(const ClusterAnnotation& state, std::span<const ModelId> checked);

/// +1 within each subcluster, -1 across subclusters; exactly C(n, 2) edges.
/// Throws Error when the state is not terminal.
LabeledEdgeSet derive_edges(const ClusterAnnotation& state);

}  // namespace cadclust
