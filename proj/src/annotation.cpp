#include "cadclust/annotation.hpp"

#include <algorithm>
#include <unordered_set>

namespace cadclust {

ClusterAnnotation::ClusterAnnotation(std::string cluster_id, std::vector<ModelId> members)
    : cluster_id_(std::move(cluster_id)), members_(std::move(members)) {
    if (members_.empty()) throw Error("cluster " + cluster_id_ + " has no members");
    std::unordered_set<std::string_view> seen;
    for (const auto& m : members_) {
        if (m.empty()) throw Error("cluster " + cluster_id_ + " has an empty model id");
        if (!seen.insert(m).second) throw Error("cluster " + cluster_id_ + " lists " + m + " twice");
    }
    remaining_ = members_;
    close_if_done(false);
}

void ClusterAnnotation::close_if_done(bool nothing_checked) {
    if (nothing_checked || remaining_.size() <= 1) {
        for (auto& m : remaining_) subclusters_.push_back({std::move(m)});
        remaining_.clear();
    }
    terminal_ = remaining_.empty();
}

ClusterAnnotation apply_round(const ClusterAnnotation& state, std::span<const ModelId> checked) {
    if (state.terminal()) throw Error("cluster " + state.cluster_id() + " is already finished");

    std::unordered_set<std::string_view> remaining(state.remaining().begin(), state.remaining().end());
    std::unordered_set<std::string_view> picked;
    std::vector<ModelId> offending;
    for (const auto& id : checked)
        if (!remaining.contains(id) || !picked.insert(id).second) offending.push_back(id);
    if (!offending.empty())
        throw InvalidRound("round for cluster " + state.cluster_id() + " checks models outside the remaining set",
                           std::move(offending));

    ClusterAnnotation next = state;
    next.rounds_.push_back(AnnotationRound{state.rounds().size(), {checked.begin(), checked.end()}});
    if (!checked.empty()) {
        std::vector<ModelId> peeled;
        std::vector<ModelId> rest;
        for (const auto& m : state.remaining()) (picked.contains(m) ? peeled : rest).push_back(m);
        next.subclusters_.push_back(std::move(peeled));
        next.remaining_ = std::move(rest);
    }
    next.close_if_done(checked.empty());
    return next;
}

LabeledEdgeSet derive_edges(const ClusterAnnotation& state) {
    if (!state.terminal()) throw Error("cluster " + state.cluster_id() + " is not finished");
    LabeledEdgeSet out;
    const auto& subs = state.subclusters();
    for (std::size_t s = 0; s < subs.size(); ++s) {
        for (std::size_t i = 0; i < subs[s].size(); ++i) {
            for (std::size_t j = i + 1; j < subs[s].size(); ++j) out.set(subs[s][i], subs[s][j], EdgeLabel::Similar);
            for (std::size_t t = s + 1; t < subs.size(); ++t)
                for (const auto& other : subs[t]) out.set(subs[s][i], other, EdgeLabel::Dissimilar);
        }
    }
    return out;
}

}  // namespace cadclust
