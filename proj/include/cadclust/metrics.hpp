#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cadclust/distances.hpp"
#include "cadclust/ensemble.hpp"
#include "cadclust/simgraph.hpp"

namespace cadclust {

/// Edge confusion tallies with +1 ("similar") as the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
    void add(EdgeLabel predicted, EdgeLabel reference);

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

using ReferenceLabeler = std::function<EdgeLabel(const EdgeKey&)>;

/// Tallies the partition's labels against `reference` over `universe`,
/// skipping edges the reference marks unknown. Throws Error("no labeled
/// edges") when nothing remains.
ConfusionCounts confusion(const Partition& pred, const ReferenceLabeler& reference, std::span<const EdgeKey> universe);

/// Over the labeled support of a sparse reference.
ConfusionCounts confusion(const Partition& pred, const LabeledEdgeSet& reference);
ConfusionCounts confusion(const Partition& pred, const HumanEnsemble& reference);

/// Over all C(n, 2) pairs of the reference's models. `exclude` drops one
/// ensemble member (leave-one-out).
ConfusionCounts confusion(const Partition& pred, const Partition& reference, unsigned threads = 1);
ConfusionCounts confusion(const Partition& pred, const MethodEnsemble& reference,
                          std::optional<std::size_t> exclude = std::nullopt, unsigned threads = 1);

/// Fraction of evaluated edges whose labels match, (tp + tn) / total.
double edge_accuracy(const ConfusionCounts& c);

/// Mean of the true-positive and true-negative rates.
/// Throws Error("class absent from reference") when either class is missing.
double balanced_accuracy(const ConfusionCounts& c);

struct SilhouetteResult {
    std::vector<ModelId> ids;          ///< partition order
    std::vector<double> per_object;    ///< s(i) in [-1, 1]
    double mean = 0.0;
};

/// Silhouette over a precomputed distance matrix. Members of
/// singleton clusters score 0. Throws Error for a single-cluster partition or
/// when the matrix lacks a model.
SilhouetteResult silhouette(const Partition& p, const DistanceMatrix& d, unsigned threads = 1);

/// method -> K -> score
using ScoreTable = std::map<std::string, std::map<std::size_t, double>>;

struct Ranking {
    std::map<std::size_t, std::vector<std::string>> per_k;  ///< best first
    std::vector<std::string> mean_over_k;                   ///< best first
    std::map<std::string, double> means;
};

/// Seven K values doubling from 32, capped at 2000.
inline constexpr std::array<std::size_t, 7> kDefaultKGrid{32, 64, 128, 256, 512, 1024, 2000};

/// Keeps only the given K values. Throws Error when a method lacks one.
ScoreTable restrict_to_grid(const ScoreTable& scores, std::span<const std::size_t> grid);

/// Higher scores rank first; ties go to the alphabetically smaller method.
/// Throws Error when the methods do not share one K grid.
Ranking ranking_report(const ScoreTable& scores);

/// One row of a report TSV: `method<TAB>K<TAB>index<TAB>value`.
struct ScoreRow {
    std::string method;
    std::size_t k = 0;
    std::string index;
    double value = 0.0;
};

std::string format_score_rows(std::span<const ScoreRow> rows);
std::vector<ScoreRow> parse_score_rows(std::string_view text, const std::string& source = "<scores>");

/// Selects one index from parsed rows. Throws Error on duplicate (method, K).
ScoreTable score_table(std::span<const ScoreRow> rows, const std::string& index);

/// Plain-text summary: one line per K plus a mean-over-K line.
std::string format_ranking(const Ranking& r, const std::string& index);

}  // namespace cadclust
