#include "cadclust/ensemble.hpp"

#include <algorithm>
#include <set>

#include "cadclust/error.hpp"
#include "cadclust/text_io.hpp"

namespace cadclust {

MethodEnsemble::MethodEnsemble(std::vector<Partition> partitions, std::vector<std::string> names)
    : partitions_(std::move(partitions)), names_(std::move(names)) {
    if (partitions_.empty()) throw Error("method ensemble needs at least one partition");
    if (names_.empty())
        for (std::size_t i = 0; i < partitions_.size(); ++i) names_.push_back("partition" + std::to_string(i));
    if (names_.size() != partitions_.size()) throw Error("method ensemble: one name per partition required");

    const auto& ref = partitions_.front();
    aligned_.reserve(partitions_.size());
    for (std::size_t m = 0; m < partitions_.size(); ++m) {
        const auto& p = partitions_[m];
        if (p.size() != ref.size())
            throw Error("method ensemble: " + names_[m] + " covers " + std::to_string(p.size()) + " models, expected " +
                        std::to_string(ref.size()));
        std::vector<std::size_t> row(ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const auto at = p.find(ref.ids()[i]);
            if (!at) throw Error("method ensemble: " + names_[m] + " lacks model " + ref.ids()[i]);
            row[i] = p.assignment()[*at];
        }
        aligned_.push_back(std::move(row));
    }
}

std::size_t MethodEnsemble::positive_votes(const EdgeKey& edge, std::optional<std::size_t> exclude) const {
    const auto& ref = partitions_.front();
    const std::size_t a = ref.index_of(edge.a());
    const std::size_t b = ref.index_of(edge.b());
    std::size_t votes = 0;
    for (std::size_t m = 0; m < aligned_.size(); ++m)
        if (m != exclude && aligned_[m][a] == aligned_[m][b]) ++votes;
    return votes;
}

MethodEnsemble MethodEnsemble::without(std::size_t index) const {
    if (index >= partitions_.size()) throw Error("method ensemble: no partition " + std::to_string(index));
    if (partitions_.size() == 1) throw Error("method ensemble: cannot leave out the only partition");
    auto parts = partitions_;
    auto names = names_;
    parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(index));
    names.erase(names.begin() + static_cast<std::ptrdiff_t>(index));
    return MethodEnsemble(std::move(parts), std::move(names));
}

EdgeLabel method_ensemble_label(const MethodEnsemble& e, const EdgeKey& edge, std::optional<std::size_t> exclude) {
    std::size_t voters = e.size();
    if (exclude) {
        if (*exclude >= e.size()) throw Error("method ensemble: no partition " + std::to_string(*exclude));
        if (voters == 1) throw Error("method ensemble: cannot leave out the only partition");
        --voters;
    }
    return e.positive_votes(edge, exclude) >= majority_threshold(voters) ? EdgeLabel::Similar : EdgeLabel::Dissimilar;
}

HumanEnsemble::HumanEnsemble(std::vector<LabeledEdgeSet> edge_sets) : sets_(std::move(edge_sets)) {
    if (sets_.empty()) throw Error("human ensemble needs at least one edge set");
}

HumanEnsemble::Votes HumanEnsemble::votes(const EdgeKey& edge) const {
    Votes v;
    for (const auto& s : sets_) {
        const auto label = s.get(edge);
        if (label == EdgeLabel::Similar) ++v.positive;
        if (label == EdgeLabel::Dissimilar) ++v.negative;
    }
    return v;
}

std::vector<EdgeKey> HumanEnsemble::support() const {
    std::set<EdgeKey> keys;
    for (const auto& s : sets_)
        for (const auto& [edge, label] : s) keys.insert(edge);
    return {keys.begin(), keys.end()};
}

EdgeLabel human_ensemble_label(const HumanEnsemble& h, const EdgeKey& edge) {
    const auto v = h.votes(edge);
    if (v.positive > v.negative) return EdgeLabel::Similar;
    if (v.negative > v.positive) return EdgeLabel::Dissimilar;
    return EdgeLabel::Unknown;
}

LabeledEdgeSet human_ensemble_edges(const HumanEnsemble& h) {
    LabeledEdgeSet out("human");
    for (const auto& edge : h.support()) {
        const auto label = human_ensemble_label(h, edge);
        if (label != EdgeLabel::Unknown) out.set(edge, label);
    }
    return out;
}

double ensemble_human_score(double ba_vs_ensemble, double ba_vs_human) {
    const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(ba_vs_ensemble) || !in_unit(ba_vs_human))
        throw Error("ensemble_human_score: balanced accuracies must lie in [0, 1]");
    return (ba_vs_ensemble + ba_vs_human) / 2.0;
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest) {
    const auto contents = text::read_file(manifest);
    const auto base = manifest.parent_path();
    std::vector<std::filesystem::path> out;
    text::LineReader lines(contents);
    std::string_view line;
    while (lines.next(line)) {
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        std::filesystem::path p{std::string(line)};
        out.push_back(p.is_absolute() ? p : base / p);
    }
    if (out.empty()) throw ParseError(manifest.string(), 0, "manifest lists no files");
    return out;
}

MethodEnsemble load_method_ensemble(const std::filesystem::path& manifest) {
    std::vector<Partition> parts;
    std::vector<std::string> names;
    for (const auto& path : read_manifest(manifest)) {
        parts.push_back(read_partition(path));
        names.push_back(path.stem().string());
    }
    return MethodEnsemble(std::move(parts), std::move(names));
}

HumanEnsemble load_human_ensemble(const std::filesystem::path& manifest) {
    std::vector<LabeledEdgeSet> sets;
    for (const auto& path : read_manifest(manifest)) sets.push_back(read_edge_set(path));
    return HumanEnsemble(std::move(sets));
}

}  // namespace cadclust
