#include "cadclust/simgraph.hpp"

#include <algorithm>
#include <unordered_set>

#include "cadclust/error.hpp"
#include "cadclust/text_io.hpp"

namespace cadclust {

EdgeKey canonical_edge(std::string_view i, std::string_view j) {
    if (i == j) throw Error("self-edge not representable: " + std::string(i));
    if (i.empty() || j.empty()) throw Error("empty model id in edge");
    if (j < i) std::swap(i, j);
    return EdgeKey(ModelId(i), ModelId(j));
}

void LabeledEdgeSet::set(const EdgeKey& edge, EdgeLabel label) {
    if (label == EdgeLabel::Unknown) throw Error("unknown labels are not stored in an edge set");
    entries_.insert_or_assign(edge, label);
}

EdgeLabel LabeledEdgeSet::get(const EdgeKey& edge) const {
    const auto it = entries_.find(edge);
    return it == entries_.end() ? EdgeLabel::Unknown : it->second;
}

void LabeledEdgeSet::merge(const LabeledEdgeSet& other) {
    for (const auto& [edge, label] : other.entries_) {
        const auto [it, inserted] = entries_.emplace(edge, label);
        if (!inserted && it->second != label)
            throw Error("conflicting labels for edge " + edge.a() + " " + edge.b());
    }
}

Partition::Partition(std::vector<ModelId> ids, std::vector<std::size_t> clusters)
    : ids_(std::move(ids)), clusters_(std::move(clusters)) {
    if (ids_.size() != clusters_.size()) throw Error("partition: ids and assignment differ in length");
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (ids_[i].empty()) throw Error("partition: empty model id");
        if (!index_.emplace(ids_[i], i).second) throw Error("partition: duplicate model id " + ids_[i]);
    }
    num_clusters_ = clusters_.empty() ? 0 : *std::max_element(clusters_.begin(), clusters_.end()) + 1;
    std::vector<bool> used(num_clusters_, false);
    for (const auto c : clusters_) used[c] = true;
    if (std::find(used.begin(), used.end(), false) != used.end())
        throw Error("partition: cluster indices are not dense in [0, K)");
}

Partition Partition::densify(std::vector<ModelId> ids, const std::vector<std::size_t>& clusters) {
    std::vector<std::size_t> distinct(clusters);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<std::size_t> dense;
    dense.reserve(clusters.size());
    for (const auto c : clusters)
        dense.push_back(static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), c) - distinct.begin()));
    return Partition(std::move(ids), std::move(dense));
}

bool Partition::contains(std::string_view id) const { return find(id).has_value(); }

std::optional<std::size_t> Partition::find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t Partition::index_of(std::string_view id) const {
    const auto found = find(id);
    if (!found) throw Error("model not in partition: " + std::string(id));
    return *found;
}

std::vector<std::vector<std::size_t>> Partition::members() const {
    std::vector<std::vector<std::size_t>> out(num_clusters_);
    for (std::size_t i = 0; i < clusters_.size(); ++i) out[clusters_[i]].push_back(i);
    return out;
}

std::vector<std::size_t> Partition::cluster_sizes() const {
    std::vector<std::size_t> out(num_clusters_, 0);
    for (const auto c : clusters_) ++out[c];
    return out;
}

bool Partition::equivalent(const Partition& other) const {
    if (size() != other.size() || num_clusters_ != other.num_clusters_) return false;
    // A bijection between cluster indices must exist.
    std::vector<std::size_t> forward(num_clusters_, SIZE_MAX);
    std::vector<std::size_t> backward(num_clusters_, SIZE_MAX);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        const auto j = other.find(ids_[i]);
        if (!j) return false;
        const std::size_t mine = clusters_[i];
        const std::size_t theirs = other.clusters_[*j];
        if (forward[mine] == SIZE_MAX && backward[theirs] == SIZE_MAX) {
            forward[mine] = theirs;
            backward[theirs] = mine;
        } else if (forward[mine] != theirs || backward[theirs] != mine) {
            return false;
        }
    }
    return true;
}

EdgeLabel partition_edge_label(const Partition& p, const EdgeKey& edge) {
    return p.cluster_of(edge.a()) == p.cluster_of(edge.b()) ? EdgeLabel::Similar : EdgeLabel::Dissimilar;
}

std::uint64_t positive_pair_count(const Partition& p) {
    std::uint64_t total = 0;
    for (const auto n : p.cluster_sizes()) total += static_cast<std::uint64_t>(n) * (n - 1) / 2;
    return total;
}

std::optional<double> consistency(const LabeledEdgeSet& x, const LabeledEdgeSet& y) {
    // Walk the smaller map, probe the larger.
    const auto& small = x.size() <= y.size() ? x : y;
    const auto& large = x.size() <= y.size() ? y : x;
    std::uint64_t shared = 0;
    std::uint64_t agree = 0;
    for (const auto& [edge, label] : small) {
        const auto other = large.get(edge);
        if (other == EdgeLabel::Unknown) continue;
        ++shared;
        if (other == label) ++agree;
    }
    if (shared == 0) return std::nullopt;
    return static_cast<double>(agree) / static_cast<double>(shared);
}

LabelStats label_stats(const LabeledEdgeSet& x, std::uint64_t universe_size) {
    if (universe_size < x.size())
        throw Error("label_stats: universe of " + std::to_string(universe_size) + " edges is smaller than " +
                    std::to_string(x.size()) + " labeled edges");
    LabelStats s;
    for (const auto& [edge, label] : x) (label == EdgeLabel::Similar ? s.positive : s.negative) += 1;
    s.unknown = universe_size - x.size();
    return s;
}

LabeledEdgeSet parse_edge_set(std::string_view text, const std::string& source) {
    LabeledEdgeSet out;
    text::LineReader lines(text);
    std::string_view line;
    while (lines.next(line)) {
        if (line.empty() || line.front() == '#') continue;
        const auto fields = text::split(line, '\t');
        if (fields.size() != 3) throw ParseError(source, lines.line_number(), "expected 3 tab-separated fields");
        EdgeLabel label;
        if (fields[2] == "+1" || fields[2] == "1") {
            label = EdgeLabel::Similar;
        } else if (fields[2] == "-1") {
            label = EdgeLabel::Dissimilar;
        } else {
            throw ParseError(source, lines.line_number(), "label must be +1 or -1");
        }
        if (fields[0].empty() || fields[1].empty()) throw ParseError(source, lines.line_number(), "empty model id");
        if (!(fields[0] < fields[1])) throw ParseError(source, lines.line_number(), "edge ids not in canonical order");
        const auto edge = canonical_edge(fields[0], fields[1]);
        if (out.get(edge) != EdgeLabel::Unknown) throw ParseError(source, lines.line_number(), "duplicate edge");
        out.set(edge, label);
    }
    return out;
}

std::string format_edge_set(const LabeledEdgeSet& edges) {
    std::string out;
    for (const auto& [edge, label] : edges) {
        out += edge.a();
        out += '\t';
        out += edge.b();
        out += label == EdgeLabel::Similar ? "\t+1\n" : "\t-1\n";
    }
    return out;
}

LabeledEdgeSet read_edge_set(const std::filesystem::path& path) {
    auto edges = parse_edge_set(text::read_file(path), path.string());
    edges.set_owner(path.stem().string());
    return edges;
}

void write_edge_set(const std::filesystem::path& path, const LabeledEdgeSet& edges) {
    text::write_file(path, format_edge_set(edges));
}

Partition parse_partition(std::string_view text, const std::string& source) {
    std::vector<ModelId> ids;
    std::vector<std::size_t> clusters;
    std::unordered_set<std::string_view> seen;
    text::LineReader lines(text);
    std::string_view line;
    while (lines.next(line)) {
        if (line.empty() || line.front() == '#') continue;
        const auto fields = text::split(line, '\t');
        if (fields.size() != 2) throw ParseError(source, lines.line_number(), "expected model_id<TAB>cluster_index");
        std::uint64_t c = 0;
        if (fields[0].empty()) throw ParseError(source, lines.line_number(), "empty model id");
        if (!text::parse_u64(fields[1], c)) throw ParseError(source, lines.line_number(), "bad cluster index");
        if (!seen.insert(fields[0]).second) throw ParseError(source, lines.line_number(), "duplicate model id");
        ids.emplace_back(fields[0]);
        clusters.push_back(static_cast<std::size_t>(c));
    }
    if (ids.empty()) throw ParseError(source, 0, "partition is empty");
    return Partition::densify(std::move(ids), clusters);
}

std::string format_partition(const Partition& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        out += p.ids()[i];
        out += '\t';
        out += std::to_string(p.assignment()[i]);
        out += '\n';
    }
    return out;
}

Partition read_partition(const std::filesystem::path& path) {
    return parse_partition(text::read_file(path), path.string());
}

void write_partition(const std::filesystem::path& path, const Partition& p) {
    text::write_file(path, format_partition(p));
}

}  // namespace cadclust
