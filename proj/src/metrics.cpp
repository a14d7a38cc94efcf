#include "cadclust/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>

#include "cadclust/error.hpp"
#include "cadclust/parallel.hpp"
#include "cadclust/text_io.hpp"

namespace cadclust {

void ConfusionCounts::add(EdgeLabel predicted, EdgeLabel reference) {
    if (reference == EdgeLabel::Unknown) return;
    const bool pred_pos = predicted == EdgeLabel::Similar;
    if (reference == EdgeLabel::Similar)
        ++(pred_pos ? tp : fn);
    else
        ++(pred_pos ? fp : tn);
}

namespace {

void require_labeled(const ConfusionCounts& c) {
    if (c.total() == 0) throw Error("no labeled edges");
}

// Row positions of `ids` inside `pred`.
std::vector<std::size_t> align(const Partition& pred, const std::vector<ModelId>& ids) {
    if (pred.size() != ids.size())
        throw Error("evaluated partition covers " + std::to_string(pred.size()) + " models, reference covers " +
                    std::to_string(ids.size()));
    std::vector<std::size_t> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out[i] = pred.assignment()[pred.index_of(ids[i])];
    return out;
}

// Upper triangle tally; `same_in_reference(i, j)` answers for the reference.
template <class RefSame>
ConfusionCounts dense_confusion(const std::vector<std::size_t>& pred, RefSame&& same_in_reference, unsigned threads) {
    const std::size_t n = pred.size();
    std::vector<ConfusionCounts> rows(n);
    parallel_for(n, threads, [&](std::size_t i) {
        ConfusionCounts c;
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool p = pred[i] == pred[j];
            const bool r = same_in_reference(i, j);
            if (r)
                ++(p ? c.tp : c.fn);
            else
                ++(p ? c.fp : c.tn);
        }
        rows[i] = c;
    });
    ConfusionCounts total;
    for (const auto& c : rows) total += c;
    require_labeled(total);
    return total;
}

}  // namespace

ConfusionCounts confusion(const Partition& pred, const ReferenceLabeler& reference, std::span<const EdgeKey> universe) {
    ConfusionCounts c;
    for (const auto& edge : universe) {
        const auto ref = reference(edge);
        if (ref == EdgeLabel::Unknown) continue;
        c.add(partition_edge_label(pred, edge), ref);
    }
    require_labeled(c);
    return c;
}

ConfusionCounts confusion(const Partition& pred, const LabeledEdgeSet& reference) {
    ConfusionCounts c;
    for (const auto& [edge, label] : reference) c.add(partition_edge_label(pred, edge), label);
    require_labeled(c);
    return c;
}

ConfusionCounts confusion(const Partition& pred, const HumanEnsemble& reference) {
    const auto universe = reference.support();
    return confusion(pred, [&](const EdgeKey& e) { return human_ensemble_label(reference, e); }, universe);
}

ConfusionCounts confusion(const Partition& pred, const Partition& reference, unsigned threads) {
    const auto aligned = align(pred, reference.ids());
    const auto& ref = reference.assignment();
    return dense_confusion(aligned, [&](std::size_t i, std::size_t j) { return ref[i] == ref[j]; }, threads);
}

ConfusionCounts confusion(const Partition& pred, const MethodEnsemble& reference, std::optional<std::size_t> exclude,
                          unsigned threads) {
    std::size_t voters = reference.size();
    if (exclude) {
        if (*exclude >= reference.size()) throw Error("method ensemble: no partition " + std::to_string(*exclude));
        if (voters == 1) throw Error("method ensemble: cannot leave out the only partition");
        --voters;
    }
    const std::size_t threshold = majority_threshold(voters);
    const auto aligned = align(pred, reference.ids());
    const auto& votes = reference.aligned_assignments();
    return dense_confusion(
        aligned,
        [&](std::size_t i, std::size_t j) {
            std::size_t positive = 0;
            for (std::size_t m = 0; m < votes.size(); ++m)
                if (m != exclude && votes[m][i] == votes[m][j]) ++positive;
            return positive >= threshold;
        },
        threads);
}

namespace {

__extension__ using u128 = unsigned __int128;

u128 gcd128(u128 a, u128 b) {
    while (b != 0) {
        const u128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

// num/den rounded once: equal rationals give bitwise-equal doubles.
double ratio(u128 num, u128 den) {
    const u128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    constexpr u128 exact = u128(1) << 53;
    if (num <= exact && den <= exact) return static_cast<double>(num) / static_cast<double>(den);
    return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

}  // namespace

double edge_accuracy(const ConfusionCounts& c) {
    require_labeled(c);
    return ratio(u128(c.tp) + c.tn, c.total());
}

double balanced_accuracy(const ConfusionCounts& c) {
    const u128 pos = u128(c.tp) + c.fn;
    const u128 neg = u128(c.tn) + c.fp;
    if (pos == 0 || neg == 0) throw Error("class absent from reference");
    // (tp/pos + tn/neg) / 2 as one fraction.
    return ratio(c.tp * neg + c.tn * pos, 2 * pos * neg);
}

SilhouetteResult silhouette(const Partition& p, const DistanceMatrix& d, unsigned threads) {
    if (p.num_clusters() < 2) throw Error("silhouette undefined for K=1");
    const std::size_t n = p.size();
    const std::size_t k = p.num_clusters();

    std::vector<std::size_t> at(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto found = d.find(p.ids()[i]);
        if (!found) throw Error("distance matrix lacks model " + p.ids()[i]);
        at[i] = *found;
    }
    const auto sizes = p.cluster_sizes();
    const auto& cluster = p.assignment();

    SilhouetteResult out;
    out.ids = p.ids();
    out.per_object.assign(n, 0.0);
    parallel_for(n, threads, [&](std::size_t i) {
        const std::size_t own = cluster[i];
        if (sizes[own] == 1) return;
        std::vector<double> sums(k, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sums[cluster[j]] += d(at[i], at[j]);
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        const double denom = std::max(a, b);
        out.per_object[i] = denom > 0.0 ? (b - a) / denom : 0.0;
    });
    double total = 0.0;
    for (const double s : out.per_object) total += s;
    out.mean = total / static_cast<double>(n);
    return out;
}

Ranking ranking_report(const ScoreTable& scores) {
    Ranking out;
    if (scores.empty()) return out;

    std::set<std::size_t> grid;
    for (const auto& [k, v] : scores.begin()->second) grid.insert(k);
    if (grid.empty()) throw Error("ranking: " + scores.begin()->first + " has no scores");
    for (const auto& [method, by_k] : scores) {
        std::set<std::size_t> mine;
        for (const auto& [k, v] : by_k) mine.insert(k);
        if (mine != grid) throw Error("ranking: " + method + " is scored on a different K grid");
    }

    const auto order = [](std::vector<std::pair<std::string, double>> entries) {
        std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) {
            return x.second != y.second ? x.second > y.second : x.first < y.first;
        });
        std::vector<std::string> names;
        for (auto& e : entries) names.push_back(std::move(e.first));
        return names;
    };

    for (const auto k : grid) {
        std::vector<std::pair<std::string, double>> entries;
        for (const auto& [method, by_k] : scores) entries.emplace_back(method, by_k.at(k));
        out.per_k[k] = order(std::move(entries));
    }
    std::vector<std::pair<std::string, double>> means;
    for (const auto& [method, by_k] : scores) {
        double sum = 0.0;
        for (const auto& [k, v] : by_k) sum += v;
        const double mean = sum / static_cast<double>(by_k.size());
        out.means[method] = mean;
        means.emplace_back(method, mean);
    }
    out.mean_over_k = order(std::move(means));
    return out;
}

std::string format_score_rows(std::span<const ScoreRow> rows) {
    std::string out;
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f", r.value);
        out += r.method + '\t' + std::to_string(r.k) + '\t' + r.index + '\t' + buf + '\n';
    }
    return out;
}

std::vector<ScoreRow> parse_score_rows(std::string_view contents, const std::string& source) {
    std::vector<ScoreRow> rows;
    text::LineReader lines(contents);
    std::string_view line;
    while (lines.next(line)) {
        if (line.empty() || line.front() == '#') continue;
        const auto f = text::split(line, '\t');
        if (f.size() != 4) throw ParseError(source, lines.line_number(), "expected method<TAB>K<TAB>index<TAB>value");
        ScoreRow r;
        std::uint64_t k = 0;
        if (f[0].empty() || f[2].empty()) throw ParseError(source, lines.line_number(), "empty method or index name");
        if (!text::parse_u64(f[1], k)) throw ParseError(source, lines.line_number(), "bad K");
        if (!text::parse_double(f[3], r.value)) throw ParseError(source, lines.line_number(), "bad value");
        r.method = std::string(f[0]);
        r.k = static_cast<std::size_t>(k);
        r.index = std::string(f[2]);
        rows.push_back(std::move(r));
    }
    return rows;
}

ScoreTable score_table(std::span<const ScoreRow> rows, const std::string& index) {
    ScoreTable table;
    for (const auto& r : rows) {
        if (r.index != index) continue;
        if (!table[r.method].emplace(r.k, r.value).second)
            throw Error("duplicate score for " + r.method + " at K=" + std::to_string(r.k));
    }
    return table;
}

ScoreTable restrict_to_grid(const ScoreTable& scores, std::span<const std::size_t> grid) {
    ScoreTable out;
    for (const auto& [method, by_k] : scores)
        for (const auto k : grid) {
            const auto it = by_k.find(k);
            if (it == by_k.end()) throw Error("method " + method + " has no score at K=" + std::to_string(k));
            out[method][k] = it->second;
        }
    return out;
}

std::string format_ranking(const Ranking& r, const std::string& index) {
    std::string out = "# " + index + "\n";
    const auto chain = [](const std::vector<std::string>& names) {
        std::string s;
        for (std::size_t i = 0; i < names.size(); ++i) s += (i ? " > " : "") + names[i];
        return s;
    };
    for (const auto& [k, names] : r.per_k) out += "K=" + std::to_string(k) + ": " + chain(names) + "\n";
    out += "mean: " + chain(r.mean_over_k) + "\n";
    char buf[64];
    for (const auto& name : r.mean_over_k) {
        std::snprintf(buf, sizeof buf, "%.6f", r.means.at(name));
        out += "  " + name + "\t" + buf + "\n";
    }
    return out;
}

}  // namespace cadclust
