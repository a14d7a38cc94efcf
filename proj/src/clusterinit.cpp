#include "cadclust/clusterinit.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_set>

#include "cadclust/error.hpp"
#include "cadclust/parallel.hpp"
#include "cadclust/random.hpp"
#include "cadclust/text_io.hpp"

namespace cadclust {

FeatureMatrix::FeatureMatrix(std::vector<ModelId> ids, std::size_t dims, std::vector<double> values)
    : ids_(std::move(ids)), dims_(dims), values_(std::move(values)) {
    if (dims_ == 0) throw Error("feature matrix: dimension must be at least 1");
    if (values_.size() != ids_.size() * dims_) throw Error("feature matrix: value count does not match n x d");
    std::unordered_set<std::string_view> seen;
    for (const auto& id : ids_) {
        if (id.empty()) throw Error("feature matrix: empty model id");
        if (!seen.insert(id).second) throw Error("feature matrix: duplicate model id " + id);
    }
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (!std::isfinite(values_[i])) throw Error("feature matrix: non-finite feature for " + ids_[i / dims_]);
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> rows) const {
    std::vector<ModelId> ids;
    std::vector<double> values;
    ids.reserve(rows.size());
    values.reserve(rows.size() * dims_);
    for (const auto r : rows) {
        ids.push_back(ids_[r]);
        const auto src = row(r);
        values.insert(values.end(), src.begin(), src.end());
    }
    return FeatureMatrix(std::move(ids), dims_, std::move(values));
}

namespace {

double sq_dist(std::span<const double> x, const double* c, std::size_t d) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[k] - c[k];
        s += diff * diff;
    }
    return s;
}

std::vector<double> seed_plus_plus(const FeatureMatrix& f, std::size_t k, rnd::Engine& rng) {
    const std::size_t n = f.rows();
    const std::size_t d = f.dims();
    std::vector<double> centroids;
    centroids.reserve(k * d);
    std::vector<bool> chosen(n, false);
    auto add = [&](std::size_t r) {
        chosen[r] = true;
        const auto src = f.row(r);
        centroids.insert(centroids.end(), src.begin(), src.end());
    };

    add(rnd::uniform_index(rng, n));
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = sq_dist(f.row(i), centroids.data(), d);

    while (centroids.size() < k * d) {
        double total = 0.0;
        for (const double w : nearest) total += w;
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rnd::uniform01(rng) * total;
            double running = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                running += nearest[i];
                if (nearest[i] > 0.0 && running > target) {
                    pick = i;
                    break;
                }
            }
            // Rounding can leave target just above the final running sum.
            if (pick == n)
                for (std::size_t i = n; i-- > 0;)
                    if (nearest[i] > 0.0) {
                        pick = i;
                        break;
                    }
        } else {
            // Every remaining row duplicates a chosen one.
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
        }
        add(pick);
        const double* c = centroids.data() + centroids.size() - d;
        for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], sq_dist(f.row(i), c, d));
    }
    return centroids;
}

}  // namespace

KMeansResult kmeans_run(const FeatureMatrix& f, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    const std::size_t n = f.rows();
    const std::size_t d = f.dims();
    if (k == 0) throw Error("kmeans: K must be at least 1");
    if (options.max_iterations == 0) throw Error("kmeans: max_iterations must be at least 1");
    if (k > n) throw Error("kmeans: K = " + std::to_string(k) + " exceeds the number of rows " + std::to_string(n));

    rnd::Engine rng(seed);
    KMeansResult result;
    result.centroids = seed_plus_plus(f, k, rng);
    auto& centroids = result.centroids;

    std::vector<std::size_t> assignment(n, 0);
    std::vector<std::size_t> previous;
    std::vector<double> dist(n, 0.0);

    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        parallel_for(n, options.threads, [&](std::size_t i) {
            const auto x = f.row(i);
            std::size_t best = 0;
            double best_d = sq_dist(x, centroids.data(), d);
            for (std::size_t c = 1; c < k; ++c) {
                const double dc = sq_dist(x, centroids.data() + c * d, d);
                if (dc < best_d) {
                    best_d = dc;
                    best = c;
                }
            }
            assignment[i] = best;
            dist[i] = best_d;
        });
        if (assignment == previous) {
            result.converged = true;
            break;
        }

        std::vector<std::size_t> sizes(k, 0);
        for (const auto c : assignment) ++sizes[c];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) continue;
            // n >= K guarantees some cluster still has two or more members.
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i)
                if (sizes[assignment[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
            --sizes[assignment[far]];
            assignment[far] = c;
            sizes[c] = 1;
            dist[far] = 0.0;
            const auto src = f.row(far);
            std::copy(src.begin(), src.end(), centroids.begin() + static_cast<std::ptrdiff_t>(c * d));
        }

        std::fill(centroids.begin(), centroids.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = f.row(i);
            double* c = centroids.data() + assignment[i] * d;
            for (std::size_t j = 0; j < d; ++j) c[j] += x[j];
        }
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < d; ++j) centroids[c * d + j] /= static_cast<double>(sizes[c]);

        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) objective += sq_dist(f.row(i), centroids.data() + assignment[i] * d, d);
        assert(result.objective.empty() || objective <= result.objective.back());
        result.objective.push_back(objective);
        result.iterations = iter + 1;
        previous = assignment;
    }

    result.partition = Partition(f.ids(), previous.empty() ? assignment : previous);
    return result;
}

InitialClustering capacity_split(const FeatureMatrix& f, const Partition& p, std::size_t capacity, std::uint64_t seed,
                                 const KMeansOptions& options) {
    if (capacity == 0) throw Error("capacity_split: capacity must be at least 1");

    std::unordered_map<std::string_view, std::size_t> feature_row;
    for (std::size_t r = 0; r < f.rows(); ++r) feature_row.emplace(f.ids()[r], r);

    // Clusters as lists of feature rows; `position` maps a feature row back to its row in p.
    std::vector<std::size_t> position(f.rows(), SIZE_MAX);
    std::deque<std::vector<std::size_t>> pending;
    for (const auto& members : p.members()) {
        std::vector<std::size_t> rows;
        rows.reserve(members.size());
        for (const auto m : members) {
            const auto it = feature_row.find(p.ids()[m]);
            if (it == feature_row.end()) throw Error("capacity_split: no features for model " + p.ids()[m]);
            position[it->second] = m;
            rows.push_back(it->second);
        }
        pending.push_back(std::move(rows));
    }

    std::vector<std::vector<std::size_t>> done;
    std::uint64_t split_counter = 0;
    while (!pending.empty()) {
        auto rows = std::move(pending.front());
        pending.pop_front();
        if (rows.size() <= capacity) {
            done.push_back(std::move(rows));
            continue;
        }
        const std::size_t k = (rows.size() + capacity - 1) / capacity;
        const auto sub = f.select(rows);
        const auto split = kmeans(sub, k, rnd::mix(seed ^ rnd::mix(++split_counter)), options);
        for (const auto& members : split.members()) {
            std::vector<std::size_t> child;
            child.reserve(members.size());
            for (const auto m : members) child.push_back(rows[m]);
            pending.push_back(std::move(child));
        }
    }

    // Number clusters by their earliest member in p's order.
    for (auto& rows : done)
        std::sort(rows.begin(), rows.end(), [&](std::size_t x, std::size_t y) { return position[x] < position[y]; });
    std::sort(done.begin(), done.end(),
              [&](const auto& x, const auto& y) { return position[x.front()] < position[y.front()]; });

    std::vector<std::size_t> clusters(p.size());
    for (std::size_t c = 0; c < done.size(); ++c)
        for (const auto r : done[c]) clusters[position[r]] = c;
    return InitialClustering{Partition(p.ids(), std::move(clusters)), capacity};
}

FeatureMatrix parse_features(std::string_view contents, const std::string& source) {
    text::LineReader lines(contents);
    std::string_view line;
    if (!lines.next(line)) throw ParseError(source, 1, "missing FEAT header");
    const auto header = text::split_ws(line);
    std::uint64_t n = 0;
    std::uint64_t d = 0;
    if (header.size() != 3 || header[0] != "FEAT" || !text::parse_u64(header[1], n) || !text::parse_u64(header[2], d))
        throw ParseError(source, 1, "expected 'FEAT <n> <d>'");
    if (d == 0) throw ParseError(source, 1, "feature dimension must be at least 1");

    std::vector<ModelId> ids;
    std::vector<double> values;
    ids.reserve(n);
    values.reserve(n * d);
    while (lines.next(line)) {
        if (line.empty() || line.front() == '#') continue;
        const auto fields = text::split(line, '\t');
        if (fields.size() != d + 1)
            throw ParseError(source, lines.line_number(), "expected id and " + std::to_string(d) + " features");
        if (fields[0].empty()) throw ParseError(source, lines.line_number(), "empty model id");
        ids.emplace_back(fields[0]);
        for (std::size_t k = 1; k <= d; ++k) {
            double v = 0.0;
            if (!text::parse_double(fields[k], v) || !std::isfinite(v))
                throw ParseError(source, lines.line_number(), "bad feature value");
            values.push_back(v);
        }
    }
    if (ids.size() != n)
        throw ParseError(source, 0, "header declares " + std::to_string(n) + " rows, found " + std::to_string(ids.size()));
    try {
        return FeatureMatrix(std::move(ids), d, std::move(values));
    } catch (const Error& e) {
        throw ParseError(source, 0, e.what());
    }
}

std::string format_features(const FeatureMatrix& f) {
    std::string out = "FEAT " + std::to_string(f.rows()) + " " + std::to_string(f.dims()) + "\n";
    for (std::size_t i = 0; i < f.rows(); ++i) {
        out += f.ids()[i];
        for (const double v : f.row(i)) {
            out += '\t';
            out += text::format_g(v, 9);
        }
        out += '\n';
    }
    return out;
}

FeatureMatrix read_features(const std::filesystem::path& path) {
    return parse_features(text::read_file(path), path.string());
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& f) {
    text::write_file(path, format_features(f));
}

}  // namespace cadclust
