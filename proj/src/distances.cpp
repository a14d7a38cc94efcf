#include "cadclust/distances.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>

#include "cadclust/error.hpp"
#include "cadclust/parallel.hpp"
#include "cadclust/text_io.hpp"

namespace cadclust {

double chamfer_directed(const PointCloud& from, const KdTree3& to_tree) {
    if (from.empty()) throw Error("chamfer: empty point cloud");
    double sum = 0.0;
    for (const auto& p : from.points) sum += to_tree.nearest_squared(p);
    return sum / static_cast<double>(from.size());
}

double chamfer(const PointCloud& p, const PointCloud& q) {
    if (p.empty() || q.empty()) throw Error("chamfer: empty point cloud");
    const KdTree3 tree_p(p.points);
    const KdTree3 tree_q(q.points);
    return chamfer_directed(p, tree_q) + chamfer_directed(q, tree_p);
}

double jaccard(const VoxelGrid& a, const VoxelGrid& b) {
    if (a.resolution() != b.resolution())
        throw Error("jaccard: resolution mismatch (" + std::to_string(a.resolution()) + " vs " +
                    std::to_string(b.resolution()) + ")");
    if (a.empty() && b.empty()) return 0.0;
    if (a.empty() || b.empty()) return 1.0;

    // Both cell lists are sorted; count the intersection by merging.
    std::size_t common = 0;
    auto x = a.cells().begin();
    auto y = b.cells().begin();
    while (x != a.cells().end() && y != b.cells().end()) {
        if (*x < *y) {
            ++x;
        } else if (*y < *x) {
            ++y;
        } else {
            ++common;
            ++x;
            ++y;
        }
    }
    const std::size_t uni = a.size() + b.size() - common;
    return 1.0 - static_cast<double>(common) / static_cast<double>(uni);
}

std::string_view metric_name(Metric metric) {
    return metric == Metric::Chamfer ? "chamfer" : "jaccard";
}

Metric parse_metric(std::string_view name) {
    if (name == "chamfer") return Metric::Chamfer;
    if (name == "jaccard") return Metric::Jaccard;
    throw Error("unknown metric '" + std::string(name) + "' (expected chamfer or jaccard)");
}

DistanceMatrix::DistanceMatrix(std::vector<ModelId> ids, Metric metric)
    : ids_(std::move(ids)), values_(ids_.size() * ids_.size(), 0.0), metric_(metric) {}

std::optional<std::size_t> DistanceMatrix::find(std::string_view id) const {
    const auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ids_.begin());
}

void DistanceMatrix::set(std::size_t i, std::size_t j, double value) {
    values_[i * ids_.size() + j] = value;
    values_[j * ids_.size() + i] = value;
}

void DistanceMatrix::validate() const {
    const std::size_t n = ids_.size();
    for (std::size_t i = 0; i < n; ++i) {
        if ((*this)(i, i) != 0.0) throw Error("distance matrix: nonzero diagonal at " + ids_[i]);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = (*this)(i, j);
            if (!std::isfinite(v) || v < 0.0) throw Error("distance matrix: invalid entry for " + ids_[i] + ", " + ids_[j]);
            if (std::abs(v - (*this)(j, i)) > 1e-12) throw Error("distance matrix: asymmetric entry for " + ids_[i] + ", " + ids_[j]);
        }
    }
}

std::uint64_t shape_digest(std::span<const NamedShape> shapes, Metric metric) {
    text::Fnv1a h;
    h.update(metric_name(metric));
    for (const auto& s : shapes) {
        h.update(s.id);
        h.update("\0", 1);
        if (const auto* cloud = std::get_if<PointCloud>(&s.shape)) {
            const std::uint64_t n = cloud->size();
            h.update(&n, sizeof n);
            h.update(cloud->points.data(), cloud->points.size() * sizeof(Vec3));
        } else {
            const auto& grid = std::get<VoxelGrid>(s.shape);
            const std::uint64_t header[2] = {grid.resolution(), grid.size()};
            h.update(header, sizeof header);
            h.update(grid.cells().data(), grid.cells().size() * sizeof(VoxelGrid::Cell));
        }
    }
    return h.digest();
}

namespace {

double quantize(double v) {
    double out = 0.0;
    text::parse_double(text::format_g(v, 12), out);
    return out;
}

void check_shapes(std::span<const NamedShape> shapes, Metric metric) {
    if (shapes.size() < 2) throw Error("distance_matrix: need at least 2 shapes");
    for (const auto& s : shapes) {
        const bool is_cloud = std::holds_alternative<PointCloud>(s.shape);
        if (metric == Metric::Chamfer && !is_cloud)
            throw Error("distance_matrix: chamfer needs point clouds, " + s.id + " is a voxel grid");
        if (metric == Metric::Jaccard && is_cloud)
            throw Error("distance_matrix: jaccard needs voxel grids, " + s.id + " is a point cloud");
        if (is_cloud && std::get<PointCloud>(s.shape).empty()) throw Error("distance_matrix: empty cloud " + s.id);
    }
}

// Produces row i (cells j > i) of the upper triangle.
class RowKernel {
public:
    RowKernel(std::span<const NamedShape> shapes, Metric metric, unsigned threads) : shapes_(shapes), metric_(metric) {
        if (metric_ != Metric::Chamfer) return;
        trees_.resize(shapes.size());
        parallel_for(shapes.size(), threads, [&](std::size_t i) {
            trees_[i].emplace(std::get<PointCloud>(shapes_[i].shape).points);
        });
    }

    std::vector<double> row(std::size_t i) const {
        std::vector<double> out;
        out.reserve(shapes_.size() - i - 1);
        for (std::size_t j = i + 1; j < shapes_.size(); ++j) {
            if (metric_ == Metric::Chamfer) {
                const auto& p = std::get<PointCloud>(shapes_[i].shape);
                const auto& q = std::get<PointCloud>(shapes_[j].shape);
                out.push_back(chamfer_directed(p, *trees_[j]) + chamfer_directed(q, *trees_[i]));
            } else {
                out.push_back(jaccard(std::get<VoxelGrid>(shapes_[i].shape), std::get<VoxelGrid>(shapes_[j].shape)));
            }
        }
        return out;
    }

private:
    std::span<const NamedShape> shapes_;
    Metric metric_;
    std::vector<std::optional<KdTree3>> trees_;
};

std::vector<ModelId> shape_ids(std::span<const NamedShape> shapes) {
    std::vector<ModelId> ids;
    ids.reserve(shapes.size());
    for (const auto& s : shapes) ids.push_back(s.id);
    return ids;
}

// Checkpoint lines are `row<TAB>v...`; a torn trailing line is ignored.
std::vector<std::optional<std::vector<double>>> load_checkpoint(const std::filesystem::path& path, std::size_t n) {
    std::vector<std::optional<std::vector<double>>> rows(n);
    if (!std::filesystem::exists(path)) return rows;
    const auto contents = text::read_file(path);
    const auto complete = contents.substr(0, contents.rfind('\n') == std::string::npos ? 0 : contents.rfind('\n') + 1);
    text::LineReader lines(complete);
    std::string_view line;
    while (lines.next(line)) {
        const auto fields = text::split(line, '\t');
        std::uint64_t i = 0;
        if (fields.empty() || !text::parse_u64(fields[0], i) || i >= n) continue;
        if (fields.size() != n - i) continue;
        std::vector<double> values;
        bool ok = true;
        for (std::size_t k = 1; k < fields.size() && ok; ++k) {
            double v = 0.0;
            ok = text::parse_double(fields[k], v);
            values.push_back(v);
        }
        if (ok) rows[i] = std::move(values);
    }
    return rows;
}

}  // namespace

DistanceMatrix distance_matrix(std::span<const NamedShape> shapes, Metric metric, const DistanceOptions& options) {
    check_shapes(shapes, metric);
    const std::size_t n = shapes.size();
    DistanceMatrix out(shape_ids(shapes), metric);

    if (!options.cache_dir) {
        const RowKernel kernel(shapes, metric, options.threads);
        std::vector<std::vector<double>> rows(n);
        parallel_for(n, options.threads, [&](std::size_t i) { rows[i] = kernel.row(i); });
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) out.set(i, j, rows[i][j - i - 1]);
        return out;
    }

    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(shape_digest(shapes, metric)));
    std::filesystem::create_directories(*options.cache_dir);
    const auto final_path = *options.cache_dir / ("dmat-" + std::string(metric_name(metric)) + "-" + hex + ".tsv");
    auto partial_path = final_path;
    partial_path += ".partial";

    if (std::filesystem::exists(final_path)) {
        auto cached = read_distance_matrix(final_path);
        if (cached.ids() == out.ids() && cached.metric() == metric) return cached;
    }

    auto rows = load_checkpoint(partial_path, n);
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!rows[i]) todo.push_back(i);

    if (!todo.empty()) {
        const RowKernel kernel(shapes, metric, options.threads);
        std::ofstream checkpoint(partial_path, std::ios::binary | std::ios::app);
        if (!checkpoint) throw Error("cannot write " + partial_path.string());
        std::mutex checkpoint_mutex;
        parallel_for(todo.size(), options.threads, [&](std::size_t t) {
            const std::size_t i = todo[t];
            auto values = kernel.row(i);
            for (auto& v : values) v = quantize(v);
            std::string line = std::to_string(i);
            for (const double v : values) {
                line += '\t';
                line += text::format_g(v, 12);
            }
            line += '\n';
            rows[i] = std::move(values);
            std::lock_guard lock(checkpoint_mutex);
            checkpoint << line << std::flush;
        });
    }

    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out.set(i, j, (*rows[i])[j - i - 1]);
    write_distance_matrix(final_path, out);
    std::filesystem::remove(partial_path);
    return out;
}

std::string format_distance_matrix(const DistanceMatrix& m) {
    std::string out = "DMAT " + std::string(metric_name(m.metric())) + " " + std::to_string(m.size()) + "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) out += '\t';
        out += m.ids()[i];
    }
    out += '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (j) out += '\t';
            out += text::format_g(m(i, j), 12);
        }
        out += '\n';
    }
    return out;
}

DistanceMatrix parse_distance_matrix(std::string_view contents, const std::string& source) {
    text::LineReader lines(contents);
    std::string_view line;
    if (!lines.next(line)) throw ParseError(source, 1, "missing DMAT header");
    const auto header = text::split(line, ' ');
    std::uint64_t n = 0;
    if (header.size() != 3 || header[0] != "DMAT" || !text::parse_u64(header[2], n))
        throw ParseError(source, 1, "expected 'DMAT <metric> <n>'");
    Metric metric;
    try {
        metric = parse_metric(header[1]);
    } catch (const Error& e) {
        throw ParseError(source, 1, e.what());
    }
    if (!lines.next(line)) throw ParseError(source, 2, "missing id line");
    std::vector<ModelId> ids;
    if (n > 0)
        for (const auto id : text::split(line, '\t')) ids.emplace_back(id);
    if (ids.size() != n) throw ParseError(source, 2, "expected " + std::to_string(n) + " ids");

    DistanceMatrix m(std::move(ids), metric);
    for (std::size_t i = 0; i < n; ++i) {
        if (!lines.next(line)) throw ParseError(source, lines.line_number() + 1, "missing matrix row");
        const auto fields = text::split(line, '\t');
        if (fields.size() != n) throw ParseError(source, lines.line_number(), "expected " + std::to_string(n) + " values");
        for (std::size_t j = 0; j < n; ++j) {
            double v = 0.0;
            if (!text::parse_double(fields[j], v)) throw ParseError(source, lines.line_number(), "bad value");
            m.set_cell(i, j, v);
        }
    }
    try {
        m.validate();
    } catch (const Error& e) {
        throw ParseError(source, 0, e.what());
    }
    return m;
}

DistanceMatrix read_distance_matrix(const std::filesystem::path& path) {
    return parse_distance_matrix(text::read_file(path), path.string());
}

void write_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& m) {
    text::write_file(path, format_distance_matrix(m));
}

}  // namespace cadclust
