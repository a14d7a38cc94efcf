#include "cadclust/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "cadclust/error.hpp"
#include "cadclust/random.hpp"
#include "cadclust/text_io.hpp"

namespace cadclust {

VoxelGrid::VoxelGrid(std::uint32_t resolution) : resolution_(resolution) {
    if (resolution_ == 0) throw Error("voxel resolution must be positive");
}

VoxelGrid::VoxelGrid(std::uint32_t resolution, std::vector<Cell> cells) : VoxelGrid(resolution) {
    for (const auto& c : cells)
        if (c[0] >= resolution_ || c[1] >= resolution_ || c[2] >= resolution_)
            throw Error("voxel cell outside the grid");
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    cells_ = std::move(cells);
}

namespace {

bool parse_face_index(std::string_view token, std::size_t vertex_count, std::uint32_t& out) {
    const auto slash = token.find('/');
    if (slash != std::string_view::npos) token = token.substr(0, slash);
    std::uint64_t v = 0;
    if (!text::parse_u64(token, v) || v == 0 || v > vertex_count) return false;
    out = static_cast<std::uint32_t>(v - 1);
    return true;
}

}  // namespace

TriangleMesh parse_obj(std::string_view obj, const ObjOptions& options, const std::string& source) {
    TriangleMesh mesh;
    text::LineReader lines(obj);
    std::string_view line;
    while (lines.next(line)) {
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto tokens = text::split_ws(line);
        const auto kind = tokens.front();
        if (kind == "v") {
            if (tokens.size() < 4) throw ParseError(source, lines.line_number(), "vertex needs 3 coordinates");
            Vec3 p{};
            for (int k = 0; k < 3; ++k)
                if (!text::parse_double(tokens[k + 1], p[k]) || !std::isfinite(p[k]))
                    throw ParseError(source, lines.line_number(), "bad vertex coordinate");
            mesh.vertices.push_back(p);
        } else if (kind == "f") {
            if (tokens.size() < 4) throw ParseError(source, lines.line_number(), "face needs 3 vertices");
            if (tokens.size() > 4) {
                if (options.skip_unsupported) continue;
                throw ParseError(source, lines.line_number(), "only triangular faces are supported");
            }
            std::array<std::uint32_t, 3> tri{};
            for (int k = 0; k < 3; ++k)
                if (!parse_face_index(tokens[k + 1], mesh.vertices.size(), tri[k]))
                    throw ParseError(source, lines.line_number(),
                                     "face index out of range: " + std::string(tokens[k + 1]));
            mesh.triangles.push_back(tri);
        } else if (!options.skip_unsupported) {
            throw ParseError(source, lines.line_number(), "unsupported record '" + std::string(kind) + "'");
        }
    }
    if (mesh.triangles.empty()) throw ParseError(source, 0, "zero triangles");
    return mesh;
}

TriangleMesh load_obj(const std::filesystem::path& path, const ObjOptions& options) {
    return parse_obj(text::read_file(path), options, path.string());
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 u{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const Vec3 v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const Vec3 n{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
    return 0.5 * std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
}

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw Error("sample_surface: n must be at least 1");
    if (mesh.triangles.empty()) throw Error("sample_surface: mesh has no triangles");

    std::vector<double> cumulative;
    cumulative.reserve(mesh.triangles.size());
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        for (const auto idx : t)
            if (idx >= mesh.vertices.size()) throw Error("sample_surface: triangle index out of range");
        total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        cumulative.push_back(total);
    }
    if (!(total > 0.0)) throw Error("sample_surface: degenerate mesh with zero surface area");

    rnd::Engine rng(seed);

    PointCloud cloud;
    cloud.points.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double pick = rnd::uniform01(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
        if (it == cumulative.end()) --it;
        // Zero-area triangles share their cumulative value with a predecessor
        // and can never be selected by upper_bound.
        const auto& tri = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];

        const double r1 = std::sqrt(rnd::uniform01(rng));
        const double r2 = rnd::uniform01(rng);
        const double wa = 1.0 - r1;
        const double wb = r1 * (1.0 - r2);
        const double wc = r1 * r2;
        cloud.points.push_back({wa * a[0] + wb * b[0] + wc * c[0],
                                wa * a[1] + wb * b[1] + wc * c[1],
                                wa * a[2] + wb * b[2] + wc * c[2]});
    }
    return cloud;
}

PointCloud minmax_normalize(const PointCloud& cloud) {
    if (cloud.empty()) throw Error("minmax_normalize: empty point cloud");
    Vec3 lo = cloud.points.front();
    Vec3 hi = lo;
    for (const auto& p : cloud.points) {
        for (int k = 0; k < 3; ++k) {
            if (!std::isfinite(p[k])) throw Error("minmax_normalize: non-finite coordinate");
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    }
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const auto& p : cloud.points) {
        Vec3 q{};
        for (int k = 0; k < 3; ++k) {
            const double span = hi[k] - lo[k];
            // Pin the extremes so the map is exact at both ends.
            if (span > 0.0) q[k] = p[k] == hi[k] ? 1.0 : (p[k] - lo[k]) / span;
        }
        out.points.push_back(q);
    }
    return out;
}

VoxelGrid voxelize(const PointCloud& cloud, std::uint32_t resolution) {
    if (resolution == 0) throw Error("voxelize: resolution must be positive");
    std::vector<VoxelGrid::Cell> cells;
    cells.reserve(cloud.size());
    const double r = static_cast<double>(resolution);
    for (const auto& p : cloud.points) {
        VoxelGrid::Cell cell{};
        for (int k = 0; k < 3; ++k) {
            if (!(p[k] >= -kVoxelTolerance && p[k] <= 1.0 + kVoxelTolerance))
                throw Error("voxelize: coordinate " + text::format_g(p[k], 17) + " outside [0,1]");
            const double scaled = std::floor(std::clamp(p[k], 0.0, 1.0) * r);
            cell[k] = std::min(static_cast<std::uint32_t>(scaled), resolution - 1);
        }
        cells.push_back(cell);
    }
    return VoxelGrid(resolution, std::move(cells));
}

PointCloud parse_xyz(std::string_view xyz, const std::string& source) {
    PointCloud cloud;
    text::LineReader lines(xyz);
    std::string_view line;
    while (lines.next(line)) {
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto tokens = text::split_ws(line);
        if (tokens.size() != 3) throw ParseError(source, lines.line_number(), "expected 'x y z'");
        Vec3 p{};
        for (int k = 0; k < 3; ++k)
            if (!text::parse_double(tokens[k], p[k]) || !std::isfinite(p[k]))
                throw ParseError(source, lines.line_number(), "bad coordinate");
        cloud.points.push_back(p);
    }
    return cloud;
}

std::string format_xyz(const PointCloud& cloud) {
    std::string out;
    out.reserve(cloud.size() * 32);
    for (const auto& p : cloud.points) {
        out += text::format_g(p[0], 9);
        out += ' ';
        out += text::format_g(p[1], 9);
        out += ' ';
        out += text::format_g(p[2], 9);
        out += '\n';
    }
    return out;
}

PointCloud read_xyz(const std::filesystem::path& path) { return parse_xyz(text::read_file(path), path.string()); }

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) { text::write_file(path, format_xyz(cloud)); }

}  // namespace cadclust
