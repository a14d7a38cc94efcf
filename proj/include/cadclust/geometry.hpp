#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cadclust {

using Vec3 = std::array<double, 3>;

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;  // 0-based
};

/// Point set in model coordinates, or in [0,1]^3 after minmax_normalize.
struct PointCloud {
    std::vector<Vec3> points;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
};

/// Occupied cells of an R^3 grid. Cells are kept sorted and unique.
class VoxelGrid {
public:
    using Cell = std::array<std::uint32_t, 3>;

    explicit VoxelGrid(std::uint32_t resolution = 1);
    /// Sorts and deduplicates; throws Error on out-of-range cells.
    VoxelGrid(std::uint32_t resolution, std::vector<Cell> cells);

    std::uint32_t resolution() const noexcept { return resolution_; }
    const std::vector<Cell>& cells() const noexcept { return cells_; }
    std::size_t size() const noexcept { return cells_.size(); }
    bool empty() const noexcept { return cells_.empty(); }

    friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

private:
    std::uint32_t resolution_;
    std::vector<Cell> cells_;
};

struct ObjOptions {
    /// When false, polygon faces with more than three corners and unsupported
    /// record types are parse errors instead of being skipped.
    bool skip_unsupported = true;
};

/// Parses the `v` / triangular `f` subset of Wavefront OBJ. Face corners may
/// use the `v/vt/vn` form; only the vertex index (1-based) is read.
TriangleMesh parse_obj(std::string_view text, const ObjOptions& options = {}, const std::string& source = "<obj>");
TriangleMesh load_obj(const std::filesystem::path& path, const ObjOptions& options = {});

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

/// Area-weighted uniform surface sampling, deterministic in `seed`.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

/// Per-axis affine map of [min, max] onto [0, 1]; a flat axis maps to 0.
PointCloud minmax_normalize(const PointCloud& cloud);

/// Coordinate tolerance outside [0,1] accepted by voxelize.
inline constexpr double kVoxelTolerance = 1e-9;
inline constexpr std::uint32_t kDefaultVoxelResolution = 32;

/// Cell (min(floor(x*R), R-1), ...) for every point of a normalized cloud.
VoxelGrid voxelize(const PointCloud& cloud, std::uint32_t resolution = kDefaultVoxelResolution);

/// XYZ text: one `x y z` triple per line, written with %.9g.
PointCloud parse_xyz(std::string_view text, const std::string& source = "<xyz>");
std::string format_xyz(const PointCloud& cloud);
PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace cadclust
