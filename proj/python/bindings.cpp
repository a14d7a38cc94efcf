#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cadclust/annotation.hpp"
#include "cadclust/clusterinit.hpp"
#include "cadclust/distances.hpp"
#include "cadclust/ensemble.hpp"
#include "cadclust/geometry.hpp"
#include "cadclust/metrics.hpp"
#include "cadclust/simgraph.hpp"

namespace py = pybind11;
using namespace cadclust;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointCloud to_cloud(const Array& a) {
    if (a.ndim() != 2 || a.shape(1) != 3) throw py::value_error("expected an (n, 3) array");
    PointCloud c;
    c.points.resize(static_cast<std::size_t>(a.shape(0)));
    const double* p = a.data();
    for (auto& v : c.points) {
        v = {p[0], p[1], p[2]};
        p += 3;
    }
    return c;
}

Array to_array(const PointCloud& c) {
    Array out({static_cast<py::ssize_t>(c.size()), py::ssize_t{3}});
    auto* p = out.mutable_data();
    for (const auto& v : c.points) {
        p[0] = v[0];
        p[1] = v[1];
        p[2] = v[2];
        p += 3;
    }
    return out;
}

VoxelGrid to_grid(const std::vector<VoxelGrid::Cell>& cells, std::uint32_t resolution) {
    return VoxelGrid(resolution, cells);
}

EdgeLabel to_label(int v) {
    if (v == 1) return EdgeLabel::Similar;
    if (v == -1) return EdgeLabel::Dissimilar;
    if (v == 0) return EdgeLabel::Unknown;
    throw py::value_error("edge label must be -1, 0 or +1");
}

py::dict counts_dict(const ConfusionCounts& c) {
    py::dict d;
    d["tp"] = c.tp;
    d["fp"] = c.fp;
    d["tn"] = c.tn;
    d["fn"] = c.fn;
    return d;
}

ConfusionCounts counts_from(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
    ConfusionCounts c;
    c.tp = tp;
    c.fp = fp;
    c.tn = tn;
    c.fn = fn;
    return c;
}

}  // namespace

PYBIND11_MODULE(_cadclust, m) {
    m.doc() = "Core routines of the cadclust toolkit";

    py::register_exception<Error>(m, "Error", PyExc_ValueError);

    py::class_<Partition>(m, "Partition")
        .def(py::init<std::vector<ModelId>, std::vector<std::size_t>>(), py::arg("ids"), py::arg("clusters"))
        .def_static("densify", &Partition::densify, py::arg("ids"), py::arg("clusters"))
        .def_property_readonly("ids", &Partition::ids)
        .def_property_readonly("assignment", &Partition::assignment)
        .def_property_readonly("num_clusters", &Partition::num_clusters)
        .def("cluster_of", &Partition::cluster_of)
        .def("members", &Partition::members)
        .def("cluster_sizes", &Partition::cluster_sizes)
        .def("equivalent", &Partition::equivalent)
        .def("edge_label", [](const Partition& p, const std::string& a, const std::string& b) {
            return to_int(partition_edge_label(p, canonical_edge(a, b)));
        })
        .def("__len__", &Partition::size);

    py::class_<LabeledEdgeSet>(m, "LabeledEdgeSet")
        .def(py::init<std::string>(), py::arg("owner") = "")
        .def_property_readonly("owner", &LabeledEdgeSet::owner)
        .def("set", [](LabeledEdgeSet& s, const std::string& a, const std::string& b, int label) {
            s.set(a, b, to_label(label));
        })
        .def("get", [](const LabeledEdgeSet& s, const std::string& a, const std::string& b) {
            return to_int(s.get(canonical_edge(a, b)));
        })
        .def("items", [](const LabeledEdgeSet& s) {
            std::vector<std::tuple<std::string, std::string, int>> out;
            for (const auto& [e, l] : s) out.emplace_back(e.a(), e.b(), to_int(l));
            return out;
        })
        .def("__len__", &LabeledEdgeSet::size)
        .def("__eq__", [](const LabeledEdgeSet& a, const LabeledEdgeSet& b) { return a == b; });

    m.def("canonical_edge", [](const std::string& a, const std::string& b) {
        const auto e = canonical_edge(a, b);
        return std::make_pair(e.a(), e.b());
    });
    m.def("consistency", &consistency);
    m.def("read_partition", &read_partition);
    m.def("write_partition", &write_partition);
    m.def("read_edge_set", &read_edge_set);
    m.def("write_edge_set", &write_edge_set);
    m.def("format_edge_set", &format_edge_set);

    m.def(
        "sample_surface",
        [](const Array& vertices, const std::vector<std::array<std::uint32_t, 3>>& triangles, std::size_t n,
           std::uint64_t seed) {
            TriangleMesh mesh;
            mesh.vertices = to_cloud(vertices).points;
            mesh.triangles = triangles;
            return to_array(sample_surface(mesh, n, seed));
        },
        py::arg("vertices"), py::arg("triangles"), py::arg("n"), py::arg("seed"));
    m.def("load_obj", [](const std::filesystem::path& path) {
        const auto mesh = load_obj(path);
        return std::make_pair(to_array(PointCloud{mesh.vertices}), mesh.triangles);
    });
    m.def("minmax_normalize", [](const Array& a) { return to_array(minmax_normalize(to_cloud(a))); });
    m.def(
        "voxelize",
        [](const Array& a, std::uint32_t resolution) { return voxelize(to_cloud(a), resolution).cells(); },
        py::arg("points"), py::arg("resolution") = kDefaultVoxelResolution);

    m.def("chamfer", [](const Array& p, const Array& q) { return chamfer(to_cloud(p), to_cloud(q)); });
    m.def(
        "jaccard",
        [](const std::vector<VoxelGrid::Cell>& a, const std::vector<VoxelGrid::Cell>& b, std::uint32_t resolution) {
            return jaccard(to_grid(a, resolution), to_grid(b, resolution));
        },
        py::arg("a"), py::arg("b"), py::arg("resolution") = kDefaultVoxelResolution);
    m.def(
        "distance_matrix",
        [](const std::vector<ModelId>& ids, const std::vector<Array>& clouds, const std::string& metric,
           std::uint32_t resolution, unsigned threads) {
            if (ids.size() != clouds.size()) throw py::value_error("one cloud per id required");
            const auto kind = parse_metric(metric);
            std::vector<NamedShape> shapes;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                auto cloud = to_cloud(clouds[i]);
                if (kind == Metric::Jaccard)
                    shapes.push_back({ids[i], voxelize(cloud, resolution)});
                else
                    shapes.push_back({ids[i], std::move(cloud)});
            }
            DistanceOptions opts;
            opts.threads = threads;
            const auto d = distance_matrix(shapes, kind, opts);
            const auto n = static_cast<py::ssize_t>(d.size());
            Array out({n, n});
            std::copy(d.values().begin(), d.values().end(), out.mutable_data());
            return out;
        },
        py::arg("ids"), py::arg("clouds"), py::arg("metric") = "chamfer",
        py::arg("resolution") = kDefaultVoxelResolution, py::arg("threads") = 1);

    m.def(
        "kmeans",
        [](const std::vector<ModelId>& ids, const Array& x, std::size_t k, std::uint64_t seed,
           std::size_t max_iterations, unsigned threads) {
            if (x.ndim() != 2) throw py::value_error("expected an (n, d) array");
            FeatureMatrix f(ids, static_cast<std::size_t>(x.shape(1)),
                            std::vector<double>(x.data(), x.data() + x.size()));
            KMeansOptions opts;
            opts.max_iterations = max_iterations;
            opts.threads = threads;
            const auto r = kmeans_run(f, k, seed, opts);
            return py::make_tuple(r.partition, r.objective, r.converged);
        },
        py::arg("ids"), py::arg("features"), py::arg("k"), py::arg("seed"), py::arg("max_iterations") = 300,
        py::arg("threads") = 1);
    m.def(
        "capacity_split",
        [](const Array& x, const Partition& p, std::size_t capacity, std::uint64_t seed) {
            if (x.ndim() != 2) throw py::value_error("expected an (n, d) array");
            FeatureMatrix f(p.ids(), static_cast<std::size_t>(x.shape(1)),
                            std::vector<double>(x.data(), x.data() + x.size()));
            return capacity_split(f, p, capacity, seed).partition;
        },
        py::arg("features"), py::arg("partition"), py::arg("capacity") = kDefaultCapacity, py::arg("seed"));

    py::class_<ClusterAnnotation>(m, "ClusterAnnotation")
        .def(py::init<std::string, std::vector<ModelId>>(), py::arg("cluster_id"), py::arg("members"))
        .def_property_readonly("members", &ClusterAnnotation::members)
        .def_property_readonly("remaining", &ClusterAnnotation::remaining)
        .def_property_readonly("subclusters", &ClusterAnnotation::subclusters)
        .def_property_readonly("terminal", &ClusterAnnotation::terminal)
        .def("apply_round",
             [](const ClusterAnnotation& s, const std::vector<ModelId>& checked) { return apply_round(s, checked); })
        .def("derive_edges", [](const ClusterAnnotation& s) { return derive_edges(s); });

    m.def("majority_threshold", &majority_threshold);
    m.def("method_ensemble_label", [](const std::vector<Partition>& parts, const std::string& a, const std::string& b) {
        return to_int(method_ensemble_label(MethodEnsemble(parts), canonical_edge(a, b)));
    });
    m.def("human_ensemble_label", [](const std::vector<LabeledEdgeSet>& sets, const std::string& a,
                                     const std::string& b) {
        return to_int(human_ensemble_label(HumanEnsemble(sets), canonical_edge(a, b)));
    });
    m.def("human_ensemble_edges", [](const std::vector<LabeledEdgeSet>& sets) {
        return human_ensemble_edges(HumanEnsemble(sets));
    });

    m.def(
        "confusion",
        [](const Partition& pred, const Partition& ref) { return counts_dict(confusion(pred, ref)); },
        py::arg("pred"), py::arg("reference"));
    m.def(
        "confusion",
        [](const Partition& pred, const LabeledEdgeSet& ref) { return counts_dict(confusion(pred, ref)); },
        py::arg("pred"), py::arg("reference"));
    m.def(
        "balanced_accuracy",
        [](std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
            return balanced_accuracy(counts_from(tp, fp, tn, fn));
        },
        py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));
    m.def(
        "edge_accuracy",
        [](std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
            return edge_accuracy(counts_from(tp, fp, tn, fn));
        },
        py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));
    m.def(
        "silhouette",
        [](const Partition& p, const Array& dist) {
            const auto n = p.size();
            if (dist.ndim() != 2 || static_cast<std::size_t>(dist.shape(0)) != n ||
                static_cast<std::size_t>(dist.shape(1)) != n)
                throw py::value_error("distance matrix must be n x n in partition order");
            DistanceMatrix d(p.ids(), Metric::Chamfer);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) d.set_cell(i, j, dist.at(i, j));
            d.validate();
            const auto s = silhouette(p, d);
            return py::make_tuple(s.mean, s.per_object);
        },
        py::arg("partition"), py::arg("distances"));
}
