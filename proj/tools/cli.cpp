#include "cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "cadclust/clusterinit.hpp"
#include "cadclust/distances.hpp"
#include "cadclust/ensemble.hpp"
#include "cadclust/geometry.hpp"
#include "cadclust/http_server.hpp"
#include "cadclust/metrics.hpp"
#include "cadclust/random.hpp"
#include "cadclust/service.hpp"
#include "cadclust/text_io.hpp"

namespace cadclust::cli {

namespace fs = std::filesystem;

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void emit_rows(const std::vector<ScoreRow>& rows, const std::string& out_path, std::ostream& out) {
    const auto text = format_score_rows(rows);
    out << text;
    if (!out_path.empty()) text::write_file(out_path, text);
}

struct SampleArgs {
    std::string mesh, out;
    std::size_t n = 4096;
    std::uint64_t seed = 0;
    bool normalize = false;
};

int cmd_sample(const SampleArgs& a, std::ostream& out) {
    auto cloud = sample_surface(load_obj(a.mesh), a.n, a.seed);
    if (a.normalize) cloud = minmax_normalize(cloud);
    write_xyz(a.out, cloud);
    out << "wrote " << cloud.size() << " points to " << a.out << "\n";
    return kExitOk;
}

struct InitArgs {
    std::string features, out;
    std::size_t k = 2000;
    std::size_t capacity = kDefaultCapacity;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 300;
};

int cmd_init(const InitArgs& a, unsigned threads, std::ostream& out) {
    const auto features = read_features(a.features);
    KMeansOptions opts;
    opts.max_iterations = a.max_iterations;
    opts.threads = threads;
    const auto coarse = kmeans_run(features, a.k, a.seed, opts);
    const auto init = capacity_split(features, coarse.partition, a.capacity, rnd::mix(a.seed), opts);
    write_partition(a.out, init.partition);
    std::size_t largest = 0;
    for (const auto s : init.partition.cluster_sizes()) largest = std::max(largest, s);
    out << "kmeans: " << coarse.partition.num_clusters() << " clusters, " << coarse.iterations << " iterations"
        << (coarse.converged ? "" : " (not converged)") << "\n"
        << "capacity split: " << init.partition.num_clusters() << " clusters, largest " << largest << "\n";
    return kExitOk;
}

struct ServeArgs {
    std::string config;
    std::string bind;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
    auto config = load_service_config(a.config);
    if (!a.bind.empty()) {
        const auto colon = a.bind.rfind(':');
        std::uint64_t port = 0;
        if (colon == std::string::npos || !text::parse_u64(std::string_view(a.bind).substr(colon + 1), port) ||
            port > 65535)
            throw Error("--bind must be host:port");
        config.host = a.bind.substr(0, colon);
        config.port = static_cast<int>(port);
    }
    auto service = AnnotationService::from_config(config);

    // Workers inherit the blocked mask; the main thread waits for the signal.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    HttpServer server(*service);
    const int port = server.start(config.host, config.port);
    out << "serving " << service->num_tasks() << " clusters on http://" << config.host << ":" << port << "\n"
        << std::flush;
    int sig = 0;
    sigwait(&stop_signals, &sig);
    server.stop();
    out << "stopped\n";
    return kExitOk;
}

struct EvaluateArgs {
    std::string partition;
    std::vector<std::string> human;
    std::string human_manifest;
    std::string ensemble;
    bool loo = false;
    std::string method;
    std::optional<std::size_t> k;
    std::string out;
};

int cmd_evaluate(const EvaluateArgs& a, unsigned threads, std::ostream& out) {
    const auto pred = read_partition(a.partition);
    const std::string method = a.method.empty() ? fs::path(a.partition).stem().string() : a.method;
    const std::size_t k = a.k.value_or(pred.num_clusters());

    std::vector<ScoreRow> rows;
    std::optional<double> ba_human, ba_ensemble;

    if (!a.human.empty() || !a.human_manifest.empty()) {
        std::vector<LabeledEdgeSet> sets;
        for (const auto& path : a.human) sets.push_back(read_edge_set(path));
        if (!a.human_manifest.empty())
            for (auto& s : load_human_ensemble(a.human_manifest).edge_sets()) sets.push_back(s);
        const HumanEnsemble human(std::move(sets));
        const auto c = confusion(pred, human);
        ba_human = balanced_accuracy(c);
        rows.push_back({method, k, "ba_human", *ba_human});
        rows.push_back({method, k, "edge_acc_human", edge_accuracy(c)});
    }

    if (!a.ensemble.empty()) {
        const auto ensemble = load_method_ensemble(a.ensemble);
        std::optional<std::size_t> exclude;
        if (a.loo) {
            const auto& names = ensemble.names();
            const auto it = std::find(names.begin(), names.end(), method);
            if (it == names.end()) throw Error("--loo: " + method + " is not a member of the ensemble");
            exclude = static_cast<std::size_t>(it - names.begin());
        }
        const auto c = confusion(pred, ensemble, exclude, threads);
        ba_ensemble = balanced_accuracy(c);
        rows.push_back({method, k, "ba_ensemble", *ba_ensemble});
        rows.push_back({method, k, "edge_acc_ensemble", edge_accuracy(c)});
    }

    if (ba_human && ba_ensemble)
        rows.push_back({method, k, "ensemble_human", ensemble_human_score(*ba_ensemble, *ba_human)});
    if (rows.empty()) throw CLI::ValidationError("evaluate", "give --human, --human-manifest or --ensemble");
    emit_rows(rows, a.out, out);
    return kExitOk;
}

struct SilhouetteArgs {
    std::string partition;
    std::string dmat;
    std::string shapes;
    std::string metric = "chamfer";
    std::uint32_t resolution = kDefaultVoxelResolution;
    std::string cache;
    std::string save_dmat;
    std::string per_object;
    std::string method;
    std::optional<std::size_t> k;
    std::string out;
};

int cmd_silhouette(const SilhouetteArgs& a, unsigned threads, std::ostream& out) {
    const auto p = read_partition(a.partition);
    DistanceMatrix d;
    if (!a.dmat.empty()) {
        d = read_distance_matrix(a.dmat);
    } else {
        const auto metric = parse_metric(a.metric);
        std::vector<NamedShape> shapes;
        shapes.reserve(p.size());
        for (const auto& id : p.ids()) {
            const auto cloud = minmax_normalize(read_xyz(fs::path(a.shapes) / (id + ".xyz")));
            if (metric == Metric::Jaccard)
                shapes.push_back({id, voxelize(cloud, a.resolution)});
            else
                shapes.push_back({id, cloud});
        }
        DistanceOptions opts;
        opts.threads = threads;
        if (!a.cache.empty()) opts.cache_dir = fs::path(a.cache);
        d = distance_matrix(shapes, metric, opts);
        if (!a.save_dmat.empty()) write_distance_matrix(a.save_dmat, d);
    }

    const auto s = silhouette(p, d, threads);
    if (!a.per_object.empty()) {
        std::string text;
        for (std::size_t i = 0; i < s.ids.size(); ++i) text += s.ids[i] + "\t" + text::format_g(s.per_object[i], 17) + "\n";
        text::write_file(a.per_object, text);
    }
    const std::string method = a.method.empty() ? fs::path(a.partition).stem().string() : a.method;
    const std::vector<ScoreRow> rows{
        {method, a.k.value_or(p.num_clusters()), "silhouette_" + std::string(metric_name(d.metric())), s.mean}};
    emit_rows(rows, a.out, out);
    return kExitOk;
}

struct EnsembleArgs {
    std::string manifest;
    std::vector<std::string> edge;
    std::string out;
};

int cmd_ensemble(const EnsembleArgs& a, std::ostream& out) {
    const auto e = load_method_ensemble(a.manifest);
    const std::size_t threshold = majority_threshold(e.size());
    if (!a.edge.empty()) {
        if (a.edge.size() != 2) throw CLI::ValidationError("--edge", "expects two model ids");
        const auto key = canonical_edge(a.edge[0], a.edge[1]);
        const auto votes = e.positive_votes(key);
        out << key.a() << "\t" << key.b() << "\t" << votes << "/" << e.size() << "\t"
            << (to_int(method_ensemble_label(e, key)) > 0 ? "+1" : "-1") << "\n";
        return kExitOk;
    }

    const auto& votes = e.aligned_assignments();
    const std::size_t n = e.ids().size();
    std::uint64_t positive = 0;
    std::uint64_t unanimous = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            std::size_t v = 0;
            for (const auto& row : votes) v += row[i] == row[j];
            positive += v >= threshold;
            unanimous += v == 0 || v == e.size();
        }
    const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    out << "partitions\t" << e.size() << "\n"
        << "models\t" << n << "\n"
        << "threshold\t" << threshold << "\n"
        << "pairs\t" << pairs << "\n"
        << "positive_edges\t" << positive << "\n"
        << "unanimous_pairs\t" << unanimous << "\n";
    for (std::size_t m = 0; m < e.size(); ++m)
        out << "member\t" << e.names()[m] << "\t" << e.partitions()[m].num_clusters() << " clusters\n";
    return kExitOk;
}

struct ReportArgs {
    std::vector<std::string> scores;
    std::vector<std::string> index;
    std::vector<std::size_t> k_grid;
    bool default_grid = false;
    std::string out;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
    std::vector<ScoreRow> rows;
    for (const auto& path : a.scores) {
        auto more = parse_score_rows(text::read_file(path), path);
        rows.insert(rows.end(), more.begin(), more.end());
    }
    std::vector<std::string> indices = a.index;
    if (indices.empty()) {
        std::set<std::string> seen;
        for (const auto& r : rows)
            if (seen.insert(r.index).second) indices.push_back(r.index);
    }
    if (indices.empty()) throw Error("no score rows in the given files");

    std::string text;
    for (const auto& index : indices) {
        auto table = score_table(rows, index);
        if (table.empty()) throw Error("no rows for index " + index);
        if (a.default_grid) table = restrict_to_grid(table, kDefaultKGrid);
        if (!a.k_grid.empty()) table = restrict_to_grid(table, a.k_grid);
        text += format_ranking(ranking_report(table), index);
    }
    out << text;
    if (!a.out.empty()) text::write_file(a.out, text);
    return kExitOk;
}

struct ConsistencyArgs {
    std::string a, b;
};

int cmd_consistency(const ConsistencyArgs& a, std::ostream& out, std::ostream& err) {
    const auto value = consistency(read_edge_set(a.a), read_edge_set(a.b));
    if (!value) {
        err << "cadclust: consistency undefined: the edge sets share no edges\n";
        return kExitData;
    }
    out << fixed6(*value) << "\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Clustering evaluation and annotation toolkit for 3D CAD collections", "cadclust"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 1;
    app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();

    SampleArgs sample;
    auto* s = app.add_subcommand("sample", "Sample a point cloud from an OBJ mesh surface");
    s->add_option("--mesh", sample.mesh, "Triangle mesh (.obj)")->required()->check(CLI::ExistingFile);
    s->add_option("--n", sample.n, "Number of points")->capture_default_str()->check(CLI::PositiveNumber);
    s->add_option("--seed", sample.seed, "Random seed")->required();
    s->add_option("--out", sample.out, "Output .xyz")->required();
    s->add_flag("--normalize", sample.normalize, "Min-max normalize to the unit cube");

    InitArgs init;
    auto* i = app.add_subcommand("init", "KMeans plus capacity split into annotation clusters");
    i->add_option("--features", init.features, "Feature file")->required()->check(CLI::ExistingFile);
    i->add_option("--k", init.k, "KMeans clusters")->capture_default_str()->check(CLI::PositiveNumber);
    i->add_option("--capacity", init.capacity, "Maximum cluster size")->capture_default_str()->check(CLI::PositiveNumber);
    i->add_option("--seed", init.seed, "Random seed")->required();
    i->add_option("--max-iter", init.max_iterations, "Lloyd iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
    i->add_option("--out", init.out, "Output partition TSV")->required();

    ServeArgs serve;
    auto* sv = app.add_subcommand("serve", "Run the annotation service");
    sv->add_option("--config", serve.config, "Service config (JSON)")->required()->check(CLI::ExistingFile);
    sv->add_option("--bind", serve.bind, "Override host:port");

    EvaluateArgs eval;
    auto* ev = app.add_subcommand("evaluate", "Balanced and edge accuracy against human and/or ensemble references");
    ev->add_option("--partition", eval.partition, "Method partition TSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--human", eval.human, "Annotator edge file(s)")->check(CLI::ExistingFile);
    ev->add_option("--human-manifest", eval.human_manifest, "Manifest of annotator edge files")->check(CLI::ExistingFile);
    ev->add_option("--ensemble", eval.ensemble, "Manifest of method partitions")->check(CLI::ExistingFile);
    ev->add_flag("--loo", eval.loo, "Leave the evaluated method out of the ensemble");
    ev->add_option("--method", eval.method, "Method name (default: partition file stem)");
    ev->add_option("--k", eval.k, "K recorded in the rows (default: cluster count)");
    ev->add_option("--out", eval.out, "Also write rows to this TSV");

    SilhouetteArgs sil;
    auto* si = app.add_subcommand("silhouette", "Mean silhouette over a distance matrix");
    si->add_option("--partition", sil.partition, "Partition TSV")->required()->check(CLI::ExistingFile);
    auto* dmat = si->add_option("--dmat", sil.dmat, "Precomputed distance matrix")->check(CLI::ExistingFile);
    auto* shapes = si->add_option("--shapes", sil.shapes, "Directory of <id>.xyz clouds")->check(CLI::ExistingDirectory);
    dmat->excludes(shapes);
    si->add_option("--metric", sil.metric, "chamfer or jaccard")
        ->capture_default_str()
        ->check(CLI::IsMember({"chamfer", "jaccard"}));
    si->add_option("--resolution", sil.resolution, "Voxel grid resolution")->capture_default_str()->check(CLI::PositiveNumber);
    si->add_option("--cache", sil.cache, "Distance cache directory");
    si->add_option("--save-dmat", sil.save_dmat, "Write the computed matrix");
    si->add_option("--per-object", sil.per_object, "Write per-object scores");
    si->add_option("--method", sil.method, "Method name (default: partition file stem)");
    si->add_option("--k", sil.k, "K recorded in the row (default: cluster count)");
    si->add_option("--out", sil.out, "Also write the row to this TSV");

    EnsembleArgs ens;
    auto* en = app.add_subcommand("ensemble", "Summarize or query a method ensemble");
    en->add_option("--manifest", ens.manifest, "Manifest of method partitions")->required()->check(CLI::ExistingFile);
    en->add_option("--edge", ens.edge, "Query one pair: --edge <id> <id>")->expected(2);

    ReportArgs rep;
    auto* rp = app.add_subcommand("report", "Rank methods from score TSVs");
    rp->add_option("--scores", rep.scores, "Score TSV file(s)")->required()->check(CLI::ExistingFile);
    rp->add_option("--index", rep.index, "Index to rank (default: every index present)");
    auto* grid = rp->add_option("--k-grid", rep.k_grid, "Rank over these K values only")->delimiter(',');
    rp->add_flag("--default-grid", rep.default_grid, "Rank over K = 32,64,...,1024,2000")->excludes(grid);
    rp->add_option("--out", rep.out, "Also write the summary here");

    ConsistencyArgs con;
    auto* co = app.add_subcommand("consistency", "Agreement of two edge files on their shared edges");
    co->add_option("a", con.a, "First edge file")->required()->check(CLI::ExistingFile);
    co->add_option("b", con.b, "Second edge file")->required()->check(CLI::ExistingFile);

    std::vector<const char*> argv{"cadclust"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (s->parsed()) return cmd_sample(sample, out);
        if (i->parsed()) return cmd_init(init, threads, out);
        if (sv->parsed()) return cmd_serve(serve, out);
        if (ev->parsed()) return cmd_evaluate(eval, threads, out);
        if (si->parsed()) {
            if (sil.dmat.empty() && sil.shapes.empty()) throw CLI::ValidationError("silhouette", "give --dmat or --shapes");
            return cmd_silhouette(sil, threads, out);
        }
        if (en->parsed()) return cmd_ensemble(ens, out);
        if (rp->parsed()) return cmd_report(rep, out);
        if (co->parsed()) return cmd_consistency(con, out, err);
    } catch (const CLI::ValidationError& e) {
        err << "cadclust: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "cadclust: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace cadclust::cli
