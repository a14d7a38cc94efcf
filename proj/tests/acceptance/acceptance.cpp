// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "cadclust/annotation.hpp"
#include "cadclust/clusterinit.hpp"
#include "cadclust/distances.hpp"
#include "cadclust/ensemble.hpp"
#include "cadclust/metrics.hpp"
#include "cadclust/random.hpp"
#include "cadclust/service.hpp"
#include "cadclust/text_io.hpp"

using namespace cadclust;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Records the first failure; later checks keep running for the detail line.
class Check {
public:
    void require(bool ok, const std::string& what) {
        if (!ok && pass_) {
            pass_ = false;
            first_ = what;
        }
    }
    Outcome done(std::string detail) const {
        return pass_ ? Outcome{true, std::move(detail)} : Outcome{false, first_ + "; " + detail};
    }

private:
    bool pass_ = true;
    std::string first_;
};

// Synthetic data comes from the library's portable RNG helpers so frozen
// counts do not depend on the standard library's distributions.
PointCloud cloud(rnd::Engine& rng, std::size_t n, double scale) {
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i)
        c.points.push_back({scale * rnd::uniform01(rng), scale * rnd::uniform01(rng), scale * rnd::uniform01(rng)});
    return c;
}

Outcome majority_threshold_rule() {
    Check c;
    const std::vector<ModelId> ids{"a", "b", "c"};
    const auto ab = canonical_edge("a", "b");
    std::size_t cases = 0;
    for (std::size_t n = 1; n <= 9; ++n)
        for (std::size_t v = 0; v <= n; ++v) {
            std::vector<Partition> parts;
            for (std::size_t i = 0; i < n; ++i)
                parts.emplace_back(ids, i < v ? std::vector<std::size_t>{0, 0, 1} : std::vector<std::size_t>{0, 1, 1});
            const auto want = v >= static_cast<std::size_t>(std::ceil((n + 1) / 2.0)) ? 1 : -1;
            c.require(to_int(method_ensemble_label(MethodEnsemble(parts), ab)) == want,
                      "N=" + std::to_string(n) + " v=" + std::to_string(v));
            ++cases;
        }
    return c.done(std::to_string(cases) + " (N, v) cases");
}

Outcome human_tie_rule() {
    Check c;
    const auto ab = canonical_edge("a", "b");
    std::size_t cases = 0;
    for (std::size_t voters = 1; voters <= 8; ++voters)
        for (std::size_t pos = 0; pos <= voters; ++pos)
            for (std::size_t neg = 0; pos + neg <= voters; ++neg) {
                std::vector<LabeledEdgeSet> sets(voters);
                for (std::size_t i = 0; i < pos; ++i) sets[i].set(ab, EdgeLabel::Similar);
                for (std::size_t i = pos; i < pos + neg; ++i) sets[i].set(ab, EdgeLabel::Dissimilar);
                const int want = pos == neg ? 0 : (pos > neg ? 1 : -1);
                c.require(to_int(human_ensemble_label(HumanEnsemble(sets), ab)) == want,
                          std::to_string(pos) + "+/" + std::to_string(neg) + "-");
                ++cases;
            }
    std::vector<LabeledEdgeSet> four_four(8);
    for (std::size_t i = 0; i < 8; ++i) four_four[i].set(ab, i < 4 ? EdgeLabel::Similar : EdgeLabel::Dissimilar);
    c.require(human_ensemble_label(HumanEnsemble(four_four), ab) == EdgeLabel::Unknown, "4-vs-4 tie");
    return c.done(std::to_string(cases) + " vote splits");
}

Outcome annotation_semantics() {
    Check c;
    const std::vector<ModelId> ids{"m5", "m2", "m4", "m0", "m3", "m1"};
    std::size_t traces = 0;
    std::size_t partitions = 0;
    for (std::size_t n = 1; n <= 6; ++n) {
        const std::vector<ModelId> members(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
        const auto all = oracle::set_partitions(n);
        partitions = all.size();
        for (const auto& block : all) {
            const std::size_t k = *std::max_element(block.begin(), block.end()) + 1;
            const auto expected = oracle::block_labels(members, block);
            std::vector<std::size_t> order(k);
            for (std::size_t i = 0; i < k; ++i) order[i] = i;
            do {
                ClusterAnnotation s("c", members);
                for (const auto b : order) {
                    if (s.terminal()) break;
                    std::vector<ModelId> checked;
                    for (std::size_t i = 0; i < n; ++i)
                        if (block[i] == b) checked.push_back(members[i]);
                    s = apply_round(s, checked);
                }
                const auto edges = derive_edges(s);
                c.require(edges.size() == n * (n - 1) / 2, "edge count");
                c.require(oracle::as_map(edges) == expected, "labels differ from block oracle");
                ++traces;
            } while (std::next_permutation(order.begin(), order.end()));
        }
    }
    c.require(partitions == 203, "Bell(6)");
    return c.done(std::to_string(partitions) + " partitions of 6, " + std::to_string(traces) + " traces");
}

Outcome capacity_pipeline() {
    Check c;
    std::size_t clusters = 0;
    std::size_t iterations = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        rnd::Engine rng(rnd::mix(seed + 1000));
        std::vector<ModelId> ids;
        std::vector<double> values;
        for (std::size_t i = 0; i < 500; ++i) {
            ids.push_back("f" + std::to_string(i));
            for (std::size_t k = 0; k < 8; ++k) values.push_back(rnd::uniform01(rng));
        }
        const FeatureMatrix f(ids, 8, values);
        const auto km = kmeans_run(f, 40, seed);
        for (std::size_t i = 1; i < km.objective.size(); ++i)
            c.require(km.objective[i] <= km.objective[i - 1], "objective increased, seed " + std::to_string(seed));
        iterations += km.iterations;
        const auto split = capacity_split(f, km.partition, 12, seed);
        for (const auto s : split.partition.cluster_sizes()) c.require(s <= 12, "cluster above capacity");
        c.require(std::set<ModelId>(split.partition.ids().begin(), split.partition.ids().end()) ==
                      std::set<ModelId>(ids.begin(), ids.end()),
                  "membership changed");
        clusters += split.partition.num_clusters();
    }
    return c.done("50 runs, " + std::to_string(clusters) + " output clusters, " + std::to_string(iterations) +
                  " Lloyd iterations");
}

Outcome chamfer_oracle() {
    Check c;
    rnd::Engine rng(20240501);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto p = cloud(rng, 1 + rnd::uniform_index(rng, 512), 1.0);
        const auto q = cloud(rng, 1 + rnd::uniform_index(rng, 512), t % 3 == 0 ? 5.0 : 1.0);
        const double fast = chamfer(p, q);
        const double slow = oracle::chamfer(p, q);
        const double rel = std::abs(fast - slow) / std::max(std::abs(slow), 1e-300);
        worst = std::max(worst, rel);
        c.require(rel <= 1e-9, "relative error " + std::to_string(rel));
        c.require(fast == chamfer(q, p), "asymmetric");
        c.require(chamfer(p, p) == 0.0, "chamfer(P,P) != 0");
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "100 pairs, max rel err %.2e", worst);
    return c.done(buf);
}

Outcome silhouette_oracle() {
    Check c;
    rnd::Engine rng(77);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 3 + rnd::uniform_index(rng, 58);
        const std::size_t k = 2 + rnd::uniform_index(rng, std::min<std::size_t>(8, n - 1));
        std::vector<ModelId> ids;
        std::vector<std::size_t> raw;
        std::vector<Vec3> pts;
        for (std::size_t i = 0; i < n; ++i) {
            ids.push_back("o" + std::to_string(i));
            raw.push_back(i < k ? i : rnd::uniform_index(rng, k));
            pts.push_back({rnd::uniform01(rng), rnd::uniform01(rng), rnd::uniform01(rng)});
        }
        // Force a singleton now and then.
        if (t % 5 == 0) raw[0] = k;
        const auto p = Partition::densify(ids, raw);
        const auto scaled = [&](double s) {
            DistanceMatrix d(ids, Metric::Chamfer);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) d.set(i, j, s * std::sqrt(oracle::sq(pts[i], pts[j])));
            return d;
        };
        const auto d = scaled(1.0);
        const auto got = silhouette(p, d);
        const auto want = oracle::silhouette(p.assignment(), d.values());
        const auto sizes = p.cluster_sizes();
        for (std::size_t i = 0; i < n; ++i) {
            worst = std::max(worst, std::abs(got.per_object[i] - want[i]));
            c.require(std::abs(got.per_object[i] - want[i]) <= 1e-12, "oracle mismatch");
            if (sizes[p.assignment()[i]] == 1) c.require(got.per_object[i] == 0.0, "singleton not 0");
        }
        for (const double s : {0.5, 3.0}) {
            const auto r = silhouette(p, scaled(s));
            for (std::size_t i = 0; i < n; ++i)
                c.require(std::abs(r.per_object[i] - got.per_object[i]) <= 1e-12, "scale variance");
            c.require(std::abs(r.mean - got.mean) <= 1e-12, "scale variance of mean");
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "50 instances, max abs err %.2e", worst);
    return c.done(buf);
}

Outcome metric_identities() {
    Check c;
    ConfusionCounts fixed;
    fixed.tp = 40;
    fixed.fn = 10;
    fixed.tn = 80;
    fixed.fp = 20;
    c.require(balanced_accuracy(fixed) == 0.8, "BA(40,10,80,20) != 0.8");
    rnd::Engine rng(9);
    for (int t = 0; t < 100; ++t) {
        const std::uint64_t per_class = 1 + rnd::uniform_index(rng, 5000);
        ConfusionCounts x;
        x.tp = rnd::uniform_index(rng, per_class + 1);
        x.fn = per_class - x.tp;
        x.tn = rnd::uniform_index(rng, per_class + 1);
        x.fp = per_class - x.tn;
        c.require(edge_accuracy(x) == balanced_accuracy(x), "EA != BA on a balanced reference");
    }
    return c.done("exact 0.8; 100 balanced confusions");
}

struct RecoveryStats {
    std::size_t better = 0;
    std::size_t ordered = 0;
};

RecoveryStats ensemble_recovery_run(std::size_t seeds) {
    constexpr std::size_t kNodes = 500, kClusters = 25, kCopies = 7;
    RecoveryStats stats;
    std::vector<ModelId> ids;
    for (std::size_t i = 0; i < kNodes; ++i) ids.push_back("n" + std::to_string(1000 + i));
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        rnd::Engine rng(rnd::mix(0xC1u + seed));
        std::vector<std::size_t> truth(kNodes);
        for (std::size_t i = 0; i < kNodes; ++i) truth[i] = i < kClusters ? i : rnd::uniform_index(rng, kClusters);
        const Partition planted(ids, truth);

        std::vector<Partition> copies;
        std::vector<std::string> names;
        for (std::size_t m = 0; m < kCopies; ++m) {
            const double p = 0.05 * static_cast<double>(m + 1);
            auto noisy = truth;
            for (auto& c : noisy)
                if (rnd::uniform01(rng) < p) c = rnd::uniform_index(rng, kClusters);
            copies.push_back(Partition::densify(ids, noisy));
            names.push_back("copy" + std::to_string(m));
        }
        const MethodEnsemble ensemble(copies, names);

        // Ensemble labels scored against the planted truth.
        ConfusionCounts ens;
        for (std::size_t i = 0; i < kNodes; ++i)
            for (std::size_t j = i + 1; j < kNodes; ++j) {
                const auto edge = canonical_edge(ids[i], ids[j]);
                ens.add(method_ensemble_label(ensemble, edge), partition_edge_label(planted, edge));
            }
        double mean_individual = 0.0;
        for (const auto& copy : copies) mean_individual += balanced_accuracy(confusion(copy, planted));
        mean_individual /= kCopies;
        stats.better += balanced_accuracy(ens) >= mean_individual;

        ScoreTable table;
        for (std::size_t m = 0; m < kCopies; ++m) table[names[m]][kNodes] = balanced_accuracy(confusion(copies[m], ensemble));
        const auto ranking = ranking_report(table).mean_over_k;
        stats.ordered += ranking == names;
    }
    return stats;
}

Outcome ensemble_recovery() {
    Check c;
    const auto s = ensemble_recovery_run(20);
    c.require(s.better >= 19, "ensemble beat the mean in only " + std::to_string(s.better) + "/20");
    c.require(s.ordered >= 18, "noise order recovered in only " + std::to_string(s.ordered) + "/20");
    return c.done("ensemble >= mean in " + std::to_string(s.better) + "/20, ranking == noise order in " +
                  std::to_string(s.ordered) + "/20");
}

Outcome jaccard_cases() {
    Check c;
    const VoxelGrid a(8, {{0, 0, 0}, {3, 4, 5}});
    const VoxelGrid disjoint(8, {{7, 7, 7}});
    const VoxelGrid half(8, {{0, 0, 0}});
    const VoxelGrid empty(8);
    c.require(jaccard(a, a) == 0.0, "identity");
    c.require(jaccard(a, disjoint) == 1.0, "disjoint");
    c.require(jaccard(half, a) == 0.5, "half overlap");
    c.require(jaccard(empty, empty) == 0.0, "both empty");
    c.require(jaccard(empty, a) == 1.0 && jaccard(a, empty) == 1.0, "one empty");
    return c.done("5 cases");
}

Outcome service_durability() {
    Check c;
    const auto dir = fs::temp_directory_path() / ("cadclust-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto clock = [] { return std::string("2024-01-01T00:00:00Z"); };

    {
        const auto log = dir / "golden.jsonl";
        AnnotationService svc(Partition({"a", "b", "c", "d"}, {0, 0, 0, 0}), {{"tok", "ann"}}, log, {}, clock);
        svc.submit_round("tok", 0, {"a", "b"});
        svc.submit_round("tok", 0, {"c", "d"});
        const auto edges = svc.export_edges("tok");
        const auto stats = label_stats(edges, 6);
        c.require(edges.size() == 6 && stats.positive == 2 && stats.negative == 4, "golden export shape");
        c.require(format_edge_set(edges) == "a\tb\t+1\na\tc\t-1\na\td\t-1\nb\tc\t-1\nb\td\t-1\nc\td\t+1\n",
                  "golden export text");
    }

    // Random multi-annotator logs replayed into fresh instances.
    std::size_t rounds = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        rnd::Engine rng(rnd::mix(seed + 7));
        std::vector<ModelId> ids;
        std::vector<std::size_t> clusters;
        for (std::size_t i = 0; i < 60; ++i) {
            ids.push_back("s" + std::to_string(i));
            clusters.push_back(rnd::uniform_index(rng, 8));
        }
        const auto tasks = Partition::densify(ids, clusters);
        const std::map<std::string, std::string> tokens{{"t1", "ann1"}, {"t2", "ann2"}, {"t3", "ann3"}};
        const auto log = dir / ("log" + std::to_string(seed) + ".jsonl");
        std::map<std::string, std::string> exported;
        {
            AnnotationService svc(tasks, tokens, log, {}, clock);
            for (const auto& [tok, name] : tokens)
                while (const auto task = svc.next_cluster(tok)) {
                    std::vector<ModelId> checked;
                    for (const auto& m : task->remaining)
                        if (rnd::uniform01(rng) < 0.6) checked.push_back(m);
                    svc.submit_round(tok, task->cluster_id, checked);
                    ++rounds;
                    if (rnd::uniform01(rng) < 0.5) break;  // interleave annotators
                }
            for (const auto& [tok, name] : tokens) {
                try {
                    exported[tok] = format_edge_set(svc.export_edges(tok));
                } catch (const ConflictError&) {
                    exported[tok] = "<none>";
                }
            }
        }
        AnnotationService fresh(tasks, tokens, log, {}, clock);
        for (const auto& [tok, text] : exported) {
            std::string again;
            try {
                again = format_edge_set(fresh.export_edges(tok));
            } catch (const ConflictError&) {
                again = "<none>";
            }
            c.require(again == text, "replayed export differs");
        }
    }
    fs::remove_all(dir);
    return c.done("golden 6-edge file; " + std::to_string(rounds) + " random rounds replayed");
}

struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
};

}  // namespace

// With arguments, runs only the named criteria (spaces written as dashes).
int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {"majority-vote threshold", 1, majority_threshold_rule},
        {"human tie rule", 1, human_tie_rule},
        {"annotation semantics", 10, annotation_semantics},
        {"capacity pipeline", 30, capacity_pipeline},
        {"chamfer oracle", 30, chamfer_oracle},
        {"silhouette oracle", 10, silhouette_oracle},
        {"metric identities", 1, metric_identities},
        {"ensemble recovery", 120, ensemble_recovery},
        {"jaccard cases", 1, jaccard_cases},
        {"service durability", 5, service_durability},
    };

    const auto slug = [](std::string name) {
        std::replace(name.begin(), name.end(), ' ', '-');
        return name;
    };
    std::vector<Criterion> criteria;
    for (const auto& crit : all) {
        bool wanted = argc < 2;
        for (int i = 1; i < argc; ++i) wanted = wanted || slug(crit.name) == argv[i];
        if (wanted) criteria.push_back(crit);
    }
    if (criteria.empty()) {
        std::fprintf(stderr, "no such criterion\n");
        return 2;
    }

    int failed = 0;
    for (const auto& crit : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = crit.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.pass && secs > crit.budget_seconds) {
            o.pass = false;
            o.detail += "; over time budget";
        }
        failed += !o.pass;
        std::printf("%s  %-26s %7.3fs / %gs  %s\n", o.pass ? "PASS" : "FAIL", crit.name, secs, crit.budget_seconds,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed;
}
