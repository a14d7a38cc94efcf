#include <doctest.h>

#include <httplib.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "cadclust/http_server.hpp"
#include "cadclust/service.hpp"
#include "cadclust/text_io.hpp"

using namespace cadclust;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::map<std::string, std::string> kTokens{{"tok-ann", "ann"}, {"tok-bob", "bob"}};

std::string fixed_clock() { return "2024-01-01T00:00:00Z"; }

struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name)
        : dir(fs::temp_directory_path() / ("cadclust-svc-" + name + "-" + std::to_string(::getpid()))) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    fs::path log() const { return dir / "rounds.jsonl"; }
};

// Cluster 0 = {a,b,c,d}, cluster 1 = {e,f,g}, cluster 2 = {h} (not a task), cluster 3 = {i,j}.
Partition tasks() {
    return Partition({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"}, {0, 0, 0, 0, 1, 1, 1, 2, 3, 3});
}

std::unique_ptr<AnnotationService> open(const Scratch& s, const fs::path& previews = {}) {
    return std::make_unique<AnnotationService>(tasks(), kTokens, s.log(), previews, fixed_clock);
}

std::size_t line_count(const fs::path& p) {
    const auto text = text::read_file(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const char* kGoldenEdges =
    "a\tb\t+1\n"
    "a\tc\t-1\n"
    "a\td\t-1\n"
    "b\tc\t-1\n"
    "b\td\t-1\n"
    "c\td\t+1\n";

const char* kGoldenLog =
    R"({"annotator":"ann","cluster":0,"round":0,"checked":["a","b"],"ts":"2024-01-01T00:00:00Z"})"
    "\n"
    R"({"annotator":"ann","cluster":0,"round":1,"checked":["c","d"],"ts":"2024-01-01T00:00:00Z"})"
    "\n";

}  // namespace

TEST_CASE("round records round trip") {
    const RoundRecord r{"ann", 3, 1, {"x", "y"}, "2024-01-01T00:00:00Z"};
    const auto line = format_round_record(r);
    CHECK(line == R"({"annotator":"ann","cluster":3,"round":1,"checked":["x","y"],"ts":"2024-01-01T00:00:00Z"})");
    const auto back = parse_round_record(line);
    CHECK(back.annotator == "ann");
    CHECK(back.cluster == 3);
    CHECK(back.checked == r.checked);
    CHECK_THROWS_AS(parse_round_record("{\"annotator\":1}"), Error);
    CHECK(iso8601_now().size() == 20);
}

TEST_CASE("golden transcript for a four-member split") {
    Scratch s("golden");
    auto svc = open(s);
    CHECK(svc->num_tasks() == 3);

    const auto task = svc->next_cluster("tok-ann");
    REQUIRE(task);
    CHECK(task->cluster_id == 0);
    CHECK(task->members == std::vector<ModelId>{"a", "b", "c", "d"});
    CHECK(task->remaining == task->members);
    CHECK(task->round == 0);
    CHECK_THROWS_AS(svc->export_edges("tok-ann"), ConflictError);

    auto r = svc->submit_round("tok-ann", 0, {"a", "b"});
    CHECK(r.remaining == std::vector<ModelId>{"c", "d"});
    CHECK_FALSE(r.terminal);
    CHECK(svc->next_cluster("tok-ann")->remaining == std::vector<ModelId>{"c", "d"});

    r = svc->submit_round("tok-ann", 0, {"c", "d"});
    CHECK(r.terminal);
    CHECK(r.remaining.empty());

    const auto edges = svc->export_edges("tok-ann");
    CHECK(format_edge_set(edges) == kGoldenEdges);
    CHECK(text::read_file(s.log()) == kGoldenLog);
    CHECK(svc->next_cluster("tok-ann")->cluster_id == 1);
    // The other annotator is untouched.
    CHECK(svc->next_cluster("tok-bob")->cluster_id == 0);
}

TEST_CASE("replay reproduces exports bit-exactly") {
    Scratch s("replay");
    std::string before_ann, before_bob;
    {
        auto svc = open(s);
        svc->submit_round("tok-ann", 0, {"a", "b"});
        svc->submit_round("tok-ann", 0, {"c", "d"});
        svc->submit_round("tok-ann", 1, {});
        svc->submit_round("tok-bob", 3, {"j", "i"});
        svc->submit_round("tok-bob", 0, {"d"});
        before_ann = format_edge_set(svc->export_edges("tok-ann"));
        before_bob = format_edge_set(svc->export_edges("tok-bob"));
    }
    auto again = open(s);
    CHECK(format_edge_set(again->export_edges("tok-ann")) == before_ann);
    CHECK(format_edge_set(again->export_edges("tok-bob")) == before_bob);
    const auto t = again->next_cluster("tok-bob");
    REQUIRE(t);
    CHECK(t->cluster_id == 0);
    CHECK(t->remaining == std::vector<ModelId>{"a", "b", "c"});
    CHECK(t->round == 1);

    // Two clusters of sizes 3 and 2: 3 + 1 edges, plus the 4-member cluster.
    CHECK(again->export_edges("tok-ann").size() == 6 + 3);
}

TEST_CASE("torn final log line is ignored, corrupt lines are errors") {
    Scratch s("torn");
    {
        auto svc = open(s);
        svc->submit_round("tok-ann", 0, {"a", "b"});
    }
    {
        std::ofstream f(s.log(), std::ios::app);
        f << R"({"annotator":"ann","cluster":0,"round":1,"chec)";
    }
    {
        auto svc = open(s);
        CHECK(svc->next_cluster("tok-ann")->round == 1);
    }
    text::write_file(s.log(), "not json\n");
    CHECK_THROWS_AS(open(s), ParseError);
    text::write_file(s.log(), R"({"annotator":"ann","cluster":0,"round":5,"checked":[],"ts":""})"
                              "\n");
    CHECK_THROWS_AS(open(s), ParseError);
}

TEST_CASE("submission errors") {
    Scratch s("errors");
    auto svc = open(s);
    CHECK_THROWS_AS(svc->next_cluster("nope"), AuthError);
    CHECK_THROWS_AS(svc->submit_round("nope", 0, {"a"}), AuthError);
    CHECK_THROWS_AS(svc->submit_round("tok-ann", 2, {"h"}), NotFoundError);
    CHECK_THROWS_AS(svc->submit_round("tok-ann", 99, {"a"}), NotFoundError);
    try {
        svc->submit_round("tok-ann", 0, {"a", "e", "zz"});
        FAIL("expected a conflict");
    } catch (const ConflictError& e) {
        CHECK(e.offending() == std::vector<ModelId>{"e", "zz"});
    }
    svc->submit_round("tok-ann", 3, {"i", "j"});
    CHECK_THROWS_AS(svc->submit_round("tok-ann", 3, {}), ConflictError);
    CHECK(line_count(s.log()) == 1);
}

TEST_CASE("retries carrying the round index are de-duplicated") {
    Scratch s("dedupe");
    auto svc = open(s);
    const auto first = svc->submit_round("tok-ann", 0, {"a", "b"}, 0);
    const auto retry = svc->submit_round("tok-ann", 0, {"a", "b"}, 0);
    CHECK(retry.remaining == first.remaining);
    CHECK(retry.round == 1);
    CHECK(line_count(s.log()) == 1);
    CHECK_THROWS_AS(svc->submit_round("tok-ann", 0, {"c"}, 0), ConflictError);
    CHECK_THROWS_AS(svc->submit_round("tok-ann", 0, {"c"}, 7), ConflictError);

    // Retry of the final round of a finished cluster.
    svc->submit_round("tok-ann", 0, {"c", "d"}, 1);
    CHECK(svc->submit_round("tok-ann", 0, {"c", "d"}, 1).terminal);
    CHECK(line_count(s.log()) == 2);
}

TEST_CASE("progress counts and consistency") {
    Scratch s("progress");
    auto svc = open(s);
    auto p = svc->progress();
    REQUIRE(p.annotators.size() == 2);
    CHECK(p.annotators[0].annotator == "ann");
    CHECK(p.annotators[0].completed == 0);
    CHECK(p.annotators[0].total == 3);
    CHECK(p.annotators[0].edges_labeled == 0);
    REQUIRE(p.consistency.size() == 1);
    CHECK_FALSE(p.consistency[0].value);

    for (const auto* tok : {"tok-ann", "tok-bob"}) {
        svc->submit_round(tok, 0, {"a", "b"});
        svc->submit_round(tok, 0, {"c", "d"});
    }
    p = svc->progress();
    CHECK(p.annotators[1].completed == 1);
    CHECK(p.annotators[1].edges_labeled == 6);
    CHECK(p.consistency[0].value == 1.0);
}

TEST_CASE("a completed twelve-member cluster counts 66 edges") {
    Scratch s("twelve");
    std::vector<ModelId> ids;
    for (int i = 0; i < 12; ++i) ids.push_back("m" + std::to_string(10 + i));
    AnnotationService svc(Partition(ids, std::vector<std::size_t>(12, 0)), {{"t", "solo"}}, s.log(), {}, fixed_clock);
    svc.submit_round("t", 0, {"m10", "m11"});
    svc.submit_round("t", 0, {});
    const auto p = svc.progress();
    CHECK(p.annotators[0].edges_labeled == 66);
    CHECK(svc.export_edges("t").size() == 66);
    CHECK_FALSE(svc.next_cluster("t"));
}

TEST_CASE("concurrent annotators stay isolated and the log replays") {
    Scratch s("concurrent");
    std::vector<ModelId> ids;
    std::vector<std::size_t> clusters;
    for (std::size_t c = 0; c < 40; ++c)
        for (std::size_t m = 0; m < 4; ++m) {
            ids.push_back("c" + std::to_string(c) + "m" + std::to_string(m));
            clusters.push_back(c);
        }
    std::map<std::string, std::string> tokens;
    for (int a = 0; a < 4; ++a) tokens["t" + std::to_string(a)] = "ann" + std::to_string(a);
    std::vector<std::string> exports;
    {
        AnnotationService svc(Partition(ids, clusters), tokens, s.log(), {}, fixed_clock);
        std::vector<std::thread> workers;
        for (int a = 0; a < 4; ++a)
            workers.emplace_back([&, a] {
                const std::string tok = "t" + std::to_string(a);
                while (const auto task = svc.next_cluster(tok)) {
                    // Annotator a peels the first (a % 3) + 1 models, then confirms the rest.
                    const auto& rem = task->remaining;
                    const std::size_t take = std::min<std::size_t>(rem.size(), static_cast<std::size_t>(a % 3 + 1));
                    svc.submit_round(tok, task->cluster_id, std::vector<ModelId>(rem.begin(), rem.begin() + take));
                    if (const auto t = svc.next_cluster(tok); t && t->cluster_id == task->cluster_id)
                        svc.submit_round(tok, t->cluster_id, t->remaining);
                }
            });
        for (auto& w : workers) w.join();
        for (int a = 0; a < 4; ++a) exports.push_back(format_edge_set(svc.export_edges("t" + std::to_string(a))));
        for (const auto& pa : svc.progress().annotators) CHECK(pa.completed == 40);
    }
    AnnotationService replayed(Partition(ids, clusters), tokens, s.log(), {}, fixed_clock);
    for (int a = 0; a < 4; ++a) CHECK(format_edge_set(replayed.export_edges("t" + std::to_string(a))) == exports[a]);
    CHECK(exports[0] != exports[1]);
}

TEST_CASE("preview paths are confined to known models") {
    Scratch s("preview");
    fs::create_directories(s.dir / "previews");
    text::write_file(s.dir / "previews" / "a.xyz", "0 0 0\n");
    auto svc = open(s, s.dir / "previews");
    CHECK(svc->preview_path("a") == s.dir / "previews" / "a.xyz");
    CHECK_THROWS_AS(svc->preview_path("b"), NotFoundError);
    CHECK_THROWS_AS(svc->preview_path("../rounds"), NotFoundError);
    CHECK_THROWS_AS(svc->preview_path("zz"), NotFoundError);
}

TEST_CASE("config file") {
    Scratch s("config");
    text::write_file(s.dir / "tasks.tsv", "a\t0\nb\t0\n");
    text::write_file(s.dir / "service.json", R"({"task_file": "tasks.tsv", "log_path": "log/rounds.jsonl",
        "preview_dir": "xyz", "annotators": {"secret": "ann"}, "bind": "0.0.0.0:9123"})");
    const auto cfg = load_service_config(s.dir / "service.json");
    CHECK(cfg.task_file == s.dir / "tasks.tsv");
    CHECK(cfg.log_path == s.dir / "log" / "rounds.jsonl");
    CHECK(cfg.host == "0.0.0.0");
    CHECK(cfg.port == 9123);
    CHECK(cfg.tokens.at("secret") == "ann");
    text::write_file(s.dir / "bad.json", R"({"task_file": "t", "log_path": "l", "annotators": {}})");
    CHECK_THROWS_AS(load_service_config(s.dir / "bad.json"), ParseError);
    text::write_file(s.dir / "bad.json", R"({"task_file": "t"})");
    CHECK_THROWS_AS(load_service_config(s.dir / "bad.json"), ParseError);
}

TEST_CASE("HTTP API golden transcript") {
    Scratch s("http");
    fs::create_directories(s.dir / "previews");
    text::write_file(s.dir / "previews" / "a.xyz", "0 0 0\n1 1 1\n");
    auto svc = open(s, s.dir / "previews");
    HttpServer server(*svc);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client cli("127.0.0.1", port);

    auto res = cli.Get("/api/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["status"] == "ok");

    res = cli.Get("/api/clusters/next?annotator=tok-ann");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto body = json::parse(res->body);
    CHECK(body["cluster_id"] == 0);
    CHECK(body["remaining"] == json({"a", "b", "c", "d"}));
    CHECK(body["previews"][0] == "/api/preview/a.xyz");

    res = cli.Get("/api/clusters/next?annotator=bad");
    CHECK(res->status == 403);
    res = cli.Get("/api/clusters/next");
    CHECK(res->status == 403);

    res = cli.Post("/api/clusters/0/rounds", R"({"annotator":"tok-ann","checked":["a","x"]})", "application/json");
    CHECK(res->status == 409);
    CHECK(json::parse(res->body)["offending"] == json({"x"}));

    res = cli.Post("/api/clusters/0/rounds", R"({"annotator":"tok-ann","checked":["a","b"],"round":0})",
                   "application/json");
    CHECK(res->status == 200);
    body = json::parse(res->body);
    CHECK(body["remaining"] == json({"c", "d"}));
    CHECK(body["terminal"] == false);

    // Double submit of the same round.
    res = cli.Post("/api/clusters/0/rounds", R"({"annotator":"tok-ann","checked":["a","b"],"round":0})",
                   "application/json");
    CHECK(res->status == 200);
    CHECK(line_count(s.log()) == 1);

    res = cli.Get("/api/export?annotator=tok-ann");
    CHECK(res->status == 409);

    res = cli.Post("/api/clusters/0/rounds", R"({"annotator":"tok-ann","checked":["c","d"]})", "application/json");
    CHECK(json::parse(res->body)["terminal"] == true);

    res = cli.Get("/api/export?annotator=tok-ann");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == kGoldenEdges);
    CHECK(res->get_header_value("Content-Disposition").find("attachment") != std::string::npos);

    res = cli.Post("/api/clusters/2/rounds", R"({"annotator":"tok-ann","checked":[]})", "application/json");
    CHECK(res->status == 404);
    res = cli.Post("/api/clusters/1/rounds", "not json", "application/json");
    CHECK(res->status == 400);
    res = cli.Post("/api/clusters/1/rounds", R"({"annotator":"tok-ann"})", "application/json");
    CHECK(res->status == 400);

    res = cli.Get("/api/progress");
    body = json::parse(res->body);
    CHECK(body["annotators"][0]["completed"] == 1);
    CHECK(body["annotators"][0]["edges_labeled"] == 6);
    CHECK(body["consistency"][0]["value"].is_null());

    res = cli.Get("/api/preview/a.xyz");
    CHECK(res->status == 200);
    CHECK(res->body == "0 0 0\n1 1 1\n");
    res = cli.Get("/api/preview/b.xyz");
    CHECK(res->status == 404);

    cli.Post("/api/clusters/1/rounds", R"({"annotator":"tok-ann","checked":[]})", "application/json");
    cli.Post("/api/clusters/3/rounds", R"({"annotator":"tok-ann","checked":["i","j"]})", "application/json");
    res = cli.Get("/api/clusters/next?annotator=tok-ann");
    CHECK(res->status == 204);
    server.stop();

    CHECK(text::read_file(s.log()).rfind(kGoldenLog, 0) == 0);
}
