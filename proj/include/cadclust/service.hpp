#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cadclust/annotation.hpp"
#include "cadclust/error.hpp"
#include "cadclust/simgraph.hpp"

namespace cadclust {

/// Unknown or missing annotator token.
class AuthError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// A request that conflicts with the session state. `offending` lists model
/// ids that are not in the remaining set, when that is the cause.
class ConflictError : public Error {
public:
    explicit ConflictError(const std::string& what, std::vector<ModelId> offending = {})
        : Error(what), offending_(std::move(offending)) {}
    const std::vector<ModelId>& offending() const noexcept { return offending_; }

private:
    std::vector<ModelId> offending_;
};

struct ServiceConfig {
    std::filesystem::path task_file;    ///< partition TSV of the initial clusters
    std::filesystem::path log_path;     ///< append-only round log (JSON lines)
    std::filesystem::path preview_dir;  ///< `<model_id>.xyz` files; may be empty
    std::map<std::string, std::string> tokens;  ///< token -> annotator name
    std::string host = "127.0.0.1";
    int port = 8080;
};

/// JSON config with keys `task_file`, `log_path`, `preview_dir`,
/// `annotators` (object token -> name) and `bind` ("host:port").
/// Relative paths are resolved against the config file's directory.
ServiceConfig load_service_config(const std::filesystem::path& path);

struct AnnotationTask {
    std::size_t cluster_id = 0;
    std::vector<ModelId> members;
    std::vector<ModelId> remaining;
    std::size_t round = 0;  ///< index the next submission will get
};

struct RoundResult {
    std::vector<ModelId> remaining;
    bool terminal = false;
    std::size_t round = 0;  ///< index the next submission will get
};

struct AnnotatorProgress {
    std::string annotator;
    std::size_t completed = 0;
    std::size_t total = 0;
    std::size_t edges_labeled = 0;
};

struct PairConsistency {
    std::string a;
    std::string b;
    std::optional<double> value;  ///< nullopt without shared edges
};

struct Progress {
    std::vector<AnnotatorProgress> annotators;  ///< sorted by name
    std::vector<PairConsistency> consistency;   ///< each unordered pair once
};

/// One persisted submission.
struct RoundRecord {
    std::string annotator;
    std::size_t cluster = 0;
    std::size_t round = 0;
    std::vector<ModelId> checked;
    std::string ts;
};

std::string format_round_record(const RoundRecord& r);
/// Throws Error on malformed JSON or missing fields.
RoundRecord parse_round_record(std::string_view line);

/**
 * Annotation backend. Every initial cluster with two or more members is a
 * task for every annotator; each (annotator, cluster) pair owns one
 * ClusterAnnotation. The round log is the source of truth: a submission is
 * acknowledged only after its record is appended and synced, and a new
 * instance replays the log on construction.
 *
 * Submissions on distinct sessions run concurrently; progress and export
 * take a consistent snapshot.
 */
class AnnotationService {
public:
    using Clock = std::function<std::string()>;

    AnnotationService(Partition tasks, std::map<std::string, std::string> tokens, std::filesystem::path log_path,
                      std::filesystem::path preview_dir = {}, Clock clock = {});
    ~AnnotationService();

    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    static std::unique_ptr<AnnotationService> from_config(const ServiceConfig& config, Clock clock = {});

    /// Lowest-id cluster this annotator has not finished; nullopt when done.
    std::optional<AnnotationTask> next_cluster(const std::string& token) const;

    /// `expected_round`, when given, de-duplicates retries: re-sending the
    /// last accepted round returns the current state without a new record.
    RoundResult submit_round(const std::string& token, std::size_t cluster_id, const std::vector<ModelId>& checked,
                             std::optional<std::size_t> expected_round = std::nullopt);

    /// Union of the derived edges of every finished cluster.
    /// Throws ConflictError when nothing is finished yet.
    LabeledEdgeSet export_edges(const std::string& token) const;

    Progress progress() const;

    /// Annotator name for a token; throws AuthError.
    const std::string& annotator(const std::string& token) const;

    /// Preview file for a model in the task set; throws NotFoundError.
    std::filesystem::path preview_path(const std::string& model_id) const;

    std::size_t num_tasks() const noexcept { return clusters_.size(); }

private:
    struct Session {
        mutable std::mutex mutex;
        ClusterAnnotation state;
        explicit Session(ClusterAnnotation s) : state(std::move(s)) {}
    };
    struct TaskCluster {
        std::size_t id;
        std::vector<ModelId> members;
    };

    Session& session(const std::string& name, std::size_t cluster_id);
    const Session& session(const std::string& name, std::size_t cluster_id) const;
    void replay();
    LabeledEdgeSet export_unlocked(const std::string& name) const;
    void append(const RoundRecord& record);

    std::vector<TaskCluster> clusters_;               ///< ascending id
    std::map<std::size_t, std::size_t> cluster_index_;  ///< id -> position in clusters_
    std::map<std::string, std::string> tokens_;
    std::map<std::string, std::vector<std::unique_ptr<Session>>> sessions_;  ///< by annotator name
    std::set<std::string> known_models_;
    std::filesystem::path log_path_;
    std::filesystem::path preview_dir_;
    Clock clock_;

    mutable std::shared_mutex snapshot_mutex_;
    std::mutex log_mutex_;
    int log_fd_ = -1;
};

/// UTC timestamp like 2024-01-02T03:04:05Z.
std::string iso8601_now();

}  // namespace cadclust
