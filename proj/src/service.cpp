#include "cadclust/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <json.hpp>

#include "cadclust/text_io.hpp"

namespace cadclust {

using json = nlohmann::json;

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(text::read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    const auto base = path.parent_path();
    const auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    ServiceConfig cfg;
    try {
        cfg.task_file = resolve(doc.at("task_file").get<std::string>());
        cfg.log_path = resolve(doc.at("log_path").get<std::string>());
        if (doc.contains("preview_dir")) cfg.preview_dir = resolve(doc["preview_dir"].get<std::string>());
        for (const auto& [token, name] : doc.at("annotators").items()) cfg.tokens[token] = name.get<std::string>();
        if (doc.contains("bind")) {
            const auto bind = doc["bind"].get<std::string>();
            const auto colon = bind.rfind(':');
            std::uint64_t port = 0;
            if (colon == std::string::npos || !text::parse_u64(std::string_view(bind).substr(colon + 1), port) ||
                port > 65535)
                throw ParseError(path.string(), 0, "bind must be host:port");
            cfg.host = bind.substr(0, colon);
            cfg.port = static_cast<int>(port);
        }
    } catch (const json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    if (cfg.tokens.empty()) throw ParseError(path.string(), 0, "no annotators configured");
    return cfg;
}

std::string format_round_record(const RoundRecord& r) {
    nlohmann::ordered_json j;
    j["annotator"] = r.annotator;
    j["cluster"] = r.cluster;
    j["round"] = r.round;
    j["checked"] = r.checked;
    j["ts"] = r.ts;
    return j.dump();
}

RoundRecord parse_round_record(std::string_view line) {
    try {
        const auto j = json::parse(line);
        RoundRecord r;
        r.annotator = j.at("annotator").get<std::string>();
        r.cluster = j.at("cluster").get<std::size_t>();
        r.round = j.at("round").get<std::size_t>();
        r.checked = j.at("checked").get<std::vector<ModelId>>();
        r.ts = j.value("ts", std::string());
        return r;
    } catch (const json::exception& e) {
        throw Error(std::string("bad round record: ") + e.what());
    }
}

AnnotationService::AnnotationService(Partition tasks, std::map<std::string, std::string> tokens,
                                     std::filesystem::path log_path, std::filesystem::path preview_dir, Clock clock)
    : tokens_(std::move(tokens)),
      log_path_(std::move(log_path)),
      preview_dir_(std::move(preview_dir)),
      clock_(clock ? std::move(clock) : Clock(iso8601_now)) {
    if (tokens_.empty()) throw Error("annotation service needs at least one annotator");

    const auto members = tasks.members();
    for (std::size_t c = 0; c < members.size(); ++c) {
        std::vector<ModelId> ids;
        for (const auto row : members[c]) ids.push_back(tasks.ids()[row]);
        known_models_.insert(ids.begin(), ids.end());
        if (ids.size() < 2) continue;  // nothing to annotate
        cluster_index_[c] = clusters_.size();
        clusters_.push_back(TaskCluster{c, std::move(ids)});
    }

    for (const auto& [token, name] : tokens_) {
        auto& list = sessions_[name];
        if (!list.empty()) continue;  // two tokens for one annotator share sessions
        for (const auto& c : clusters_)
            list.push_back(std::make_unique<Session>(ClusterAnnotation(std::to_string(c.id), c.members)));
    }

    replay();

    log_fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (log_fd_ < 0) throw Error("cannot open round log " + log_path_.string() + ": " + std::strerror(errno));
}

AnnotationService::~AnnotationService() {
    if (log_fd_ >= 0) ::close(log_fd_);
}

std::unique_ptr<AnnotationService> AnnotationService::from_config(const ServiceConfig& config, Clock clock) {
    return std::make_unique<AnnotationService>(read_partition(config.task_file), config.tokens, config.log_path,
                                               config.preview_dir, std::move(clock));
}

const std::string& AnnotationService::annotator(const std::string& token) const {
    const auto it = tokens_.find(token);
    if (it == tokens_.end()) throw AuthError("unknown annotator token");
    return it->second;
}

AnnotationService::Session& AnnotationService::session(const std::string& name, std::size_t cluster_id) {
    return const_cast<Session&>(std::as_const(*this).session(name, cluster_id));
}

const AnnotationService::Session& AnnotationService::session(const std::string& name, std::size_t cluster_id) const {
    const auto c = cluster_index_.find(cluster_id);
    if (c == cluster_index_.end()) throw NotFoundError("no annotation task for cluster " + std::to_string(cluster_id));
    const auto s = sessions_.find(name);
    if (s == sessions_.end()) throw AuthError("unknown annotator " + name);
    return *s->second[c->second];
}

void AnnotationService::replay() {
    if (!std::filesystem::exists(log_path_)) return;
    const auto contents = text::read_file(log_path_);
    // A crash can leave a torn final line; it was never acknowledged.
    const auto end = contents.rfind('\n');
    const std::string_view complete = end == std::string::npos ? std::string_view() : std::string_view(contents).substr(0, end + 1);

    text::LineReader lines(complete);
    std::string_view line;
    while (lines.next(line)) {
        if (line.empty()) continue;
        RoundRecord r;
        try {
            r = parse_round_record(line);
        } catch (const Error& e) {
            throw ParseError(log_path_.string(), lines.line_number(), e.what());
        }
        try {
            auto& s = session(r.annotator, r.cluster);
            if (s.state.terminal() || r.round != s.state.rounds().size())
                throw Error("round " + std::to_string(r.round) + " out of sequence");
            s.state = apply_round(s.state, r.checked);
        } catch (const Error& e) {
            throw ParseError(log_path_.string(), lines.line_number(), e.what());
        }
    }
}

void AnnotationService::append(const RoundRecord& record) {
    const std::string line = format_round_record(record) + "\n";
    std::lock_guard lock(log_mutex_);
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = ::write(log_fd_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(std::string("round log write failed: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(log_fd_) != 0) throw Error(std::string("round log sync failed: ") + std::strerror(errno));
}

std::optional<AnnotationTask> AnnotationService::next_cluster(const std::string& token) const {
    const auto& name = annotator(token);
    std::shared_lock snapshot(snapshot_mutex_);
    const auto& list = sessions_.at(name);
    for (std::size_t i = 0; i < clusters_.size(); ++i) {
        std::lock_guard lock(list[i]->mutex);
        const auto& state = list[i]->state;
        if (state.terminal()) continue;
        return AnnotationTask{clusters_[i].id, state.members(), state.remaining(), state.rounds().size()};
    }
    return std::nullopt;
}

RoundResult AnnotationService::submit_round(const std::string& token, std::size_t cluster_id,
                                            const std::vector<ModelId>& checked,
                                            std::optional<std::size_t> expected_round) {
    const auto& name = annotator(token);
    std::shared_lock snapshot(snapshot_mutex_);
    auto& s = session(name, cluster_id);
    std::lock_guard lock(s.mutex);

    const auto& rounds = s.state.rounds();
    const auto current = [&] { return RoundResult{s.state.remaining(), s.state.terminal(), s.state.rounds().size()}; };
    if (expected_round && *expected_round != rounds.size()) {
        if (*expected_round + 1 == rounds.size() && rounds.back().checked == checked) return current();
        throw ConflictError("stale round " + std::to_string(*expected_round) + ", expected " +
                            std::to_string(rounds.size()));
    }
    if (s.state.terminal()) throw ConflictError("cluster " + std::to_string(cluster_id) + " is already finished");

    ClusterAnnotation next = [&] {
        try {
            return apply_round(s.state, checked);
        } catch (const InvalidRound& e) {
            throw ConflictError(e.what(), e.offending());
        }
    }();
    append(RoundRecord{name, cluster_id, rounds.size(), checked, clock_()});
    s.state = std::move(next);
    return current();
}

LabeledEdgeSet AnnotationService::export_unlocked(const std::string& name) const {
    LabeledEdgeSet out(name);
    for (const auto& s : sessions_.at(name))
        if (s->state.terminal()) out.merge(derive_edges(s->state));
    return out;
}

LabeledEdgeSet AnnotationService::export_edges(const std::string& token) const {
    const auto& name = annotator(token);
    std::unique_lock snapshot(snapshot_mutex_);
    bool any = false;
    for (const auto& s : sessions_.at(name)) any = any || s->state.terminal();
    if (!any) throw ConflictError("annotator " + name + " has not finished any cluster");
    return export_unlocked(name);
}

Progress AnnotationService::progress() const {
    std::unique_lock snapshot(snapshot_mutex_);
    Progress out;
    std::map<std::string, LabeledEdgeSet> edges;
    for (const auto& [name, list] : sessions_) {
        AnnotatorProgress p{name, 0, list.size(), 0};
        for (const auto& s : list) {
            if (!s->state.terminal()) continue;
            ++p.completed;
            const auto n = s->state.members().size();
            p.edges_labeled += n * (n - 1) / 2;
        }
        out.annotators.push_back(p);
        edges.emplace(name, export_unlocked(name));
    }
    for (auto a = edges.begin(); a != edges.end(); ++a)
        for (auto b = std::next(a); b != edges.end(); ++b)
            out.consistency.push_back(PairConsistency{a->first, b->first, consistency(a->second, b->second)});
    return out;
}

std::filesystem::path AnnotationService::preview_path(const std::string& model_id) const {
    if (!known_models_.contains(model_id)) throw NotFoundError("unknown model " + model_id);
    if (preview_dir_.empty()) throw NotFoundError("no preview directory configured");
    auto path = preview_dir_ / (model_id + ".xyz");
    if (!std::filesystem::exists(path)) throw NotFoundError("no preview for " + model_id);
    return path;
}

}  // namespace cadclust
