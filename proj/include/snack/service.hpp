#ifndef SNACK_SERVICE_HPP
#define SNACK_SERVICE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "snack/campaign.hpp"
#include "snack/error.hpp"
#include "snack/corpus.hpp"
#include "snack/neighbors.hpp"
#include "snack/optimizer.hpp"
#include "snack/records.hpp"

namespace snack {

// Carries the HTTP status the failure maps to.
class ApiError : public Error {
public:
    ApiError(int status, const std::string& what) : Error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

struct ServiceOptions {
    std::filesystem::path log_path;
    std::filesystem::path snapshot_dir;  // empty: next to the log
    double sentinel_rate = kDefaultSentinelRate;
    SamplingStrategy strategy;
    SnackConfig snack = [] {
        SnackConfig c;
        c.iters = 10000;
        return c;
    }();
    std::uint64_t seed = 0;
    // Milliseconds since the epoch; defaults to the system clock.
    std::function<std::int64_t()> clock;
};

struct SubmissionResult {
    std::size_t accepted_grid_count = 0;
    CatchGrade catch_grade = CatchGrade::None;
    bool duplicate = false;  // an earlier submission's result
};

// Campaign state behind the HTTP API. Every mutation is appended to a
// JSON-lines event log and flushed before the call returns; constructing a
// service over an existing log replays it.
//
// Mutations (including refits) are serialised by one writer lock, so a
// mutation arriving during a refit waits for it. Reads take a shared lock and
// proceed during a refit.
class CampaignService {
public:
    CampaignService(Corpus corpus, InputEmbeddings embeddings, std::vector<PretestQuestion> pretest,
                    ServiceOptions options);

    std::string register_worker();
    Json pretest_payload(const std::string& worker_id) const;
    PretestResult submit_pretest(const std::string& worker_id, std::span<const std::size_t> answers);
    // Worker-facing HIT: texts only, no kind flags or excerpt indices.
    Json next_hit(const std::string& worker_id);
    SubmissionResult submit_responses(const std::string& hit_id, const std::string& worker_id,
                                      const std::vector<std::vector<std::size_t>>& selections);
    Json embedding_payload() const;
    // overrides: SnackConfig fields (see apply_snack_overrides). Returns the
    // new embedding version.
    std::size_t refit(const Json& overrides = Json::object());
    Json metrics_payload() const;

    std::size_t version() const;
    Matrix embedding() const;
    TripletSet triplets() const;
    std::vector<Response> accepted_responses() const;
    std::optional<WorkerRecord> worker(const std::string& worker_id) const;
    std::vector<WorkerRecord> workers() const;
    // The full HIT as issued, kind flags included.
    std::optional<Hit> hit(const std::string& hit_id) const;
    const std::vector<std::string>& recovery_warnings() const { return warnings_; }
    const Corpus& corpus() const { return corpus_; }

private:
    struct IssuedHit {
        Hit hit;
        std::string worker_id;
        std::optional<SubmissionResult> result;
    };

    void recover();
    void apply(const Json& event);
    void append(const Json& event);
    Matrix fit(std::size_t triplet_count, const SnackConfig& cfg) const;
    std::filesystem::path snapshot_path(std::size_t version) const;
    Matrix load_or_fit_snapshot(std::size_t version, std::size_t triplet_count, const SnackConfig& cfg) const;
    void set_embedding(Matrix y, std::size_t version);
    std::int64_t now() const;
    WorkerRecord& worker_ref(const std::string& worker_id);

    const Corpus corpus_;
    const std::vector<int> labels_;
    const Matrix p_;
    const std::vector<PretestQuestion> pretest_;
    const ServiceOptions options_;

    mutable std::shared_mutex state_mutex_;
    std::mutex writer_mutex_;
    std::unordered_map<std::string, WorkerRecord> workers_;
    std::vector<std::string> worker_order_;
    std::unordered_map<std::string, IssuedHit> hits_;
    std::vector<Response> submitted_;  // every response, in log order
    std::vector<Response> accepted_;
    TripletSet triplets_;
    Matrix y_;
    std::shared_ptr<const NeighborIndex> index_;
    std::size_t version_ = 0;
    std::size_t worker_counter_ = 0;
    std::size_t hit_counter_ = 0;
    std::vector<std::string> warnings_;
};

// Operator configuration: a JSON file plus SNACK_* environment overrides.
struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path excerpts;
    std::filesystem::path taxonomy;
    std::filesystem::path embeddings;
    std::filesystem::path pretest;
    std::filesystem::path log = "campaign.log";
    std::filesystem::path snapshot_dir;
    double sentinel_rate = kDefaultSentinelRate;
    std::string preset = "main-text";
    std::string strategy = "distance-rnd";
    std::size_t pool_size = 20;
    int iters = 10000;
    std::uint64_t seed = 0;
};

using EnvLookup = std::function<const char*(const char*)>;

// Missing path: defaults plus environment. Relative data paths in the file
// resolve against the file's directory.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env);
ServiceOptions service_options(const ServiceConfig& config);

} // namespace snack

#endif
