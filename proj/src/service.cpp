#include "snack/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "snack/metrics.hpp"
#include "snack/playback.hpp"
#include "snack/tsne.hpp"

namespace snack {

namespace {

enum Stream : std::uint64_t { kHits = 21, kMetrics = 22 };

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

CampaignService::CampaignService(Corpus corpus, InputEmbeddings embeddings, std::vector<PretestQuestion> pretest,
                                 ServiceOptions options)
    : corpus_(std::move(corpus)),
      labels_(corpus_.labels()),
      p_(affinities_from_distances(pairwise_distances(embeddings.matrix), options.snack.perplexity)),
      pretest_(std::move(pretest)),
      options_(std::move(options))
{
    if (embeddings.size() != corpus_.size()) throw Error("embeddings do not match the corpus");
    if (pretest_.size() != kPretestQuestions)
        throw Error("pretest needs exactly " + std::to_string(kPretestQuestions) + " questions");
    if (options_.log_path.empty()) throw Error("service needs a log path");
    options_.snack.validate();
    recover();
}

std::int64_t CampaignService::now() const
{
    if (options_.clock) return options_.clock();
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::filesystem::path CampaignService::snapshot_path(std::size_t version) const
{
    auto dir = options_.snapshot_dir;
    if (dir.empty()) dir = options_.log_path.parent_path();
    return dir / ("embedding-v" + std::to_string(version) + ".txt");
}

Matrix CampaignService::fit(std::size_t triplet_count, const SnackConfig& cfg) const
{
    const std::span<const Triplet> ts(triplets_.data(), triplet_count);
    return snack_fit_affinities(p_, ts, cfg).y;
}

Matrix CampaignService::load_or_fit_snapshot(std::size_t version, std::size_t triplet_count,
                                             const SnackConfig& cfg) const
{
    const auto path = snapshot_path(version);
    if (std::filesystem::exists(path)) {
        Matrix y = load_matrix(path);
        if (y.rows() == corpus_.size() && y.cols() == cfg.out_dim) return y;
    }
    Matrix y = fit(triplet_count, cfg);
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const auto tmp = path.string() + ".tmp";
    save_matrix(y, tmp);
    std::filesystem::rename(tmp, path);
    return y;
}

void CampaignService::set_embedding(Matrix y, std::size_t version)
{
    index_ = std::make_shared<const NeighborIndex>(y);
    y_ = std::move(y);
    version_ = version;
}

void CampaignService::recover()
{
    const std::string text = read_file(options_.log_path);
    std::size_t pos = 0;
    std::size_t line_no = 0;
    std::vector<Json> events;
    while (pos < text.size()) {
        const auto end = text.find('\n', pos);
        const bool last = end == std::string::npos || end + 1 == text.size();
        const std::string line = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        ++line_no;
        Json event;
        bool ok = end != std::string::npos;
        if (ok) {
            try {
                event = Json::parse(line);
            } catch (const Json::parse_error&) {
                ok = false;
            }
        }
        if (!ok) {
            if (!last) throw ParseError(options_.log_path.string(), line_no, "corrupt log record");
            warnings_.push_back(options_.log_path.string() + ":" + std::to_string(line_no) +
                                ": torn trailing record dropped");
            std::filesystem::resize_file(options_.log_path, pos);
            break;
        }
        events.push_back(std::move(event));
        pos = end + 1;
    }

    if (events.empty() || events.front().value("event", "") != "init") {
        if (!events.empty()) throw ParseError(options_.log_path.string(), 1, "log does not start with init");
        Json init;
        init["event"] = "init";
        init["n"] = corpus_.size();
        init["config"] = snack_config_to_json(options_.snack);
        append(init);
        events.push_back(init);
    }
    line_no = 0;
    for (const auto& e : events) {
        ++line_no;
        try {
            apply(e);
        } catch (const std::exception& ex) {
            throw ParseError(options_.log_path.string(), line_no, ex.what());
        }
    }
}

void CampaignService::apply(const Json& event)
{
    const std::string type = event.at("event").get<std::string>();
    if (type == "init") {
        if (event.at("n").get<std::size_t>() != corpus_.size()) throw Error("log belongs to a different corpus");
        SnackConfig cfg = options_.snack;
        apply_snack_overrides(cfg, event.at("config"));
        set_embedding(load_or_fit_snapshot(0, 0, cfg), 0);
    } else if (type == "worker") {
        WorkerRecord w;
        w.worker_id = event.at("worker_id").get<std::string>();
        if (workers_.contains(w.worker_id)) throw Error("duplicate worker " + w.worker_id);
        worker_order_.push_back(w.worker_id);
        workers_.emplace(w.worker_id, std::move(w));
        ++worker_counter_;
    } else if (type == "pretest") {
        WorkerRecord& w = worker_ref(event.at("worker_id").get<std::string>());
        w.pretest_score = event.at("score").get<std::size_t>();
        w.qualified = event.at("qualified").get<bool>();
    } else if (type == "hit") {
        Hit hit = hit_from_json(event.at("hit"));
        validate_hit(hit);
        const std::string worker_id = event.at("worker_id").get<std::string>();
        worker_ref(worker_id);
        const std::string id = hit.id;
        if (hits_.contains(id)) throw Error("duplicate hit " + id);
        hits_.emplace(id, IssuedHit{std::move(hit), worker_id, std::nullopt});
        ++hit_counter_;
    } else if (type == "responses") {
        const std::string hit_id = event.at("hit_id").get<std::string>();
        auto it = hits_.find(hit_id);
        if (it == hits_.end()) throw Error("responses for unknown hit " + hit_id);
        IssuedHit& issued = it->second;
        if (issued.result) throw Error("second submission for hit " + hit_id);
        HitSubmission submission{issued.hit, {}};
        for (const auto& r : event.at("responses")) submission.responses.push_back(response_from_json(r));
        const FilterResult filtered = filter_responses(std::span(&submission, 1), labels_);
        if (!filtered.grades.front()) throw Error("incomplete submission for hit " + hit_id);
        SubmissionResult result{filtered.accepted.size(), *filtered.grades.front(), false};
        issued.result = result;
        WorkerRecord& w = worker_ref(issued.worker_id);
        ++w.hits_completed;
        w.catch_history.push_back(result.catch_grade);
        submitted_.insert(submitted_.end(), submission.responses.begin(), submission.responses.end());
        const auto ts = extract_triplets(filtered.accepted, TripletSource::Human);
        triplets_.insert(triplets_.end(), ts.begin(), ts.end());
        accepted_.insert(accepted_.end(), filtered.accepted.begin(), filtered.accepted.end());
    } else if (type == "refit") {
        const std::size_t version = event.at("version").get<std::size_t>();
        if (version != version_ + 1) throw Error("refit versions out of order");
        const std::size_t count = event.at("triplets").get<std::size_t>();
        if (count > triplets_.size()) throw Error("refit references more triplets than recorded");
        SnackConfig cfg = options_.snack;
        apply_snack_overrides(cfg, event.at("config"));
        set_embedding(load_or_fit_snapshot(version, count, cfg), version);
    } else {
        throw Error("unknown event type " + type);
    }
}

void CampaignService::append(const Json& event)
{
    const std::string line = event.dump() + "\n";
    std::ofstream out(options_.log_path, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot open log " + options_.log_path.string());
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw Error("failed to write log " + options_.log_path.string());
}

WorkerRecord& CampaignService::worker_ref(const std::string& worker_id)
{
    auto it = workers_.find(worker_id);
    if (it == workers_.end()) throw ApiError(404, "unknown worker " + worker_id);
    return it->second;
}

std::string CampaignService::register_worker()
{
    std::lock_guard writer(writer_mutex_);
    Json event;
    event["event"] = "worker";
    event["worker_id"] = "worker-" + std::to_string(worker_counter_ + 1);
    append(event);
    std::unique_lock lock(state_mutex_);
    apply(event);
    return event["worker_id"].get<std::string>();
}

Json CampaignService::pretest_payload(const std::string& worker_id) const
{
    std::shared_lock lock(state_mutex_);
    if (!workers_.contains(worker_id)) throw ApiError(404, "unknown worker " + worker_id);
    Json questions = Json::array();
    for (const auto& q : pretest_) {
        Json jq;
        jq["probe"] = q.probe;
        jq["options"] = q.options;
        questions.push_back(std::move(jq));
    }
    Json j;
    j["questions"] = std::move(questions);
    return j;
}

PretestResult CampaignService::submit_pretest(const std::string& worker_id, std::span<const std::size_t> answers)
{
    std::lock_guard writer(writer_mutex_);
    if (!workers_.contains(worker_id)) throw ApiError(404, "unknown worker " + worker_id);
    if (answers.size() != pretest_.size())
        throw ApiError(400, "expected " + std::to_string(pretest_.size()) + " answers");
    for (auto a : answers)
        if (a > 1) throw ApiError(400, "answers must be 0 or 1");
    const PretestResult result = grade_pretest(answers, pretest_);
    Json event;
    event["event"] = "pretest";
    event["worker_id"] = worker_id;
    event["answers"] = std::vector<std::size_t>(answers.begin(), answers.end());
    event["score"] = result.score;
    event["qualified"] = result.qualified;
    append(event);
    std::unique_lock lock(state_mutex_);
    apply(event);
    return result;
}

Json CampaignService::next_hit(const std::string& worker_id)
{
    std::lock_guard writer(writer_mutex_);
    auto it = workers_.find(worker_id);
    if (it == workers_.end()) throw ApiError(404, "unknown worker " + worker_id);
    if (!it->second.qualified) throw ApiError(403, "worker " + worker_id + " has not passed the pretest");

    const std::size_t number = hit_counter_ + 1;
    auto rng = make_rng(derive_seed(options_.seed, kHits), number);
    HitOptions hit_options;
    hit_options.strategy = options_.strategy;
    hit_options.sentinel_rate = options_.sentinel_rate;
    Hit hit = assemble_hit(corpus_, *index_, hit_options, rng, "hit-" + std::to_string(number));

    Json event;
    event["event"] = "hit";
    event["worker_id"] = worker_id;
    event["version"] = version_;
    event["hit"] = hit_to_json(hit);
    append(event);
    {
        std::unique_lock lock(state_mutex_);
        apply(event);
    }

    Json grids = Json::array();
    for (const auto& g : hit.grids) {
        Json candidates = Json::array();
        for (std::size_t pos = 0; pos < g.candidates.size(); ++pos) {
            const bool sentinel = g.sentinel_slot && *g.sentinel_slot == pos;
            candidates.push_back({{"text", sentinel ? *g.sentinel_text : corpus_[g.candidates[pos]].text}});
        }
        grids.push_back({{"anchor", {{"text", corpus_[g.anchor].text}}}, {"candidates", std::move(candidates)}});
    }
    Json payload;
    payload["hit_id"] = hit.id;
    payload["selections_per_grid"] = kDefaultSelections;
    payload["grids"] = std::move(grids);
    return payload;
}

SubmissionResult CampaignService::submit_responses(const std::string& hit_id, const std::string& worker_id,
                                                   const std::vector<std::vector<std::size_t>>& selections)
{
    std::lock_guard writer(writer_mutex_);
    if (!workers_.contains(worker_id)) throw ApiError(404, "unknown worker " + worker_id);
    auto it = hits_.find(hit_id);
    if (it == hits_.end()) throw ApiError(404, "unknown hit " + hit_id);
    const IssuedHit& issued = it->second;
    if (issued.worker_id != worker_id) throw ApiError(403, "hit " + hit_id + " was issued to another worker");
    if (issued.result) {
        SubmissionResult first = *issued.result;
        first.duplicate = true;
        return first;
    }
    if (selections.size() != issued.hit.grids.size())
        throw ApiError(400, "expected selections for " + std::to_string(issued.hit.grids.size()) + " grids");

    const std::int64_t timestamp = now();
    Json responses = Json::array();
    for (std::size_t g = 0; g < selections.size(); ++g) {
        const Grid& grid = issued.hit.grids[g];
        if (selections[g].size() != kDefaultSelections)
            throw ApiError(400, "grid " + std::to_string(g) + ": select exactly " +
                                    std::to_string(kDefaultSelections) + " candidates");
        std::vector<std::size_t> selected = selections[g];
        std::sort(selected.begin(), selected.end());
        try {
            validate_selection(selected, grid.candidates.size());
        } catch (const Error& e) {
            throw ApiError(400, "grid " + std::to_string(g) + ": " + e.what());
        }
        Response r;
        r.grid = grid;
        r.selected = std::move(selected);
        r.worker_id = worker_id;
        r.hit_id = hit_id;
        r.timestamp = timestamp;
        responses.push_back(response_to_json(r));
    }

    Json event;
    event["event"] = "responses";
    event["hit_id"] = hit_id;
    event["worker_id"] = worker_id;
    event["responses"] = std::move(responses);
    {
        // Grade before logging so a record that cannot be replayed is never written.
        HitSubmission submission{issued.hit, {}};
        for (const auto& r : event["responses"]) submission.responses.push_back(response_from_json(r));
        const FilterResult filtered = filter_responses(std::span(&submission, 1), labels_);
        event["catch_grade"] = std::string(to_string(*filtered.grades.front()));
        event["accepted_grid_count"] = filtered.accepted.size();
    }
    append(event);
    std::unique_lock lock(state_mutex_);
    apply(event);
    return *hits_.at(hit_id).result;
}

Json CampaignService::embedding_payload() const
{
    std::shared_lock lock(state_mutex_);
    Json coords = Json::array();
    for (std::size_t i = 0; i < y_.rows(); ++i) {
        const auto row = y_.row(i);
        coords.push_back(std::vector<double>(row.begin(), row.end()));
    }
    Json j;
    j["version"] = version_;
    j["N"] = y_.rows();
    j["d"] = y_.cols();
    j["coordinates"] = std::move(coords);
    j["class_ids"] = labels_;
    return j;
}

std::size_t CampaignService::refit(const Json& overrides)
{
    std::lock_guard writer(writer_mutex_);
    SnackConfig cfg = options_.snack;
    try {
        apply_snack_overrides(cfg, overrides);
    } catch (const std::exception& e) {
        throw ApiError(400, e.what());
    }
    const std::size_t version = version_ + 1;
    const std::size_t count = triplets_.size();
    // Writers are excluded by writer_mutex_, so triplets_ is stable here and
    // readers keep the shared lock available during the fit.
    Matrix y = load_or_fit_snapshot(version, count, cfg);

    Json event;
    event["event"] = "refit";
    event["version"] = version;
    event["triplets"] = count;
    event["config"] = snack_config_to_json(cfg);
    append(event);
    std::unique_lock lock(state_mutex_);
    set_embedding(std::move(y), version);
    return version;
}

Json CampaignService::metrics_payload() const
{
    std::shared_lock lock(state_mutex_);
    MetricsReport report = evaluate_embedding(y_, labels_, derive_seed(options_.seed, kMetrics));
    if (!accepted_.empty()) report.annotations = annotation_stats(accepted_, labels_);
    report.sentinel_agreement = sentinel_stats(submitted_);
    Json j = Json::parse(report_to_json(report));
    j["version"] = version_;
    j["triplets"] = triplets_.size();
    j["filter"] = "per-hit catch gate";
    return j;
}

std::size_t CampaignService::version() const
{
    std::shared_lock lock(state_mutex_);
    return version_;
}

Matrix CampaignService::embedding() const
{
    std::shared_lock lock(state_mutex_);
    return y_;
}

TripletSet CampaignService::triplets() const
{
    std::shared_lock lock(state_mutex_);
    return triplets_;
}

std::vector<Response> CampaignService::accepted_responses() const
{
    std::shared_lock lock(state_mutex_);
    return accepted_;
}

std::optional<WorkerRecord> CampaignService::worker(const std::string& worker_id) const
{
    std::shared_lock lock(state_mutex_);
    auto it = workers_.find(worker_id);
    if (it == workers_.end()) return std::nullopt;
    return it->second;
}

std::vector<WorkerRecord> CampaignService::workers() const
{
    std::shared_lock lock(state_mutex_);
    std::vector<WorkerRecord> out;
    for (const auto& id : worker_order_) out.push_back(workers_.at(id));
    return out;
}

std::optional<Hit> CampaignService::hit(const std::string& hit_id) const
{
    std::shared_lock lock(state_mutex_);
    auto it = hits_.find(hit_id);
    if (it == hits_.end()) return std::nullopt;
    return it->second.hit;
}

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env)
{
    ServiceConfig c;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw Error("cannot open config " + path->string());
        Json j;
        try {
            j = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw Error("config " + path->string() + ": " + e.what());
        }
        const auto base = path->parent_path();
        auto file = [&](const char* key, std::filesystem::path& out) {
            if (!j.contains(key)) return;
            std::filesystem::path p = j[key].get<std::string>();
            out = p.is_absolute() || base.empty() ? p : base / p;
        };
        if (j.contains("host")) c.host = j["host"].get<std::string>();
        if (j.contains("port")) c.port = j["port"].get<int>();
        file("excerpts", c.excerpts);
        file("taxonomy", c.taxonomy);
        file("embeddings", c.embeddings);
        file("pretest", c.pretest);
        file("log", c.log);
        file("snapshot_dir", c.snapshot_dir);
        if (j.contains("sentinel_rate")) c.sentinel_rate = j["sentinel_rate"].get<double>();
        if (j.contains("preset")) c.preset = j["preset"].get<std::string>();
        if (j.contains("strategy")) c.strategy = j["strategy"].get<std::string>();
        if (j.contains("pool_size")) c.pool_size = j["pool_size"].get<std::size_t>();
        if (j.contains("iters")) c.iters = j["iters"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    }
    auto get = [&](const char* name) -> const char* { return env ? env(name) : nullptr; };
    auto number = [](const char* name, const char* v) {
        char* end = nullptr;
        const double x = std::strtod(v, &end);
        if (end == v || *end != '\0') throw Error(std::string(name) + " is not a number: " + v);
        return x;
    };
    if (auto v = get("SNACK_HOST")) c.host = v;
    if (auto v = get("SNACK_PORT")) c.port = static_cast<int>(number("SNACK_PORT", v));
    if (auto v = get("SNACK_EXCERPTS")) c.excerpts = v;
    if (auto v = get("SNACK_TAXONOMY")) c.taxonomy = v;
    if (auto v = get("SNACK_EMBEDDINGS")) c.embeddings = v;
    if (auto v = get("SNACK_PRETEST")) c.pretest = v;
    if (auto v = get("SNACK_LOG")) c.log = v;
    if (auto v = get("SNACK_SNAPSHOT_DIR")) c.snapshot_dir = v;
    if (auto v = get("SNACK_SENTINEL_RATE")) c.sentinel_rate = number("SNACK_SENTINEL_RATE", v);
    if (auto v = get("SNACK_PRESET")) c.preset = v;
    if (c.sentinel_rate < 0.0 || c.sentinel_rate > 1.0) throw Error("sentinel_rate must lie in [0, 1]");
    if (c.port < 0 || c.port > 65535) throw Error("port out of range");
    return c;
}

ServiceOptions service_options(const ServiceConfig& config)
{
    ServiceOptions o;
    o.log_path = config.log;
    o.snapshot_dir = config.snapshot_dir;
    o.sentinel_rate = config.sentinel_rate;
    o.strategy.kind = strategy_from_string(config.strategy);
    o.strategy.pool_size = config.pool_size;
    o.snack = snack_preset(config.preset);
    o.snack.iters = config.iters;
    o.snack.seed = config.seed;
    o.seed = config.seed;
    return o;
}

} // namespace snack
