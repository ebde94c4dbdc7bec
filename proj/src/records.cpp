#include "snack/records.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "snack/error.hpp"

namespace snack {

Json grid_to_json(const Grid& grid)
{
    Json j;
    j["anchor"] = grid.anchor;
    j["candidates"] = grid.candidates;
    j["kind"] = std::string(to_string(grid.kind));
    j["sentinel_slot"] = grid.sentinel_slot ? Json(*grid.sentinel_slot) : Json(nullptr);
    return j;
}

Grid grid_from_json(const Json& j)
{
    Grid grid;
    grid.anchor = j.at("anchor").get<std::size_t>();
    grid.candidates = j.at("candidates").get<std::vector<std::size_t>>();
    grid.kind = grid_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("sentinel_slot") && !j["sentinel_slot"].is_null())
        grid.sentinel_slot = j["sentinel_slot"].get<std::size_t>();
    if (j.contains("sentinel_text") && !j["sentinel_text"].is_null())
        grid.sentinel_text = j["sentinel_text"].get<std::string>();
    return grid;
}

Json response_to_json(const Response& response)
{
    Json j;
    j["worker_id"] = response.worker_id;
    j["hit_id"] = response.hit_id;
    j["grid"] = grid_to_json(response.grid);
    j["selected"] = response.selected;
    j["timestamp"] = response.timestamp;
    return j;
}

Response response_from_json(const Json& j)
{
    Response r;
    r.worker_id = j.at("worker_id").get<std::string>();
    r.hit_id = j.at("hit_id").get<std::string>();
    r.grid = grid_from_json(j.at("grid"));
    r.selected = j.at("selected").get<std::vector<std::size_t>>();
    r.timestamp = j.at("timestamp").get<std::int64_t>();
    validate_selection(r.selected, r.grid.candidates.size());
    return r;
}

Json hit_to_json(const Hit& hit)
{
    Json grids = Json::array();
    for (const auto& g : hit.grids) {
        Json jg = grid_to_json(g);
        if (g.sentinel_text) jg["sentinel_text"] = *g.sentinel_text;
        grids.push_back(std::move(jg));
    }
    Json j;
    j["id"] = hit.id;
    j["catch_position"] = hit.catch_position;
    j["grids"] = std::move(grids);
    return j;
}

Hit hit_from_json(const Json& j)
{
    Hit hit;
    hit.id = j.at("id").get<std::string>();
    hit.catch_position = j.at("catch_position").get<std::size_t>();
    for (const auto& g : j.at("grids")) hit.grids.push_back(grid_from_json(g));
    return hit;
}

Json worker_to_json(const WorkerRecord& worker)
{
    Json history = Json::array();
    for (auto g : worker.catch_history) history.push_back(std::string(to_string(g)));
    Json j;
    j["worker_id"] = worker.worker_id;
    j["qualified"] = worker.qualified;
    j["pretest_score"] = worker.pretest_score;
    j["hits_completed"] = worker.hits_completed;
    j["catch_history"] = std::move(history);
    return j;
}

WorkerRecord worker_from_json(const Json& j)
{
    WorkerRecord w;
    w.worker_id = j.at("worker_id").get<std::string>();
    w.qualified = j.at("qualified").get<bool>();
    w.pretest_score = j.at("pretest_score").get<std::size_t>();
    w.hits_completed = j.at("hits_completed").get<std::size_t>();
    for (const auto& g : j.at("catch_history")) w.catch_history.push_back(catch_grade_from_string(g.get<std::string>()));
    return w;
}

SnackConfig snack_preset(std::string_view name)
{
    if (name == "main-text") return SnackConfig::main_text();
    if (name == "appendix") return SnackConfig::appendix();
    throw Error("unknown preset: " + std::string(name));
}

Json snack_config_to_json(const SnackConfig& cfg)
{
    Json j;
    j["lambda"] = cfg.lambda;
    j["gamma"] = cfg.gamma;
    j["perplexity"] = cfg.perplexity;
    j["alpha"] = cfg.alpha ? Json(*cfg.alpha) : Json(nullptr);
    j["out_dim"] = cfg.out_dim;
    j["iters"] = cfg.iters;
    j["seed"] = cfg.seed;
    j["weighting"] = std::string(to_string(cfg.weighting));
    j["tste_ramp"] = cfg.tste_ramp;
    j["exaggeration_factor"] = cfg.exaggeration_factor;
    j["exaggeration_iters"] = cfg.exaggeration_iters;
    return j;
}

void apply_snack_overrides(SnackConfig& cfg, const Json& overrides)
{
    if (overrides.is_null()) return;
    if (!overrides.is_object()) throw Error("config overrides must be a JSON object");
    if (overrides.contains("preset")) {
        const SnackConfig preset = snack_preset(overrides["preset"].get<std::string>());
        cfg.lambda = preset.lambda;
        cfg.gamma = preset.gamma;
    }
    for (const auto& [key, value] : overrides.items()) {
        if (key == "preset") continue;
        if (key == "lambda") cfg.lambda = value.get<double>();
        else if (key == "gamma") cfg.gamma = value.get<double>();
        else if (key == "perplexity") cfg.perplexity = value.get<double>();
        else if (key == "alpha") cfg.alpha = value.is_null() ? std::nullopt : std::optional(value.get<double>());
        else if (key == "out_dim") cfg.out_dim = value.get<std::size_t>();
        else if (key == "iters") cfg.iters = value.get<int>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "weighting") cfg.weighting = weighting_mode_from_string(value.get<std::string>());
        else if (key == "tste_ramp") cfg.tste_ramp = value.get<bool>();
        else if (key == "exaggeration_factor") cfg.exaggeration_factor = value.get<double>();
        else if (key == "exaggeration_iters") cfg.exaggeration_iters = value.get<int>();
        else throw Error("unknown config key: " + key);
    }
    cfg.validate();
}

void write_responses(std::ostream& out, std::span<const Response> responses)
{
    for (const auto& r : responses) out << response_to_json(r).dump() << '\n';
}

std::vector<Response> read_responses(std::istream& in, const std::string& name)
{
    std::vector<Response> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(response_from_json(Json::parse(line)));
        } catch (const std::exception& e) {
            throw ParseError(name, line_no, e.what());
        }
    }
    return out;
}

std::vector<Response> load_responses(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_responses(in, path.string());
}

} // namespace snack
