#ifndef SNACK_RECORDS_HPP
#define SNACK_RECORDS_HPP

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "snack/campaign.hpp"
#include "snack/optimizer.hpp"
#include "snack/worker.hpp"

namespace snack {

using Json = nlohmann::ordered_json;

// Response log record:
// {worker_id, hit_id, grid: {anchor, candidates, kind, sentinel_slot}, selected, timestamp}
// sentinel_slot is null for non-sentinel grids. The sentinel text is not part
// of the record; it is recoverable from the taxonomy.
Json grid_to_json(const Grid& grid);
Grid grid_from_json(const Json& j);
Json response_to_json(const Response& response);
Response response_from_json(const Json& j);

// Full HIT including kind flags and sentinel texts (operator side only).
Json hit_to_json(const Hit& hit);
Hit hit_from_json(const Json& j);

Json worker_to_json(const WorkerRecord& worker);
WorkerRecord worker_from_json(const Json& j);

// "main-text" or "appendix".
SnackConfig snack_preset(std::string_view name);

Json snack_config_to_json(const SnackConfig& cfg);
// Recognised keys: preset (applied first), lambda, gamma, perplexity, alpha,
// out_dim, iters, seed, weighting, tste_ramp, exaggeration_factor,
// exaggeration_iters. Unknown keys throw.
void apply_snack_overrides(SnackConfig& cfg, const Json& overrides);

// One record per line.
void write_responses(std::ostream& out, std::span<const Response> responses);
std::vector<Response> read_responses(std::istream& in, const std::string& name = "<responses>");
std::vector<Response> load_responses(const std::filesystem::path& path);

} // namespace snack

#endif
