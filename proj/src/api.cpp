#include "snack/api.hpp"

#include <httplib.h>

#include <regex>

namespace snack {

namespace {

Json error_body(const std::string& message)
{
    return Json{{"error", message}};
}

Json parse_body(const std::string& body)
{
    if (body.empty()) return Json::object();
    try {
        Json j = Json::parse(body);
        if (!j.is_object()) throw ApiError(400, "request body must be a JSON object");
        return j;
    } catch (const Json::parse_error&) {
        throw ApiError(400, "request body is not valid JSON");
    }
}

std::string required_string(const Json& j, const char* key)
{
    if (!j.contains(key) || !j[key].is_string()) throw ApiError(400, std::string("missing string field ") + key);
    return j[key].get<std::string>();
}

std::string worker_param(const ApiRequest& request)
{
    auto it = request.query.find("worker_id");
    if (it == request.query.end() || it->second.empty()) throw ApiError(400, "missing worker_id parameter");
    return it->second;
}

std::vector<std::size_t> index_list(const Json& j, const char* what)
{
    if (!j.is_array()) throw ApiError(400, std::string(what) + " must be an array");
    std::vector<std::size_t> out;
    for (const auto& v : j) {
        if (!v.is_number_unsigned()) throw ApiError(400, std::string(what) + " must hold non-negative integers");
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

Json submission_body(const SubmissionResult& r)
{
    return Json{{"accepted_grid_count", r.accepted_grid_count}, {"catch_grade", std::string(to_string(r.catch_grade))}};
}

ApiResponse route(CampaignService& service, const ApiRequest& request)
{
    static const std::regex submit_path(R"(/hits/([^/]+)/responses)");
    const auto& m = request.method;
    const auto& p = request.path;

    if (m == "POST" && p == "/workers") return {200, Json{{"worker_id", service.register_worker()}}};
    if (m == "GET" && p == "/pretest") return {200, service.pretest_payload(worker_param(request))};
    if (m == "POST" && p == "/pretest") {
        const Json body = parse_body(request.body);
        const std::string worker_id = required_string(body, "worker_id");
        if (!body.contains("answers")) throw ApiError(400, "missing answers");
        const auto answers = index_list(body["answers"], "answers");
        const PretestResult r = service.submit_pretest(worker_id, answers);
        return {200, Json{{"score", r.score}, {"qualified", r.qualified}}};
    }
    if (m == "GET" && p == "/hits/next") return {200, service.next_hit(worker_param(request))};
    std::smatch match;
    if (m == "POST" && std::regex_match(p, match, submit_path)) {
        const Json body = parse_body(request.body);
        const std::string worker_id = required_string(body, "worker_id");
        if (!body.contains("selections") || !body["selections"].is_array())
            throw ApiError(400, "missing selections array");
        std::vector<std::vector<std::size_t>> selections;
        for (const auto& s : body["selections"]) selections.push_back(index_list(s, "selections"));
        const SubmissionResult r = service.submit_responses(match[1].str(), worker_id, selections);
        return {r.duplicate ? 409 : 200, submission_body(r)};
    }
    if (m == "GET" && p == "/state/embedding") return {200, service.embedding_payload()};
    if (m == "POST" && p == "/admin/refit") {
        const Json body = parse_body(request.body);
        return {200, Json{{"new_version", service.refit(body)}}};
    }
    if (m == "GET" && p == "/admin/metrics") return {200, service.metrics_payload()};
    return {404, error_body("no route for " + m + " " + p)};
}

} // namespace

ApiResponse dispatch(CampaignService& service, const ApiRequest& request)
{
    try {
        return route(service, request);
    } catch (const ApiError& e) {
        return {e.status(), error_body(e.what())};
    } catch (const Json::exception& e) {
        return {400, error_body(e.what())};
    } catch (const std::exception& e) {
        return {500, error_body(e.what())};
    }
}

void bind_routes(httplib::Server& server, CampaignService& service)
{
    auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
        ApiRequest request{req.method, req.path, {}, req.body};
        for (const auto& [k, v] : req.params) request.query.emplace(k, v);
        const ApiResponse response = dispatch(service, request);
        res.status = response.status;
        res.set_content(response.body.dump(), "application/json");
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
}

} // namespace snack
