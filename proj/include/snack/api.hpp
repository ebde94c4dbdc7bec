#ifndef SNACK_API_HPP
#define SNACK_API_HPP

#include <map>
#include <string>
#include <string_view>

#include "snack/service.hpp"

namespace httplib {
class Server;
}

namespace snack {

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    Json body;
};

// Routes one request to the service. Failures become {"error": message}
// with the matching status; unexpected exceptions map to 500.
ApiResponse dispatch(CampaignService& service, const ApiRequest& request);

// Registers every endpoint on `server`.
void bind_routes(httplib::Server& server, CampaignService& service);

} // namespace snack

#endif
