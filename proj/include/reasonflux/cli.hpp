#pragma once

#include "reasonflux/llm_gateway.hpp"
#include "reasonflux/navigator.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace rf {

/// One JSON config to pass around; flags override it. Secrets never live in
/// the file: backends name an environment variable instead.
struct RunConfig {
    std::string library_path;
    std::string output_dir = "out";
    BackendSpec navigator_backend;
    BackendSpec inference_backend;
    NavigatorConfig navigator_cfg;
    bool has_backends = false;
};

RunConfig load_run_config(const std::string& path);

/// Expand ${NAME} from the environment; unset variables expand empty with a
/// warning.
std::string expand_env(const std::string& value);

/// Exit codes: 0 success, 1 domain failure, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rf
