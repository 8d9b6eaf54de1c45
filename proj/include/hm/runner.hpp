#pragma once

#include <string>
#include <vector>

#include "hm/config.hpp"
#include "hm/verify.hpp"

namespace hm {

/// Command implementations behind the CLI. Each returns the process exit
/// code: 0 success, 2 config error, 3 sampler/numeric failure, 4
/// infrastructure failure (verify only), 1 verify ran but a gated test failed.
int run_sample(const RunConfig& cfg);
int run_density(const RunConfig& cfg, const std::string& target);
int run_verify(const RunConfig& cfg, const std::vector<std::string>& suites);
int run_transform(const RunConfig& cfg);
int run_report(const RunConfig& cfg);

/// Suite registry used by run_verify and the CLI help text.
std::vector<std::string> verify_suite_names();

VerifyConfig verify_config_from(const RunConfig& cfg);

} // namespace hm
