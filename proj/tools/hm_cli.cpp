#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hm/errors.hpp"
#include "hm/runner.hpp"

namespace {

int dispatch(const std::function<int()>& fn, bool verify_command) {
    try {
        return fn();
    } catch (const hm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hm::RejectionBudgetError& e) {
        std::cerr << "sampler error: " << e.what()
                  << " (acceptance rate " << e.acceptance_rate() << ")\n";
        return 3;
    } catch (const hm::DegeneracyError& e) {
        std::cerr << "sampler error: " << e.what() << "\n";
        return 3;
    } catch (const hm::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const hm::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 3;
    } catch (const hm::CompositionError& e) {
        std::cerr << "composition error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return verify_command ? 4 : 3;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo toolkit for diffusions conditioned between two curves"};
    app.require_subcommand(1);

    std::string config_path;
    std::int64_t seed_override = -1;
    int workers_override = -1;
    app.add_option("--config", config_path, "configuration file")->required();
    app.add_option("--seed", seed_override, "override [run] seed");
    app.add_option("--workers", workers_override, "override [run] workers");

    auto* sample = app.add_subcommand("sample", "draw conditioned ensembles, write paths");
    auto* density = app.add_subcommand("density", "estimate a kernel or marginal density");
    auto* verify = app.add_subcommand("verify", "run the statistical test suites");
    auto* transform = app.add_subcommand("transform", "unit-diffusion reduction of an SDE");
    auto* report = app.add_subcommand("report", "summarize a previous run's outputs");

    std::string target = "h";
    density->add_option("--target", target, "h|h_mu|k|k_mu|q_up|q_down|p");
    std::string suites_arg = "all";
    verify->add_option("--suite", suites_arg, "comma-separated suite names or 'all'");

    CLI11_PARSE(app, argc, argv);

    return dispatch(
        [&]() -> int {
            hm::RunConfig cfg = hm::load_config(config_path);
            if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
            if (workers_override >= 0) cfg.workers = workers_override;
            if (sample->parsed()) return hm::run_sample(cfg);
            if (density->parsed()) return hm::run_density(cfg, target);
            if (verify->parsed()) {
                std::vector<std::string> suites;
                std::string cur;
                for (char c : suites_arg + ",") {
                    if (c == ',') {
                        if (!cur.empty()) suites.push_back(cur);
                        cur.clear();
                    } else {
                        cur += c;
                    }
                }
                return hm::run_verify(cfg, suites);
            }
            if (transform->parsed()) return hm::run_transform(cfg);
            if (report->parsed()) return hm::run_report(cfg);
            return 2;
        },
        verify->parsed());
}
