#pragma once

#include <algorithm>
#include <exception>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "cmalab/experiment.hpp"
#include "cmalab/grid.hpp"
#include "cmalab/toric.hpp"

namespace cmalab::detail {

/// Everything a recipe may touch while running.
class RunContext {
public:
    RunContext(std::filesystem::path dir, bool single_thread) : dir_(std::move(dir)), single_thread_(single_thread) {}

    bool single_thread() const { return single_thread_; }
    Json& summary() { return summary_; }

    void write_text(const std::string& name, const std::string& content) const;
    void write_field(const std::string& name, const ScalarField& f) const;
    void write_sample(const std::string& name, const ConvexSample& s) const;

    /// Marks the run as non-converged; the first reason wins.
    void fail(const std::string& reason) {
        if (failure_.empty()) failure_ = reason;
    }
    const std::string& failure() const { return failure_; }

private:
    std::filesystem::path dir_;
    bool single_thread_;
    Json summary_ = Json::object();
    std::string failure_;
};

struct Recipe {
    std::string name;
    std::string description;
    Json defaults;                           ///< recipe-specific keys only
    void (*validate)(Json& cfg);             ///< completes derived values, throws ConfigError
    void (*run)(const Json& cfg, RunContext& ctx);
};

/// Sorted by name.
const std::vector<Recipe>& recipe_registry();
const Recipe& find_recipe(const std::string& name);

/// Runs fn(0..n-1), concurrently unless `serial`. Each index writes only its
/// own slot, so results do not depend on scheduling. The exception of the
/// lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, bool serial, Fn&& fn) {
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (serial || n < 2 || hw < 2) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(n, hw);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t k = w; k < n; k += workers) {
                try {
                    fn(k);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace cmalab::detail
