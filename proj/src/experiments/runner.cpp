#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "cmalab/field_io.hpp"
#include "recipes.hpp"

namespace cmalab {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMarker = ".cmalab-run";

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

fs::path output_root(const ExperimentConfig& cfg, const RunOptions& opt) {
    if (opt.output_root) return *opt.output_root;
    const std::string from_cfg = cfg.resolved["output_root"].get<std::string>();
    if (!from_cfg.empty()) return from_cfg;
    if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
    return "runs";
}

// MANIFEST lists "<sha256>  <name>" for every artifact, sorted by name.
void write_manifest(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string n = e.path().filename().string();
        if (e.is_regular_file() && n != "MANIFEST" && n != kMarker) names.push_back(n);
    }
    std::sort(names.begin(), names.end());
    std::string body;
    for (const auto& n : names) body += sha256_file(dir / n) + "  " + n + "\n";
    write_file(dir / "MANIFEST", body);
}

}  // namespace

namespace detail {

void RunContext::write_text(const std::string& name, const std::string& content) const { write_file(dir_ / name, content); }

void RunContext::write_field(const std::string& name, const ScalarField& f) const {
    std::ostringstream os;
    write_field_csv(os, f);
    write_file(dir_ / name, os.str());
}

void RunContext::write_sample(const std::string& name, const ConvexSample& s) const {
    std::ostringstream os;
    write_sample_csv(os, s);
    write_file(dir_ / name, os.str());
}

}  // namespace detail

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int k = 0; k < len; ++k) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
    return hex.str();
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
    RunResult res;
    res.directory = output_root(cfg, opt) / cfg.name;
    const fs::path& dir = res.directory;

    std::error_code ec;
    if (fs::exists(dir)) {
        const bool ours = fs::exists(dir / kMarker);
        if (!ours && !fs::is_empty(dir, ec)) {
            res.exit_code = kConfigFailure;
            res.message = "output directory '" + dir.string() + "' exists and was not written by a run; refusing to replace it";
            return res;
        }
        fs::remove_all(dir, ec);
    }
    fs::create_directories(dir, ec);
    if (ec) {
        res.exit_code = kConfigFailure;
        res.message = "cannot create '" + dir.string() + "': " + ec.message();
        return res;
    }
    write_file(dir / kMarker, "artifact directory written by cmalab\n");
    write_file(dir / "config.json", cfg.resolved.dump(2) + "\n");

    detail::RunContext ctx(dir, opt.single_thread);
    const detail::Recipe& recipe = detail::find_recipe(cfg.recipe);
    Json& sum = ctx.summary();
    sum["name"] = cfg.name;
    sum["recipe"] = cfg.recipe;
    try {
        recipe.run(cfg.resolved, ctx);
    } catch (const std::exception& e) {
        // Anything thrown after validation is a defect of the inputs the
        // validator could not foresee; keep what exists and say why.
        write_file(dir / "error.log", std::string(e.what()) + "\n");
        ctx.fail(std::string("error: ") + e.what());
        res.exit_code = kConfigFailure;
    }
    sum["status"] = ctx.failure().empty() ? "ok" : "failed";
    if (!ctx.failure().empty()) sum["failure"] = ctx.failure();
    write_file(dir / "summary.json", sum.dump(2) + "\n");
    if (!ctx.failure().empty()) {
        write_file(dir / "FAILED", ctx.failure() + "\n");
        if (res.exit_code == kSuccess) res.exit_code = kNonConvergence;
        res.message = ctx.failure();
    }
    write_manifest(dir);
    res.summary = sum;
    return res;
}

}  // namespace cmalab
