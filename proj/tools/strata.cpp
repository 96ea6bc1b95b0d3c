// Pipeline driver. Exit codes: 0 ok, 2 configuration error, 3 stage failure.

#include "strata/core/errors.hpp"
#include "strata/core/parallel.hpp"
#include "strata/io/files.hpp"
#include "strata/pipeline/exchange.hpp"
#include "strata/pipeline/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace strata;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kStageFailure = 3;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> stage;
    std::optional<int> threads;
    std::string out = "bundle";
};

pipeline::PipelineConfig load(const Common& o)
{
    nlohmann::json j = nlohmann::json::object();
    if (!o.config.empty()) {
        try {
            j = nlohmann::json::parse(io::read_text(o.config));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config: ") + e.what());
        } catch (const IoError& e) {
            throw ConfigError(e.what());
        }
    }
    pipeline::PipelineConfig c = pipeline::PipelineConfig::from_json(j);
    if (o.seed)
        c.seed = *o.seed;
    if (o.threads)
        c.threads = *o.threads;
    return c;
}

int report(const pipeline::RunResult& r)
{
    for (const auto& s : r.stages) {
        std::cout << s.name << ": " << s.status;
        if (!s.hash.empty())
            std::cout << " " << s.hash.substr(0, 16);
        if (!s.error.empty())
            std::cout << " (" << s.error << ")";
        std::cout << "\n";
    }
    return r.ok ? kOk : kStageFailure;
}

int run_stages(const Common& o, const std::vector<std::string>& stages)
{
    const pipeline::PipelineConfig c = load(o);
    pipeline::RunResult last;
    for (const auto& s : stages) {
        last = pipeline::run_pipeline(c, o.out, s);
        const auto it = std::find_if(last.stages.begin(), last.stages.end(),
                                     [&](const pipeline::StageRecord& r) { return r.name == s; });
        if (it != last.stages.end() && it->status == "failed")
            return report(last);
    }
    return report(last);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"strata: layered scene synthesis pipeline"};
    app.require_subcommand(1);
    Common o;
    app.add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "Seed (overrides the config)");
    app.add_option("--stage", o.stage, "Run only this stage (pipeline subcommand)");
    app.add_option("--threads", o.threads, "Worker cap; never changes output bits")->check(CLI::NonNegativeNumber);
    app.add_option("--out", o.out, "Bundle directory");

    auto* generate = app.add_subcommand("generate", "Anchor and scale-space cascade");
    std::vector<std::pair<CLI::App*, std::string>> single;
    for (const char* s : {"lift", "render", "inpaint", "bake", "metrics", "qa"})
        single.push_back({app.add_subcommand(s, std::string("Run the ") + s + " stage from the bundle"), s});
    auto* pipe = app.add_subcommand("pipeline", "Run every enabled stage");
    auto* exp = app.add_subcommand("export", "Export the baked mesh");
    std::string format = "glb";
    exp->add_option("--format", format, "obj or glb");
    auto* val = app.add_subcommand("validate", "Structural glTF binary check");
    std::string glb;
    val->add_option("file", glb, "GLB file")->required();

    for (auto* sub : app.get_subcommands({}))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (o.threads)
            parallel::set_max_threads(*o.threads);
        if (generate->parsed())
            return run_stages(o, {"anchor", "cascade"});
        for (const auto& [sub, name] : single)
            if (sub->parsed())
                return run_stages(o, {name});
        if (pipe->parsed()) {
            const pipeline::PipelineConfig c = load(o);
            return report(pipeline::run_pipeline(c, o.out, o.stage));
        }
        if (exp->parsed()) {
            const pipeline::PipelineConfig c = load(o);
            c.validate(pipeline::default_registry());
            const TexturedMesh mesh = pipeline::load_baked_mesh(c, o.out);
            for (const auto& p : pipeline::export_mesh(mesh, format, fs::path(o.out) / "export", "scene"))
                std::cout << p.string() << "\n";
            return kOk;
        }
        if (val->parsed()) {
            const auto errors = pipeline::validate_glb(io::read_bytes(glb));
            for (const auto& e : errors)
                std::cerr << glb << ": " << e << "\n";
            if (errors.empty())
                std::cout << glb << ": valid\n";
            return errors.empty() ? kOk : kStageFailure;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfigError;
    } catch (const RegistryError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return kStageFailure;
    }
    return kOk;
}
