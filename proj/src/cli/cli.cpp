#include "ivrepro/cli/cli.hpp"

#include "ivrepro/error.hpp"
#include "ivrepro/pipeline/pipeline.hpp"
#include "ivrepro/version.hpp"

#include <CLI11.hpp>

#include <ostream>

namespace ivrepro::cli {

namespace fs = std::filesystem;
using pipeline::Stage;

namespace {

struct Invocation {
    std::optional<Stage> from;
    std::optional<Stage> until;
};

std::string stage_names() {
    std::string s;
    for (auto st : pipeline::kStages) s += (s.empty() ? "" : ", ") + std::string(pipeline::to_string(st));
    return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reproduces and stress-tests IV specifications from a replication package.", "ivrepro"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(kPipelineVersion));

    pipeline::PipelineConfig cfg;
    std::string study_id;
    std::string package_dir;
    std::string repair_config;
    app.add_option("--workspace", cfg.workspace, "Workspace root for this study")->required();
    app.add_option("--study-id", study_id, "Study identifier (defaults to the workspace folder name)");
    app.add_option("--paper-text", cfg.paper_text, "Pre-extracted paper text");
    app.add_option("--package-dir", package_dir, "Use a replication package already on disk instead of downloading");
    app.add_flag("--direct", cfg.direct, "Never execute author code; estimate from the data directly");
    app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    app.add_option("--iters", cfg.iters, "Bootstrap iterations")->capture_default_str();
    app.add_option("--max-obs", cfg.max_obs, "Observation cap for resampling")->capture_default_str();
    app.add_option("--timeout", cfg.timeout, "Hard timeout for author code, seconds")->capture_default_str();
    app.add_option("--cluster-limit", cfg.cluster_limit, "Largest cluster count for a full jackknife")->capture_default_str();
    app.add_option("--workers", cfg.workers, "Threads for bootstrap and jackknife")->capture_default_str();
    app.add_option("--repair-config", repair_config, "JSON file extending the repair rules");
    app.add_option("--stata", cfg.interpreters.stata, "Stata binary");
    app.add_option("--rscript", cfg.interpreters.rscript, "Rscript binary");
    app.add_option("--python", cfg.interpreters.python, "Python binary");

    Invocation inv;
    auto single = [&](const char* name, Stage from, Stage until, const char* help) {
        app.add_subcommand(name, help)->callback([&inv, from, until] { inv = {from, until}; });
    };
    single("fetch", Stage::Profile, Stage::Fetch, "Read the paper text and acquire the package");
    single("extract", Stage::Extract, Stage::Extract, "Find IV specifications in the scripts");
    single("clean", Stage::Clean, Stage::Clean, "Repair scripts and inject data exports");
    single("run", Stage::Run, Stage::Run, "Execute the cleaned scripts or load the data directly");
    single("diagnose", Stage::Diagnose, Stage::Diagnose, "Compute the diagnostic template");
    single("report", Stage::Report, Stage::Report, "Write the report and figures");
    app.add_subcommand("all", "Run every stage")->callback([&inv] { inv = {Stage::Profile, Stage::Report}; });
    std::string resume_stage;
    auto* resume = app.add_subcommand("resume", "Continue from a stage, reusing earlier outputs");
    resume->add_option("--stage", resume_stage, "One of: " + stage_names())->required();
    resume->callback([&] {
        const auto s = pipeline::stage_from_string(resume_stage);
        if (!s) throw CLI::ValidationError("--stage", "unknown stage '" + resume_stage + "'; expected one of " + stage_names());
        inv = {*s, Stage::Report};
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kPipelineVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    if (!package_dir.empty()) cfg.package_dir = fs::absolute(package_dir);
    if (!repair_config.empty()) cfg.repair_config = fs::absolute(repair_config);
    if (!cfg.paper_text.empty()) cfg.paper_text = fs::absolute(cfg.paper_text);

    try {
        pipeline::validate(cfg);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (study_id.empty()) study_id = fs::absolute(cfg.workspace).lexically_normal().filename().string();
        if (study_id.empty()) study_id = fs::absolute(cfg.workspace).lexically_normal().parent_path().filename().string();
        auto ws = pipeline::init_workspace(study_id, cfg.workspace);
        const auto records = pipeline::run_pipeline(ws, cfg, inv.from, nullptr, inv.until);
        int code = 0;
        for (const auto& r : records) {
            out << pipeline::to_string(r.stage) << ": " << pipeline::to_string(r.status);
            if (r.reused) out << " (reused)";
            out << "\n";
            if (r.status == pipeline::StageStatus::Failed) {
                err << pipeline::to_string(r.stage) << " failed: " << r.error->code << ": " << r.error->message << "\n";
                code = 1;
            }
        }
        if (code == 0) out << "outputs in " << ws.out().string() << "\n";
        return code;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace ivrepro::cli
