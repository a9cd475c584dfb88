#include "ivrepro/pipeline/pipeline.hpp"

#include "ivrepro/data/table.hpp"
#include "ivrepro/diagnostics/diagnostics.hpp"
#include "ivrepro/error.hpp"
#include "ivrepro/estimate/design.hpp"
#include "ivrepro/estimate/fit.hpp"
#include "ivrepro/janitor/janitor.hpp"
#include "ivrepro/parser/iv.hpp"
#include "ivrepro/report/report.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace ivrepro::pipeline {

using nlohmann::json;

namespace {

// Declared outputs per stage, relative to the workspace root. A resumed run
// requires these for every earlier stage.
std::vector<std::string> declared_artifacts(Stage s) {
    switch (s) {
        case Stage::Profile: return {"out/study_info.json"};
        case Stage::Fetch: return {"raw/manifest.json"};
        case Stage::Extract: return {"out/metadata.json"};
        case Stage::Clean: return {"out/cleaning_log.json", "out/export_plans.json"};
        case Stage::Run: return {"work/run.json"};
        case Stage::Diagnose: return {"out/diagnostics.json"};
        case Stage::Report: return {"out/report.md"};
    }
    return {};
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const auto t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) {
    try {
        return json::parse(slurp(p));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ValidationError, "malformed JSON in " + p.string() + ": " + e.what());
    }
}

void write_text(const fs::path& p, const std::string& text) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!(out << text)) fail(ErrorCode::IoError, "cannot write " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::vector<std::string> script_paths(const fs::path& package) {
    std::vector<std::string> out;
    if (!fs::is_directory(package)) return out;
    for (const auto& e : fs::recursive_directory_iterator(package)) {
        if (e.is_regular_file() && parser::language_for_path(e.path())) out.push_back(fs::relative(e.path(), package).generic_string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct TargetSpec {
    int index = 0;
    parser::IVSpecification spec;
};

std::vector<TargetSpec> load_targets(const Workspace& ws) {
    const auto meta = read_json(ws.out() / "metadata.json");
    std::vector<TargetSpec> out;
    for (const auto& s : meta.at("specs")) out.push_back({s.at("index").get<int>(), parser::spec_from_json(s.at("spec"))});
    return out;
}

Interpreter interpreter_for(parser::Language lang) {
    switch (lang) {
        case parser::Language::Stata: return Interpreter::StataBatch;
        case parser::Language::R: return Interpreter::RScript;
        case parser::Language::Python: return Interpreter::Python;
    }
    return Interpreter::None;
}

bool is_data_file(const fs::path& p) {
    const auto ext = p.extension().string();
    if (ext != ".csv" && ext != ".tab" && ext != ".tsv") return false;
    return p.filename().string().rfind("analysis_data_spec_", 0) != 0;
}

class Runner {
public:
    Runner(Workspace& ws, const PipelineConfig& cfg, acquire::HttpTransport* transport) : ws_(ws), cfg_(cfg), transport_(transport) {}

    std::vector<std::string> run(Stage s) {
        switch (s) {
            case Stage::Profile: return profile();
            case Stage::Fetch: return fetch();
            case Stage::Extract: return extract();
            case Stage::Clean: return clean();
            case Stage::Run: return execute();
            case Stage::Diagnose: return diagnose();
            case Stage::Report: return report();
        }
        return {};
    }

private:
    std::vector<std::string> profile() {
        acquire::StudyInfo info;
        if (!cfg_.paper_text.empty()) {
            info = acquire::extract_study_info(slurp(cfg_.paper_text), nullptr, !cfg_.package_dir);
        } else if (!cfg_.package_dir) {
            fail(ErrorCode::NoRepositoryUrl, "neither paper text nor a package directory was given");
        }
        write_json(ws_.out() / "study_info.json", acquire::to_json(info));
        return {"out/study_info.json"};
    }

    std::vector<std::string> fetch() {
        const auto dest = ws_.package();
        fs::remove_all(dest);
        fs::create_directories(dest);
        acquire::PackageManifest manifest;
        if (cfg_.package_dir) {
            if (!fs::is_directory(*cfg_.package_dir)) fail(ErrorCode::IoError, "package directory not found: " + cfg_.package_dir->string());
            fs::copy(*cfg_.package_dir, dest, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
            manifest = acquire::scan_package(dest, {acquire::RepositoryKind::Http, "manual", ""});
        } else {
            const auto info = acquire::study_info_from_json(read_json(ws_.out() / "study_info.json"));
            if (info.replication_url.empty()) fail(ErrorCode::NoRepositoryUrl, "study info has no replication URL; rerun with --package-dir");
            const auto ref = acquire::classify_repository(info.replication_url);
            std::unique_ptr<acquire::HttpTransport> owned;
            auto* t = transport_;
            if (!t) {
                owned = acquire::make_http_transport();
                t = owned.get();
            }
            manifest = acquire::fetch_package(ref, dest, *t);
        }
        if (const auto bad = acquire::verify_manifest(manifest, dest); !bad.empty()) {
            fail(ErrorCode::RetrievalFailed, "hash verification failed for " + bad.front());
        }
        write_json(ws_.raw() / "manifest.json", acquire::to_json(manifest));
        return {"raw/manifest.json"};
    }

    std::vector<std::string> extract() {
        const auto paths = script_paths(ws_.package());
        std::vector<parser::SourceScript> scripts;
        for (const auto& p : paths) scripts.push_back(parser::load_script(ws_.package() / p, ws_.package()));
        const auto result = parser::extract_specifications(scripts);
        const auto selected = parser::select_primary_specs(result.specs);
        if (selected.empty()) {
            std::string why = "no IV estimation command in " + std::to_string(paths.size()) + " scripts";
            if (!result.failures.empty()) why += "; unparsed: " + result.failures.front();
            fail(ErrorCode::NoSpecificationsFound, why);
        }
        json specs = json::array();
        for (std::size_t i = 0; i < selected.size(); ++i) specs.push_back({{"index", static_cast<int>(i) + 1}, {"spec", parser::to_json(selected[i])}});
        write_json(ws_.out() / "metadata.json", {{"pipeline_version", ws_.pipeline_version},
                                                 {"study_id", ws_.study_id},
                                                 {"scripts", paths},
                                                 {"candidates", result.specs.size()},
                                                 {"failures", result.failures},
                                                 {"specs", specs}});
        return {"out/metadata.json"};
    }

    std::vector<std::string> clean() {
        const auto targets = load_targets(ws_);
        fs::remove_all(ws_.work());
        fs::create_directories(ws_.work());
        fs::copy(ws_.package(), ws_.work(), fs::copy_options::recursive | fs::copy_options::overwrite_existing);

        janitor::RepairConfig rc = cfg_.repair_config ? janitor::load_repair_config(*cfg_.repair_config) : janitor::RepairConfig{};
        rc.package_files.clear();
        for (const auto& e : acquire::manifest_from_json(read_json(ws_.raw() / "manifest.json")).entries) rc.package_files.push_back(e.path);

        std::vector<janitor::CleaningLogEntry> log;
        json plans = json::array();
        for (const auto& path : script_paths(ws_.package())) {
            const auto original = parser::load_script(ws_.package() / path, ws_.package());
            std::vector<janitor::ExportPlan> file_plans;
            for (const auto& t : targets) {
                if (t.spec.source_file != path) continue;
                json entry{{"spec_index", t.index}, {"script", path}};
                try {
                    file_plans.push_back(janitor::plan_esample(original, t.spec, t.index));
                    entry["plan"] = janitor::to_json(file_plans.back());
                    entry["error"] = nullptr;
                } catch (const Error& e) {
                    entry["plan"] = nullptr;
                    entry["error"] = e.what();
                }
                plans.push_back(entry);
            }
            auto cleaned = janitor::clean_script(original, file_plans, rc);
            log.insert(log.end(), cleaned.log.begin(), cleaned.log.end());
            for (const auto& [index, why] : cleaned.failed) {
                for (auto& entry : plans) {
                    if (entry["spec_index"] != index) continue;
                    entry["plan"] = nullptr;
                    entry["error"] = why;
                }
            }
            const auto& text = cleaned.text;
            if (text != original.text) write_text(ws_.work() / path, text);
        }
        write_json(ws_.out() / "cleaning_log.json", janitor::to_json(log));
        write_json(ws_.out() / "export_plans.json", plans);
        return {"out/cleaning_log.json", "out/export_plans.json"};
    }

    // Author code writes analysis_data_spec_<k>.csv; direct mode looks for a
    // package table holding every term of the specification instead.
    std::vector<std::string> execute() {
        const auto targets = load_targets(ws_);
        const auto plans = read_json(ws_.out() / "export_plans.json");
        json executions = json::array();
        std::map<int, json> references;
        std::optional<Error> external_failure;
        std::string mode = cfg_.direct ? "direct" : "external";

        if (!cfg_.direct) {
            std::vector<std::pair<std::string, parser::Language>> scripts;
            for (const auto& p : plans) {
                if (p["plan"].is_null()) continue;
                const auto path = p["script"].get<std::string>();
                const auto lang = parser::language_for_path(path);
                if (lang && std::find_if(scripts.begin(), scripts.end(), [&](const auto& s) { return s.first == path; }) == scripts.end())
                    scripts.emplace_back(path, *lang);
            }
            for (const auto& [path, lang] : scripts) {
                ExecutionRecord rec;
                try {
                    rec = run_external(path, interpreter_for(lang), cfg_.timeout, ws_, cfg_.interpreters);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::InterpreterMissing) throw;
                    executions.push_back({{"script", path}, {"error", e.what()}});
                    mode = "direct";
                    continue;
                }
                std::string log_text = slurp(rec.stdout_log);
                const auto stata_log = ws_.work() / fs::path(path).filename().replace_extension(".log");
                if (lang == parser::Language::Stata && fs::exists(stata_log)) log_text += "\n" + slurp(stata_log);
                auto failure = rec.failure();
                static const std::regex stata_error(R"((^|\n)r\((\d+)\);)");
                if (!failure && lang == parser::Language::Stata && std::regex_search(log_text, stata_error)) failure = "NonZeroExit";
                json ej = to_json(rec);
                ej["script"] = path;
                if (failure) {
                    ej["error"] = *failure;
                    external_failure = Error(*failure == "Timeout" ? ErrorCode::Timeout : ErrorCode::NonZeroExit,
                                             path + " failed; see " + rec.stdout_log.filename().string());
                }
                try {
                    for (const auto& est : parser::parse_marked_log(log_text)) {
                        json r{{"coefficient", est.coefficient}, {"source", "marked_log"}};
                        r["std_error"] = est.standard_error ? json(*est.standard_error) : json(nullptr);
                        r["n_obs"] = est.n_obs ? json(*est.n_obs) : json(nullptr);
                        references[est.spec_index] = r;
                    }
                } catch (const Error&) {
                    // no markers: the run ended before any target command
                }
                executions.push_back(ej);
            }
        }

        json specs = json::array();
        bool any = false;
        for (const auto& t : targets) {
            json sj{{"index", t.index}};
            sj["reference"] = references.count(t.index) ? references[t.index] : json(nullptr);
            const std::string exported = "analysis_data_spec_" + std::to_string(t.index) + ".csv";
            try {
                std::string data;
                std::string source;
                if (fs::exists(ws_.work() / exported)) {
                    data = exported;
                    source = "exported";
                    auto table = data::read_delimited(ws_.work() / data);
                    const auto fit = estimate::fit_2sls(estimate::build_design(std::move(table), t.spec).bundle);
                    sj["direct"] = {{"coefficient", fit.second.coefficient}, {"std_error", fit.second.std_error}, {"n_obs", fit.second.n}};
                } else {
                    std::string last_error = "no delimited data file in the package";
                    for (const auto& e : data_files()) {
                        try {
                            auto table = data::read_delimited(ws_.work() / e);
                            const auto fit = estimate::fit_2sls(estimate::build_design(std::move(table), t.spec).bundle);
                            sj["direct"] = {{"coefficient", fit.second.coefficient}, {"std_error", fit.second.std_error}, {"n_obs", fit.second.n}};
                            data = e;
                            source = "discovered";
                            break;
                        } catch (const Error& err) {
                            last_error = e + ": " + err.what();
                        }
                    }
                    if (data.empty()) fail(ErrorCode::DatasetNotFound, "spec " + std::to_string(t.index) + ": " + last_error);
                }
                sj["data"] = data;
                sj["data_source"] = source;
                sj["error"] = nullptr;
                any = true;
            } catch (const Error& e) {
                sj["data"] = nullptr;
                sj["error"] = e.what();
            }
            specs.push_back(sj);
        }
        write_json(ws_.work() / "run.json", {{"pipeline_version", ws_.pipeline_version}, {"mode", mode}, {"executions", executions}, {"specs", specs}});
        if (!any) {
            if (external_failure) throw *external_failure;
            fail(ErrorCode::DatasetNotFound, specs.empty() ? "no specifications" : specs[0]["error"].get<std::string>());
        }
        return {"work/run.json"};
    }

    std::vector<std::string> data_files() const {
        std::vector<std::string> out;
        for (const auto& e : fs::recursive_directory_iterator(ws_.work())) {
            if (e.is_regular_file() && is_data_file(e.path())) out.push_back(fs::relative(e.path(), ws_.work()).generic_string());
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<std::string> diagnose() {
        const auto targets = load_targets(ws_);
        const auto run = read_json(ws_.work() / "run.json");
        diagnostics::DiagnosticsConfig dc;
        dc.iters = cfg_.iters;
        dc.seed = cfg_.seed;
        dc.max_obs = static_cast<Eigen::Index>(cfg_.max_obs);
        dc.cluster_limit = cfg_.cluster_limit;
        dc.workers = cfg_.workers;

        json specs = json::array();
        json failed = json::array();
        for (const auto& t : targets) {
            const auto it = std::find_if(run["specs"].begin(), run["specs"].end(), [&](const json& s) { return s["index"] == t.index; });
            if (it == run["specs"].end() || (*it)["data"].is_null()) {
                failed.push_back({{"spec_index", t.index}, {"error", it == run["specs"].end() ? "not run" : (*it)["error"]}});
                continue;
            }
            try {
                auto table = data::read_delimited(ws_.work() / (*it)["data"].get<std::string>());
                auto build = estimate::build_design(std::move(table), t.spec);
                auto d = diagnostics::run_diagnostics(build.bundle, dc, t.index);
                d.spec = parser::to_json(t.spec);
                d.nonlinear = t.spec.nonlinear;
                d.resolution = json::array();
                for (const auto& r : build.audit) d.resolution.push_back(resolve::to_json(r));
                if ((*it)["reference"].is_object()) {
                    json ref = (*it)["reference"];
                    const auto m = estimate::compare_estimates(ref["coefficient"].get<double>(), d.tsls.coefficient);
                    ref["tolerance"] = m.tolerance;
                    ref["pass"] = m.pass;
                    d.reference = ref;
                }
                diagnostics::evaluate(d);
                specs.push_back(diagnostics::to_json(d));
            } catch (const Error& e) {
                failed.push_back({{"spec_index", t.index}, {"error", e.what()}});
            }
        }
        write_json(ws_.out() / "diagnostics.json", {{"pipeline_version", ws_.pipeline_version},
                                                    {"study_id", ws_.study_id},
                                                    {"seed", cfg_.seed},
                                                    {"iters", cfg_.iters},
                                                    {"specs", specs},
                                                    {"failed", failed}});
        if (specs.empty()) fail(failed.empty() ? ErrorCode::NoSpecs : ErrorCode::StageFailed, failed.empty() ? "no specifications" : failed[0]["error"].dump());
        return {"out/diagnostics.json"};
    }

    std::vector<std::string> report() {
        const auto diag = read_json(ws_.out() / "diagnostics.json");
        std::vector<diagnostics::DiagnosticsBundle> bundles;
        for (const auto& s : diag.at("specs")) bundles.push_back(diagnostics::diagnostics_from_json(s));
        const auto info = acquire::study_info_from_json(read_json(ws_.out() / "study_info.json"));
        write_text(ws_.out() / "report.md", report::render_report(bundles, info));
        std::vector<std::string> artifacts{"out/report.md"};
        for (const auto& b : bundles) {
            for (const auto& f : report::emit_figures(b, ws_.out() / "figures")) {
                artifacts.push_back("out/figures/" + f.csv.filename().string());
                artifacts.push_back("out/figures/" + f.svg.filename().string());
            }
        }
        return artifacts;
    }

    Workspace& ws_;
    const PipelineConfig& cfg_;
    acquire::HttpTransport* transport_;
};

void append_log(const Workspace& ws, const StageRecord& r, const PipelineConfig& cfg) {
    json j = to_json(r);
    j["study_id"] = ws.study_id;
    j["config"] = to_json(cfg);
    std::ofstream out(ws.logs() / "stages.jsonl", std::ios::app | std::ios::binary);
    if (!(out << j.dump() << "\n")) fail(ErrorCode::IoError, "cannot append to the stage log");
}

}  // namespace

std::vector<StageRecord> run_pipeline(Workspace& ws, const PipelineConfig& config, std::optional<Stage> from_stage,
                                      acquire::HttpTransport* transport, std::optional<Stage> until) {
    validate(config);
    const auto first = from_stage.value_or(Stage::Profile);
    const auto last = until.value_or(Stage::Report);
    if (last < first) fail(ErrorCode::ValidationError, "last stage comes before the first");

    if (first != Stage::Profile) {
        const auto history = read_stage_log(ws);
        for (auto s : kStages) {
            if (s == first) break;
            const StageRecord* latest = nullptr;
            for (const auto& r : history)
                if (r.stage == s && !r.reused) latest = &r;
            if (!latest || latest->status != StageStatus::Ok) {
                fail(ErrorCode::ResumePrereqMissing, "stage " + std::string(to_string(s)) + " has no successful run to resume from");
            }
            for (const auto& a : declared_artifacts(s)) {
                if (!fs::exists(ws.root / a)) fail(ErrorCode::ResumePrereqMissing, "missing " + a + " from stage " + std::string(to_string(s)));
            }
        }
    }

    Runner runner(ws, config, transport);
    std::vector<StageRecord> records;
    std::optional<Stage> failed_at;
    for (auto s : kStages) {
        if (s > last) break;
        StageRecord r;
        r.stage = s;
        r.pipeline_version = ws.pipeline_version;
        r.started = timestamp();
        if (s < first) {
            r.status = StageStatus::Skipped;
            r.reused = true;
            r.artifacts = declared_artifacts(s);
        } else if (failed_at) {
            r.status = StageStatus::Skipped;
            r.error = StageError{"StageFailed", "skipped: stage " + std::string(to_string(*failed_at)) + " failed"};
        } else {
            try {
                r.artifacts = runner.run(s);
                r.status = StageStatus::Ok;
            } catch (const Error& e) {
                r.status = StageStatus::Failed;
                r.error = StageError{std::string(to_string(e.code())), e.message()};
            } catch (const std::exception& e) {
                r.status = StageStatus::Failed;
                r.error = StageError{"InternalError", e.what()};
            }
            if (r.status == StageStatus::Failed) failed_at = s;
        }
        r.ended = timestamp();
        append_log(ws, r, config);
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace ivrepro::pipeline
