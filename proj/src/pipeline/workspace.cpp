#include "ivrepro/pipeline/pipeline.hpp"

#include "ivrepro/error.hpp"
#include "ivrepro/version.hpp"

#include <fstream>
#include <regex>
#include <sstream>

namespace ivrepro::pipeline {

using nlohmann::json;

namespace {

bool safe_study_id(const std::string& id) {
    if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '-' || c == '.'; });
}

}  // namespace

Workspace init_workspace(const std::string& study_id, const fs::path& root) {
    if (!safe_study_id(study_id)) fail(ErrorCode::InvalidStudyId, "study id must be non-empty and use [A-Za-z0-9._-]: '" + study_id + "'");
    Workspace ws{study_id, fs::absolute(root).lexically_normal(), kPipelineVersion};
    std::error_code ec;
    for (const auto& d : {ws.root, ws.raw(), ws.work(), ws.out(), ws.logs()}) {
        fs::create_directories(d, ec);
        if (ec) fail(ErrorCode::IoError, "cannot create " + d.string() + ": " + ec.message());
    }
    const auto stamp = ws.root / "workspace.json";
    json j{{"study_id", study_id}, {"pipeline_version", ws.pipeline_version}};
    std::ofstream out(stamp, std::ios::trunc);
    if (!(out << j.dump(2) << "\n")) fail(ErrorCode::IoError, "cannot write " + stamp.string());
    // directories can exist on a read-only mount; probe that writes land
    const auto probe = ws.logs() / ".probe";
    {
        std::ofstream p(probe);
        if (!(p << "ok")) fail(ErrorCode::IoError, "workspace is not writable: " + ws.root.string());
    }
    fs::remove(probe, ec);
    return ws;
}

std::string_view to_string(Stage s) noexcept {
    switch (s) {
        case Stage::Profile: return "profile";
        case Stage::Fetch: return "fetch";
        case Stage::Extract: return "extract";
        case Stage::Clean: return "clean";
        case Stage::Run: return "run";
        case Stage::Diagnose: return "diagnose";
        case Stage::Report: return "report";
    }
    return "";
}

std::string_view to_string(StageStatus s) noexcept {
    switch (s) {
        case StageStatus::Ok: return "ok";
        case StageStatus::Failed: return "failed";
        case StageStatus::Skipped: return "skipped";
    }
    return "";
}

std::optional<Stage> stage_from_string(std::string_view s) noexcept {
    for (auto st : kStages)
        if (to_string(st) == s) return st;
    return std::nullopt;
}

std::string_view to_string(Interpreter i) noexcept {
    switch (i) {
        case Interpreter::StataBatch: return "stata_batch";
        case Interpreter::RScript: return "r_script";
        case Interpreter::Python: return "python";
        case Interpreter::None: return "none";
    }
    return "";
}

json to_json(const StageRecord& r) {
    json j{{"stage", std::string(to_string(r.stage))},
           {"status", std::string(to_string(r.status))},
           {"started", r.started},
           {"ended", r.ended},
           {"artifacts", r.artifacts},
           {"reused", r.reused},
           {"pipeline_version", r.pipeline_version}};
    j["error"] = r.error ? json{{"code", r.error->code}, {"message", r.error->message}} : json(nullptr);
    return j;
}

StageRecord stage_record_from_json(const json& j) {
    try {
        StageRecord r;
        const auto stage = stage_from_string(j.at("stage").get<std::string>());
        if (!stage) fail(ErrorCode::ValidationError, "unknown stage in log");
        r.stage = *stage;
        const auto status = j.at("status").get<std::string>();
        if (status == "ok") {
            r.status = StageStatus::Ok;
        } else if (status == "failed") {
            r.status = StageStatus::Failed;
        } else if (status == "skipped") {
            r.status = StageStatus::Skipped;
        } else {
            fail(ErrorCode::ValidationError, "unknown status in log: " + status);
        }
        r.started = j.at("started").get<std::string>();
        r.ended = j.at("ended").get<std::string>();
        r.artifacts = j.value("artifacts", std::vector<std::string>{});
        r.reused = j.value("reused", false);
        r.pipeline_version = j.value("pipeline_version", "");
        if (j.contains("error") && !j["error"].is_null()) r.error = StageError{j["error"].value("code", ""), j["error"].value("message", "")};
        return r;
    } catch (const json::exception& e) {
        fail(ErrorCode::ValidationError, std::string("malformed stage record: ") + e.what());
    }
}

std::vector<StageRecord> read_stage_log(const Workspace& ws) {
    std::vector<StageRecord> out;
    std::ifstream in(ws.logs() / "stages.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(stage_record_from_json(json::parse(line)));
    }
    return out;
}

json to_json(const PipelineConfig& c) {
    json j{{"seed", c.seed},
           {"iters", c.iters},
           {"max_obs", c.max_obs},
           {"timeout", c.timeout},
           {"cluster_limit", c.cluster_limit},
           {"workers", c.workers},
           {"workspace", c.workspace.string()},
           {"paper_text", c.paper_text.string()},
           {"direct", c.direct},
           {"interpreters", {{"stata", c.interpreters.stata}, {"rscript", c.interpreters.rscript}, {"python", c.interpreters.python}}}};
    j["package_dir"] = c.package_dir ? json(c.package_dir->string()) : json(nullptr);
    j["repair_config"] = c.repair_config ? json(c.repair_config->string()) : json(nullptr);
    return j;
}

void validate(const PipelineConfig& c) {
    auto positive = [](const char* name, long long v) {
        if (v <= 0) fail(ErrorCode::ValidationError, std::string(name) + " must be positive");
    };
    if (c.seed == 0) fail(ErrorCode::ValidationError, "seed must be positive");
    positive("iters", c.iters);
    positive("max_obs", c.max_obs);
    positive("timeout", c.timeout);
    positive("cluster_limit", c.cluster_limit);
    positive("workers", c.workers);
}

void append_resolution(const ResolutionEntry& e, const fs::path& kb) {
    static const std::regex iso(R"(\d{4}-\d{2}-\d{2})");
    if (!std::regex_match(e.date, iso)) fail(ErrorCode::ValidationError, "resolution date must be YYYY-MM-DD");
    const std::pair<const char*, const std::string*> fields[] = {
        {"title", &e.title}, {"context", &e.context}, {"problem", &e.problem}, {"fix", &e.fix}, {"impact", &e.impact}};
    for (const auto& [name, value] : fields) {
        if (value->find_first_not_of(" \t\r\n") == std::string::npos) fail(ErrorCode::ValidationError, std::string("resolution ") + name + " is empty");
    }
    auto one_line = [](std::string s) {
        for (auto& c : s)
            if (c == '\n' || c == '\r') c = ' ';
        return s;
    };
    std::ostringstream block;
    block << "### " << e.date << " " << one_line(e.title) << "\n\n"
          << "- Context: " << one_line(e.context) << "\n"
          << "- Problem: " << one_line(e.problem) << "\n"
          << "- Fix: " << one_line(e.fix) << "\n"
          << "- Impact: " << one_line(e.impact) << "\n\n";
    if (kb.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(kb.parent_path(), ec);
    }
    std::ofstream out(kb, std::ios::app | std::ios::binary);
    if (!(out << block.str())) fail(ErrorCode::IoError, "cannot append to " + kb.string());
}

std::vector<ResolutionEntry> read_resolutions(const fs::path& kb) {
    std::ifstream in(kb);
    if (!in) fail(ErrorCode::IoError, "cannot read " + kb.string());
    static const std::regex head(R"(^### (\d{4}-\d{2}-\d{2}) (.+)$)");
    std::vector<ResolutionEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_match(line, m, head)) {
            out.push_back({m[1], m[2], "", "", "", ""});
            continue;
        }
        if (out.empty()) continue;
        auto take = [&](const char* label, std::string& field) {
            const std::string p = std::string("- ") + label + ": ";
            if (line.rfind(p, 0) == 0) field = line.substr(p.size());
        };
        take("Context", out.back().context);
        take("Problem", out.back().problem);
        take("Fix", out.back().fix);
        take("Impact", out.back().impact);
    }
    return out;
}

}  // namespace ivrepro::pipeline
