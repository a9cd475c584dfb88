#pragma once

#include "ivrepro/acquire/acquisition.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ivrepro::pipeline {

namespace fs = std::filesystem;

struct Workspace {
    std::string study_id;
    fs::path root;
    std::string pipeline_version;

    [[nodiscard]] fs::path raw() const { return root / "raw"; }
    [[nodiscard]] fs::path work() const { return root / "work"; }
    [[nodiscard]] fs::path out() const { return root / "out"; }
    [[nodiscard]] fs::path logs() const { return root / "logs"; }
    [[nodiscard]] fs::path package() const { return raw() / "package"; }
};

/// Creates root/{raw,work,out,logs} and the version stamp. Safe to repeat.
Workspace init_workspace(const std::string& study_id, const fs::path& root);

enum class Stage { Profile, Fetch, Extract, Clean, Run, Diagnose, Report };
enum class StageStatus { Ok, Failed, Skipped };

inline constexpr Stage kStages[] = {Stage::Profile, Stage::Fetch,    Stage::Extract, Stage::Clean,
                                    Stage::Run,     Stage::Diagnose, Stage::Report};

std::string_view to_string(Stage s) noexcept;
std::string_view to_string(StageStatus s) noexcept;
std::optional<Stage> stage_from_string(std::string_view s) noexcept;

struct StageError {
    std::string code;
    std::string message;
};

struct StageRecord {
    Stage stage = Stage::Profile;
    StageStatus status = StageStatus::Skipped;
    std::string started;
    std::string ended;
    std::optional<StageError> error;
    std::vector<std::string> artifacts;  // relative to the workspace root
    bool reused = false;                 // skipped because an earlier run's outputs were kept
    std::string pipeline_version;
};

nlohmann::json to_json(const StageRecord& r);
StageRecord stage_record_from_json(const nlohmann::json& j);

/// Every record of logs/stages.jsonl, oldest first.
std::vector<StageRecord> read_stage_log(const Workspace& ws);

enum class Interpreter { StataBatch, RScript, Python, None };

std::string_view to_string(Interpreter i) noexcept;

struct InterpreterPaths {
    std::string stata;    // falls back to $IVREPRO_STATA
    std::string rscript;  // falls back to Rscript on PATH
    std::string python;   // falls back to python3 on PATH
};

struct PipelineConfig {
    std::uint64_t seed = 42;
    int iters = 1000;
    long long max_obs = 100000;
    int timeout = 600;
    int cluster_limit = 2000;
    int workers = 1;
    fs::path workspace;
    fs::path paper_text;
    std::optional<fs::path> package_dir;  // manual supply, skips downloading
    bool direct = false;                   // never execute author code
    std::optional<fs::path> repair_config;
    InterpreterPaths interpreters;
};

nlohmann::json to_json(const PipelineConfig& c);

/// Throws ValidationError when a numeric field is not positive.
void validate(const PipelineConfig& c);

struct ExecutionRecord {
    Interpreter interpreter = Interpreter::None;
    std::string command_line;
    int exit_code = -1;
    double duration = 0;
    fs::path stdout_log;
    fs::path stderr_log;
    bool timed_out = false;

    /// Timeout or NonZeroExit when the run did not succeed.
    [[nodiscard]] std::optional<std::string> failure() const;
};

nlohmann::json to_json(const ExecutionRecord& r);

/// Resolves the interpreter binary; throws InterpreterMissing.
std::string find_interpreter(Interpreter interpreter, const InterpreterPaths& paths);

/// Runs script in batch mode with working directory ws.work(); output goes to
/// logs/<script stem>.{stdout,stderr}.log. Interpreter::None executes the
/// script itself. Only InterpreterMissing is thrown; timeouts and failed exits
/// are reported in the record.
ExecutionRecord run_external(const fs::path& script, Interpreter interpreter, int timeout_seconds, const Workspace& ws,
                             const InterpreterPaths& paths = {});

struct ResolutionEntry {
    std::string date;  // YYYY-MM-DD
    std::string title;
    std::string context;
    std::string problem;
    std::string fix;
    std::string impact;
};

/// Appends one block to the knowledge base. Throws ValidationError on an
/// empty field or malformed date, IoError when the file cannot be written.
void append_resolution(const ResolutionEntry& entry, const fs::path& kb);

/// Parses every block of a knowledge-base file.
std::vector<ResolutionEntry> read_resolutions(const fs::path& kb);

/// Runs the stages in order. With from_stage, earlier stages must have ok
/// records and their artifacts on disk (ResumePrereqMissing otherwise) and are
/// recorded as reused. After a failure the remaining stages are skipped.
/// Stages after `until` are not run or recorded. The transport is only needed
/// when the package is downloaded.
std::vector<StageRecord> run_pipeline(Workspace& ws, const PipelineConfig& config, std::optional<Stage> from_stage = {},
                                      acquire::HttpTransport* transport = nullptr, std::optional<Stage> until = {});

}  // namespace ivrepro::pipeline
