#include "ivrepro/pipeline/pipeline.hpp"

#include "ivrepro/error.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace ivrepro::pipeline {

using nlohmann::json;

namespace {

bool executable(const fs::path& p) { return ::access(p.c_str(), X_OK) == 0 && !fs::is_directory(p); }

std::string search_path(const std::string& name) {
    if (name.find('/') != std::string::npos) return executable(name) ? name : "";
    const char* path = std::getenv("PATH");
    if (!path) return "";
    std::string_view rest = path;
    while (!rest.empty()) {
        const auto colon = rest.find(':');
        const auto dir = rest.substr(0, colon);
        if (!dir.empty()) {
            const fs::path candidate = fs::path(std::string(dir)) / name;
            if (executable(candidate)) return candidate.string();
        }
        if (colon == std::string_view::npos) break;
        rest.remove_prefix(colon + 1);
    }
    return "";
}

std::string quote(const std::string& s) {
    if (s.find_first_of(" \t\"'\\$") == std::string::npos) return s;
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

}  // namespace

std::optional<std::string> ExecutionRecord::failure() const {
    if (timed_out) return "Timeout";
    if (exit_code != 0) return "NonZeroExit";
    return std::nullopt;
}

json to_json(const ExecutionRecord& r) {
    return {{"interpreter", std::string(to_string(r.interpreter))},
            {"command_line", r.command_line},
            {"exit_code", r.exit_code},
            {"duration", r.duration},
            {"stdout_log", r.stdout_log.string()},
            {"stderr_log", r.stderr_log.string()},
            {"timed_out", r.timed_out}};
}

std::string find_interpreter(Interpreter interpreter, const InterpreterPaths& paths) {
    std::string configured, fallback, label;
    switch (interpreter) {
        case Interpreter::StataBatch: {
            configured = paths.stata;
            if (configured.empty()) {
                const char* env = std::getenv("IVREPRO_STATA");
                if (env) configured = env;
            }
            label = "Stata (set IVREPRO_STATA or --stata)";
            break;
        }
        case Interpreter::RScript:
            configured = paths.rscript;
            fallback = "Rscript";
            label = "Rscript";
            break;
        case Interpreter::Python:
            configured = paths.python;
            fallback = "python3";
            label = "python3";
            break;
        case Interpreter::None: return "";
    }
    std::string found = configured.empty() ? "" : search_path(configured);
    if (found.empty() && configured.empty() && !fallback.empty()) found = search_path(fallback);
    if (found.empty()) fail(ErrorCode::InterpreterMissing, "no " + label + " binary found");
    return found;
}

ExecutionRecord run_external(const fs::path& script, Interpreter interpreter, int timeout_seconds, const Workspace& ws,
                             const InterpreterPaths& paths) {
    ExecutionRecord rec;
    rec.interpreter = interpreter;
    const std::string binary = find_interpreter(interpreter, paths);
    const fs::path script_abs = script.is_absolute() ? script : ws.work() / script;

    std::vector<std::string> argv;
    switch (interpreter) {
        case Interpreter::StataBatch: argv = {binary, "-b", "do", script_abs.string()}; break;
        case Interpreter::RScript: argv = {binary, "--vanilla", script_abs.string()}; break;
        case Interpreter::Python: argv = {binary, script_abs.string()}; break;
        case Interpreter::None: argv = {script_abs.string()}; break;
    }
    for (std::size_t i = 0; i < argv.size(); ++i) rec.command_line += (i ? " " : "") + quote(argv[i]);

    const std::string stem = script.stem().string();
    rec.stdout_log = ws.logs() / (stem + ".stdout.log");
    rec.stderr_log = ws.logs() / (stem + ".stderr.log");
    const int out_fd = ::open(rec.stdout_log.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    const int err_fd = ::open(rec.stderr_log.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (out_fd < 0 || err_fd < 0) {
        if (out_fd >= 0) ::close(out_fd);
        if (err_fd >= 0) ::close(err_fd);
        fail(ErrorCode::IoError, "cannot open execution logs in " + ws.logs().string());
    }

    std::vector<char*> cargv;
    for (auto& a : argv) cargv.push_back(a.data());
    cargv.push_back(nullptr);
    const std::string workdir = ws.work().string();

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(out_fd);
        ::close(err_fd);
        fail(ErrorCode::IoError, std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        // own process group so a timeout also reaches grandchildren
        ::setpgid(0, 0);
        ::dup2(out_fd, STDOUT_FILENO);
        ::dup2(err_fd, STDERR_FILENO);
        const int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        if (::chdir(workdir.c_str()) != 0) _exit(126);
        ::execv(cargv[0], cargv.data());
        _exit(127);
    }
    ::setpgid(pid, pid);
    ::close(out_fd);
    ::close(err_fd);

    const auto deadline = start + std::chrono::seconds(timeout_seconds);
    int status = 0;
    while (true) {
        const pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0 && errno != EINTR) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            rec.timed_out = true;
            ::kill(-pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    rec.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (rec.timed_out) {
        rec.exit_code = -1;
    } else if (WIFEXITED(status)) {
        rec.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        rec.exit_code = 128 + WTERMSIG(status);
    }
    return rec;
}

}  // namespace ivrepro::pipeline
