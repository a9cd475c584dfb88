#pragma once

#include "ivrepro/parser/script.hpp"
#include "ivrepro/parser/spec.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ivrepro::janitor {

enum class RuleAction { CommentOut, Rewrite, Inject };

struct RepairRule {
    std::string id;
    int error_class = 0;  // 1..10
    std::string matcher;
    RuleAction action = RuleAction::CommentOut;
};

/// Every rule the janitor can apply; ids are unique.
const std::vector<RepairRule>& rule_registry();

struct CleaningLogEntry {
    std::string file;
    int line = 0;  // 1-based, in the file before this pass
    std::string rule_id;
    std::string original;
    std::string replacement;
};

nlohmann::json to_json(const std::vector<CleaningLogEntry>& log);

struct RepairConfig {
    std::vector<std::string> deprecated_packages{"rgdal", "rgeos", "maptools"};
    std::vector<std::string> stata_graphics{"graph",   "twoway",  "scatter",   "line",       "histogram", "kdensity",
                                            "cibplot", "marginsplot", "binscatter", "spmap", "coefplot",  "grc1leg",
                                            "rdplot",  "lowess",  "graph2tex"};
    std::vector<std::string> stata_interactive{"pause", "browse", "edit", "more", "help", "db", "window"};
    std::vector<std::string> stata_output{"esttab", "estout",   "outreg2", "outreg", "tabout", "texsave",
                                          "logout", "asdoc",    "putexcel", "putdocx", "log",   "cmdlog"};
    std::vector<std::string> r_calls{"plot",     "ggplot", "ggsave",  "hist",      "barplot", "boxplot",    "pdf",
                                     "png",      "jpeg",   "dev.off", "View",      "browser", "readline",   "modelsummary",
                                     "stargazer", "texreg", "screenreg", "htmlreg"};
    std::vector<std::string> python_calls{"plt.show", "plt.savefig", "plt.plot", "plt.scatter", "plt.hist", "input", "breakpoint"};
    /// Files of the package, relative and '/' separated; used to relativize
    /// absolute paths and to recover misnamed do-files. May be empty.
    std::vector<std::string> package_files;
};

/// Reads optional keys deprecated_packages, stata_graphics, stata_interactive,
/// stata_output, r_calls, python_calls from a JSON file.
RepairConfig load_repair_config(const std::filesystem::path& path);

struct RepairResult {
    std::string text;
    std::vector<CleaningLogEntry> log;
};

RepairResult apply_repair_rules(const parser::SourceScript& script, const RepairConfig& config);

/// Stata only: `capture drop X` directly followed by `gen X = ...` becomes a
/// backup, generate, restore-on-failure sequence.
RepairResult rewrite_capture_drop(const parser::SourceScript& script);

enum class ExportMode { PostCommand, EsampleFullPanel };

struct ExportPlan {
    int spec_index = 0;
    parser::Language language = parser::Language::Stata;
    std::string anchor;  // raw text of the target command
    int line = 0;        // where the target starts in the original script
    ExportMode mode = ExportMode::PostCommand;
    std::optional<std::string> flag_column;
    std::optional<std::string> reestimation;
    bool restore_before = false;  // stored e(sample) was invalidated ahead of the target
    std::string treatment;
    std::string data_object;  // R/Python data frame; empty for Stata
    std::string model_object;  // R/Python variable holding the fit, when assigned

    [[nodiscard]] std::string export_file() const;
};

nlohmann::json to_json(const ExportPlan& plan);

/// Locates the target command by the spec's line. Throws EsampleSourceNotFound
/// when `if e(sample)` has no earlier estimation command, AnchorNotFound when
/// no command starts on the spec's line.
ExportPlan plan_esample(const parser::SourceScript& script, const parser::IVSpecification& spec, int spec_index);

/// Inserts the export block after the complete command containing the
/// anchor. A block already present for the plan's spec is left alone.
/// Throws AnchorNotFound or AnchorAmbiguous.
std::string inject_export(const std::string& text, const ExportPlan& plan);

/// Comments out IV commands other than the targets (given by anchor text).
RepairResult comment_nontarget_iv(const parser::SourceScript& script, const std::vector<std::string>& target_anchors);

struct CleanResult {
    std::string text;
    std::vector<CleaningLogEntry> log;
    std::vector<std::pair<int, std::string>> failed;  // spec index, reason the block could not be placed
};

/// Whole cleaning pass over one script: repair rules, then commenting of
/// non-target IV commands and one export block per plan.
CleanResult clean_script(const parser::SourceScript& original, const std::vector<ExportPlan>& plans, const RepairConfig& config);

/// Marker line printed by the export block.
std::string marker_prefix(int spec_index);

}  // namespace ivrepro::janitor
