#pragma once

#include "ivrepro/parser/script.hpp"

#include <json.hpp>

#include <map>

#include <optional>
#include <string>
#include <vector>

namespace ivrepro::parser {

enum class WeightKind { AWeight, PWeight, FWeight, Generic };

std::string_view to_string(WeightKind kind) noexcept;

struct Weight {
    WeightKind kind = WeightKind::Generic;
    std::string var;
    bool operator==(const Weight&) const = default;
};

/// Panel declared by xtset/tsset ahead of a call.
struct PanelDecl {
    std::string unit;
    std::string time;
    bool operator==(const PanelDecl&) const = default;
};

struct IVSpecification {
    std::string outcome;
    std::string treatment;
    std::vector<std::string> instruments;
    std::vector<std::string> controls;
    std::vector<std::string> fixed_effects;
    std::vector<std::string> cluster_vars;
    std::optional<Weight> weight;
    std::optional<std::string> if_condition;
    Language software = Language::Stata;
    std::string source_file;
    int line = 0;
    std::string command;
    std::optional<std::string> table_ref;

    std::string estimator;  // ivreg2, ivregress, feols, ...
    bool nonlinear = false;  // ivprobit / ivtobit
    bool wrapped = false;
    std::optional<PanelDecl> panel;
    /// Fixed effects requested through an option such as `fe` on xtivreg2.
    bool panel_fe = false;
};

/// A detected IV estimation call before its arguments are interpreted.
struct RawIVCall {
    std::string source_file;
    Language language = Language::Stata;
    std::string verb;
    std::string text;  // statement as written (continuations joined)
    std::size_t begin = 0;
    std::size_t end = 0;
    int first_line = 0;
    int last_line = 0;
    bool wrapped = false;
    bool nonlinear = false;
    bool manual = false;  // adjacent first-stage / predict / second-stage pattern
    DelimiterMode mode = DelimiterMode::Newline;
    std::optional<std::string> table_ref;
    std::optional<PanelDecl> panel;
    MacroTable macros;  // Stata macros in force at the call
    std::vector<std::string> unresolved_macros;
    /// R: named formulas assigned before the call. Python: unused.
    std::map<std::string, std::string> formulas;
    /// Manual 2SLS only: the first-stage regression text.
    std::string first_stage;
    /// R/Python: the estimation call itself, without any assignment around it.
    std::string expression;
    /// R/Python: cluster variables named by a later vcov/fit call on the model.
    std::vector<std::string> cluster_hint;
};

enum class EstimateSource { MarkedLog, Direct };

struct ExtractedEstimate {
    int spec_index = 0;
    double coefficient = 0;
    std::optional<double> standard_error;
    std::optional<long long> n_obs;
    EstimateSource source = EstimateSource::MarkedLog;
};

nlohmann::json to_json(const IVSpecification& spec);
IVSpecification spec_from_json(const nlohmann::json& j);

/// Terms compared after whitespace removal and lower-casing of operators.
std::string normalize_term(std::string_view term);

}  // namespace ivrepro::parser
