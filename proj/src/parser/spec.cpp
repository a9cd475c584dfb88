#include "ivrepro/parser/spec.hpp"

#include "ivrepro/error.hpp"

#include <cctype>
#include <cstring>

namespace ivrepro::parser {

std::string_view to_string(WeightKind kind) noexcept {
    switch (kind) {
        case WeightKind::AWeight: return "aweight";
        case WeightKind::PWeight: return "pweight";
        case WeightKind::FWeight: return "fweight";
        case WeightKind::Generic: return "generic";
    }
    return "generic";
}

namespace {

WeightKind weight_kind_from(const std::string& s) {
    if (s == "aweight") return WeightKind::AWeight;
    if (s == "pweight") return WeightKind::PWeight;
    if (s == "fweight") return WeightKind::FWeight;
    return WeightKind::Generic;
}

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const IVSpecification& spec) {
    nlohmann::json j = nlohmann::json::object();
    j["outcome"] = spec.outcome;
    j["treatment"] = spec.treatment;
    j["instruments"] = spec.instruments;
    j["controls"] = spec.controls;
    j["fixed_effects"] = spec.fixed_effects;
    j["cluster_vars"] = spec.cluster_vars;
    if (spec.weight) {
        j["weight"] = {{"kind", std::string(to_string(spec.weight->kind))}, {"var", spec.weight->var}};
    } else {
        j["weight"] = nullptr;
    }
    j["if_condition"] = optional_json(spec.if_condition);
    j["software"] = std::string(to_string(spec.software));
    j["source_file"] = spec.source_file;
    j["line"] = spec.line;
    j["command"] = spec.command;
    j["table_ref"] = optional_json(spec.table_ref);
    j["estimator"] = spec.estimator;
    j["nonlinear"] = spec.nonlinear;
    j["wrapped"] = spec.wrapped;
    if (spec.panel) {
        j["panel"] = {{"unit", spec.panel->unit}, {"time", spec.panel->time}};
    } else {
        j["panel"] = nullptr;
    }
    j["panel_fe"] = spec.panel_fe;
    return j;
}

IVSpecification spec_from_json(const nlohmann::json& j) {
    try {
        IVSpecification s;
        s.outcome = j.at("outcome").get<std::string>();
        s.treatment = j.at("treatment").get<std::string>();
        s.instruments = j.at("instruments").get<std::vector<std::string>>();
        s.controls = j.at("controls").get<std::vector<std::string>>();
        s.fixed_effects = j.value("fixed_effects", std::vector<std::string>{});
        s.cluster_vars = j.value("cluster_vars", std::vector<std::string>{});
        if (j.contains("weight") && !j["weight"].is_null()) {
            s.weight = Weight{weight_kind_from(j["weight"].at("kind").get<std::string>()),
                              j["weight"].at("var").get<std::string>()};
        }
        if (j.contains("if_condition") && !j["if_condition"].is_null()) s.if_condition = j["if_condition"].get<std::string>();
        s.software = language_from_string(j.value("software", std::string("stata"))).value_or(Language::Stata);
        s.source_file = j.value("source_file", std::string());
        s.line = j.value("line", 0);
        s.command = j.value("command", std::string());
        if (j.contains("table_ref") && !j["table_ref"].is_null()) s.table_ref = j["table_ref"].get<std::string>();
        s.estimator = j.value("estimator", std::string());
        s.nonlinear = j.value("nonlinear", false);
        s.wrapped = j.value("wrapped", false);
        if (j.contains("panel") && !j["panel"].is_null()) {
            s.panel = PanelDecl{j["panel"].at("unit").get<std::string>(), j["panel"].at("time").get<std::string>()};
        }
        s.panel_fe = j.value("panel_fe", false);
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ValidationError, std::string("malformed specification: ") + e.what());
    }
}

std::string normalize_term(std::string_view term) {
    std::string out;
    for (char c : term) {
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    // operator prefixes are case-insensitive in Stata: L4.x == l4.x
    const auto dot = out.find('.');
    if (dot != std::string::npos && dot > 0) {
        bool op = true;
        for (std::size_t i = 0; i < dot; ++i) {
            const char c = out[i];
            if (!(std::isdigit(static_cast<unsigned char>(c)) || std::strchr("LFDSlfdsiIcCbB#()/", c))) op = false;
        }
        if (op) {
            for (std::size_t i = 0; i < dot; ++i) out[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[i])));
        }
    }
    return out;
}

}  // namespace ivrepro::parser
