#include "ivrepro/diagnostics/diagnostics.hpp"

#include "ivrepro/error.hpp"
#include "ivrepro/version.hpp"

#include <cmath>

namespace ivrepro::diagnostics {

std::string_view to_string(WarningFlag flag) noexcept {
    switch (flag) {
        case WarningFlag::WeakInstrument: return "WeakInstrument";
        case WarningFlag::ARInsignificant: return "ARInsignificant";
        case WarningFlag::JackknifeSensitive: return "JackknifeSensitive";
        case WarningFlag::BootCIncludesZero: return "BootCIncludesZero";
        case WarningFlag::SignDisagreement: return "SignDisagreement";
    }
    return "";
}

std::string_view to_string(Rating rating) noexcept {
    switch (rating) {
        case Rating::High: return "HIGH";
        case Rating::Moderate: return "MODERATE";
        case Rating::Low: return "LOW";
        case Rating::VeryLow: return "VERY_LOW";
    }
    return "";
}

Rating rating_for(std::size_t warnings) noexcept {
    if (warnings == 0) return Rating::High;
    if (warnings <= 2) return Rating::Moderate;
    if (warnings <= 4) return Rating::Low;
    return Rating::VeryLow;
}

std::optional<Interval> tf_interval(const DiagnosticsBundle& b) {
    if (!b.tf.applicable || !b.tf.adjusted_critical) return std::nullopt;
    const double c = *b.tf.adjusted_critical;
    return Interval{b.tsls.coefficient - c * b.tsls.std_error, b.tsls.coefficient + c * b.tsls.std_error};
}

void evaluate(DiagnosticsBundle& b) {
    b.warnings.clear();
    auto missing = [&](const char* name) {
        if (std::find(b.incomplete.begin(), b.incomplete.end(), name) == b.incomplete.end()) b.incomplete.push_back(name);
    };
    if (b.effective_F) {
        if (*b.effective_F < 10) b.warnings.push_back(WarningFlag::WeakInstrument);
    } else {
        missing("effective_F");
    }
    if (b.ar) {
        if (b.ar->p_value >= 0.05) b.warnings.push_back(WarningFlag::ARInsignificant);
    } else {
        missing("ar");
    }
    if (b.jackknife) {
        if (b.jackknife->relative_shift > 0.20) b.warnings.push_back(WarningFlag::JackknifeSensitive);
    } else {
        missing("jackknife");
    }
    if (b.bootstrap) {
        if (b.bootstrap->boot_c.low <= 0 && 0 <= b.bootstrap->boot_c.high) b.warnings.push_back(WarningFlag::BootCIncludesZero);
    } else {
        missing("bootstrap");
    }
    const bool opposite = (b.tsls.coefficient > 0 && b.ols.coefficient < 0) || (b.tsls.coefficient < 0 && b.ols.coefficient > 0);
    if (opposite && b.tsls.p_value < 0.05 && b.ols.p_value < 0.05) b.warnings.push_back(WarningFlag::SignDisagreement);
    b.rating = rating_for(b.warnings.size());
}

DiagnosticsBundle run_diagnostics(const DesignMatrixBundle& bundle, const DiagnosticsConfig& config, int spec_index) {
    DiagnosticsBundle out;
    out.spec_index = spec_index;
    const auto two = estimate::fit_2sls(bundle);
    out.tsls = two.second;
    out.ols = estimate::fit_ols(bundle);
    out.pi = two.first.pi;
    out.conventional_F = two.first.conventional_F;
    out.notes = estimate::prepare(bundle).notes;

    auto attempt = [&](const char* name, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            out.incomplete.push_back(name);
            out.notes.push_back(std::string(name) + ": " + e.what());
        }
    };
    attempt("effective_F", [&] { out.effective_F = effective_f(two.first); });
    attempt("ar", [&] { out.ar = ar_test(bundle, 0.0); });
    attempt("ar_ci", [&] { out.ar_ci = ar_confidence_interval(bundle, out.tsls.coefficient, out.tsls.std_error); });
    if (out.effective_F) out.tf = tf_test(out.tsls.coefficient, out.tsls.std_error, *out.effective_F, bundle.m());
    attempt("rho", [&] { out.rho = first_stage_rho(bundle, two.first); });
    if (out.ols.coefficient != 0) out.ratio = std::abs(out.tsls.coefficient) / std::abs(out.ols.coefficient);

    const CapResult cap = cap_sample(bundle, config.max_obs, config.seed);
    out.capped = cap.capped;
    out.cap_original_n = cap.original_n;
    out.cap_n = cap.bundle.n();
    attempt("bootstrap", [&] {
        out.bootstrap = bootstrap_suite(cap.bundle, config.iters, config.seed, config.workers);
        out.bootstrap_F = out.bootstrap->bootstrap_F;
    });
    attempt("jackknife", [&] {
        const double tau = cap.capped ? estimate::fit_2sls(cap.bundle).second.coefficient : out.tsls.coefficient;
        out.jackknife = jackknife(cap.bundle, tau, config.cluster_limit, config.obs_sample, config.seed, config.workers);
    });
    evaluate(out);
    return out;
}

namespace {

using nlohmann::json;

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? num(*v) : json(nullptr);
}

double get_num(const json& j, const char* key, double fallback = std::numeric_limits<double>::quiet_NaN()) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    return j[key].get<double>();
}

std::optional<double> get_opt(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

json estimate_json(const EstimateResult& r) {
    return {{"coefficient", num(r.coefficient)}, {"std_error", num(r.std_error)}, {"t_stat", num(r.t_stat)},
            {"p_value", num(r.p_value)},         {"ci_low", num(r.ci_low)},        {"ci_high", num(r.ci_high)},
            {"n", r.n},                          {"G", r.G},                       {"dof", num(r.dof)},
            {"K", r.K}};
}

EstimateResult estimate_from(const json& j) {
    EstimateResult r;
    r.coefficient = get_num(j, "coefficient");
    r.std_error = get_num(j, "std_error");
    r.t_stat = get_num(j, "t_stat");
    r.p_value = get_num(j, "p_value");
    r.ci_low = get_num(j, "ci_low");
    r.ci_high = get_num(j, "ci_high");
    r.n = j.value("n", 0L);
    r.G = j.value("G", 0L);
    r.dof = get_num(j, "dof");
    r.K = j.value("K", 0L);
    return r;
}

json interval_json(const Interval& i) { return {{"low", num(i.low)}, {"high", num(i.high)}}; }
Interval interval_from(const json& j) { return {get_num(j, "low"), get_num(j, "high")}; }

json doubles(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

std::vector<double> doubles_from(const json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
    return v;
}

}  // namespace

json to_json(const DiagnosticsBundle& b) {
    json j;
    j["spec_index"] = b.spec_index;
    j["spec"] = b.spec;
    j["tsls"] = estimate_json(b.tsls);
    j["ols"] = estimate_json(b.ols);
    j["first_stage"] = {{"pi", doubles(std::vector<double>(b.pi.data(), b.pi.data() + b.pi.size()))},
                        {"conventional_F", num(b.conventional_F)}};
    j["effective_F"] = opt(b.effective_F);
    j["bootstrap_F"] = opt(b.bootstrap_F);
    j["bootstrap_F_definition"] = "pi' Q pi / tr(V_boot Q); one instrument: pi^2 / Var_boot(pi)";
    if (b.ar) {
        j["ar"] = {{"statistic", num(b.ar->statistic)}, {"p_value", num(b.ar->p_value)}, {"df1", num(b.ar->df1)}, {"df2", num(b.ar->df2)}};
    } else {
        j["ar"] = nullptr;
    }
    if (b.ar_ci) {
        j["ar_ci"] = {{"low", opt(b.ar_ci->low)},
                      {"high", opt(b.ar_ci->high)},
                      {"open_low", b.ar_ci->open_low},
                      {"open_high", b.ar_ci->open_high},
                      {"disjoint", b.ar_ci->disjoint}};
    } else {
        j["ar_ci"] = nullptr;
    }
    j["tf"] = {{"applicable", b.tf.applicable},
               {"pass_at_5pct", b.tf.pass_at_5pct},
               {"adjusted_critical", opt(b.tf.adjusted_critical)},
               {"below_floor", b.tf.below_floor}};
    if (const auto ci = tf_interval(b)) {
        j["tf"]["ci"] = interval_json(*ci);
    } else {
        j["tf"]["ci"] = nullptr;
    }
    if (b.bootstrap) {
        const auto& bs = *b.bootstrap;
        j["bootstrap"] = {{"boot_c", interval_json(bs.boot_c)},
                          {"boot_t", interval_json(bs.boot_t)},
                          {"iters", bs.iters},
                          {"seed", bs.seed},
                          {"redraws", bs.redraws},
                          {"unit", bs.unit},
                          {"boot_t_form", "symmetric: tau +- q95(|t*|) * se"},
                          {"taus", doubles(bs.taus)},
                          {"t_stats", doubles(bs.t_stats)}};
    } else {
        j["bootstrap"] = nullptr;
    }
    if (b.jackknife) {
        const auto& jk = *b.jackknife;
        j["jackknife"] = {{"min", num(jk.min)},
                          {"max", num(jk.max)},
                          {"most_influential", jk.most_influential},
                          {"delta", num(jk.delta)},
                          {"relative_shift", num(jk.relative_shift)},
                          {"unit", jk.unit},
                          {"skipped", jk.skipped},
                          {"ids", jk.ids},
                          {"estimates", doubles(jk.estimates)}};
    } else {
        j["jackknife"] = nullptr;
    }
    j["rho"] = opt(b.rho);
    j["ratio"] = opt(b.ratio);
    json w = json::array();
    for (auto f : b.warnings) w.push_back(std::string(to_string(f)));
    j["warnings"] = w;
    j["rating"] = std::string(to_string(b.rating));
    j["incomplete"] = b.incomplete;
    j["notes"] = b.notes;
    j["nonlinear"] = b.nonlinear;
    j["cap"] = {{"applied", b.capped}, {"original_n", b.cap_original_n}, {"n", b.cap_n}};
    j["resolution"] = b.resolution;
    j["reference"] = b.reference ? *b.reference : json(nullptr);
    j["vcov_convention"] = estimate::kVcovConvention;
    j["pipeline_version"] = kPipelineVersion;
    return j;
}

DiagnosticsBundle diagnostics_from_json(const json& j) {
    try {
        DiagnosticsBundle b;
        b.spec_index = j.at("spec_index").get<int>();
        b.spec = j.value("spec", json::object());
        b.tsls = estimate_from(j.at("tsls"));
        b.ols = estimate_from(j.at("ols"));
        const auto pi = doubles_from(j.at("first_stage").at("pi"));
        b.pi = Eigen::Map<const Eigen::VectorXd>(pi.data(), static_cast<Eigen::Index>(pi.size()));
        b.conventional_F = get_num(j["first_stage"], "conventional_F");
        b.effective_F = get_opt(j, "effective_F");
        b.bootstrap_F = get_opt(j, "bootstrap_F");
        if (!j.at("ar").is_null()) {
            b.ar = ARResult{get_num(j["ar"], "statistic"), get_num(j["ar"], "p_value"), get_num(j["ar"], "df1"), get_num(j["ar"], "df2")};
        }
        if (!j.at("ar_ci").is_null()) {
            ARInterval a;
            a.low = get_opt(j["ar_ci"], "low");
            a.high = get_opt(j["ar_ci"], "high");
            a.open_low = j["ar_ci"].value("open_low", false);
            a.open_high = j["ar_ci"].value("open_high", false);
            a.disjoint = j["ar_ci"].value("disjoint", false);
            b.ar_ci = a;
        }
        const auto& tf = j.at("tf");
        b.tf.applicable = tf.value("applicable", false);
        b.tf.pass_at_5pct = tf.value("pass_at_5pct", false);
        b.tf.adjusted_critical = get_opt(tf, "adjusted_critical");
        b.tf.below_floor = tf.value("below_floor", false);
        if (!j.at("bootstrap").is_null()) {
            const auto& bj = j["bootstrap"];
            BootstrapResult bs;
            bs.boot_c = interval_from(bj.at("boot_c"));
            bs.boot_t = interval_from(bj.at("boot_t"));
            bs.bootstrap_F = get_num(j, "bootstrap_F");
            bs.iters = bj.value("iters", 0);
            bs.seed = bj.value("seed", std::uint64_t{0});
            bs.redraws = bj.value("redraws", 0);
            bs.unit = bj.value("unit", std::string());
            bs.taus = doubles_from(bj.at("taus"));
            bs.t_stats = doubles_from(bj.at("t_stats"));
            b.bootstrap = bs;
        }
        if (!j.at("jackknife").is_null()) {
            const auto& jj = j["jackknife"];
            JackknifeResult jk;
            jk.min = get_num(jj, "min");
            jk.max = get_num(jj, "max");
            jk.most_influential = jj.value("most_influential", std::string());
            jk.delta = get_num(jj, "delta");
            jk.relative_shift = get_num(jj, "relative_shift");
            jk.unit = jj.value("unit", std::string());
            jk.skipped = jj.value("skipped", 0);
            jk.ids = jj.at("ids").get<std::vector<std::string>>();
            jk.estimates = doubles_from(jj.at("estimates"));
            b.jackknife = jk;
        }
        b.rho = get_opt(j, "rho");
        b.ratio = get_opt(j, "ratio");
        for (const auto& w : j.at("warnings")) {
            const auto s = w.get<std::string>();
            for (auto f : {WarningFlag::WeakInstrument, WarningFlag::ARInsignificant, WarningFlag::JackknifeSensitive,
                           WarningFlag::BootCIncludesZero, WarningFlag::SignDisagreement}) {
                if (s == to_string(f)) b.warnings.push_back(f);
            }
        }
        b.rating = rating_for(b.warnings.size());
        b.incomplete = j.value("incomplete", std::vector<std::string>{});
        b.notes = j.value("notes", std::vector<std::string>{});
        b.nonlinear = j.value("nonlinear", false);
        if (j.contains("cap")) {
            b.capped = j["cap"].value("applied", false);
            b.cap_original_n = j["cap"].value("original_n", 0L);
            b.cap_n = j["cap"].value("n", 0L);
        }
        b.resolution = j.value("resolution", json::array());
        if (j.contains("reference") && !j["reference"].is_null()) b.reference = j["reference"];
        return b;
    } catch (const json::exception& e) {
        fail(ErrorCode::ValidationError, std::string("malformed diagnostics: ") + e.what());
    }
}

}  // namespace ivrepro::diagnostics
