#include "ivrepro/report/report.hpp"

#include "ivrepro/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace ivrepro::report {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kWidth = 640;
constexpr double kLeft = 150;
constexpr double kRight = 30;

std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string csv_number(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!std::isfinite(lo)) {
            lo = -1;
            hi = 1;
        } else if (hi - lo < 1e-12) {
            const double pad = std::max(std::abs(lo) * 0.1, 1.0);
            lo -= pad;
            hi += pad;
        } else {
            const double pad = (hi - lo) * 0.08;
            lo -= pad;
            hi += pad;
        }
    }
    [[nodiscard]] double x(double v) const {
        const double c = std::clamp(v, lo, hi);
        return kLeft + (c - lo) / (hi - lo) * (kWidth - kLeft - kRight);
    }
};

std::string header(double height, const std::string& caption) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + coord(kWidth) + "\" height=\"" + coord(height) +
                    "\" viewBox=\"0 0 " + coord(kWidth) + " " + coord(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + coord(kWidth) + "\" height=\"" + coord(height) + "\" fill=\"white\"/>\n";
    s += "<text x=\"" + coord(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(caption) +
         "</text>\n";
    return s;
}

std::string axis(const Range& r, double y, bool log10_scale = false) {
    std::string s = "<line x1=\"" + coord(kLeft) + "\" y1=\"" + coord(y) + "\" x2=\"" + coord(kWidth - kRight) + "\" y2=\"" +
                    coord(y) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = r.lo + (r.hi - r.lo) * i / 4.0;
        const double x = r.x(v);
        char label[40];
        std::snprintf(label, sizeof label, "%.3g", log10_scale ? std::pow(10.0, v) : v);
        s += "<line x1=\"" + coord(x) + "\" y1=\"" + coord(y) + "\" x2=\"" + coord(x) + "\" y2=\"" + coord(y + 4) +
             "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + coord(x) + "\" y=\"" + coord(y + 16) + "\" text-anchor=\"middle\">" + label + "</text>\n";
    }
    return s;
}

std::string vline(const Range& r, double v, double y0, double y1, const std::string& label, bool dashed) {
    if (!std::isfinite(v)) return "";
    const double x = r.x(v);
    std::string s = "<line x1=\"" + coord(x) + "\" y1=\"" + coord(y0) + "\" x2=\"" + coord(x) + "\" y2=\"" + coord(y1) +
                    "\" stroke=\"#b2182b\"" + (dashed ? " stroke-dasharray=\"4 3\"" : "") + "/>\n";
    s += "<text x=\"" + coord(x + 3) + "\" y=\"" + coord(y0 + 10) + "\" fill=\"#b2182b\" font-size=\"10\">" + xml_escape(label) +
         "</text>\n";
    return s;
}

double value_or_nan(const std::optional<double>& v) { return v ? *v : kNaN; }

FigureData coef_comparison(const DiagnosticsBundle& b) {
    FigureData f;
    f.kind = FigureKind::CoefComparison;
    f.columns = {"estimate", "low", "high"};
    f.caption = "Spec " + std::to_string(b.spec_index) + ": OLS and 2SLS estimates with 95% intervals";
    const double tau = b.tsls.coefficient;
    f.series.push_back({"OLS", {b.ols.coefficient, b.ols.ci_low, b.ols.ci_high}});
    f.series.push_back({"2SLS analytic", {tau, b.tsls.ci_low, b.tsls.ci_high}});
    if (b.bootstrap) {
        f.series.push_back({"2SLS bootstrap-c", {tau, b.bootstrap->boot_c.low, b.bootstrap->boot_c.high}});
        f.series.push_back({"2SLS bootstrap-t", {tau, b.bootstrap->boot_t.low, b.bootstrap->boot_t.high}});
    } else {
        f.series.push_back({"2SLS bootstrap-c", {tau, kNaN, kNaN}});
        f.series.push_back({"2SLS bootstrap-t", {tau, kNaN, kNaN}});
    }
    if (const auto ci = diagnostics::tf_interval(b)) {
        f.series.push_back({"2SLS tF", {tau, ci->low, ci->high}});
    } else {
        f.series.push_back({"2SLS tF", {tau, kNaN, kNaN}});
    }
    double lo = kNaN, hi = kNaN;
    if (b.ar_ci && !b.ar_ci->disjoint) {
        const double inf = std::numeric_limits<double>::infinity();
        lo = b.ar_ci->open_low ? -inf : value_or_nan(b.ar_ci->low);
        hi = b.ar_ci->open_high ? inf : value_or_nan(b.ar_ci->high);
    }
    f.series.push_back({"2SLS AR", {tau, lo, hi}});
    f.markers.push_back({"zero", {0.0}});
    return f;
}

FigureData f_comparison(const DiagnosticsBundle& b) {
    FigureData f;
    f.kind = FigureKind::FComparison;
    f.columns = {"value"};
    f.caption = "Spec " + std::to_string(b.spec_index) + ": first-stage F statistics";
    f.series.push_back({"Conventional F", {b.conventional_F}});
    f.series.push_back({"Effective F", {value_or_nan(b.effective_F)}});
    f.series.push_back({"Bootstrap F", {value_or_nan(b.bootstrap_F)}});
    f.markers.push_back({"F = 10", {10.0}});
    return f;
}

FigureData boot_distribution(const DiagnosticsBundle& b) {
    FigureData f;
    f.kind = FigureKind::BootDistribution;
    f.columns = {"tau", "t"};
    f.caption = "Spec " + std::to_string(b.spec_index) + ": bootstrap distribution of the 2SLS estimate";
    if (b.bootstrap) {
        const auto& bs = *b.bootstrap;
        for (std::size_t r = 0; r < bs.taus.size(); ++r) {
            f.series.push_back({std::to_string(r + 1), {bs.taus[r], r < bs.t_stats.size() ? bs.t_stats[r] : kNaN}});
        }
        f.markers.push_back({"boot-c low", {bs.boot_c.low}});
        f.markers.push_back({"boot-c high", {bs.boot_c.high}});
    }
    f.markers.push_back({"2SLS", {b.tsls.coefficient}});
    return f;
}

FigureData jackknife_distribution(const DiagnosticsBundle& b) {
    FigureData f;
    f.kind = FigureKind::JackknifeDistribution;
    f.columns = {"estimate"};
    f.caption = "Spec " + std::to_string(b.spec_index) + ": leave-one-out 2SLS estimates";
    if (b.jackknife) {
        const auto& jk = *b.jackknife;
        for (std::size_t i = 0; i < jk.ids.size() && i < jk.estimates.size(); ++i) f.series.push_back({jk.ids[i], {jk.estimates[i]}});
    }
    f.markers.push_back({"2SLS", {b.tsls.coefficient}});
    return f;
}

std::string svg_intervals(const FigureData& f) {
    const double row = 32, top = 40;
    const double height = top + row * static_cast<double>(f.series.size()) + 50;
    Range r;
    for (const auto& s : f.series)
        for (double v : s.values) r.add(v);
    for (const auto& m : f.markers) r.add(m.values.at(0));
    r.finish();
    std::string s = header(height, f.caption);
    const double bottom = top + row * static_cast<double>(f.series.size());
    for (const auto& m : f.markers) s += vline(r, m.values.at(0), top, bottom, m.label, true);
    for (std::size_t i = 0; i < f.series.size(); ++i) {
        const auto& sr = f.series[i];
        const double y = top + row * (static_cast<double>(i) + 0.5);
        s += "<text x=\"" + coord(kLeft - 8) + "\" y=\"" + coord(y + 4) + "\" text-anchor=\"end\">" + xml_escape(sr.label) + "</text>\n";
        const double lo = sr.values.at(1), hi = sr.values.at(2);
        if (!std::isnan(lo) && !std::isnan(hi)) {
            s += "<line x1=\"" + coord(r.x(lo)) + "\" y1=\"" + coord(y) + "\" x2=\"" + coord(r.x(hi)) + "\" y2=\"" + coord(y) +
                 "\" stroke=\"#2166ac\" stroke-width=\"2\"" + (std::isinf(lo) || std::isinf(hi) ? " stroke-dasharray=\"6 3\"" : "") +
                 "/>\n";
        }
        if (std::isfinite(sr.values[0])) {
            s += "<circle cx=\"" + coord(r.x(sr.values[0])) + "\" cy=\"" + coord(y) + "\" r=\"4\" fill=\"" +
                 (i == 0 ? "#762a83" : "#2166ac") + "\"/>\n";
        }
    }
    s += axis(r, bottom + 8);
    return s + "</svg>\n";
}

std::string svg_bars(const FigureData& f) {
    const double row = 36, top = 40;
    const double height = top + row * static_cast<double>(f.series.size()) + 50;
    // log10 scale: F statistics span several orders of magnitude
    Range r;
    r.lo = 0;
    r.hi = 1;
    for (const auto& s : f.series)
        if (std::isfinite(s.values[0]) && s.values[0] > 0) r.hi = std::max(r.hi, std::ceil(std::log10(s.values[0]) + 1e-9));
    std::string s = header(height, f.caption);
    const double bottom = top + row * static_cast<double>(f.series.size());
    for (std::size_t i = 0; i < f.series.size(); ++i) {
        const auto& sr = f.series[i];
        const double y = top + row * static_cast<double>(i);
        s += "<text x=\"" + coord(kLeft - 8) + "\" y=\"" + coord(y + row / 2 + 4) + "\" text-anchor=\"end\">" + xml_escape(sr.label) +
             "</text>\n";
        const double v = sr.values[0];
        if (!std::isfinite(v)) {
            s += "<text x=\"" + coord(kLeft + 4) + "\" y=\"" + coord(y + row / 2 + 4) + "\">n/a</text>\n";
            continue;
        }
        const double x1 = r.x(std::log10(std::max(v, 1.0)));
        s += "<rect x=\"" + coord(kLeft) + "\" y=\"" + coord(y + 6) + "\" width=\"" + coord(x1 - kLeft) + "\" height=\"" +
             coord(row - 12) + "\" fill=\"#4393c3\"/>\n";
        s += "<text x=\"" + coord(x1 + 4) + "\" y=\"" + coord(y + row / 2 + 4) + "\">" + fixed(v, 1) + "</text>\n";
    }
    for (const auto& m : f.markers) s += vline(r, std::log10(m.values.at(0)), top, bottom, m.label, true);
    s += axis(r, bottom + 8, true);
    return s + "</svg>\n";
}

std::string svg_histogram(const FigureData& f) {
    const double top = 40, plot_h = 220;
    const double height = top + plot_h + 50;
    Range r;
    for (const auto& s : f.series) r.add(s.values[0]);
    for (const auto& m : f.markers) r.add(m.values.at(0));
    r.finish();
    constexpr int kBins = 30;
    std::vector<int> counts(kBins, 0);
    for (const auto& s : f.series) {
        const double v = s.values[0];
        if (!std::isfinite(v)) continue;
        auto k = static_cast<int>((v - r.lo) / (r.hi - r.lo) * kBins);
        counts[static_cast<std::size_t>(std::clamp(k, 0, kBins - 1))]++;
    }
    const int peak = std::max(1, *std::max_element(counts.begin(), counts.end()));
    std::string s = header(height, f.caption);
    const double bottom = top + plot_h;
    const double bw = (kWidth - kLeft - kRight) / kBins;
    for (int k = 0; k < kBins; ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0) continue;
        const double h = plot_h * counts[static_cast<std::size_t>(k)] / peak;
        s += "<rect x=\"" + coord(kLeft + bw * k) + "\" y=\"" + coord(bottom - h) + "\" width=\"" + coord(bw) + "\" height=\"" +
             coord(h) + "\" fill=\"#92c5de\" stroke=\"white\"/>\n";
    }
    for (const auto& m : f.markers) s += vline(r, m.values.at(0), top, bottom, m.label, m.label != "2SLS");
    s += axis(r, bottom + 8);
    return s + "</svg>\n";
}

std::string svg_points(const FigureData& f) {
    const double top = 40, plot_h = 220;
    const double height = top + plot_h + 50;
    Range r;
    for (const auto& s : f.series) r.add(s.values[0]);
    for (const auto& m : f.markers) r.add(m.values.at(0));
    r.finish();
    std::string s = header(height, f.caption);
    const double bottom = top + plot_h;
    for (const auto& m : f.markers) s += vline(r, m.values.at(0), top, bottom, m.label, false);
    const auto n = static_cast<double>(std::max<std::size_t>(f.series.size(), 1));
    for (std::size_t i = 0; i < f.series.size(); ++i) {
        const double v = f.series[i].values[0];
        if (!std::isfinite(v)) continue;
        const double y = top + plot_h * (static_cast<double>(i) + 0.5) / n;
        s += "<circle cx=\"" + coord(r.x(v)) + "\" cy=\"" + coord(y) + "\" r=\"3\" fill=\"#2166ac\"><title>" +
             xml_escape(f.series[i].label) + "</title></circle>\n";
    }
    s += axis(r, bottom + 8);
    return s + "</svg>\n";
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + p.string());
    out << content;
    if (!out) fail(ErrorCode::IoError, "write failed for " + p.string());
}

}  // namespace

std::string_view to_string(FigureKind kind) noexcept {
    switch (kind) {
        case FigureKind::CoefComparison: return "coef_comparison";
        case FigureKind::FComparison: return "f_comparison";
        case FigureKind::BootDistribution: return "boot_distribution";
        case FigureKind::JackknifeDistribution: return "jackknife_distribution";
    }
    return "";
}

FigureData figure_data(const DiagnosticsBundle& b, FigureKind kind) {
    switch (kind) {
        case FigureKind::CoefComparison: return coef_comparison(b);
        case FigureKind::FComparison: return f_comparison(b);
        case FigureKind::BootDistribution: return boot_distribution(b);
        case FigureKind::JackknifeDistribution: return jackknife_distribution(b);
    }
    return {};
}

std::string figure_csv(const FigureData& f) {
    std::string out = "series";
    for (const auto& c : f.columns) out += "," + c;
    out += "\n";
    for (const auto& s : f.series) {
        out += csv_field(s.label);
        for (double v : s.values) out += "," + csv_number(v);
        out += "\n";
    }
    return out;
}

std::string figure_svg(const FigureData& f) {
    switch (f.kind) {
        case FigureKind::CoefComparison: return svg_intervals(f);
        case FigureKind::FComparison: return svg_bars(f);
        case FigureKind::BootDistribution: return svg_histogram(f);
        case FigureKind::JackknifeDistribution: return svg_points(f);
    }
    return {};
}

std::string figure_stem(int spec_index, FigureKind kind) {
    return "spec" + std::to_string(spec_index) + "_" + std::string(to_string(kind));
}

std::vector<FigureFiles> emit_figures(const DiagnosticsBundle& b, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<FigureFiles> files;
    for (auto kind : kFigureKinds) {
        const auto f = figure_data(b, kind);
        const auto stem = figure_stem(b.spec_index, kind);
        FigureFiles ff{kind, out_dir / (stem + ".csv"), out_dir / (stem + ".svg")};
        write_file(ff.csv, figure_csv(f));
        write_file(ff.svg, figure_svg(f));
        files.push_back(std::move(ff));
    }
    return files;
}

}  // namespace ivrepro::report
