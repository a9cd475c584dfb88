#pragma once

#include "ivrepro/acquire/acquisition.hpp"
#include "ivrepro/diagnostics/diagnostics.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ivrepro::report {

using diagnostics::DiagnosticsBundle;

enum class FigureKind { CoefComparison, FComparison, BootDistribution, JackknifeDistribution };

inline constexpr FigureKind kFigureKinds[] = {FigureKind::CoefComparison, FigureKind::FComparison,
                                              FigureKind::BootDistribution, FigureKind::JackknifeDistribution};

std::string_view to_string(FigureKind kind) noexcept;

struct Series {
    std::string label;
    std::vector<double> values;  // NaN marks an unavailable value
};

struct FigureData {
    FigureKind kind = FigureKind::CoefComparison;
    std::vector<std::string> columns;  // names of the values in each series
    std::vector<Series> series;
    std::vector<Series> markers;  // reference lines drawn in the SVG, one value each
    std::string caption;
};

FigureData figure_data(const DiagnosticsBundle& b, FigureKind kind);
std::string figure_csv(const FigureData& f);
std::string figure_svg(const FigureData& f);

/// "spec<k>_<kind>", the shared stem of the CSV and SVG files.
std::string figure_stem(int spec_index, FigureKind kind);

struct FigureFiles {
    FigureKind kind;
    std::filesystem::path csv;
    std::filesystem::path svg;
};

std::vector<FigureFiles> emit_figures(const DiagnosticsBundle& b, const std::filesystem::path& out_dir);

/// Markdown report. Figure links point into figures/ next to the report.
/// Throws NoSpecs on an empty list.
std::string render_report(const std::vector<DiagnosticsBundle>& bundles, const acquire::StudyInfo& study);

/// Fixed-point formatting used throughout the report; "n/a" for NaN.
std::string fixed(double v, int decimals);

}  // namespace ivrepro::report
