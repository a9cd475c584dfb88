#pragma once

#include "ivrepro/parser/script.hpp"
#include "ivrepro/parser/spec.hpp"

#include <vector>

namespace ivrepro::parser {

/// One R or Python statement: brackets balanced, newline outside an
/// unfinished expression ends it.
struct SourceStatement {
    std::size_t begin = 0;
    std::size_t end = 0;
    int first_line = 0;
    int last_line = 0;
    std::string text;  // comments stripped, whitespace collapsed
};

std::vector<SourceStatement> segment_statements(std::string_view text, Language language);

std::vector<RawIVCall> detect_iv_calls(const SourceScript& script);

/// ivreg2, ivregress 2sls/liml/gmm, xtivreg(2), reghdfe/ivreghdfe with (D = Z),
/// ivprobit, ivtobit and user programs wrapping them.
IVSpecification parse_stata_iv(const RawIVCall& call, const MacroTable& macros);
IVSpecification parse_stata_iv(const RawIVCall& call);

/// ivreg/iv_robust two-part formulas, feols/felm IV parts, update() edits.
IVSpecification parse_r_iv(const RawIVCall& call, const std::map<std::string, std::string>& formula_environment);
IVSpecification parse_r_iv(const RawIVCall& call);

IVSpecification parse_python_iv(const RawIVCall& call);

/// Parses every detected call; calls that fail to parse are returned in `failures`.
struct ExtractionResult {
    std::vector<IVSpecification> specs;
    std::vector<std::string> failures;
};
ExtractionResult extract_specifications(const std::vector<SourceScript>& scripts);

/// Expands `A*B` to `A B A:B` on a list of R formula terms.
std::vector<std::string> expand_r_terms(const std::vector<std::string>& terms);

/// Deduplicates on (Y, D, Z, X), ranks and keeps at most `limit`.
std::vector<IVSpecification> select_primary_specs(const std::vector<IVSpecification>& specs, std::size_t limit = 3);

/// True when the file name suggests a main-results script.
bool is_main_results_file(std::string_view path);

/// Parses `##REPRO_MARKER spec=<k> coef=<v> se=<v> N=<v>##` lines and marked
/// coefficient tables. Throws MarkerNotFound when there are none.
std::vector<ExtractedEstimate> parse_marked_log(std::string_view log_text);

}  // namespace ivrepro::parser
