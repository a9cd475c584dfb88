#include "ivrepro/error.hpp"
#include "ivrepro/janitor/janitor.hpp"

namespace ivrepro::janitor {

CleanResult clean_script(const parser::SourceScript& original, const std::vector<ExportPlan>& plans, const RepairConfig& config) {
    auto repaired = apply_repair_rules(original, config);
    CleanResult out{std::move(repaired.text), std::move(repaired.log), {}};
    if (plans.empty()) return out;

    std::vector<std::string> anchors;
    for (const auto& p : plans) anchors.push_back(p.anchor);
    auto nt = comment_nontarget_iv({original.path, original.language, out.text}, anchors);
    out.log.insert(out.log.end(), nt.log.begin(), nt.log.end());
    out.text = std::move(nt.text);
    for (const auto& p : plans) {
        try {
            const auto injected = inject_export(out.text, p);
            if (injected != out.text) {
                out.log.push_back({original.path, p.line, "export.inject", p.anchor, "export block writing " + p.export_file()});
            }
            out.text = injected;
        } catch (const Error& e) {
            out.failed.emplace_back(p.spec_index, e.what());
        }
    }
    return out;
}

}  // namespace ivrepro::janitor
