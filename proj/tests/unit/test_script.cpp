#include <doctest.h>

#include "ivrepro/parser/script.hpp"

using namespace ivrepro::parser;

namespace {

std::string concat_segments(std::string_view text, const StataSegmentation& seg) {
    std::string out;
    for (const auto& s : seg.segments) out += text.substr(s.begin, s.end - s.begin);
    return out;
}

}  // namespace

TEST_CASE("delimit abbreviations flip the mode") {
    const std::string text = "#d ;\nreg y x ;\n#delimit cr\nsum y";
    const auto seg = segment_stata(text);
    REQUIRE(seg.commands.size() == 2);
    CHECK(seg.commands[0].mode == DelimiterMode::Semicolon);
    CHECK(seg.commands[0].verb == "regress");
    CHECK(seg.commands[1].mode == DelimiterMode::Newline);
    CHECK(seg.commands[1].verb == "summarize");
    CHECK(concat_segments(text, seg) == text);

    for (const char* d : {"#d", "#de", "#del", "#deli", "#delim", "#delimi", "#delimit"}) {
        CHECK(parse_delimit_directive(std::string(d) + " ;") == DelimiterMode::Semicolon);
    }
    CHECK_FALSE(parse_delimit_directive("#delimx ;").has_value());
    CHECK_FALSE(parse_delimit_directive("#review").has_value());
}

TEST_CASE("continuations join lines") {
    const std::string text = "ivreg2 y ///\n (d = z), first\n";
    const auto seg = segment_stata(text);
    REQUIRE(seg.commands.size() == 1);
    CHECK(seg.commands[0].first_line == 1);
    CHECK(seg.commands[0].last_line == 2);
    CHECK(seg.commands[0].text == "ivreg2 y (d = z), first");
    CHECK(concat_segments(text, seg) == text);
}

TEST_CASE("newline mode yields one command per line") {
    const std::string text = "use a\ngen x = 1\nreg y x\n";
    const auto seg = segment_stata(text);
    CHECK(seg.commands.size() == 3);
}

TEST_CASE("comments are excluded and the partition round-trips") {
    const std::string text =
        "* header comment\n/* block\n /* nested */ still */\nreg y x // trailing\n"
        "#delimit ;\n* a star comment ; gen z = \"a;b\" ;\nreg y z\n  , robust;\n#d cr\nlocal s `\"q \"x\" q\"'\n";
    const auto seg = segment_stata(text);
    CHECK(concat_segments(text, seg) == text);
    REQUIRE(seg.commands.size() == 4);
    CHECK(seg.commands[0].text == "reg y x");
    CHECK(seg.commands[1].text == "gen z = \"a;b\"");
    CHECK(seg.commands[2].text == "reg y z , robust");
    CHECK(seg.commands[2].mode == DelimiterMode::Semicolon);
    CHECK(seg.commands[3].verb == "local");
    for (std::size_t i = 1; i < seg.segments.size(); ++i) CHECK(seg.segments[i].begin == seg.segments[i - 1].end);
}

TEST_CASE("unterminated semicolon tail is suspect") {
    const auto seg = segment_stata("#delimit ;\nreg y x");
    REQUIRE(seg.commands.size() == 1);
    CHECK(seg.commands[0].suspect);
}

TEST_CASE("prefixes are split from the body") {
    std::vector<std::string> pre;
    std::string body;
    split_prefixes("capture noisily bysort g: qui reg y x", pre, body);
    REQUIRE(pre.size() == 4);
    CHECK(pre[0] == "capture");
    CHECK(pre[1] == "noisily");
    CHECK(pre[2] == "bysort g");
    CHECK(pre[3] == "quietly");
    CHECK(body == "reg y x");
    CHECK(is_wrapper_prefix("bootstrap, reps(50)"));
    CHECK_FALSE(is_wrapper_prefix("eststo"));
}

TEST_CASE("macros expand and undefined ones are flagged") {
    const std::string text = "global controls_z2 \"x1 x2\"\nlocal w lw\nivreg2 y $controls_z2 `w' (d=z) $Z\n";
    auto cmds = expand_macros(segment_stata(text).commands, {});
    REQUIRE(cmds.size() == 3);
    CHECK(cmds[2].text == "ivreg2 y x1 x2 lw (d=z) $Z");
    REQUIRE(cmds[2].unresolved_macros.size() == 1);
    CHECK(cmds[2].unresolved_macros[0] == "$Z");

    const std::string plain = "reg y x\nsum y\n";
    const auto a = segment_stata(plain).commands;
    const auto b = expand_macros(a, {});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].text == b[i].text);
}

TEST_CASE("braced globals and nested locals") {
    MacroTable t;
    t.globals["path"] = "C:/data";
    t.locals["i"] = "2";
    t.locals["x2"] = "income";
    std::vector<std::string> unresolved;
    CHECK(substitute_macros("use \"${path}/f.dta\"", t, &unresolved) == "use \"C:/data/f.dta\"");
    CHECK(substitute_macros("sum `x`i''", t, &unresolved) == "sum income");
    CHECK(unresolved.empty());
}
