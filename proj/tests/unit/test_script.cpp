#include <doctest.h>

#include <functional>
#include <random>

#include "../support/oracles.hpp"
#include "animforge/error.hpp"
#include "animforge/script.hpp"

using namespace animforge;
using namespace animforge::script;

namespace {

ScriptErrc script_errc(const std::function<void()>& f) {
    try {
        f();
    } catch (const ScriptError& e) {
        return e.code();
    }
    FAIL("expected ScriptError");
    return ScriptErrc::InvalidDocument;
}

const char* kDoc =
    "## Characters\n"
    "Tom the cat: a grey cat with a white tail\n"
    "Max the dog: a brown dog\n"
    "\n"
    "## Settings\n"
    "Garden (Outdoor): a sunlit lawn\n"
    "## Scenes\n"
    "[Tom the cat, Max the dog][Garden]: Tom chases Max.\n"
    "[Tom the cat][Garden]: Tom naps.\n"
    "[Max the dog][Garden]: Max digs a hole.\n";

}  // namespace

TEST_SUITE("script") {
    TEST_CASE("scene line with two characters") {
        const auto s = parse_scene_line("[Tom the cat, Max the dog][Garden]: Tom chases Max around the oak tree.");
        CHECK(s.characters == std::vector<std::string>{"Tom the cat", "Max the dog"});
        CHECK(s.setting == "Garden");
        CHECK(s.description == "Tom chases Max around the oak tree.");
    }

    TEST_CASE("empty groups and missing parts are rejected") {
        CHECK(script_errc([] { parse_scene_line("[][Garden]: text"); }) == ScriptErrc::EmptyField);
        CHECK(script_errc([] { parse_scene_line("[Tom][]: text"); }) == ScriptErrc::EmptyField);
        CHECK(script_errc([] { parse_scene_line("[Tom][Garden]:   "); }) == ScriptErrc::EmptyField);
        CHECK(script_errc([] { parse_scene_line("[Tom][Garden] no colon"); }) == ScriptErrc::MalformedSceneLine);
        CHECK(script_errc([] { parse_scene_line("[Tom: only one group"); }) == ScriptErrc::MalformedSceneLine);
        CHECK(script_errc([] { parse_scene_line("[Tom]: one group"); }) == ScriptErrc::MalformedSceneLine);
    }

    TEST_CASE("descriptions may hold brackets and colons") {
        const auto s = parse_scene_line("[Tom][Garden]: Tom [quietly] says: hello [again]");
        CHECK(s.description == "Tom [quietly] says: hello [again]");
    }

    TEST_CASE("serialization form") {
        SceneSpec s{0, {"Tom the cat"}, "Garden", "Tom naps."};
        CHECK(serialize_scene_line(s) == "[Tom the cat][Garden]: Tom naps.");
        s.characters.push_back("Max the dog");
        CHECK(serialize_scene_line(s) == "[Tom the cat, Max the dog][Garden]: Tom naps.");
    }

    TEST_CASE("scene line round trip over generated specs") {
        std::mt19937_64 rng(11);
        for (int i = 0; i < 1000; ++i) {
            const auto s = oracle::random_scene(rng, 0);
            REQUIRE(is_well_formed(s));
            CHECK(parse_scene_line(serialize_scene_line(s)) == s);
        }
    }

    TEST_CASE("document parsing keeps section sizes and order") {
        const Script s = parse_script(kDoc);
        CHECK(s.characters.size() == 2);
        CHECK(s.settings.size() == 1);
        REQUIRE(s.scenes.size() == 3);
        CHECK(s.scenes[2].index == 2);
        CHECK(s.settings[0] == SettingProfile{"Garden", Placement::Outdoor, "a sunlit lawn"});
        CHECK(s.characters[1].name == "Max the dog");
    }

    TEST_CASE("missing section") {
        CHECK(script_errc([] { parse_script("## Characters\nTom: a cat\n## Scenes\n[Tom][Garden]: x\n"); }) ==
              ScriptErrc::MissingSection);
    }

    TEST_CASE("malformed profile lines") {
        CHECK(script_errc([] { parse_script("## Characters\nno colon here\n## Settings\nG (Outdoor): x\n## Scenes\n"); }) ==
              ScriptErrc::MalformedProfileLine);
        CHECK(script_errc([] { parse_script("## Characters\nTom: c\n## Settings\nGarden: no placement\n## Scenes\n"); }) ==
              ScriptErrc::MalformedProfileLine);
    }

    TEST_CASE("scene errors carry the scene index") {
        try {
            parse_script("## Characters\nTom: c\n## Settings\nG (Indoor): x\n## Scenes\n[Tom][G]: ok\n[][G]: bad\n");
            FAIL("expected error");
        } catch (const ScriptError& e) {
            CHECK(e.scene_index() == std::optional<std::size_t>(1));
        }
    }

    TEST_CASE("document round trip") {
        std::mt19937_64 rng(5);
        for (int i = 0; i < 200; ++i) {
            const Script s = oracle::random_script(rng);
            CHECK(parse_script(serialize_script(s)) == s);
            CHECK(script_from_json(to_json(s)) == s);
        }
    }

    TEST_CASE("json placement encoding") {
        const auto j = to_json(parse_script(kDoc));
        CHECK(j.at("settings").at(0).at("placement") == "outdoor");
    }

    TEST_CASE("unknown setting") {
        Script s = parse_script(kDoc);
        s.scenes[1].setting = "Beach";
        const auto r = validate_script(s);
        REQUIRE(r.violations.size() == 1);
        CHECK(r.violations[0].kind == ViolationKind::UnknownSetting);
        CHECK(r.violations[0].scene_index == std::optional<std::size_t>(1));
    }

    TEST_CASE("consistent script validates clean") {
        CHECK(validate_script(parse_script(kDoc)).ok());
        CHECK(validate_script(parse_script(kDoc)).summary() == "none");
    }

    TEST_CASE("case-only mismatch is a terminology violation") {
        Script s = parse_script(kDoc);
        s.scenes[0].characters[0] = "tom the Cat";
        const auto r = validate_script(s);
        REQUIRE(r.violations.size() == 1);
        CHECK(r.violations[0].kind == ViolationKind::TerminologyMismatch);
    }

    TEST_CASE("duplicate profile names") {
        Script s = parse_script(kDoc);
        s.characters.push_back(s.characters[0]);
        CHECK(validate_script(s).count(ViolationKind::DuplicateProfile) == 1);
    }

    TEST_CASE("names compare after NFC normalization") {
        Script s;
        s.characters.push_back({"Zo\xC3\xAB", "precomposed"});
        s.settings.push_back({"Park", Placement::Outdoor, "x"});
        s.scenes.push_back({0, {"Zoe\xCC\x88"}, "Park", "decomposed reference"});
        CHECK(validate_script(s).ok());
    }

    TEST_CASE("single-name mutations are detected") {
        std::mt19937_64 rng(99);
        for (int i = 0; i < 200; ++i) {
            Script s = oracle::random_script(rng);
            REQUIRE(validate_script(s).ok());
            auto& scene = s.scenes[rng() % s.scenes.size()];
            scene.characters[rng() % scene.characters.size()] = "Fresh Name " + std::to_string(i);
            const auto r = validate_script(s);
            CHECK(r.violations.size() == 1);
            CHECK(r.count(ViolationKind::UnknownCharacter) == 1);
            CHECK_FALSE(oracle::references_resolve(s));
        }
    }

    TEST_CASE("validator agrees with the brute-force checker") {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 300; ++i) {
            Script s = oracle::random_script(rng);
            if (rng() % 2) s.scenes[0].setting = "Nowhere " + std::to_string(rng() % 3);
            if (rng() % 3 == 0) s.scenes.back().characters.back() = "Ghost";
            CHECK(validate_script(s).ok() == oracle::references_resolve(s));
        }
    }

    TEST_CASE("every scene line becomes a scene") {
        std::string doc = "## Characters\nA: x\n## Settings\nS (Indoor): y\n## Scenes\n";
        for (int i = 0; i < 37; ++i) doc += "[A][S]: line " + std::to_string(i) + "\n\n";
        CHECK(parse_script(doc).scenes.size() == 37);
    }

    TEST_CASE("partial documents") {
        const Script p = parse_profiles("## Characters\nA: x\n## Settings\nS (Indoor): y\n");
        CHECK(p.scenes.empty());
        CHECK(parse_scenes("## Scenes\n[A][S]: one\n[A][S]: two\n").size() == 2);
        CHECK(parse_profiles(serialize_profiles(p)) == p);
    }

    TEST_CASE("narrative and refined story invariants") {
        CHECK_THROWS_AS(Narrative::from_text("   \n "), std::invalid_argument);
        CHECK(Narrative::from_text("a b").id == Narrative::from_text("a b").id);
        CHECK(RefinedStory::from_text("one two  three\nfour", "n").word_count == 4);
    }
}
