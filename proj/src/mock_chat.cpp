#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <sstream>

#include "animforge/digest.hpp"
#include "animforge/error.hpp"
#include "animforge/mock_providers.hpp"
#include "animforge/script.hpp"
#include "animforge/text.hpp"

namespace animforge::mock {

namespace {

using prompt::SlotMap;
using prompt::TemplateId;

constexpr std::array<std::string_view, 42> kCreatures = {
    "cat",   "dog",   "mouse",   "rabbit", "bunny",  "fox",      "bear",   "bird",    "owl",    "duck",   "frog",
    "pig",   "cow",   "horse",   "lion",   "tiger",  "elephant", "monkey", "squirrel", "turtle", "wolf",  "deer",
    "puppy", "kitten", "hamster", "panda", "penguin", "chicken", "goat",   "sheep",   "boy",    "girl",   "man",
    "woman", "farmer", "king",   "queen",  "princess", "prince", "robot",  "dragon",  "knight",
};

constexpr std::array<std::string_view, 32> kPlaces = {
    "garden", "park",   "kitchen",   "forest", "beach",  "house",     "bedroom", "library",
    "school", "castle", "farm",      "river",  "lake",   "meadow",    "city",    "street",
    "village", "mountain", "yard",   "backyard", "cave", "ocean",     "field",   "playground",
    "classroom", "barn", "office",   "shop",   "market", "jungle",    "pond",    "room",
};

constexpr std::array<std::string_view, 15> kIndoor = {
    "kitchen", "house", "bedroom", "library", "school", "castle", "classroom", "barn",
    "office",  "shop",  "room",    "cave",    "market", "hall",   "attic",
};

constexpr std::array<std::string_view, 12> kPetNames = {
    "Tom", "Max", "Luna", "Milo", "Bella", "Oscar", "Daisy", "Leo", "Coco", "Ruby", "Finn", "Pip",
};

const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> words = {
        "A", "An", "The", "One", "Once", "Upon", "In", "On", "At", "When", "Then", "Suddenly", "After", "Before",
        "But", "And", "As", "It", "They", "He", "She", "We", "I", "His", "Her", "Their", "This", "That", "There",
        "Every", "Each", "Later", "Soon", "Finally", "Meanwhile", "While", "With", "Together", "Nothing",
        "Everyone", "Everything", "Yes", "No", "What", "Why", "How", "Where", "Who", "Today", "Tomorrow",
        "Yesterday", "Oh", "Wow", "Look", "Let", "Come", "Hello", "Hi", "Maybe", "Not", "Now", "All", "Some",
        "Just", "Even", "From", "For", "To", "Of", "By", "Under", "Over", "Near", "Through", "Across", "Inside",
        "Outside", "So", "If", "Because", "Although", "Still", "Also", "Again", "Around", "Along", "Without",
        "During", "Until", "Since", "First", "Next", "Last", "Both", "Many", "Our", "My", "Your", "Its", "These",
        "Those", "Here", "Part", "Scene", "Screen", "Action", "Description", "Characters", "Settings", "Scenes",
        "Image", "Indoor", "Outdoor", "Yet", "Or", "Eventually", "Afterwards", "Sometimes", "Everybody",
    };
    return words;
}

template <std::size_t N>
bool in(const std::array<std::string_view, N>& list, std::string_view w) {
    return std::find(list.begin(), list.end(), w) != list.end();
}

bool is_capitalized(std::string_view w) { return !w.empty() && std::isupper(static_cast<unsigned char>(w[0])); }

std::string capitalize(std::string_view w) {
    std::string s(w);
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::string lower(std::string_view w) { return text::to_lower_ascii(w); }

// Words (letters, digits, apostrophes, non-ASCII) with quoted dialogue removed.
std::vector<std::string> words_outside_quotes(std::string_view txt) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (char c : txt) {
        const auto u = static_cast<unsigned char>(c);
        if (c == '"') {
            flush();
            quoted = !quoted;
            continue;
        }
        if (quoted) continue;
        if (std::isalnum(u) || u >= 0x80 || c == '\'') cur += c;
        else flush();
    }
    flush();
    return out;
}

void push_unique(std::vector<std::string>& v, std::string s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(std::move(s));
}

std::string join_names(const std::vector<std::string>& names) {
    if (names.empty()) return "";
    if (names.size() == 1) return names[0];
    std::string out;
    for (std::size_t i = 0; i + 1 < names.size(); ++i) out += (i ? ", " : "") + names[i];
    return out + " and " + names.back();
}

std::string species_of(std::string_view name) {
    const auto pos = name.rfind(" the ");
    if (pos != std::string_view::npos) return std::string(name.substr(pos + 5));
    return "character";
}

std::uint64_t h(std::string_view s) { return fnv1a64(s); }

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& list, std::uint64_t key) {
    return list[key % N];
}

// ---------------------------------------------------------------------------
// Personas

std::string refine_story(std::string_view narrative) {
    std::vector<std::string> names = extract_character_names(narrative);
    std::vector<std::string> places = extract_setting_names(narrative);
    const std::string p0 = lower(places.front());
    const std::string pl = lower(places.back());
    const std::string& a = names.front();
    const std::string& b = names.size() > 1 ? names[1] : names.front();
    const std::string& z = names.back();

    static constexpr std::array<std::string_view, 6> eyes = {"bright", "curious", "gentle", "sparkling", "sleepy",
                                                             "clever"};
    static constexpr std::array<std::string_view, 6> hearts = {"brave", "kind", "playful", "patient", "restless",
                                                               "loyal"};

    std::vector<std::string> s;
    s.push_back("In the " + p0 + " on a bright morning, " + join_names(names) +
                " set out to find something new to do.");
    for (const auto& n : names) {
        s.push_back(n + " had " + std::string(pick(eyes, h(n))) + " eyes and a " + std::string(pick(hearts, h(n) >> 8)) +
                    " heart, and everyone in the " + p0 + " knew it.");
    }
    if (names.size() > 1) {
        s.push_back(a + " turned to " + b + " and said, \"Catch me if you can!\"");
        s.push_back(b + " laughed and ran after " + a + ", weaving between flowers and stones.");
    } else {
        s.push_back(a + " whispered, \"Today will be an adventure.\"");
        s.push_back(a + " hopped between flowers and stones, humming a happy tune.");
    }
    for (std::size_t i = 1; i < places.size(); ++i)
        s.push_back("Later they wandered into the " + lower(places[i]) + ", where the air felt calm and quiet.");
    s.push_back("Suddenly a strong gust of wind swept a shiny key across the ground, and " + a +
                " froze in surprise.");
    s.push_back("Together they followed the key until it stopped beside an old wooden box.");
    s.push_back("When " + z + " opened the box, a tiny map fell out, promising one more adventure in the " + pl + ".");
    s.push_back("Finally the friends sat down together, tired but happy, and watched the sun sink behind the trees.");

    static constexpr std::array<std::string_view, 5> fillers = {
        " stayed close to the others and listened to the soft sounds of the afternoon.",
        " shared a small snack and smiled at every silly joke.",
        " counted the clouds drifting slowly across the sky.",
        " promised to keep the little map safe until the next morning.",
        " remembered the gust of wind and giggled about it all evening.",
    };
    auto count = [&] {
        std::size_t c = 0;
        for (const auto& x : s) c += text::word_count(x);
        return c;
    };
    for (std::size_t i = 0; count() < 140 && i < 40; ++i)
        s.insert(s.end() - 1, names[i % names.size()] + std::string(fillers[i % fillers.size()]));
    return text::join(s, " ");
}

std::string extract_profiles(std::string_view story) {
    std::string out = "## Characters\n";
    for (const auto& n : extract_character_names(story)) {
        const int hue = name_hue(n);
        out += n + ": a " + std::string(color_word(hue)) + " " + species_of(n) +
               " drawn in simple shapes, cheerful and full of energy\n";
    }
    out += "\n## Settings\n";
    for (const auto& p : extract_setting_names(story)) {
        const bool indoor = in(kIndoor, lower(p));
        out += p + (indoor ? " (Indoor)" : " (Outdoor)") + ": a " + lower(p) + " painted in soft " +
               std::string(color_word(name_hue(p))) + " tones\n";
    }
    return out;
}

std::string describe_scene(std::size_t i, const std::vector<std::string>& chars, const std::string& setting) {
    const std::string place = lower(setting);
    const std::string& a = chars.front();
    switch (i % 3) {
        case 0:
            return chars.size() > 1 ? a + " chases " + chars[1] + " around the " + place + "."
                                    : a + " runs across the " + place + ".";
        case 1:
            return chars.size() > 1 ? a + " sits quietly beside " + chars[1] + " in the " + place + "."
                                    : a + " sits quietly in the " + place + ".";
        default:
            return chars.size() > 1 ? a + " plays with " + chars[1] + " near the " + place + "."
                                    : a + " plays with a leaf near the " + place + ".";
    }
}

std::string generate_scenes(const SlotMap& slots, const MockChatOptions& opt) {
    script::Script profiles;
    try {
        profiles = script::parse_profiles(slots.at("Profiles"));
    } catch (const ScriptError&) {
    }
    if (profiles.characters.empty()) profiles.characters.push_back({"Milo the cat", "a small cat"});
    if (profiles.settings.empty()) profiles.settings.push_back({"Meadow", script::Placement::Outdoor, "a meadow"});

    const std::size_t nc = profiles.characters.size();
    const std::size_t ns = profiles.settings.size();
    const std::size_t scenes = static_cast<std::size_t>(std::max(1, opt.scene_count));
    std::string out = "## Scenes\n";
    for (std::size_t i = 0; i < scenes; ++i) {
        std::vector<std::string> chars;
        if (nc <= 2) {
            for (const auto& c : profiles.characters) chars.push_back(c.name);
        } else {
            chars.push_back(profiles.characters[i % nc].name);
            chars.push_back(profiles.characters[(i + 1) % nc].name);
        }
        std::string setting = profiles.settings[std::min(ns - 1, i * ns / scenes)].name;
        if (opt.flaw_first_script && i == 0) setting = "Beach";
        script::SceneSpec sc{i, chars, setting, describe_scene(i, chars, setting)};
        out += script::serialize_scene_line(sc) + "\n";
    }
    return out;
}

std::string verify_script(const SlotMap& slots) {
    script::Script s;
    try {
        s = script::parse_script(slots.at("Script"));
    } catch (const ScriptError&) {
        // Rebuild from the story when the script does not parse at all.
        const std::string& story = slots.at("Story");
        s = script::parse_profiles(extract_profiles(story));
        for (std::size_t i = 0; i < 3; ++i) {
            std::vector<std::string> chars;
            for (const auto& c : s.characters) chars.push_back(c.name);
            s.scenes.push_back({i, chars, s.settings.front().name, describe_scene(i, chars, s.settings.front().name)});
        }
        return "Yes.\n" + script::serialize_script(s);
    }
    if (script::validate_script(s).ok()) return std::string(prompt::kNoProblemSentinel);
    if (s.characters.empty() || s.settings.empty()) return "Yes.\n" + script::serialize_script(s);

    for (auto& sc : s.scenes) {
        std::vector<std::string> fixed;
        for (const auto& name : sc.characters) {
            std::string target = s.characters.front().name;
            for (const auto& c : s.characters)
                if (text::equals_casefold(c.name, name)) target = c.name;
            if (std::find(fixed.begin(), fixed.end(), target) == fixed.end()) fixed.push_back(target);
        }
        sc.characters = std::move(fixed);
        if (!s.find_setting(sc.setting)) {
            std::string target = s.settings.front().name;
            for (const auto& st : s.settings)
                if (text::equals_casefold(st.name, sc.setting)) target = st.name;
            sc.setting = target;
        }
    }
    // Drop duplicate profiles, keeping the first.
    std::vector<script::CharacterProfile> chars;
    for (const auto& c : s.characters)
        if (std::none_of(chars.begin(), chars.end(), [&](const auto& x) { return x.name == c.name; })) chars.push_back(c);
    s.characters = std::move(chars);
    std::vector<script::SettingProfile> settings;
    for (const auto& st : s.settings)
        if (std::none_of(settings.begin(), settings.end(), [&](const auto& x) { return x.name == st.name; }))
            settings.push_back(st);
    s.settings = std::move(settings);
    return "Yes.\n" + script::serialize_script(s);
}

std::string image_prompt(const SlotMap& slots) {
    std::vector<std::string> names;
    try {
        for (const auto& c : script::parse_profiles(slots.at("Profiles")).characters) names.push_back(c.name);
    } catch (const ScriptError&) {
    }
    std::string out(text::trim(slots.at("Description")));
    if (!names.empty()) out += " Featuring " + join_names(names) + ",";
    out += " illustrated in soft colours with clear shapes.";
    return out;
}

std::string judge(const std::vector<Image>& attachments) {
    if (attachments.empty()) return "I need at least one image to compare.";
    std::string digests;
    for (const auto& img : attachments) digests += img.content_hash();
    const std::uint64_t k = 1 + fnv1a64(digests) % attachments.size();
    return "The answer is image " + std::to_string(k) + ". It follows the description most closely.";
}

std::string consistency_check(const SlotMap& slots, const std::vector<Image>& attachments) {
    if (attachments.empty()) return "Inconsistent: scene (no image attached)";
    const Image& scene = attachments.front();
    struct Expected {
        std::string name;
        int hue;
    };
    std::vector<Expected> expected;
    for (std::string_view line : text::lines(slots.at("References"))) {
        line = text::trim(line);
        if (!text::starts_with_icase(line, "image ")) continue;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        const int k = std::atoi(std::string(line.substr(6, colon - 6)).c_str());
        if (k < 2 || k > static_cast<int>(attachments.size())) continue;
        if (const auto hue = dominant_hue(attachments[static_cast<std::size_t>(k - 1)]))
            expected.push_back({std::string(text::trim(line.substr(colon + 1))), *hue});
    }

    const std::size_t min_pixels = std::max<std::size_t>(1, scene.pixel_count() / 500);
    std::vector<std::string> failing;
    for (const auto& e : expected) {
        std::size_t hits = 0;
        for (int y = 0; y < scene.height() && hits < min_pixels; ++y) {
            for (int x = 0; x < scene.width(); ++x) {
                const Rgb c = scene.at(x, y);
                if (is_chromatic(c) && hue_distance(rgb_to_hsv(c).h, e.hue) <= 12.0) ++hits;
            }
        }
        if (hits < min_pixels) failing.push_back(e.name);
    }
    if (failing.empty()) return std::string(prompt::kConsistentSentinel);

    // Stray regions: non-background regions matching no expected character, largest first.
    std::vector<std::pair<std::size_t, int>> strays;
    for (const auto& m : MockSegmenter().segment(scene)) {
        if (m.label == kBackgroundLabel) continue;
        const auto hue = dominant_hue(scene, &m);
        if (!hue) continue;
        const bool matches = std::any_of(expected.begin(), expected.end(),
                                         [&](const Expected& e) { return hue_distance(*hue, e.hue) <= 12.0; });
        if (!matches) strays.emplace_back(m.area, *hue);
    }
    std::stable_sort(strays.begin(), strays.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::string out;
    for (std::size_t i = 0; i < failing.size(); ++i) {
        out += "Inconsistent: " + failing[i];
        if (i < strays.size()) out += " (observed hue " + std::to_string(strays[i].second) + ")";
        out += "\n";
    }
    return out;
}

std::string video_prompt(const SlotMap& slots) {
    return "Part#1. Screen Description: " + std::string(text::trim(slots.at("Character"))) +
           " in a softly lit illustrated scene.\nPart#2. Action Description: " +
           std::string(text::trim(slots.at("Description")));
}

bool mentions(const std::vector<std::string>& words, std::initializer_list<std::string_view> verbs) {
    for (const auto& w : words)
        for (auto v : verbs)
            if (w == v) return true;
    return false;
}

std::string param_predict(const SlotMap& slots) {
    const std::string& desc = slots.at("Description");
    std::vector<std::string> words;
    for (const auto& w : words_outside_quotes(desc)) words.push_back(lower(w));
    const std::uint64_t key = h(desc);
    int motion = 2;
    if (mentions(words, {"chase", "chases", "chasing", "run", "runs", "running", "race", "races", "racing", "jump",
                         "jumps", "jumping"}))
        motion = 3 + static_cast<int>(key % 2);
    else if (mentions(words, {"sit", "sits", "sitting", "nap", "naps", "napping", "sleep", "sleeps", "sleeping", "rest",
                              "rests", "resting", "stand", "stands", "standing", "watch", "watches", "watching"}))
        motion = static_cast<int>(key % 2);

    prompt::GenerationParams p;
    p.description = std::string(text::trim(desc));
    p.motion = motion;
    p.guidance_scale = 12.0;
    p.negative_prompt = "blurry, distorted, extra limbs";
    if (motion >= 3) p.camera.pan = (key >> 8) % 2 ? prompt::Pan::Left : prompt::Pan::Right;
    return "Here are the parameters for this scene.\n```json\n" + prompt::serialize_params(p) + "\n```";
}

}  // namespace

std::vector<std::string> extract_character_names(std::string_view txt) {
    const auto words = words_outside_quotes(txt);
    const auto& stop = stopwords();
    std::vector<std::string> names;
    std::vector<bool> used(words.size(), false);

    auto usable_cap = [&](std::size_t i) {
        return is_capitalized(words[i]) && !stop.contains(words[i]) && !in(kPlaces, lower(words[i]));
    };
    // "Tom the cat"
    for (std::size_t i = 0; i + 2 < words.size(); ++i) {
        if (usable_cap(i) && words[i + 1] == "the" && in(kCreatures, words[i + 2])) {
            push_unique(names, words[i] + " the " + words[i + 2]);
            used[i] = used[i + 1] = used[i + 2] = true;
        }
    }
    // Remaining proper nouns, consecutive capitals joined.
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (used[i] || !usable_cap(i)) continue;
        std::string name = words[i];
        while (i + 1 < words.size() && !used[i + 1] && usable_cap(i + 1)) name += " " + words[++i];
        // A bare first name that already heads a "X the y" name is the same character.
        const bool known = std::any_of(names.begin(), names.end(), [&](const std::string& n) {
            return n == name || n.starts_with(name + " the ");
        });
        if (!known) names.push_back(name);
    }
    if (names.empty()) {
        for (const auto& w : words) {
            const std::string lw = lower(w);
            if (!in(kCreatures, lw)) continue;
            std::string pet(pick(kPetNames, h(lw)));
            std::string name = pet + " the " + lw;
            for (std::size_t k = 1; std::find(names.begin(), names.end(), name) != names.end(); ++k)
                name = std::string(pick(kPetNames, h(lw) + k)) + " the " + lw;
            push_unique(names, name);
        }
    }
    if (names.empty()) names.push_back("Milo the cat");
    if (names.size() > 4) names.resize(4);
    return names;
}

std::vector<std::string> extract_setting_names(std::string_view txt) {
    std::vector<std::string> places;
    for (const auto& w : words_outside_quotes(txt)) {
        const std::string lw = lower(w);
        if (in(kPlaces, lw)) push_unique(places, capitalize(lw));
    }
    if (places.empty()) places.push_back("Meadow");
    if (places.size() > 3) places.resize(3);
    return places;
}

MockChat::MockChat(prompt::TemplateSet templates, MockChatOptions options)
    : templates_(std::move(templates)), options_(options) {}

std::string MockChat::chat(const std::vector<ChatMessage>& messages) {
    if (messages.empty()) throw ProviderError(ProviderErrc::Permanent, "chat: no messages");
    const ChatMessage& m = messages.back();
    const auto id = prompt::template_from_string(m.tag);
    if (!id) return "I am a mock assistant and can only answer structured requests.";
    // A trailing format reminder may follow the rendered prompt.
    std::optional<SlotMap> slots = prompt::match_template(templates_.get(*id), m.text);
    if (!slots) {
        const std::string_view body = m.text;
        for (std::size_t cut = body.rfind('\n'); cut != std::string_view::npos && !slots;
             cut = cut == 0 ? std::string_view::npos : body.rfind('\n', cut - 1)) {
            slots = prompt::match_template(templates_.get(*id), body.substr(0, cut));
        }
    }
    if (!slots) return "I could not understand the request.";

    switch (*id) {
        case TemplateId::Refine: return refine_story(slots->at("Narrative"));
        case TemplateId::ExtractProfiles: return extract_profiles(slots->at("Story"));
        case TemplateId::GenerateScenes: return generate_scenes(*slots, options_);
        case TemplateId::Verify: return verify_script(*slots);
        case TemplateId::ImagePrompts: return image_prompt(*slots);
        case TemplateId::ImageJudge:
        case TemplateId::VideoJudge: return judge(m.attachments);
        case TemplateId::ConsistencyCheck: return consistency_check(*slots, m.attachments);
        case TemplateId::VideoPrompts: return video_prompt(*slots);
        case TemplateId::ParamPredict: return param_predict(*slots);
    }
    return "I could not understand the request.";
}

// ---------------------------------------------------------------------------

ScriptedChat::ScriptedChat(std::vector<std::string> replies) : replies_(std::move(replies)) {}

std::string ScriptedChat::chat(const std::vector<ChatMessage>& messages) {
    std::lock_guard lock(mu_);
    received_.push_back(messages);
    if (next_ >= replies_.size()) throw ProviderError(ProviderErrc::Permanent, "scripted chat has no replies left");
    return replies_[next_++];
}

std::size_t ScriptedChat::calls() const {
    std::lock_guard lock(mu_);
    return received_.size();
}

std::vector<std::vector<ChatMessage>> ScriptedChat::received() const {
    std::lock_guard lock(mu_);
    return received_;
}

}  // namespace animforge::mock
