#pragma once

#include "cogest/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cogest
{
    enum class Verb
    {
        Pick,
        Place,
        Give,
        GoHome,
        Stop,
        Pause,
        Continue
    };

    enum class Deixis
    {
        None,
        This,
        That,
        Another,
        Last
    };

    enum class Target
    {
        None,
        Human,
        Home
    };

    constexpr std::string_view to_string(Verb v) noexcept
    {
        switch (v)
        {
        case Verb::Pick: return "Pick";
        case Verb::Place: return "Place";
        case Verb::Give: return "Give";
        case Verb::GoHome: return "GoHome";
        case Verb::Stop: return "Stop";
        case Verb::Pause: return "Pause";
        case Verb::Continue: return "Continue";
        }
        return "?";
    }

    constexpr std::string_view to_string(Deixis d) noexcept
    {
        switch (d)
        {
        case Deixis::None: return "None";
        case Deixis::This: return "This";
        case Deixis::That: return "That";
        case Deixis::Another: return "Another";
        case Deixis::Last: return "Last";
        }
        return "?";
    }

    constexpr std::string_view to_string(Target t) noexcept
    {
        switch (t)
        {
        case Target::None: return "None";
        case Target::Human: return "Human";
        case Target::Home: return "Home";
        }
        return "?";
    }

    constexpr bool is_motion_state(Verb v) noexcept
    {
        return v == Verb::Stop || v == Verb::Pause || v == Verb::Continue;
    }

    constexpr bool is_object_action(Verb v) noexcept
    {
        return v == Verb::Pick || v == Verb::Place || v == Verb::Give;
    }

    constexpr bool is_pointing_deixis(Deixis d) noexcept { return d == Deixis::This || d == Deixis::That; }

    struct CommandIntent
    {
        Verb verb = Verb::Stop;
        std::optional<ObjectClass> object_class;
        Deixis deixis = Deixis::None;
        Target target = Target::None;

        friend bool operator==(const CommandIntent&, const CommandIntent&) = default;
    };

    inline std::string describe(const CommandIntent& in)
    {
        std::string out(to_string(in.verb));
        out += "{";
        bool first = true;
        auto field = [&](std::string_view k, std::string_view v) {
            if (!first)
                out += ", ";
            first = false;
            out += k;
            out += "=";
            out += v;
        };
        if (in.object_class)
            field("object", in.object_class->label());
        if (in.deixis != Deixis::None)
            field("deixis", to_string(in.deixis));
        if (in.target != Target::None)
            field("target", to_string(in.target));
        out += "}";
        return out;
    }

    enum class WordCategory
    {
        Verb,
        Object,
        Deixis,
        Target,
        Filler
    };

    // Words recognized by the command language. Object phrases may span several
    // words ("rocker arm"); tokenize() merges them into the class label.
    class Vocabulary
    {
    public:
        static Vocabulary standard()
        {
            Vocabulary v;
            v.add_verb("pick", Verb::Pick);
            v.add_verb("place", Verb::Place);
            v.add_verb("give", Verb::Give);
            v.add_verb("go", Verb::GoHome);
            v.add_verb("stop", Verb::Stop);
            v.add_verb("pause", Verb::Pause);
            v.add_verb("continue", Verb::Continue);
            v.add_object("rod", ObjectClass::rod());
            v.add_object("rocker arm", ObjectClass::rocker_arm());
            v.add_deixis("this", Deixis::This);
            v.add_deixis("that", Deixis::That);
            v.add_deixis("another", Deixis::Another);
            v.add_deixis("last", Deixis::Last);
            v.add_target("me", Target::Human);
            v.add_target("home", Target::Home);
            for (const char* f : {"up", "the", "a", "an", "please", "now", "robot", "to", "one"})
                v.add_filler(f);
            v.validate();
            return v;
        }

        // Line-oriented sections:
        //   [verbs]   word = pick|place|give|go|stop|pause|continue
        //   [objects] word [word...] = class_label
        //   [deixis]  word = this|that|another|last
        //   [targets] word = me|home
        //   [fillers] word
        // Blank lines and lines starting with '#' are ignored.
        static Vocabulary parse(std::istream& in)
        {
            Vocabulary v;
            std::string section;
            std::string line;
            int line_no = 0;
            while (std::getline(in, line))
            {
                ++line_no;
                const std::string text = trim(line);
                if (text.empty() || text.front() == '#')
                    continue;
                if (text.front() == '[')
                {
                    if (text.back() != ']')
                        bad_line(line_no, "unterminated section header");
                    section = lower(trim(text.substr(1, text.size() - 2)));
                    continue;
                }
                if (section == "fillers")
                {
                    v.add_filler(lower(text));
                    continue;
                }
                const auto eq = text.find('=');
                if (eq == std::string::npos)
                    bad_line(line_no, "expected 'word = value'");
                const std::string key = lower(trim(text.substr(0, eq)));
                const std::string value = lower(trim(text.substr(eq + 1)));
                if (key.empty() || value.empty())
                    bad_line(line_no, "empty key or value");
                if (section == "verbs")
                    v.add_verb(key, verb_from_word(value, line_no));
                else if (section == "objects")
                    v.add_object(key, ObjectClass(value));
                else if (section == "deixis")
                    v.add_deixis(key, deixis_from_word(value, line_no));
                else if (section == "targets")
                    v.add_target(key, target_from_word(value, line_no));
                else
                    bad_line(line_no, "entry outside a known section");
            }
            v.validate();
            return v;
        }

        static Vocabulary parse(std::string_view text)
        {
            std::istringstream in{std::string(text)};
            return parse(in);
        }

        void add_verb(const std::string& word, Verb verb)
        {
            claim(word, WordCategory::Verb);
            verbs_[word] = verb;
        }

        void add_object(const std::string& phrase, const ObjectClass& cls)
        {
            auto words = split_words(phrase);
            if (words.empty())
                throw Error(ErrorCode::InvalidVocabulary, "empty object phrase");
            if (words.size() == 1)
                claim(words.front(), WordCategory::Object);
            // The class label itself is also accepted as a token so merged tokens re-parse.
            if (!categories_.contains(cls.label()))
                categories_[cls.label()] = WordCategory::Object;
            else if (categories_.at(cls.label()) != WordCategory::Object)
                throw Error(ErrorCode::InvalidVocabulary, "class label '" + cls.label() + "' collides with another word");
            max_phrase_ = std::max(max_phrase_, words.size());
            if (!canonical_phrase_.contains(cls))
                canonical_phrase_[cls] = join(words);
            objects_[std::move(words)] = cls;
        }

        void add_deixis(const std::string& word, Deixis d)
        {
            claim(word, WordCategory::Deixis);
            deixis_[word] = d;
        }

        void add_target(const std::string& word, Target t)
        {
            claim(word, WordCategory::Target);
            targets_[word] = t;
        }

        void add_filler(const std::string& word)
        {
            claim(word, WordCategory::Filler);
            fillers_.insert(word);
        }

        // Every verb and both standard classes must be reachable.
        void validate() const
        {
            std::set<Verb> covered;
            for (const auto& [w, verb] : verbs_)
                covered.insert(verb);
            if (covered.size() != 7)
                throw Error(ErrorCode::InvalidVocabulary, "verbs must cover pick, place, give, go, stop, pause, continue");
            for (const auto& cls : {ObjectClass::rod(), ObjectClass::rocker_arm()})
                if (!canonical_phrase_.contains(cls))
                    throw Error(ErrorCode::InvalidVocabulary, "missing object class " + cls.label());
        }

        std::optional<WordCategory> category(const std::string& word) const
        {
            if (auto it = categories_.find(word); it != categories_.end())
                return it->second;
            return std::nullopt;
        }

        std::optional<Verb> verb(const std::string& w) const { return lookup(verbs_, w); }
        std::optional<Deixis> deixis(const std::string& w) const { return lookup(deixis_, w); }
        std::optional<Target> target(const std::string& w) const { return lookup(targets_, w); }

        std::optional<ObjectClass> object(const std::string& token) const
        {
            if (auto it = objects_.find(std::vector<std::string>{token}); it != objects_.end())
                return it->second;
            for (const auto& [cls, phrase] : canonical_phrase_)
                if (cls.label() == token)
                    return cls;
            return std::nullopt;
        }

        // Longest object phrase starting at words[pos], as (class, length).
        std::optional<std::pair<ObjectClass, std::size_t>> match_object(const std::vector<std::string>& words,
                                                                       std::size_t pos) const
        {
            for (std::size_t len = std::min(max_phrase_, words.size() - pos); len >= 1; --len)
            {
                std::vector<std::string> key(words.begin() + static_cast<std::ptrdiff_t>(pos),
                                             words.begin() + static_cast<std::ptrdiff_t>(pos + len));
                if (auto it = objects_.find(key); it != objects_.end())
                    return std::pair{it->second, len};
            }
            return std::nullopt;
        }

        std::string phrase_for(const ObjectClass& cls) const
        {
            if (auto it = canonical_phrase_.find(cls); it != canonical_phrase_.end())
                return it->second;
            return cls.label();
        }

        std::vector<ObjectClass> classes() const
        {
            std::vector<ObjectClass> out;
            for (const auto& [cls, phrase] : canonical_phrase_)
                out.push_back(cls);
            return out;
        }

        static std::vector<std::string> split_words(std::string_view text)
        {
            std::vector<std::string> out;
            std::string cur;
            for (char ch : text)
            {
                const auto c = static_cast<unsigned char>(ch);
                if (std::isalnum(c) || ch == '\'')
                    cur.push_back(static_cast<char>(std::tolower(c)));
                else if (!cur.empty())
                {
                    out.push_back(std::move(cur));
                    cur.clear();
                }
            }
            if (!cur.empty())
                out.push_back(std::move(cur));
            return out;
        }

    private:
        template <class Map>
        static std::optional<typename Map::mapped_type> lookup(const Map& m, const std::string& w)
        {
            if (auto it = m.find(w); it != m.end())
                return it->second;
            return std::nullopt;
        }

        void claim(const std::string& word, WordCategory cat)
        {
            if (word.empty() || word.find(' ') != std::string::npos)
                throw Error(ErrorCode::InvalidVocabulary, "invalid word '" + word + "'");
            if (auto it = categories_.find(word); it != categories_.end() && it->second != cat)
                throw Error(ErrorCode::InvalidVocabulary, "word '" + word + "' maps to two categories");
            categories_[word] = cat;
        }

        static std::string join(const std::vector<std::string>& words)
        {
            std::string out;
            for (const auto& w : words)
            {
                if (!out.empty())
                    out += ' ';
                out += w;
            }
            return out;
        }

        static std::string trim(std::string_view s)
        {
            const auto b = s.find_first_not_of(" \t\r\n");
            if (b == std::string_view::npos)
                return {};
            const auto e = s.find_last_not_of(" \t\r\n");
            return std::string(s.substr(b, e - b + 1));
        }

        static std::string lower(std::string s)
        {
            for (auto& c : s)
                c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            return s;
        }

        [[noreturn]] static void bad_line(int line_no, const std::string& why)
        {
            throw Error(ErrorCode::InvalidVocabulary, "line " + std::to_string(line_no) + ": " + why);
        }

        static Verb verb_from_word(const std::string& w, int line_no)
        {
            static const std::map<std::string, Verb, std::less<>> table{
                {"pick", Verb::Pick},     {"place", Verb::Place},   {"give", Verb::Give},
                {"go", Verb::GoHome},     {"gohome", Verb::GoHome}, {"stop", Verb::Stop},
                {"pause", Verb::Pause},   {"continue", Verb::Continue}};
            if (auto it = table.find(w); it != table.end())
                return it->second;
            bad_line(line_no, "unknown verb '" + w + "'");
        }

        static Deixis deixis_from_word(const std::string& w, int line_no)
        {
            if (w == "this")
                return Deixis::This;
            if (w == "that")
                return Deixis::That;
            if (w == "another")
                return Deixis::Another;
            if (w == "last")
                return Deixis::Last;
            bad_line(line_no, "unknown deixis '" + w + "'");
        }

        static Target target_from_word(const std::string& w, int line_no)
        {
            if (w == "me" || w == "human")
                return Target::Human;
            if (w == "home")
                return Target::Home;
            bad_line(line_no, "unknown target '" + w + "'");
        }

        std::map<std::string, WordCategory> categories_;
        std::map<std::string, Verb> verbs_;
        std::map<std::vector<std::string>, ObjectClass> objects_;
        std::map<ObjectClass, std::string> canonical_phrase_;
        std::map<std::string, Deixis> deixis_;
        std::map<std::string, Target> targets_;
        std::set<std::string> fillers_;
        std::size_t max_phrase_ = 1;
    };

    // Lowercased vocabulary tokens in utterance order. Fillers and unknown
    // words are dropped; object phrases collapse to their class label.
    inline std::vector<std::string> tokenize(std::string_view text, const Vocabulary& vocab)
    {
        const auto words = Vocabulary::split_words(text);
        std::vector<std::string> tokens;
        for (std::size_t i = 0; i < words.size();)
        {
            if (auto obj = vocab.match_object(words, i))
            {
                tokens.push_back(obj->first.label());
                i += obj->second;
                continue;
            }
            if (auto c = vocab.category(words[i]); c && *c != WordCategory::Filler)
                tokens.push_back(words[i]);
            ++i;
        }
        return tokens;
    }

    inline std::vector<std::string> tokenize(std::string_view text)
    {
        static const Vocabulary vocab = Vocabulary::standard();
        return tokenize(text, vocab);
    }

    inline CommandIntent parse(const std::vector<std::string>& tokens, const Vocabulary& vocab)
    {
        std::vector<Verb> verbs;
        std::optional<ObjectClass> object;
        Deixis deixis = Deixis::None;
        for (const auto& tok : tokens)
        {
            if (auto v = vocab.verb(tok))
                verbs.push_back(*v);
            else if (auto d = vocab.deixis(tok))
            {
                if (deixis == Deixis::None)
                    deixis = *d;
            }
            else if (auto o = vocab.object(tok))
            {
                if (!object)
                    object = *o;
            }
            // targets are implied by the verb; fillers and unknown tokens carry nothing
        }

        if (verbs.empty())
            throw Error(ErrorCode::NoVerb, "no action verb in utterance");

        const auto has = [&](Verb v) { return std::find(verbs.begin(), verbs.end(), v) != verbs.end(); };
        if (has(Verb::Continue) && (has(Verb::Stop) || has(Verb::Pause)))
            throw Error(ErrorCode::AmbiguousIntent, "utterance both halts and resumes the robot");

        Verb verb = verbs.front();
        // "go pick the rod": a leading "go" is auxiliary to a later object action.
        if (verb == Verb::GoHome)
        {
            auto it = std::find_if(verbs.begin() + 1, verbs.end(), [](Verb v) { return is_object_action(v); });
            if (it != verbs.end())
                verb = *it;
        }

        CommandIntent intent;
        intent.verb = verb;
        switch (verb)
        {
        case Verb::Stop:
        case Verb::Pause:
        case Verb::Continue:
            return intent;
        case Verb::GoHome:
            intent.target = Target::Home;
            return intent;
        case Verb::Give:
            intent.target = Target::Human;
            break;
        case Verb::Pick:
        case Verb::Place:
            break;
        }

        intent.object_class = object;
        intent.deixis = deixis;
        if (!object && deixis == Deixis::None)
            throw Error(ErrorCode::MissingObject, std::string(to_string(verb)) + " names no object");
        if (!object && is_pointing_deixis(deixis) && verb == Verb::Place)
            throw Error(ErrorCode::MissingObject, "Place with bare pointing needs an object class");
        return intent;
    }

    inline CommandIntent parse(const std::vector<std::string>& tokens)
    {
        static const Vocabulary vocab = Vocabulary::standard();
        return parse(tokens, vocab);
    }

    inline CommandIntent parse_phrase(std::string_view text, const Vocabulary& vocab)
    {
        return parse(tokenize(text, vocab), vocab);
    }

    // Canonical word order: verb, target, deixis, object ("give me this rod").
    inline std::string render_phrase(const CommandIntent& intent, const Vocabulary& vocab)
    {
        std::vector<std::string> words;
        switch (intent.verb)
        {
        case Verb::Pick: words.emplace_back("pick"); break;
        case Verb::Place: words.emplace_back("place"); break;
        case Verb::Give: words.emplace_back("give"); break;
        case Verb::GoHome: words.emplace_back("go"); break;
        case Verb::Stop: words.emplace_back("stop"); break;
        case Verb::Pause: words.emplace_back("pause"); break;
        case Verb::Continue: words.emplace_back("continue"); break;
        }
        if (intent.target == Target::Human)
            words.emplace_back("me");
        else if (intent.target == Target::Home)
            words.emplace_back("home");
        switch (intent.deixis)
        {
        case Deixis::None: break;
        case Deixis::This: words.emplace_back("this"); break;
        case Deixis::That: words.emplace_back("that"); break;
        case Deixis::Another: words.emplace_back("another"); break;
        case Deixis::Last: words.emplace_back("last"); break;
        }
        if (intent.object_class)
            words.push_back(vocab.phrase_for(*intent.object_class));
        std::string out;
        for (const auto& w : words)
        {
            if (!out.empty())
                out += ' ';
            out += w;
        }
        return out;
    }

    inline std::string render_phrase(const CommandIntent& intent)
    {
        static const Vocabulary vocab = Vocabulary::standard();
        return render_phrase(intent, vocab);
    }

    struct CorpusEntry
    {
        std::string phrase;
        CommandIntent intent;
    };

    // Quoted command phrases plus every verb x class x deixis object command in
    // canonical form. Phrases are unique.
    inline std::vector<CorpusEntry> phrase_corpus()
    {
        const auto rod = ObjectClass::rod();
        const auto arm = ObjectClass::rocker_arm();
        std::vector<CorpusEntry> out{
            {"place rod", {Verb::Place, rod, Deixis::None, Target::None}},
            {"go home", {Verb::GoHome, std::nullopt, Deixis::None, Target::Home}},
            {"ok, go home", {Verb::GoHome, std::nullopt, Deixis::None, Target::Home}},
            {"give me another rocker arm", {Verb::Give, arm, Deixis::Another, Target::Human}},
            {"pick up the last rod", {Verb::Pick, rod, Deixis::Last, Target::None}},
            {"pick rod", {Verb::Pick, rod, Deixis::None, Target::None}},
            {"give me this rod", {Verb::Give, rod, Deixis::This, Target::Human}},
            {"give me that rocker arm", {Verb::Give, arm, Deixis::That, Target::Human}},
            {"stop", {Verb::Stop, std::nullopt, Deixis::None, Target::None}},
            {"pause", {Verb::Pause, std::nullopt, Deixis::None, Target::None}},
            {"continue", {Verb::Continue, std::nullopt, Deixis::None, Target::None}},
        };
        std::set<std::string> seen;
        for (const auto& e : out)
            seen.insert(e.phrase);

        for (Verb verb : {Verb::Pick, Verb::Place, Verb::Give})
            for (const auto& cls : {rod, arm})
                for (Deixis d : {Deixis::None, Deixis::This, Deixis::That, Deixis::Another, Deixis::Last})
                {
                    CommandIntent in{verb, cls, d, verb == Verb::Give ? Target::Human : Target::None};
                    auto phrase = render_phrase(in);
                    if (seen.insert(phrase).second)
                        out.push_back({std::move(phrase), in});
                }
        return out;
    }
} // namespace cogest
