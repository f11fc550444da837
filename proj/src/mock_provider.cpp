#include "ontorag/errors.hpp"
#include "ontorag/providers.hpp"
#include "ontorag/tokenizer.hpp"

#include <algorithm>
#include <sstream>

namespace ontorag {

namespace {

const char* const kDefaultPredicates[] = {
    "affects",   "causes",    "closes",   "connects", "contains", "controls", "de-energizes",
    "detects",   "drives",    "energizes", "feeds",   "has",      "includes", "indicates",
    "interrupts", "is",       "isolates", "limits",   "measures", "monitors", "opens",
    "operates",  "prevents",  "protects", "provides", "receives", "reduces",  "requires",
    "sends",     "senses",    "signals",  "supplies", "supports", "triggers", "trips",
    "uses",
};

const char* const kDefaultStopwords[] = {
    "a",     "about", "across", "after", "all",   "also",  "an",    "and",   "any",   "are",
    "as",    "at",    "be",     "been",  "before", "being", "between", "both", "but",  "by",
    "can",   "do",    "does",   "during", "each", "every", "for",   "from",  "how",   "if",
    "in",    "into",  "it",     "its",   "may",   "must",  "no",    "not",   "of",    "on",
    "or",    "over",  "should", "some",  "such",  "than",  "that",  "the",   "their", "them",
    "then",  "these", "they",   "this",  "those", "to",    "under", "was",   "were",  "what",
    "when",  "where", "which",  "while", "who",   "why",   "will",  "with",  "would",
};

std::string stem(std::string token) {
    if (token.size() > 3 && token.back() == 's' && token[token.size() - 2] != 's') {
        token.pop_back();
    }
    return token;
}

std::string response_key(const std::string& template_id, const std::string& input) {
    return template_id + '\0' + input;
}

std::string var(const CompletionRequest& r, const std::string& name) {
    auto it = r.variables.find(name);
    return it == r.variables.end() ? std::string() : it->second;
}

std::size_t count_var(const CompletionRequest& r) {
    const std::string c = var(r, "count");
    if (c.empty()) return 1;
    try {
        return static_cast<std::size_t>(std::stoul(c));
    } catch (const std::exception&) {
        return 1;
    }
}

void push_unique(std::vector<std::string>& out, const std::string& s) {
    if (!s.empty() && std::find(out.begin(), out.end(), s) == out.end()) {
        out.push_back(s);
    }
}

}  // namespace

MockProvider::MockProvider(ProviderConfig config) : config_(std::move(config)) {
    for (const char* p : kDefaultPredicates) predicates_.insert(p);
    for (const char* s : kDefaultStopwords) stopwords_.insert(s);
    if (!config_.fixtures.empty()) {
        load_fixtures(config_.fixtures);
    }
}

void MockProvider::add_response(const std::string& template_id, const std::string& input,
                                const std::string& output) {
    responses_[response_key(template_id, input)] = output;
}

void MockProvider::load_fixtures(const std::filesystem::path& path) {
    const json j = read_json(path);
    if (auto it = j.find("predicates"); it != j.end()) {
        for (const auto& p : *it) predicates_.insert(to_lower(p.get<std::string>()));
    }
    if (auto it = j.find("stopwords"); it != j.end()) {
        for (const auto& s : *it) stopwords_.insert(to_lower(s.get<std::string>()));
    }
    if (auto it = j.find("responses"); it != j.end()) {
        for (const auto& r : *it) {
            const json& out = r.at("output");
            add_response(r.at("template").get<std::string>(), r.at("input").get<std::string>(),
                         out.is_string() ? out.get<std::string>() : out.dump());
        }
    }
}

std::string MockProvider::complete(const CompletionRequest& request) {
    ++completion_calls_;
    if (auto it = responses_.find(response_key(request.template_id, var(request, "input")));
        it != responses_.end()) {
        return it->second;
    }
    return fallback(request);
}

std::vector<Embedding> MockProvider::embed(std::span<const std::string> texts) {
    ++embedding_calls_;
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        if (trim(text).empty()) {
            throw InvalidArgument("cannot embed an empty string");
        }
        auto tokens = token_strings(text, /*lowercase=*/true, /*drop_punctuation=*/true);
        if (tokens.empty()) {
            tokens = token_strings(text, true, false);
        }
        Embedding v(config_.dimension, 0.0);
        for (const auto& tok : tokens) {
            Rng rng(hash_combine(config_.seed, stem(tok)));
            for (auto& x : v) {
                x += 2.0 * rng.uniform() - 1.0;
            }
        }
        normalize(v);
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<MockProvider::Triple> MockProvider::heuristic_triples(const std::string& text) const {
    std::vector<Triple> out;
    for (const auto& sentence : split_sentences(text)) {
        const auto toks = token_strings(sentence, /*lowercase=*/true, /*drop_punctuation=*/false);
        auto content = [&](std::size_t i) {
            return !is_punctuation_token(toks[i]) && stopwords_.count(toks[i]) == 0 &&
                   predicates_.count(toks[i]) == 0;
        };
        std::size_t p = 1;
        while (p < toks.size() && predicates_.count(toks[p]) == 0) ++p;
        if (p >= toks.size()) continue;

        std::size_t s_begin = p;
        while (s_begin > 0 && content(s_begin - 1)) --s_begin;
        if (s_begin == p) continue;
        std::vector<std::string> subject_words(toks.begin() + static_cast<long>(s_begin),
                                               toks.begin() + static_cast<long>(p));
        const std::string subject = join(subject_words, " ");

        // Object: first content run after the predicate, then any "and"-joined runs.
        auto skip_fillers = [&](std::size_t i) {
            while (i < toks.size() && !content(i) && !is_punctuation_token(toks[i]) &&
                   toks[i] != "and") {
                ++i;
            }
            return i;
        };
        std::size_t i = skip_fillers(p + 1);
        while (i < toks.size()) {
            const std::size_t o_begin = i;
            while (i < toks.size() && content(i)) ++i;
            if (o_begin == i) break;
            std::vector<std::string> object_words(toks.begin() + static_cast<long>(o_begin),
                                                  toks.begin() + static_cast<long>(i));
            out.push_back({subject, toks[p], join(object_words, " ")});
            if (i >= toks.size() || toks[i] != "and") break;
            i = skip_fillers(i + 1);
        }
    }
    return out;
}

std::vector<std::string> MockProvider::heuristic_phrases(const std::string& text) const {
    std::vector<std::string> out;
    std::vector<std::string> run;
    auto flush = [&]() {
        if (!run.empty()) push_unique(out, join(run, " "));
        run.clear();
    };
    for (const auto& tok : token_strings(text, true, false)) {
        if (is_punctuation_token(tok) || stopwords_.count(tok) > 0 || predicates_.count(tok) > 0) {
            flush();
        } else {
            run.push_back(tok);
        }
    }
    flush();
    return out;
}

std::string MockProvider::fallback(const CompletionRequest& request) const {
    const std::string& id = request.template_id;
    const std::string input = var(request, "input");

    if (id == "clean_text" || id == "disambiguate") {
        return input;
    }
    if (id == "ner") {
        std::vector<std::string> entities;
        for (const auto& t : heuristic_triples(input)) {
            push_unique(entities, t.subject);
            push_unique(entities, t.object);
        }
        return json(entities).dump();
    }
    if (id == "extract_facts") {
        json facts = json::array();
        for (const auto& t : heuristic_triples(input)) {
            facts.push_back({{"subject", t.subject},
                             {"predicate", t.predicate},
                             {"object", t.object},
                             {"key_entities", {t.subject, t.object}}});
        }
        return facts.dump();
    }
    if (id == "define_term") {
        const std::string term = to_lower(input);
        for (const auto& s : split_sentences(var(request, "context"))) {
            if (to_lower(s).find(term) != std::string::npos) {
                return json{{"definition", input + ": " + s}}.dump();
            }
        }
        return json{{"definition", input + " is a concept named in the corpus."}}.dump();
    }
    if (id == "synthesize_properties") {
        std::vector<std::string> props;
        if (auto parsed = extract_json(input); parsed && parsed->is_array()) {
            for (const auto& p : *parsed) {
                if (p.is_string()) push_unique(props, to_lower(trim(p.get<std::string>())));
            }
        }
        std::sort(props.begin(), props.end());
        return json(props).dump();
    }
    if (id == "name_class") {
        std::vector<std::string> names;
        if (auto parsed = extract_json(input); parsed && parsed->is_array()) {
            for (const auto& p : *parsed) {
                if (!p.is_string()) continue;
                const std::string s = p.get<std::string>();
                if (s.rfind("name: ", 0) == 0) push_unique(names, s.substr(6));
            }
            if (names.empty() && !parsed->empty() && (*parsed)[0].is_string()) {
                names.push_back((*parsed)[0].get<std::string>());
            }
        }
        if (names.empty()) names.push_back("unnamed class");
        std::vector<std::string> head(names.begin(),
                                      names.begin() + static_cast<long>(std::min<std::size_t>(3, names.size())));
        return json{{"name", names.front()},
                    {"definition", "A class covering " + join(head, ", ") + "."}}
            .dump();
    }
    if (id == "query_keys") {
        return json(heuristic_phrases(input)).dump();
    }
    if (id == "answer") {
        // Lines without terminal punctuation are headings; only full sentences are quoted.
        std::vector<std::string> picked;
        std::istringstream lines(var(request, "context"));
        std::string line;
        while (std::getline(lines, line) && picked.size() < 12) {
            for (const auto& s : split_sentences(line)) {
                const char last = s.empty() ? '\0' : s.back();
                if ((last == '.' || last == '!' || last == '?') && picked.size() < 12) push_unique(picked, s);
            }
        }
        if (picked.empty()) return "The context does not state anything that answers this.";
        return join(picked, " ");
    }
    if (id == "extract_claims") {
        std::vector<std::string> claims;
        for (const auto& s : split_sentences(input)) push_unique(claims, s);
        return json(claims).dump();
    }
    if (id == "personas" || id == "tasks" || id == "questions") {
        const std::size_t n = count_var(request);
        auto phrases = heuristic_phrases(var(request, "description"));
        if (phrases.empty()) phrases.push_back("the corpus");
        json items = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& topic = phrases[i % phrases.size()];
            if (id == "personas") {
                items.push_back("Persona " + std::to_string(i + 1) + ": a specialist in " + topic);
            } else if (id == "tasks") {
                items.push_back("Task " + std::to_string(i + 1) + " for " + input + ": review " +
                                topic);
            } else {
                items.push_back("How does " + topic + " relate to " + var(request, "task") +
                                " (variant " + std::to_string(i + 1) + ")?");
            }
        }
        return items.dump();
    }
    if (id.rfind("judge_", 0) == 0) {
        const std::size_t a = count_tokens(var(request, "answer_1"));
        const std::size_t b = count_tokens(var(request, "answer_2"));
        const char* winner = a > b ? "1" : (b > a ? "2" : "tie");
        return json{{"winner", winner}}.dump();
    }
    return json{{"template", id}, {"input", input}}.dump();
}

}  // namespace ontorag
