#include "ontorag/tokenizer.hpp"

#include "ontorag/util.hpp"

#include <cctype>

namespace ontorag {

namespace {

// Length in bytes of a Unicode whitespace sequence starting at `i`, or 0.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
        return std::isspace(c) ? 1 : 0;
    }
    auto at = [&](std::size_t k) -> unsigned char {
        return k < s.size() ? static_cast<unsigned char>(s[k]) : 0;
    };
    if (c == 0xC2 && (at(i + 1) == 0xA0 || at(i + 1) == 0x85)) {
        return 2;  // NBSP, NEL
    }
    if (c == 0xE1 && at(i + 1) == 0x9A && at(i + 2) == 0x80) {
        return 3;  // OGHAM SPACE MARK
    }
    if (c == 0xE2 && at(i + 1) == 0x80) {
        const unsigned char d = at(i + 2);
        if ((d >= 0x80 && d <= 0x8A) || d == 0xA8 || d == 0xA9 || d == 0xAF) {
            return 3;
        }
    }
    if (c == 0xE2 && at(i + 1) == 0x81 && at(i + 2) == 0x9F) {
        return 3;  // MEDIUM MATHEMATICAL SPACE
    }
    if (c == 0xE3 && at(i + 1) == 0x80 && at(i + 2) == 0x80) {
        return 3;  // IDEOGRAPHIC SPACE
    }
    return 0;
}

bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

bool is_word_char(std::string_view s, std::size_t i) {
    if (i >= s.size()) return false;
    const auto c = static_cast<unsigned char>(s[i]);
    return !is_punct(c) && whitespace_len(s, i) == 0;
}

bool is_joiner(unsigned char c) {
    return c == '-' || c == '\'' || c == '.' || c == '_' || c == '/';
}

}  // namespace

std::vector<TokenSpan> tokenize(std::string_view text) {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    std::size_t word_start = std::string_view::npos;
    auto flush = [&](std::size_t end) {
        if (word_start != std::string_view::npos) {
            out.push_back({word_start, end});
            word_start = std::string_view::npos;
        }
    };
    while (i < text.size()) {
        if (std::size_t ws = whitespace_len(text, i); ws > 0) {
            flush(i);
            i += ws;
            continue;
        }
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_punct(c)) {
            const bool inner = is_joiner(c) && word_start != std::string_view::npos &&
                               is_word_char(text, i + 1);
            if (inner) {
                ++i;
                continue;
            }
            flush(i);
            out.push_back({i, i + 1});
            ++i;
            continue;
        }
        if (word_start == std::string_view::npos) {
            word_start = i;
        }
        ++i;
    }
    flush(text.size());
    return out;
}

std::size_t count_tokens(std::string_view text) { return tokenize(text).size(); }

bool is_punctuation_token(std::string_view token) {
    if (token.empty()) return false;
    for (unsigned char c : token) {
        if (!is_punct(c)) return false;
    }
    return true;
}

std::vector<std::string> token_strings(std::string_view text, bool lowercase,
                                       bool drop_punctuation) {
    std::vector<std::string> out;
    for (const auto& span : tokenize(text)) {
        std::string_view tok = text.substr(span.begin, span.end - span.begin);
        if (drop_punctuation && is_punctuation_token(tok)) {
            continue;
        }
        out.push_back(lowercase ? to_lower(tok) : std::string(tok));
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    const auto spans = tokenize(text);
    std::size_t first = 0;
    auto emit = [&](std::size_t last_exclusive) {
        if (first < last_exclusive) {
            out.emplace_back(text.substr(spans[first].begin,
                                         spans[last_exclusive - 1].end - spans[first].begin));
        }
        first = last_exclusive;
    };
    for (std::size_t i = 0; i < spans.size(); ++i) {
        if (i > first) {
            std::string_view gap =
                text.substr(spans[i - 1].end, spans[i].begin - spans[i - 1].end);
            if (gap.find('\n') != std::string_view::npos) {
                emit(i);
            }
        }
        std::string_view tok = text.substr(spans[i].begin, spans[i].end - spans[i].begin);
        if (tok == "." || tok == "!" || tok == "?") {
            emit(i + 1);
        }
    }
    emit(spans.size());
    return out;
}

}  // namespace ontorag
