#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ontorag {

/// Byte range [begin, end) of one token inside the tokenized text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Pipeline tokenizer. Splits on Unicode whitespace; every ASCII punctuation character
/// becomes its own token, except `-`, `'`, `.`, `_` and `/` sitting between two word
/// characters ("over-current", "1.5", "relay's" stay whole).
std::vector<TokenSpan> tokenize(std::string_view text);

std::size_t count_tokens(std::string_view text);

/// Token strings, optionally lowercased, optionally without punctuation-only tokens.
std::vector<std::string> token_strings(std::string_view text, bool lowercase = false,
                                       bool drop_punctuation = false);

bool is_punctuation_token(std::string_view token);

/// Sentences delimited by `.`, `!`, `?` tokens or line breaks, trimmed, non-empty.
std::vector<std::string> split_sentences(std::string_view text);

}  // namespace ontorag
