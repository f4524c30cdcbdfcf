#include "maka/tokenizer.hpp"

#include <cctype>

namespace maka {

std::vector<std::string_view> split_words(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) words.push_back(text.substr(start, i - start));
    }
    return words;
}

std::size_t WhitespaceTokenizer::count_tokens(std::string_view text) const {
    return split_words(text).size();
}

const Tokenizer& default_tokenizer() {
    static const WhitespaceTokenizer tok;
    return tok;
}

}  // namespace maka
