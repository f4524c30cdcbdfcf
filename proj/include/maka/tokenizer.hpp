#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace maka {

// Token counting for the 30-token prompt budget. The default counts
// whitespace-delimited words; a subword tokenizer can be swapped in without
// touching the postprocessing contract.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::size_t count_tokens(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

class WhitespaceTokenizer final : public Tokenizer {
public:
    std::size_t count_tokens(std::string_view text) const override;
    std::string name() const override { return "whitespace"; }
};

const Tokenizer& default_tokenizer();

// Whitespace-delimited words of `text` (the default tokenizer's view of it).
std::vector<std::string_view> split_words(std::string_view text);

}  // namespace maka
