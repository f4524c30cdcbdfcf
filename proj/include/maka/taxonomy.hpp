#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maka {

struct Attribute {
    std::string name;
    std::string aspect;       // one of the taxonomy's aspects
    std::string description;  // short gloss shown in LLM queries
};

// The attribute set that structures prompt generation: three aspects (Scene,
// Actor, Body), four attributes each.
struct AttributeTaxonomy {
    std::vector<std::string> aspects;
    std::vector<Attribute> attributes;

    void validate() const;  // 3 aspects, 4 attributes per aspect, unique names
    const Attribute* find(std::string_view name) const;  // exact, case-insensitive
};

// The shipped default: Scene Type, Scene Elements, Scene Conditions, Prop
// Usage / Number of Actors, Clothing, Actor Identity, Facial Expression /
// Body Move Speed, Body Part Movement, Body Posture, Body Position.
const AttributeTaxonomy& default_taxonomy();

// Maps a response key to a canonical attribute name. Matching is
// case-insensitive and consults the versioned alias table (LLM replies often
// expand names, e.g. "The usage of props in the action" -> "Prop Usage").
std::optional<std::string> canonical_attribute(std::string_view key,
                                               const AttributeTaxonomy& taxonomy);

// alias -> canonical pairs, for documentation and tests
const std::vector<std::pair<std::string, std::string>>& attribute_aliases();

bool iequals(std::string_view a, std::string_view b);

}  // namespace maka
