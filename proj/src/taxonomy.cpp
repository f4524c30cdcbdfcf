#include "maka/taxonomy.hpp"

#include <cctype>
#include <map>

#include "maka/error.hpp"

namespace maka {

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

void AttributeTaxonomy::validate() const {
    if (aspects.size() != 3)
        fail("BadParams", "taxonomy must have exactly 3 aspects, got " +
                              std::to_string(aspects.size()));
    if (attributes.size() != 12)
        fail("BadParams", "taxonomy must have exactly 12 attributes, got " +
                              std::to_string(attributes.size()));
    std::map<std::string, int> per_aspect;
    for (const auto& a : attributes) {
        bool known = false;
        for (const auto& asp : aspects) known = known || asp == a.aspect;
        if (!known) fail("BadParams", "attribute '" + a.name + "' names unknown aspect '" + a.aspect + "'");
        per_aspect[a.aspect]++;
        int seen = 0;
        for (const auto& other : attributes)
            if (iequals(other.name, a.name)) ++seen;
        if (seen != 1) fail("BadParams", "duplicate attribute name '" + a.name + "'");
    }
    for (const auto& [aspect, n] : per_aspect)
        if (n != 4) fail("BadParams", "aspect '" + aspect + "' has " + std::to_string(n) +
                                          " attributes, expected 4");
}

const Attribute* AttributeTaxonomy::find(std::string_view name) const {
    for (const auto& a : attributes)
        if (iequals(a.name, name)) return &a;
    return nullptr;
}

const AttributeTaxonomy& default_taxonomy() {
    static const AttributeTaxonomy tax = [] {
        AttributeTaxonomy t;
        t.aspects = {"Scene", "Actor", "Body"};
        t.attributes = {
            {"Scene Type", "Scene", "Soccer field, Kitchen, Street, Gymnasium, etc."},
            {"Scene Elements", "Scene", "Soccer ball, Goalpost, Stove, Traffic sign, etc."},
            {"Scene Conditions", "Scene", "Sunny, Rainy, Indoor, Outdoor, etc."},
            {"Prop Usage", "Scene", "Soccer ball, Knife, Cookware, etc."},
            {"Number of Actors", "Actor", "Single, Double, Multiple."},
            {"Clothing", "Actor", "Sportswear, Chef's uniform, Police uniform, etc."},
            {"Actor Identity", "Actor", "Athlete, Chef, Policeman, etc."},
            {"Facial Expression", "Actor", "Happy, Sad, Angry, Surprised, etc."},
            {"Body Move Speed", "Body", "Fast, Medium, Slow, etc."},
            {"Body Part Movement", "Body", "Hand, Leg, Head, etc."},
            {"Body Posture", "Body", "Standing, Sitting, Lying, Bending, etc."},
            {"Body Position", "Body", "In contact with ground, Off the ground, etc."},
        };
        t.validate();
        return t;
    }();
    return tax;
}

// Alias table v1. Replies tend to restate attribute names long-form; extend
// here when a new phrasing shows up in the wild.
const std::vector<std::pair<std::string, std::string>>& attribute_aliases() {
    static const std::vector<std::pair<std::string, std::string>> aliases = {
        {"The usage of props in the action", "Prop Usage"},
        {"Usage of props", "Prop Usage"},
        {"Props", "Prop Usage"},
        {"Prop", "Prop Usage"},
        {"Body Movement Speed", "Body Move Speed"},
        {"Body Speed", "Body Move Speed"},
        {"Number of Actor", "Number of Actors"},
        {"Actors", "Number of Actors"},
        {"Scene Element", "Scene Elements"},
        {"Scene Condition", "Scene Conditions"},
        {"Body Parts Movement", "Body Part Movement"},
    };
    return aliases;
}

std::optional<std::string> canonical_attribute(std::string_view key,
                                               const AttributeTaxonomy& taxonomy) {
    if (const Attribute* a = taxonomy.find(key)) return a->name;
    for (const auto& [alias, canonical] : attribute_aliases()) {
        if (iequals(alias, key)) {
            if (const Attribute* a = taxonomy.find(canonical)) return a->name;
        }
    }
    return std::nullopt;
}

}  // namespace maka
