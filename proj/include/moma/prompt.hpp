#pragma once

#include <string>
#include <vector>

#include "moma/core.hpp"

namespace moma {

enum class Mode { Full, Come, Im, NoCot, NoSom };

std::string mode_name(Mode m);
Mode mode_from_name(std::string_view name);

struct PromptPart {
    enum class Kind { Text, Image };
    Kind kind = Kind::Text;
    std::string text;       // Text parts
    std::string image_ref;  // Image parts: stable reference
    std::string image_png;  // Image parts: encoded bytes when available
};

struct Prompt {
    std::vector<PromptPart> parts;
    std::string stage;  // "stage1" or "stage2"

    int image_count() const;
    std::string text_concat() const;
    bool contains(std::string_view needle) const;
    uint64_t hash() const;
};

}  // namespace moma
