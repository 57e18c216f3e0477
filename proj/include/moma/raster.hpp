#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace moma {

struct Color {
    uint8_t r = 0, g = 0, b = 0;
};

// Small RGB raster for schematic scene renderings.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;

    Raster() = default;
    Raster(int w, int h, Color fill = {255, 255, 255});

    void set(int x, int y, Color c);
    void fill_rect(int x0, int y0, int w, int h, Color c);
    void frame_rect(int x0, int y0, int w, int h, Color c);
    // 3x5 bitmap digits/letters, scaled by `scale`.
    void draw_text(int x, int y, const std::string& text, Color c, int scale = 1);

    std::string png() const;  // encoded PNG bytes
};

void write_file(const std::string& path, const std::string& bytes);

std::string base64_encode(const std::string& bytes);

}  // namespace moma
