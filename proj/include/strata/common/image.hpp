#pragma once

#include <filesystem>

namespace strata {

// True when the file exists and decodes as a raster image.
bool is_decodable_image(const std::filesystem::path& path);

}  // namespace strata
