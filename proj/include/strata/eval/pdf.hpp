#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace strata::eval {

// A4 in points; every coordinate below is in points with a top-left origin.
inline constexpr double kPageWidth = 595.0;
inline constexpr double kPageHeight = 842.0;
inline constexpr double kMargin = 50.0;

struct TextOp {
    double x = 0, y = 0;  // baseline start
    double size = 10;
    bool bold = false;
    std::string text;  // single-byte WinAnsi
};

struct LineOp {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    double width = 0.5;
};

struct RectOp {
    double x = 0, y = 0, w = 0, h = 0;
};

struct ImageOp {
    double x = 0, y = 0, w = 0, h = 0;
    std::size_t image = 0;  // index into Layout::images
};

using DrawOp = std::variant<TextOp, LineOp, RectOp, ImageOp>;

struct Page {
    std::vector<DrawOp> ops;
};

struct Bitmap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
    std::string source;  // bundle-relative path
};

struct Layout {
    std::string title;
    std::vector<Page> pages;
    std::vector<Bitmap> images;
};

// Lays out report.md of a bundle. Local figures are decoded and embedded;
// http(s) figures become captioned placeholder boxes and are never fetched.
// A missing or undecodable local asset raises CompileError naming it.
Layout layout_report(const std::filesystem::path& bundle);
Layout layout_markdown(const std::string& title, const std::string& markdown, const std::filesystem::path& base);

// Deterministic bytes: no timestamps, no random ids.
std::string render_pdf(const Layout& layout);

// Page raster at `scale` pixels per point, 8-bit BGR rows.
Bitmap rasterize_page(const Layout& layout, std::size_t page, double scale);
// sha256 over dimensions and pixel bytes.
std::string raster_hash(const Bitmap& page);

struct CompileOptions {
    double raster_scale = 1.0;
    bool write_page_images = true;
};

struct CompiledReport {
    std::filesystem::path pdf;
    std::vector<std::filesystem::path> page_images;
    std::vector<std::string> raster_hashes;
    std::size_t page_count() const noexcept { return raster_hashes.size(); }
};

// Writes <out_dir>/report.pdf and <out_dir>/page_<n>.png.
CompiledReport compile_report(const std::filesystem::path& bundle, const std::filesystem::path& out_dir,
                              const CompileOptions& options = {});

}  // namespace strata::eval
