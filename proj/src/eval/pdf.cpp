#include "strata/eval/pdf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <zlib.h>

#include "strata/common/digest.hpp"
#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"
#include "strata/writer/bundle.hpp"

namespace fs = std::filesystem;

namespace strata::eval {
namespace {

constexpr double kContentWidth = kPageWidth - 2 * kMargin;
constexpr double kBodySize = 10;
constexpr double kCodeSize = 9;
constexpr double kCharWidth = 0.6;  // Courier advance, in ems
constexpr double kMaxImageHeight = 0.55 * (kPageHeight - 2 * kMargin);

// UTF-8 to the single-byte encoding the standard fonts use. Latin-1 maps
// through; common typography is folded to ASCII; anything else becomes '?'.
std::string to_winansi(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size();) {
        const auto c = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        int len = 1;
        if (c < 0x80) {
            cp = c;
        } else if ((c & 0xE0) == 0xC0) {
            cp = c & 0x1F, len = 2;
        } else if ((c & 0xF0) == 0xE0) {
            cp = c & 0x0F, len = 3;
        } else if ((c & 0xF8) == 0xF0) {
            cp = c & 0x07, len = 4;
        } else {
            out += '?';
            ++i;
            continue;
        }
        if (i + static_cast<std::size_t>(len) > s.size()) {
            out += '?';
            break;
        }
        for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        i += static_cast<std::size_t>(len);
        switch (cp) {
            case U'\t': out += "    "; continue;
            case U'‘': case U'’': out += '\''; continue;
            case U'“': case U'”': out += '"'; continue;
            case U'\u2013': case U'\u2014': out += '-'; continue;
            case U'…': out += "..."; continue;
            case U'•': out += '*'; continue;
            default: break;
        }
        if (cp < 0x20) continue;
        out += cp < 0x100 ? static_cast<char>(cp) : '?';
    }
    return out;
}

std::string inline_plain(std::string s) {
    static const std::regex link(R"(\[([^\]]*)\]\(([^)\s]+)\))");
    s = std::regex_replace(s, link, "$1 ($2)");
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '`') continue;
        if ((s[i] == '*' || s[i] == '_') && i + 1 < s.size() && s[i + 1] == s[i]) {
            ++i;
            continue;
        }
        out += s[i];
    }
    return to_winansi(out);
}

std::size_t chars_for(double width, double size) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(width / (kCharWidth * size))));
}

std::vector<std::string> wrap(const std::string& s, std::size_t cols) {
    std::vector<std::string> lines;
    std::string line;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        auto j = s.find(' ', i);
        if (j == std::string::npos) j = s.size();
        std::string word = s.substr(i, j - i);
        i = j;
        if (word.empty()) break;
        while (word.size() > cols) {
            if (!line.empty()) lines.push_back(std::move(line)), line.clear();
            lines.push_back(word.substr(0, cols));
            word.erase(0, cols);
        }
        if (line.empty()) {
            line = word;
        } else if (line.size() + 1 + word.size() <= cols) {
            line += ' ' + word;
        } else {
            lines.push_back(std::move(line));
            line = word;
        }
    }
    if (!line.empty() || lines.empty()) lines.push_back(line);
    return lines;
}

bool is_url(std::string_view s) { return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0; }

std::vector<std::string> split_row(const std::string& line) {
    auto t = text::trim(line);
    if (!t.empty() && t.front() == '|') t.erase(0, 1);
    if (!t.empty() && t.back() == '|') t.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == '\\' && i + 1 < t.size() && t[i + 1] == '|') {
            cell += '|';
            ++i;
        } else if (t[i] == '|') {
            cells.push_back(inline_plain(text::trim(cell)));
            cell.clear();
        } else {
            cell += t[i];
        }
    }
    cells.push_back(inline_plain(text::trim(cell)));
    return cells;
}

bool is_separator_row(const std::string& line) {
    static const std::regex sep(R"(^\s*\|?\s*:?-{2,}:?\s*(\|\s*:?-{2,}:?\s*)*\|?\s*$)");
    return std::regex_match(line, sep);
}

class Composer {
public:
    Composer(Layout& layout, fs::path base) : layout_(layout), base_(std::move(base)) { new_page(); }

    void title(const std::string& t) {
        for (const auto& l : wrap(to_winansi(t), chars_for(kContentWidth, 18))) text_line(kMargin, 18, true, l);
        y_ += 4;
        page().ops.push_back(LineOp{kMargin, y_, kPageWidth - kMargin, y_, 1.0});
        y_ += 14;
    }

    void heading(int level, const std::string& t) {
        static constexpr double sizes[] = {16, 14, 12, 11, 10, 10};
        const double size = sizes[std::clamp(level, 1, 6) - 1];
        y_ += 8;
        // keep a heading with at least two body lines
        ensure(size * 1.2 + 2 * kBodySize * 1.2);
        for (const auto& l : wrap(inline_plain(t), chars_for(kContentWidth, size))) text_line(kMargin, size, true, l);
        y_ += 4;
    }

    void paragraph(const std::string& t, double indent = 0, const std::string& bullet = {}) {
        const double x = kMargin + indent;
        const auto lines = wrap(inline_plain(t), chars_for(kContentWidth - indent - 12 * !bullet.empty(), kBodySize));
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (!bullet.empty()) {
                if (i == 0) {
                    ensure(kBodySize * 1.2);
                    page().ops.push_back(TextOp{x, y_ + kBodySize, kBodySize, false, bullet});
                }
                text_line(x + 12, kBodySize, false, lines[i]);
            } else {
                text_line(x, kBodySize, false, lines[i]);
            }
        }
        y_ += bullet.empty() ? 6 : 2;
    }

    void code(const std::vector<std::string>& lines) {
        const auto cols = chars_for(kContentWidth - 10, kCodeSize);
        for (const auto& raw : lines) {
            auto l = to_winansi(raw);
            if (l.empty()) l = " ";
            for (std::size_t p = 0; p < l.size(); p += cols) text_line(kMargin + 10, kCodeSize, false, l.substr(p, cols));
        }
        y_ += 6;
    }

    void rule() {
        ensure(10);
        y_ += 5;
        page().ops.push_back(LineOp{kMargin, y_, kPageWidth - kMargin, y_, 0.5});
        y_ += 5;
    }

    void table(const std::vector<std::vector<std::string>>& rows) {
        if (rows.empty()) return;
        std::size_t ncols = 0;
        for (const auto& r : rows) ncols = std::max(ncols, r.size());
        std::vector<double> natural(ncols, 1.0);
        for (const auto& r : rows)
            for (std::size_t c = 0; c < r.size(); ++c) natural[c] = std::max(natural[c], static_cast<double>(r[c].size()));
        double total = 0;
        for (auto& n : natural) total += (n = std::min(n, 40.0) + 2);
        std::vector<double> widths(ncols);
        for (std::size_t c = 0; c < ncols; ++c) widths[c] = kContentWidth * natural[c] / total;

        constexpr double pad = 3;
        const double lead = kCodeSize * 1.2;
        y_ += 2;
        bool top_drawn = false;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            std::vector<std::vector<std::string>> cells(ncols);
            std::size_t height_lines = 1;
            for (std::size_t c = 0; c < ncols; ++c) {
                const auto& v = c < rows[r].size() ? rows[r][c] : std::string{};
                cells[c] = wrap(v, chars_for(widths[c] - 2 * pad, kCodeSize));
                height_lines = std::max(height_lines, cells[c].size());
            }
            const double h = static_cast<double>(height_lines) * lead + 2 * pad;
            if (y_ + h > bottom()) {
                new_page();
                top_drawn = false;
            }
            if (!top_drawn) {
                page().ops.push_back(LineOp{kMargin, y_, kMargin + kContentWidth, y_, 0.5});
                top_drawn = true;
            }
            double x = kMargin;
            page().ops.push_back(LineOp{x, y_, x, y_ + h, 0.5});
            for (std::size_t c = 0; c < ncols; ++c) {
                for (std::size_t k = 0; k < cells[c].size(); ++k)
                    page().ops.push_back(TextOp{x + pad, y_ + pad + static_cast<double>(k) * lead + kCodeSize, kCodeSize,
                                                r == 0, cells[c][k]});
                x += widths[c];
                page().ops.push_back(LineOp{x, y_, x, y_ + h, 0.5});
            }
            y_ += h;
            page().ops.push_back(LineOp{kMargin, y_, kMargin + kContentWidth, y_, r == 0 ? 1.0 : 0.5});
        }
        y_ += 8;
    }

    void figure(const std::string& alt, const std::string& target) {
        const auto caption = wrap(inline_plain(alt), chars_for(kContentWidth, kCodeSize));
        const double caption_h = alt.empty() ? 0 : static_cast<double>(caption.size()) * kCodeSize * 1.2;
        if (is_url(target)) {
            const double h = 90;
            ensure(h + caption_h + 20);
            y_ += 4;
            page().ops.push_back(RectOp{kMargin, y_, kContentWidth, h});
            page().ops.push_back(LineOp{kMargin, y_, kMargin + kContentWidth, y_ + h, 0.3});
            page().ops.push_back(LineOp{kMargin, y_ + h, kMargin + kContentWidth, y_, 0.3});
            const auto url_lines = wrap(to_winansi(target), chars_for(kContentWidth - 20, kCodeSize));
            double ty = y_ + 16;
            page().ops.push_back(TextOp{kMargin + 10, ty, kCodeSize, true, "[external figure]"});
            for (const auto& l : url_lines) {
                ty += kCodeSize * 1.2;
                page().ops.push_back(TextOp{kMargin + 10, ty, kCodeSize, false, l});
            }
            y_ += h + 4;
        } else {
            const std::size_t idx = load_image(target);
            const auto& bm = layout_.images[idx];
            double w = std::min<double>(kContentWidth, bm.width * 0.75);
            double h = w * bm.height / bm.width;
            if (h > kMaxImageHeight) {
                h = kMaxImageHeight;
                w = h * bm.width / bm.height;
            }
            ensure(h + caption_h + 10);
            y_ += 4;
            page().ops.push_back(ImageOp{kMargin + (kContentWidth - w) / 2, y_, w, h, idx});
            y_ += h + 4;
        }
        for (const auto& l : caption) text_line(kMargin, kCodeSize, false, l);
        y_ += 8;
    }

private:
    Page& page() { return layout_.pages.back(); }
    static double bottom() { return kPageHeight - kMargin; }
    void new_page() {
        layout_.pages.emplace_back();
        y_ = kMargin;
    }
    void ensure(double h) {
        if (y_ + h > bottom() && y_ > kMargin) new_page();
    }
    void text_line(double x, double size, bool bold, const std::string& s) {
        const double lead = size * 1.2;
        ensure(lead);
        page().ops.push_back(TextOp{x, y_ + size, size, bold, s});
        y_ += lead;
    }

    std::size_t load_image(const std::string& target) {
        for (std::size_t i = 0; i < layout_.images.size(); ++i)
            if (layout_.images[i].source == target) return i;
        const auto path = base_ / target;
        cv::Mat img;
        if (fs::is_regular_file(path)) img = cv::imread(path.string(), cv::IMREAD_COLOR);
        if (img.empty()) throw CompileError("corrupt or missing asset: " + target);
        cv::Mat rgb;
        cv::cvtColor(img, rgb, cv::COLOR_BGR2RGB);
        Bitmap bm{rgb.cols, rgb.rows, {}, target};
        bm.rgb.reserve(static_cast<std::size_t>(rgb.cols) * rgb.rows * 3);
        for (int r = 0; r < rgb.rows; ++r) bm.rgb.insert(bm.rgb.end(), rgb.ptr<std::uint8_t>(r), rgb.ptr<std::uint8_t>(r) + rgb.cols * 3);
        layout_.images.push_back(std::move(bm));
        return layout_.images.size() - 1;
    }

    Layout& layout_;
    fs::path base_;
    double y_ = kMargin;
};

bool is_fence(const std::string& line) { return text::trim(line).rfind("```", 0) == 0; }

void lay_out_body(Composer& c, const std::string& markdown) {
    static const std::regex heading(R"(^(#{1,6})\s+(.*?)\s*#*\s*$)");
    static const std::regex bullet(R"(^(\s*)([-*+]|\d+[.)])\s+(.*)$)");
    static const std::regex image(R"(!\[([^\]]*)\]\(\s*<?([^)>\s]+)>?(?:\s+"[^"]*")?\s*\))");
    static const std::regex hr(R"(^\s*([-*_])(\s*\1){2,}\s*$)");

    const auto lines = text::split_lines(markdown);
    std::string para;
    auto flush = [&] {
        auto t = text::trim(para);
        para.clear();
        if (t.empty()) return;
        // figures split a paragraph into text, figure, text
        std::smatch m;
        std::string rest = t;
        while (std::regex_search(rest, m, image)) {
            auto before = text::trim(m.prefix().str());
            if (!before.empty()) c.paragraph(before);
            c.figure(m[1].str(), m[2].str());
            rest = m.suffix().str();
        }
        rest = text::trim(rest);
        if (!rest.empty()) c.paragraph(rest);
    };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        std::smatch m;
        if (is_fence(line)) {
            flush();
            std::vector<std::string> body;
            for (++i; i < lines.size() && !is_fence(lines[i]); ++i) body.push_back(lines[i]);
            c.code(body);
            continue;
        }
        if (text::trim(line).empty()) {
            flush();
            continue;
        }
        if (std::regex_match(line, m, heading)) {
            flush();
            c.heading(static_cast<int>(m[1].length()), m[2].str());
            continue;
        }
        if (std::regex_match(line, hr)) {
            flush();
            c.rule();
            continue;
        }
        if (text::trim(line).front() == '|') {
            flush();
            std::vector<std::vector<std::string>> rows;
            for (; i < lines.size() && !text::trim(lines[i]).empty() && text::trim(lines[i]).front() == '|'; ++i)
                if (!is_separator_row(lines[i])) rows.push_back(split_row(lines[i]));
            --i;
            c.table(rows);
            continue;
        }
        if (std::regex_match(line, m, bullet) && !std::regex_search(line, image)) {
            flush();
            const double indent = std::min<double>(static_cast<double>(m[1].length()) * 4, 48);
            const auto marker = m[2].str();
            std::string item = m[3].str();
            // lazy continuation lines
            while (i + 1 < lines.size() && !text::trim(lines[i + 1]).empty() && !std::regex_match(lines[i + 1], bullet) &&
                   text::trim(lines[i + 1]).front() != '#' && text::trim(lines[i + 1]).front() != '|' &&
                   !is_fence(lines[i + 1]))
                item += " " + text::trim(lines[++i]);
            c.paragraph(item, indent, std::isdigit(static_cast<unsigned char>(marker[0])) ? marker : "-");
            continue;
        }
        para += para.empty() ? line : " " + text::trim(line);
    }
    flush();
}

std::string num(double v) {
    auto s = fmt::format("{:.2f}", v);
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s == "-0" ? "0" : s;
}

std::string pdf_string(const std::string& s) {
    std::string out = "(";
    for (char ch : s) {
        if (ch == '(' || ch == ')' || ch == '\\') out += '\\';
        out += ch;
    }
    return out + ")";
}

std::string deflate(const std::string& data) {
    uLongf size = compressBound(static_cast<uLong>(data.size()));
    std::string out(size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(out.data()), &size, reinterpret_cast<const Bytef*>(data.data()),
                  static_cast<uLong>(data.size()), 6) != Z_OK)
        throw CompileError("zlib compression failed");
    out.resize(size);
    return out;
}

std::string content_stream(const Page& page) {
    std::string s;
    for (const auto& op : page.ops) {
        if (const auto* t = std::get_if<TextOp>(&op)) {
            s += fmt::format("BT /{} {} Tf {} {} Td {} Tj ET\n", t->bold ? "F2" : "F1", num(t->size), num(t->x),
                             num(kPageHeight - t->y), pdf_string(t->text));
        } else if (const auto* l = std::get_if<LineOp>(&op)) {
            s += fmt::format("{} w {} {} m {} {} l S\n", num(l->width), num(l->x1), num(kPageHeight - l->y1), num(l->x2),
                             num(kPageHeight - l->y2));
        } else if (const auto* r = std::get_if<RectOp>(&op)) {
            s += fmt::format("1 w {} {} {} {} re S\n", num(r->x), num(kPageHeight - r->y - r->h), num(r->w), num(r->h));
        } else if (const auto* im = std::get_if<ImageOp>(&op)) {
            s += fmt::format("q {} 0 0 {} {} {} cm /Im{} Do Q\n", num(im->w), num(im->h), num(im->x),
                             num(kPageHeight - im->y - im->h), im->image);
        }
    }
    return s;
}

}  // namespace

Layout layout_markdown(const std::string& title, const std::string& markdown, const fs::path& base) {
    Layout layout;
    layout.title = title;
    Composer c(layout, base);
    c.title(title);
    lay_out_body(c, markdown);
    return layout;
}

Layout layout_report(const fs::path& bundle) {
    const auto report_path = bundle / writer::kReportFile;
    std::ifstream in(report_path, std::ios::binary);
    if (!in) throw CompileError("missing " + report_path.string());
    std::string md((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::string title;
    const auto meta_path = bundle / writer::kMetaFile;
    if (fs::exists(meta_path)) title = writer::read_json_file(meta_path).value("question", std::string{});

    // The leading H1 is the title; do not print it twice.
    auto lines = text::split_lines(md);
    std::size_t first = 0;
    while (first < lines.size() && text::trim(lines[first]).empty()) ++first;
    if (first < lines.size() && lines[first].rfind("# ", 0) == 0) {
        if (title.empty()) title = text::trim(lines[first].substr(2));
        lines.erase(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(first) + 1);
        md = text::join(lines, "\n");
    }
    if (title.empty()) title = bundle.filename().string();
    return layout_markdown(title, md, bundle);
}

std::string render_pdf(const Layout& layout) {
    std::vector<std::string> objects;  // object n is objects[n-1]
    const std::size_t n_images = layout.images.size();
    const std::size_t first_image = 5;
    const std::size_t first_page = first_image + n_images;

    objects.push_back("<< /Type /Catalog /Pages 2 0 R >>");
    std::string kids;
    for (std::size_t p = 0; p < layout.pages.size(); ++p) kids += fmt::format("{} 0 R ", first_page + 2 * p);
    objects.push_back(fmt::format("<< /Type /Pages /Kids [{}] /Count {} >>", text::trim(kids), layout.pages.size()));
    objects.push_back("<< /Type /Font /Subtype /Type1 /BaseFont /Courier /Encoding /WinAnsiEncoding >>");
    objects.push_back("<< /Type /Font /Subtype /Type1 /BaseFont /Courier-Bold /Encoding /WinAnsiEncoding >>");
    for (const auto& img : layout.images) {
        const auto data = deflate(std::string(img.rgb.begin(), img.rgb.end()));
        objects.push_back(fmt::format("<< /Type /XObject /Subtype /Image /Width {} /Height {} /ColorSpace /DeviceRGB "
                                      "/BitsPerComponent 8 /Filter /FlateDecode /Length {} >>\nstream\n",
                                      img.width, img.height, data.size()) +
                          data + "\nendstream");
    }
    std::string xobjects;
    for (std::size_t i = 0; i < n_images; ++i) xobjects += fmt::format("/Im{} {} 0 R ", i, first_image + i);
    for (std::size_t p = 0; p < layout.pages.size(); ++p) {
        const auto data = deflate(content_stream(layout.pages[p]));
        objects.push_back(fmt::format("<< /Type /Page /Parent 2 0 R /MediaBox [0 0 {} {}] /Resources << /Font << /F1 3 0 R "
                                      "/F2 4 0 R >> /XObject << {}>> >> /Contents {} 0 R >>",
                                      num(kPageWidth), num(kPageHeight), xobjects, first_page + 2 * p + 1));
        objects.push_back(fmt::format("<< /Length {} /Filter /FlateDecode >>\nstream\n", data.size()) + data +
                          "\nendstream");
    }
    objects.push_back(fmt::format("<< /Title {} /Producer (strata) >>", pdf_string(to_winansi(layout.title))));

    std::string out = "%PDF-1.4\n%\xE2\xE3\xCF\xD3\n";
    std::vector<std::size_t> offsets;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        offsets.push_back(out.size());
        out += fmt::format("{} 0 obj\n", i + 1) + objects[i] + "\nendobj\n";
    }
    const auto xref = out.size();
    out += fmt::format("xref\n0 {}\n0000000000 65535 f \n", objects.size() + 1);
    for (auto off : offsets) out += fmt::format("{:010} 00000 n \n", off);
    out += fmt::format("trailer\n<< /Size {} /Root 1 0 R /Info {} 0 R >>\nstartxref\n{}\n%%EOF\n", objects.size() + 1,
                       objects.size(), xref);
    return out;
}

Bitmap rasterize_page(const Layout& layout, std::size_t page, double scale) {
    if (page >= layout.pages.size()) throw CompileError(fmt::format("no page {}", page + 1));
    const int W = static_cast<int>(std::lround(kPageWidth * scale));
    const int H = static_cast<int>(std::lround(kPageHeight * scale));
    cv::Mat canvas(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    auto pt = [scale](double x, double y) {
        return cv::Point(static_cast<int>(std::lround(x * scale)), static_cast<int>(std::lround(y * scale)));
    };
    for (const auto& op : layout.pages[page].ops) {
        if (const auto* t = std::get_if<TextOp>(&op)) {
            std::string ascii;
            for (char ch : t->text) ascii += (static_cast<unsigned char>(ch) < 0x80) ? ch : '?';
            cv::putText(canvas, ascii, pt(t->x, t->y), cv::FONT_HERSHEY_SIMPLEX, t->size * scale / 38.0,
                        cv::Scalar(0, 0, 0), t->bold ? 2 : 1, cv::LINE_8);
        } else if (const auto* l = std::get_if<LineOp>(&op)) {
            cv::line(canvas, pt(l->x1, l->y1), pt(l->x2, l->y2), cv::Scalar(0, 0, 0),
                     std::max(1, static_cast<int>(std::lround(l->width * scale))), cv::LINE_8);
        } else if (const auto* r = std::get_if<RectOp>(&op)) {
            cv::rectangle(canvas, pt(r->x, r->y), pt(r->x + r->w, r->y + r->h), cv::Scalar(0, 0, 0),
                          std::max(1, static_cast<int>(std::lround(scale))), cv::LINE_8);
        } else if (const auto* im = std::get_if<ImageOp>(&op)) {
            const auto& bm = layout.images.at(im->image);
            cv::Mat rgb(bm.height, bm.width, CV_8UC3, const_cast<std::uint8_t*>(bm.rgb.data()));
            cv::Mat bgr;
            cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
            const auto tl = pt(im->x, im->y);
            const auto br = pt(im->x + im->w, im->y + im->h);
            cv::Rect dst(tl, br);
            dst &= cv::Rect(0, 0, W, H);
            if (dst.width <= 0 || dst.height <= 0) continue;
            cv::Mat scaled;
            cv::resize(bgr, scaled, cv::Size(br.x - tl.x, br.y - tl.y), 0, 0, cv::INTER_AREA);
            scaled(cv::Rect(dst.x - tl.x, dst.y - tl.y, dst.width, dst.height)).copyTo(canvas(dst));
        }
    }
    Bitmap out{W, H, {}, {}};
    out.rgb.assign(canvas.datastart, canvas.dataend);
    return out;
}

std::string raster_hash(const Bitmap& page) {
    std::string bytes = fmt::format("{}x{}:", page.width, page.height);
    bytes.append(page.rgb.begin(), page.rgb.end());
    return sha256_hex(bytes);
}

CompiledReport compile_report(const fs::path& bundle, const fs::path& out_dir, const CompileOptions& options) {
    const auto layout = layout_report(bundle);
    fs::create_directories(out_dir);
    for (const auto& e : fs::directory_iterator(out_dir))
        if (e.path().filename().string().rfind("page_", 0) == 0) fs::remove(e.path());
    CompiledReport result;
    result.pdf = out_dir / "report.pdf";
    writer::write_file_atomic(result.pdf, render_pdf(layout));
    for (std::size_t p = 0; p < layout.pages.size(); ++p) {
        auto raster = rasterize_page(layout, p, options.raster_scale);
        result.raster_hashes.push_back(raster_hash(raster));
        if (!options.write_page_images) continue;
        const auto path = out_dir / fmt::format("page_{:03}.png", p + 1);
        cv::Mat m(raster.height, raster.width, CV_8UC3, raster.rgb.data());
        if (!cv::imwrite(path.string(), m)) throw CompileError("cannot write " + path.string());
        result.page_images.push_back(path);
    }
    return result;
}

}  // namespace strata::eval
