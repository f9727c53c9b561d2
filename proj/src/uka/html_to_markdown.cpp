#include "strata/uka/html_to_markdown.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "strata/common/text.hpp"

namespace strata::uka {

namespace {

struct Node {
    std::string tag;  // empty for text nodes
    std::string text;
    std::map<std::string, std::string> attrs;
    std::vector<std::unique_ptr<Node>> children;
    Node* parent = nullptr;

    std::string attr(const std::string& k) const {
        auto it = attrs.find(k);
        return it == attrs.end() ? std::string{} : it->second;
    }
};

const std::set<std::string> kVoid{"area", "base", "br", "col", "embed", "hr", "img", "input",
                                  "link", "meta", "param", "source", "track", "wbr"};
const std::set<std::string> kSkipped{"script", "style", "noscript", "template", "svg", "iframe", "canvas", "select", "button"};
const std::set<std::string> kBlock{"p",       "div",    "section",  "article", "main",   "header", "footer",
                                   "aside",   "nav",    "h1",       "h2",      "h3",     "h4",     "h5",
                                   "h6",      "ul",     "ol",       "li",      "table",  "pre",    "blockquote",
                                   "hr",      "figure", "figcaption", "dl",    "dt",     "dd",     "form",
                                   "body",    "html",   "address",  "details", "summary", "fieldset", "center"};

std::string lower(std::string_view s) { return text::to_lower(s); }

void append_utf8(std::string& out, unsigned long cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x110000) {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Tree builder with the usual implied-close rules for p, li, tr, td/th.
class TreeBuilder {
public:
    TreeBuilder() : root_(std::make_unique<Node>()) {
        root_->tag = "#root";
        current_ = root_.get();
    }

    std::unique_ptr<Node> build(std::string_view html) {
        std::size_t i = 0;
        while (i < html.size()) {
            if (html[i] != '<') {
                auto next = html.find('<', i);
                if (next == std::string_view::npos) next = html.size();
                add_text(decode_entities(html.substr(i, next - i)));
                i = next;
                continue;
            }
            if (html.compare(i, 4, "<!--") == 0) {
                auto end = html.find("-->", i + 4);
                i = end == std::string_view::npos ? html.size() : end + 3;
                continue;
            }
            if (i + 1 < html.size() && (html[i + 1] == '!' || html[i + 1] == '?')) {
                auto end = html.find('>', i);
                i = end == std::string_view::npos ? html.size() : end + 1;
                continue;
            }
            if (i + 1 < html.size() && html[i + 1] == '/') {
                auto end = html.find('>', i);
                if (end == std::string_view::npos) break;
                close(lower(text::trim(html.substr(i + 2, end - i - 2))));
                i = end + 1;
                continue;
            }
            if (i + 1 < html.size() && !std::isalpha(static_cast<unsigned char>(html[i + 1]))) {
                add_text("<");
                ++i;
                continue;
            }
            i = open_tag(html, i);
        }
        return std::move(root_);
    }

private:
    std::size_t open_tag(std::string_view html, std::size_t i) {
        std::size_t j = i + 1;
        while (j < html.size() && (std::isalnum(static_cast<unsigned char>(html[j])) || html[j] == '-' || html[j] == ':')) ++j;
        auto node = std::make_unique<Node>();
        node->tag = lower(html.substr(i + 1, j - i - 1));
        bool self_closing = false;
        // attributes
        while (j < html.size() && html[j] != '>') {
            if (std::isspace(static_cast<unsigned char>(html[j]))) {
                ++j;
                continue;
            }
            if (html[j] == '/') {
                self_closing = true;
                ++j;
                continue;
            }
            std::size_t k = j;
            while (k < html.size() && !std::isspace(static_cast<unsigned char>(html[k])) && html[k] != '=' &&
                   html[k] != '>' && html[k] != '/')
                ++k;
            std::string name = lower(html.substr(j, k - j));
            std::string value;
            while (k < html.size() && std::isspace(static_cast<unsigned char>(html[k]))) ++k;
            if (k < html.size() && html[k] == '=') {
                ++k;
                while (k < html.size() && std::isspace(static_cast<unsigned char>(html[k]))) ++k;
                if (k < html.size() && (html[k] == '"' || html[k] == '\'')) {
                    char q = html[k];
                    auto end = html.find(q, k + 1);
                    if (end == std::string_view::npos) end = html.size();
                    value = decode_entities(html.substr(k + 1, end - k - 1));
                    k = std::min(end + 1, html.size());
                } else {
                    std::size_t e = k;
                    while (e < html.size() && !std::isspace(static_cast<unsigned char>(html[e])) && html[e] != '>') ++e;
                    value = decode_entities(html.substr(k, e - k));
                    k = e;
                }
            }
            if (!name.empty()) node->attrs[name] = value;
            j = std::max(k, j + 1);
        }
        const std::size_t after = j < html.size() ? j + 1 : html.size();

        const std::string tag = node->tag;
        if (kSkipped.contains(tag) && !self_closing) {
            // Raw-text content: jump to the matching close tag.
            const std::string closer = "</" + tag;
            std::size_t pos = after;
            while (true) {
                pos = html.find('<', pos);
                if (pos == std::string_view::npos) return html.size();
                if (lower(html.substr(pos, closer.size())) == closer) {
                    auto end = html.find('>', pos);
                    return end == std::string_view::npos ? html.size() : end + 1;
                }
                ++pos;
            }
        }
        if (tag == "title") {
            auto end = html.find('<', after);
            if (end == std::string_view::npos) end = html.size();
            if (title_.empty()) title_ = text::trim(decode_entities(html.substr(after, end - after)));
            auto close_end = html.find('>', end);
            return close_end == std::string_view::npos ? html.size() : close_end + 1;
        }

        implied_close(tag);
        node->parent = current_;
        Node* raw = node.get();
        current_->children.push_back(std::move(node));
        if (!kVoid.contains(tag) && !self_closing) current_ = raw;
        if (tag == "pre") {
            // Keep preformatted text verbatim up to </pre>.
            auto end = html.find("</pre", after);
            if (end == std::string_view::npos) end = html.size();
            std::string inner(html.substr(after, end - after));
            // Drop inner tags such as <code>.
            std::string plain;
            bool in_tag = false;
            for (char c : inner) {
                if (c == '<') in_tag = true;
                else if (c == '>') in_tag = false;
                else if (!in_tag) plain += c;
            }
            auto t = std::make_unique<Node>();
            t->text = decode_entities(plain);
            t->parent = raw;
            raw->children.push_back(std::move(t));
            current_ = raw->parent;
            auto close_end = html.find('>', end);
            return close_end == std::string_view::npos ? html.size() : close_end + 1;
        }
        return after;
    }

    bool in_scope(const std::string& tag, const std::set<std::string>& boundaries) const {
        for (Node* n = current_; n && n->tag != "#root"; n = n->parent) {
            if (n->tag == tag) return true;
            if (boundaries.contains(n->tag)) return false;
        }
        return false;
    }

    void implied_close(const std::string& tag) {
        static const std::set<std::string> closes_p{"p", "div", "ul", "ol", "table", "h1", "h2", "h3", "h4", "h5",
                                                    "h6", "pre", "blockquote", "section", "article", "hr", "figure"};
        if (closes_p.contains(tag) && in_scope("p", {"div", "li", "td", "th", "blockquote", "section", "article"}))
            close("p");
        if (tag == "li" && in_scope("li", {"ul", "ol"})) close("li");
        if ((tag == "dt" || tag == "dd") && in_scope("dt", {"dl"})) close("dt");
        if ((tag == "dt" || tag == "dd") && in_scope("dd", {"dl"})) close("dd");
        if (tag == "tr" && in_scope("tr", {"table"})) close("tr");
        if ((tag == "td" || tag == "th") && (in_scope("td", {"tr", "table"}) || in_scope("th", {"tr", "table"}))) {
            if (in_scope("td", {"tr", "table"})) close("td");
            if (in_scope("th", {"tr", "table"})) close("th");
        }
        if ((tag == "thead" || tag == "tbody" || tag == "tfoot") && in_scope("tr", {"table"})) close("tr");
    }

    void close(const std::string& tag) {
        for (Node* n = current_; n && n->tag != "#root"; n = n->parent) {
            if (n->tag == tag) {
                current_ = n->parent;
                return;
            }
        }
    }

    void add_text(std::string s) {
        if (s.empty()) return;
        auto t = std::make_unique<Node>();
        t->text = std::move(s);
        t->parent = current_;
        current_->children.push_back(std::move(t));
    }

public:
    std::string title_;

private:
    std::unique_ptr<Node> root_;
    Node* current_;
};

std::string collapse_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f') {
            space = true;
        } else {
            if (space) out += ' ';
            space = false;
            out += c;
        }
    }
    if (space && !out.empty()) out += ' ';
    return out;
}

// Joins inline fragments, collapsing whitespace runs across boundaries.
void append_inline(std::string& out, const std::string& piece) {
    if (piece.empty()) return;
    if (!out.empty() && out.back() == ' ' && piece.front() == ' ')
        out += piece.substr(1);
    else
        out += piece;
}

class Renderer {
public:
    std::string render(const Node& root) {
        blocks(root, 0);
        flush();
        return text::join(out_, "\n\n") + (out_.empty() ? "" : "\n");
    }

private:
    std::string inline_of(const Node& n) {
        if (n.tag.empty()) return collapse_ws(n.text);
        const auto& t = n.tag;
        if (t == "br") return "\n";
        if (t == "img") {
            auto src = n.attr("src");
            if (src.empty()) return {};
            return "![" + text::trim(n.attr("alt")) + "](" + src + ")";
        }
        std::string inner;
        for (const auto& c : n.children) append_inline(inner, inline_of(*c));
        if (t == "a") {
            auto href = n.attr("href");
            auto label = text::trim(inner);
            if (href.empty() || href.starts_with("javascript:") || href.starts_with("#") || label.empty()) return inner;
            return wrap_preserving_space(inner, "[" + label + "](" + href + ")");
        }
        if (t == "strong" || t == "b") return emphasize(inner, "**");
        if (t == "em" || t == "i") return emphasize(inner, "*");
        if (t == "code" || t == "kbd" || t == "samp") return emphasize(inner, "`");
        if (kBlock.contains(t) || t == "tr" || t == "td" || t == "th") return " " + inner + " ";
        return inner;
    }

    static std::string wrap_preserving_space(const std::string& inner, std::string core) {
        std::string out;
        if (!inner.empty() && inner.front() == ' ') out += ' ';
        out += core;
        if (inner.size() > 1 && inner.back() == ' ') out += ' ';
        return out;
    }

    static std::string emphasize(const std::string& inner, const std::string& mark) {
        auto core = text::trim(inner);
        if (core.empty()) return inner;
        return wrap_preserving_space(inner, mark + core + mark);
    }

    void flush() {
        // Line breaks from <br> survive; other whitespace is already collapsed.
        std::vector<std::string> lines;
        for (auto& l : text::split_lines(pending_)) {
            auto t = text::trim(l);
            if (!t.empty()) lines.push_back(t);
        }
        if (!lines.empty()) out_.push_back(prefix_lines(text::join(lines, "\n")));
        pending_.clear();
    }

    std::string prefix_lines(const std::string& block) const {
        if (quote_depth_ == 0) return block;
        std::string prefix;
        for (int i = 0; i < quote_depth_; ++i) prefix += "> ";
        std::string out;
        for (const auto& l : text::split_lines(block)) {
            if (!out.empty()) out += "\n";
            out += text::trim(prefix + l);
        }
        return out;
    }

    void emit(std::string block) {
        flush();
        if (!block.empty()) out_.push_back(prefix_lines(block));
    }

    void blocks(const Node& n, int depth) {
        for (const auto& c : n.children) block(*c, depth);
    }

    void block(const Node& n, int depth) {
        const auto& t = n.tag;
        if (t.empty() || !(kBlock.contains(t) || t == "table" || t == "#root" || t == "thead" || t == "tbody")) {
            append_inline(pending_, inline_of(n));
            return;
        }
        if (t.size() == 2 && t[0] == 'h' && t[1] >= '1' && t[1] <= '6') {
            std::string inner;
            for (const auto& c : n.children) append_inline(inner, inline_of(*c));
            auto line = text::trim(collapse_ws(inner));
            if (!line.empty()) emit(std::string(static_cast<std::size_t>(t[1] - '0'), '#') + " " + line);
            return;
        }
        if (t == "hr") {
            emit("---");
            return;
        }
        if (t == "ul" || t == "ol") {
            flush();
            std::vector<std::string> lines;
            list(n, 0, lines);
            emit(text::join(lines, "\n"));
            return;
        }
        if (t == "table") {
            emit(table(n));
            return;
        }
        if (t == "pre") {
            std::string body;
            for (const auto& c : n.children) body += c->text;
            while (!body.empty() && body.front() == '\n') body.erase(body.begin());
            while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
            emit("```\n" + body + "\n```");
            return;
        }
        if (t == "blockquote") {
            flush();
            ++quote_depth_;
            blocks(n, depth);
            flush();
            --quote_depth_;
            return;
        }
        flush();
        blocks(n, depth);
        flush();
    }

    void list(const Node& n, int depth, std::vector<std::string>& lines) {
        const bool ordered = n.tag == "ol";
        int index = 1;
        const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
        for (const auto& c : n.children) {
            if (c->tag != "li") {
                if (c->tag == "ul" || c->tag == "ol") list(*c, depth + 1, lines);
                continue;
            }
            std::string head;
            std::vector<const Node*> nested;
            for (const auto& gc : c->children) {
                if (gc->tag == "ul" || gc->tag == "ol")
                    nested.push_back(gc.get());
                else
                    append_inline(head, inline_of(*gc));
            }
            std::string marker = ordered ? std::to_string(index++) + ". " : "- ";
            lines.push_back(indent + marker + text::trim(collapse_ws(head)));
            for (const auto* sub : nested) list(*sub, depth + 1, lines);
        }
    }

    static void collect_rows(const Node& n, std::vector<const Node*>& rows) {
        for (const auto& c : n.children) {
            if (c->tag == "tr")
                rows.push_back(c.get());
            else if (c->tag == "thead" || c->tag == "tbody" || c->tag == "tfoot")
                collect_rows(*c, rows);
        }
    }

    std::string cell_text(const Node& cell) {
        std::string inner;
        for (const auto& c : cell.children) append_inline(inner, inline_of(*c));
        std::string out;
        for (char ch : text::trim(collapse_ws(inner))) {
            if (ch == '|') out += "\\|";
            else if (ch == '\n') out += ' ';
            else out += ch;
        }
        return out;
    }

    std::string table(const Node& n) {
        std::vector<const Node*> rows;
        collect_rows(n, rows);
        std::vector<std::vector<std::string>> cells;
        std::size_t width = 0;
        for (const auto* r : rows) {
            std::vector<std::string> row;
            for (const auto& c : r->children)
                if (c->tag == "td" || c->tag == "th") row.push_back(cell_text(*c));
            if (row.empty()) continue;
            width = std::max(width, row.size());
            cells.push_back(std::move(row));
        }
        if (cells.empty()) return {};
        std::vector<std::string> lines;
        auto line_of = [&](std::vector<std::string> row) {
            row.resize(width);
            std::string l = "|";
            for (const auto& c : row) l += " " + c + " |";
            return l;
        };
        lines.push_back(line_of(cells[0]));
        std::string sep = "|";
        for (std::size_t i = 0; i < width; ++i) sep += " --- |";
        lines.push_back(sep);
        for (std::size_t i = 1; i < cells.size(); ++i) lines.push_back(line_of(cells[i]));
        return text::join(lines, "\n");
    }

    std::vector<std::string> out_;
    std::string pending_;
    int quote_depth_ = 0;
};

}  // namespace

std::string decode_entities(std::string_view s) {
    static const std::map<std::string, unsigned long> kNamed{
        {"amp", '&'},     {"lt", '<'},        {"gt", '>'},        {"quot", '"'},     {"apos", '\''},
        {"nbsp", 0xA0},   {"mdash", 0x2014},  {"ndash", 0x2013},  {"hellip", 0x2026}, {"copy", 0xA9},
        {"reg", 0xAE},    {"trade", 0x2122},  {"euro", 0x20AC},   {"pound", 0xA3},   {"yen", 0xA5},
        {"deg", 0xB0},    {"rsquo", 0x2019},  {"lsquo", 0x2018},  {"rdquo", 0x201D}, {"ldquo", 0x201C},
        {"middot", 0xB7}, {"times", 0xD7},    {"percnt", '%'},    {"laquo", 0xAB},   {"raquo", 0xBB}};
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out += s[i];
            continue;
        }
        auto semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 10) {
            out += '&';
            continue;
        }
        std::string name(s.substr(i + 1, semi - i - 1));
        unsigned long cp = 0;
        bool ok = false;
        if (!name.empty() && name[0] == '#') {
            try {
                std::size_t used = 0;
                if (name.size() > 1 && (name[1] == 'x' || name[1] == 'X'))
                    cp = std::stoul(name.substr(2), &used, 16), ok = used == name.size() - 2;
                else
                    cp = std::stoul(name.substr(1), &used, 10), ok = used == name.size() - 1;
            } catch (...) {
                ok = false;
            }
        } else if (auto it = kNamed.find(name); it != kNamed.end()) {
            cp = it->second;
            ok = true;
        }
        if (!ok) {
            out += '&';
            continue;
        }
        append_utf8(out, cp == 0xA0 ? ' ' : cp);
        i = semi;
    }
    return out;
}

ConvertedPage html_to_markdown(std::string_view html) {
    TreeBuilder builder;
    auto root = builder.build(html);
    Renderer renderer;
    return {builder.title_, renderer.render(*root)};
}

}  // namespace strata::uka
