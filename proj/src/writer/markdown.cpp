#include "strata/writer/markdown.hpp"

#include <algorithm>
#include <set>

#include "strata/common/text.hpp"

namespace strata::md {

namespace {

bool is_fence(std::string_view line) {
    auto t = text::trim(line);
    return t.rfind("```", 0) == 0 || t.rfind("~~~", 0) == 0;
}

std::string fold_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
        } else {
            if (space) out += ' ';
            space = false;
            out += c;
        }
    }
    return out;
}

}  // namespace

std::vector<ImageRef> image_refs(std::string_view s) {
    std::vector<ImageRef> out;
    bool in_fence = false;
    std::size_t line_start = 0;
    while (line_start <= s.size()) {
        auto nl = s.find('\n', line_start);
        const auto line_end = nl == std::string_view::npos ? s.size() : nl;
        const auto line = s.substr(line_start, line_end - line_start);
        if (is_fence(line)) {
            in_fence = !in_fence;
        } else if (!in_fence) {
            for (std::size_t i = 0; i + 1 < line.size(); ++i) {
                if (line[i] != '!' || line[i + 1] != '[') continue;
                // alt text may contain balanced brackets
                std::size_t j = i + 2;
                int depth = 1;
                for (; j < line.size() && depth > 0; ++j) {
                    if (line[j] == '\\') ++j;
                    else if (line[j] == '[') ++depth;
                    else if (line[j] == ']') --depth;
                }
                if (depth != 0 || j >= line.size() || line[j] != '(') continue;
                const auto close = line.find(')', j);
                if (close == std::string_view::npos) continue;
                auto target = text::trim(line.substr(j + 1, close - j - 1));
                if (auto sp = target.find(' '); sp != std::string::npos) target = target.substr(0, sp);  // "title"
                if (target.size() >= 2 && target.front() == '<' && target.back() == '>')
                    target = target.substr(1, target.size() - 2);
                out.push_back({std::string(line.substr(i + 2, j - 1 - (i + 2))), target, line_start + i,
                               line_start + close + 1});
                i = close;
            }
        }
        if (nl == std::string_view::npos) break;
        line_start = nl + 1;
    }
    return out;
}

std::vector<std::string> image_targets(std::string_view markdown) {
    std::vector<std::string> out;
    for (auto& r : image_refs(markdown)) out.push_back(std::move(r.target));
    return out;
}

bool references(std::string_view markdown, std::string_view target) {
    const auto refs = image_refs(markdown);
    return std::any_of(refs.begin(), refs.end(), [&](const ImageRef& r) { return r.target == target; });
}

std::vector<std::string> blocks(std::string_view markdown) {
    std::vector<std::string> out;
    std::string current;
    bool in_fence = false;
    for (const auto& line : text::split_lines(markdown)) {
        if (is_fence(line)) in_fence = !in_fence;
        if (!in_fence && text::trim(line).empty() && !is_fence(line)) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
            continue;
        }
        current += current.empty() ? line : "\n" + line;
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::string dedupe_paragraphs(std::string_view markdown, std::vector<std::string>* dropped) {
    constexpr std::size_t kMinChars = 40;
    std::set<std::string> seen;
    std::string out;
    for (auto& b : blocks(markdown)) {
        const auto t = text::trim(b);
        const bool prose = t.size() >= kMinChars && t.front() != '#' && t.rfind("![", 0) != 0 && t.front() != '|' &&
                           !is_fence(t);
        if (prose && !seen.insert(fold_ws(t)).second) {
            if (dropped) dropped->push_back(t);
            continue;
        }
        if (!out.empty()) out += "\n\n";
        out += b;
    }
    if (!out.empty()) out += "\n";
    return out;
}

std::string insert_after_heading(std::string_view markdown, std::string_view heading, std::string_view block) {
    auto parts = blocks(markdown);
    const auto want = text::to_lower(text::trim(heading));
    std::size_t at = parts.size();
    for (std::size_t i = 0; i < parts.size() && !want.empty(); ++i) {
        auto t = text::trim(parts[i]);
        if (t.empty() || t.front() != '#') continue;
        auto first_line = text::split_lines(t).front();
        auto h = text::to_lower(text::trim(first_line.substr(first_line.find_first_not_of('#'))));
        if (h != want) continue;
        at = i + 1;
        // a heading block may already carry its first paragraph
        const bool heading_only = text::split_lines(t).size() == 1;
        if (heading_only && at < parts.size() && text::trim(parts[at]).front() != '#') ++at;
        break;
    }
    parts.insert(parts.begin() + static_cast<std::ptrdiff_t>(at), std::string(block));
    return text::join(parts, "\n\n") + "\n";
}

std::string demote_headings(std::string_view markdown, int levels) {
    std::string out;
    bool in_fence = false;
    for (const auto& line : text::split_lines(markdown)) {
        if (is_fence(line)) in_fence = !in_fence;
        std::string l = line;
        if (!in_fence && !l.empty() && l.front() == '#') {
            const auto hashes = l.find_first_not_of('#');
            if (hashes != std::string::npos && l[hashes] == ' ') {
                const auto add = std::min<std::size_t>(static_cast<std::size_t>(levels), 6 - std::min<std::size_t>(6, hashes));
                l.insert(0, add, '#');
            }
        }
        out += l + "\n";
    }
    return out;
}

std::string alt_text(std::string_view s) {
    std::string out;
    for (char c : text::truncate_utf8(text::trim(s), 120)) {
        if (c == '[' || c == ']' || c == '\n') out += ' ';
        else out += c;
    }
    return text::trim(out);
}

}  // namespace strata::md
