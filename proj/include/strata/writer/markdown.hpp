#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace strata::md {

struct ImageRef {
    std::string alt;
    std::string target;
    std::size_t begin = 0;  // byte range of the whole ![alt](target)
    std::size_t end = 0;
};

// Image references outside fenced code, in document order.
std::vector<ImageRef> image_refs(std::string_view markdown);
std::vector<std::string> image_targets(std::string_view markdown);
bool references(std::string_view markdown, std::string_view target);

// Removes every image whose target is not accepted by `keep`; returns the
// removed targets.
template <typename Keep>
std::vector<std::string> remove_images_if_not(std::string& markdown, Keep keep) {
    std::vector<std::string> removed;
    auto refs = image_refs(markdown);
    for (auto it = refs.rbegin(); it != refs.rend(); ++it) {
        if (keep(it->target)) continue;
        markdown.erase(it->begin, it->end - it->begin);
        removed.insert(removed.begin(), it->target);
    }
    return removed;
}

// Blank-line separated blocks; fenced code blocks stay whole.
std::vector<std::string> blocks(std::string_view markdown);
// Drops repeated prose paragraphs (compared after whitespace folding),
// keeping the first. Headings, images and short lines are never dropped.
std::string dedupe_paragraphs(std::string_view markdown, std::vector<std::string>* dropped = nullptr);

// Inserts `block` after the first paragraph following the heading whose text
// equals `heading` (case-insensitive); appends when the heading is absent.
std::string insert_after_heading(std::string_view markdown, std::string_view heading, std::string_view block);

// Lowers every ATX heading by `levels` (## -> ### for 1), capped at ######.
std::string demote_headings(std::string_view markdown, int levels);

std::string alt_text(std::string_view s);

}  // namespace strata::md
