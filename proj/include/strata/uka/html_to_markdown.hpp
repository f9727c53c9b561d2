#pragma once

#include <string>
#include <string_view>

namespace strata::uka {

struct ConvertedPage {
    std::string title;
    std::string markdown;
};

// Lenient HTML to Markdown conversion: headings, paragraphs, nested lists,
// pipe tables, links, images, emphasis, code and block quotes. Scripts,
// styles and other non-content elements are dropped.
ConvertedPage html_to_markdown(std::string_view html);

// Decodes named and numeric character references.
std::string decode_entities(std::string_view s);

}  // namespace strata::uka
