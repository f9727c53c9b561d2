#include "strata/common/image.hpp"

#include <opencv2/imgcodecs.hpp>

namespace strata {

bool is_decodable_image(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) return false;
    const cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    return !img.empty();
}

}  // namespace strata
