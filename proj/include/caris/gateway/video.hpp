#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "caris/error.hpp"
#include "caris/tracker/tracker.hpp"

namespace caris::gateway {

CARIS_DEFINE_ERROR(InvalidFrame, Error);

inline constexpr const char* kMjpegBoundary = "carisframe";

/// Throws InvalidFrame unless the bytes decode as a colour image.
cv::Mat decode_image(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_jpeg(const cv::Mat& image, int quality = 80);
std::vector<std::uint8_t> encode_png(const cv::Mat& image);

/// Shown on /video before the first camera frame arrives.
cv::Mat placeholder_frame(int width = 640, int height = 480);

/// Text drawn above a track's box: the person's label, else "person <id>",
/// else "track <id>".
std::string overlay_label(const tracker::TrackView& t);

/// Copy of `frame` with one box and label per track in the snapshot.
cv::Mat draw_overlays(const cv::Mat& frame, const tracker::TrackerSnapshot& snapshot);

inline const cv::Scalar kOverlayColor{0, 220, 0};  // BGR

/// Response head for a multipart/x-mixed-replace stream.
std::string mjpeg_header();
/// One part: boundary line, part headers, JPEG bytes, CRLF.
std::string mjpeg_part(const std::vector<std::uint8_t>& jpeg);

}  // namespace caris::gateway
