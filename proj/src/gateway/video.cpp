#include "caris/gateway/video.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace caris::gateway {

cv::Mat decode_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.empty()) throw InvalidFrame("empty image");
  cv::Mat image = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (image.empty()) throw InvalidFrame("image could not be decoded");
  return image;
}

std::vector<std::uint8_t> encode_jpeg(const cv::Mat& image, int quality) {
  std::vector<std::uint8_t> out;
  cv::imencode(".jpg", image, out, {cv::IMWRITE_JPEG_QUALITY, quality});
  return out;
}

std::vector<std::uint8_t> encode_png(const cv::Mat& image) {
  std::vector<std::uint8_t> out;
  cv::imencode(".png", image, out);
  return out;
}

cv::Mat placeholder_frame(int width, int height) {
  cv::Mat image(height, width, CV_8UC3, cv::Scalar(48, 48, 48));
  const std::string text = "waiting for camera";
  int baseline = 0;
  const cv::Size size = cv::getTextSize(text, cv::FONT_HERSHEY_SIMPLEX, 0.8, 2, &baseline);
  cv::putText(image, text, {(width - size.width) / 2, (height + size.height) / 2}, cv::FONT_HERSHEY_SIMPLEX, 0.8,
              cv::Scalar(200, 200, 200), 2, cv::LINE_AA);
  return image;
}

std::string overlay_label(const tracker::TrackView& t) {
  if (!t.label.empty()) return t.label;
  if (t.person_id) return "person " + std::to_string(*t.person_id);
  return "track " + std::to_string(t.track_id);
}

cv::Mat draw_overlays(const cv::Mat& frame, const tracker::TrackerSnapshot& snapshot) {
  cv::Mat out = frame.clone();
  for (const auto& t : snapshot.tracks) {
    const cv::Point tl(static_cast<int>(std::lround(t.bbox.left())), static_cast<int>(std::lround(t.bbox.top())));
    const cv::Point br(static_cast<int>(std::lround(t.bbox.right())), static_cast<int>(std::lround(t.bbox.bottom())));
    cv::rectangle(out, tl, br, kOverlayColor, 2);
    const std::string text = overlay_label(t);
    int baseline = 0;
    const cv::Size size = cv::getTextSize(text, cv::FONT_HERSHEY_SIMPLEX, 0.5, 1, &baseline);
    // Label sits on a filled tab above the box, or inside it at the top edge.
    const int y0 = tl.y - size.height - baseline - 4 >= 0 ? tl.y - size.height - baseline - 4 : tl.y;
    cv::rectangle(out, {tl.x, y0}, {tl.x + size.width + 6, y0 + size.height + baseline + 4}, kOverlayColor, cv::FILLED);
    cv::putText(out, text, {tl.x + 3, y0 + size.height + 2}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0), 1,
                cv::LINE_AA);
  }
  return out;
}

std::string mjpeg_header() {
  return std::string("HTTP/1.1 200 OK\r\n") + "Content-Type: multipart/x-mixed-replace; boundary=" + kMjpegBoundary +
         "\r\nCache-Control: no-store\r\nConnection: close\r\n\r\n";
}

std::string mjpeg_part(const std::vector<std::uint8_t>& jpeg) {
  std::string part = std::string("--") + kMjpegBoundary + "\r\nContent-Type: image/jpeg\r\nContent-Length: " +
                     std::to_string(jpeg.size()) + "\r\n\r\n";
  part.append(jpeg.begin(), jpeg.end());
  part += "\r\n";
  return part;
}

}  // namespace caris::gateway
