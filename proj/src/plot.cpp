#include "egogaze/plot.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace egogaze {

cv::Mat overlay_heatmap(const cv::Mat& frame, const GridD& map, std::optional<std::pair<float, float>> gaze,
                        double alpha) {
  if (frame.empty() || frame.type() != CV_8UC3) throw std::invalid_argument("overlay expects an 8-bit BGR frame");
  if (map.rank() != 2 || map.dim(0) != frame.rows || map.dim(1) != frame.cols)
    throw std::invalid_argument("shape mismatch between map and frame");

  double lo = map[0], hi = map[0];
  for (int64_t i = 0; i < map.numel(); ++i) {
    lo = std::min(lo, map[i]);
    hi = std::max(hi, map[i]);
  }
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  cv::Mat gray(frame.rows, frame.cols, CV_8UC1);
  for (int y = 0; y < frame.rows; ++y)
    for (int x = 0; x < frame.cols; ++x)
      gray.at<uchar>(y, x) = cv::saturate_cast<uchar>((map.at(y, x) - lo) * scale);
  cv::Mat heat;
  cv::applyColorMap(gray, heat, cv::COLORMAP_JET);

  cv::Mat out;
  cv::addWeighted(frame, 1.0 - alpha, heat, alpha, 0.0, out);
  if (gaze) {
    const int sz = std::max(6, frame.cols / 16);
    cv::drawMarker(out, cv::Point(cvRound(gaze->first), cvRound(gaze->second)), cv::Scalar(255, 255, 255),
                   cv::MARKER_CROSS, sz, 2, cv::LINE_AA);
    cv::drawMarker(out, cv::Point(cvRound(gaze->first), cvRound(gaze->second)), cv::Scalar(0, 0, 0),
                   cv::MARKER_CROSS, sz, 1, cv::LINE_AA);
  }
  return out;
}

cv::Mat montage(const std::vector<cv::Mat>& tiles, int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("montage grid must be at least 1x1");
  if (static_cast<int>(tiles.size()) != rows * cols)
    throw std::invalid_argument("montage expects rows*cols tiles, got " + std::to_string(tiles.size()));
  const int th = tiles[0].rows, tw = tiles[0].cols;
  for (const auto& t : tiles)
    if (t.rows != th || t.cols != tw || t.type() != CV_8UC3)
      throw std::invalid_argument("montage tiles must share size and type");
  const int pad = 2;
  cv::Mat canvas(rows * th + (rows + 1) * pad, cols * tw + (cols + 1) * pad, CV_8UC3, cv::Scalar(24, 24, 24));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      cv::Rect roi(pad + c * (tw + pad), pad + r * (th + pad), tw, th);
      tiles[static_cast<size_t>(r) * cols + c].copyTo(canvas(roi));
    }
  return canvas;
}

cv::Mat render_loss_curve(const std::vector<double>& losses, int width, int height) {
  if (losses.empty()) throw std::invalid_argument("empty loss curve");
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const int ml = 70, mr = 20, mt = 20, mb = 50;
  const int pw = width - ml - mr, ph = height - mt - mb;
  cv::rectangle(img, cv::Point(ml, mt), cv::Point(ml + pw, mt + ph), cv::Scalar(90, 90, 90), 1);

  double lo = losses[0], hi = losses[0];
  for (double v : losses) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double n = static_cast<double>(losses.size());
  auto px = [&](size_t i) { return ml + static_cast<int>(std::lround(pw * (n > 1 ? i / (n - 1) : 0.5))); };
  auto py = [&](double v) { return mt + static_cast<int>(std::lround(ph * (1.0 - (v - lo) / (hi - lo)))); };

  for (size_t i = 1; i < losses.size(); ++i)
    cv::line(img, cv::Point(px(i - 1), py(losses[i - 1])), cv::Point(px(i), py(losses[i])), cv::Scalar(180, 90, 20), 2,
             cv::LINE_AA);

  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", hi);
  cv::putText(img, buf, cv::Point(6, mt + 12), cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(60, 60, 60), 1, cv::LINE_AA);
  std::snprintf(buf, sizeof(buf), "%.4g", lo);
  cv::putText(img, buf, cv::Point(6, mt + ph), cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(60, 60, 60), 1, cv::LINE_AA);
  std::snprintf(buf, sizeof(buf), "step (%zu)", losses.size());
  cv::putText(img, buf, cv::Point(ml + pw / 2 - 40, height - 16), cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(60, 60, 60), 1, cv::LINE_AA);
  cv::putText(img, "loss", cv::Point(8, mt + ph / 2), cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(60, 60, 60), 1,
              cv::LINE_AA);
  return img;
}

void save_image(const cv::Mat& image, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  if (!cv::imwrite(file.string(), image)) throw std::runtime_error("failed to write image: " + file.string());
}

}  // namespace egogaze
