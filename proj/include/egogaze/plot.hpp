#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>

#include "egogaze/tensor.hpp"

namespace egogaze {

// Heatmap alpha-blended onto the frame; the ground-truth gaze (if any) is
// marked with a "+". Map dims must match the frame.
cv::Mat overlay_heatmap(const cv::Mat& frame, const GridD& map,
                        std::optional<std::pair<float, float>> gaze = std::nullopt, double alpha = 0.45);

// rows*cols tiles in row-major order, all the same size.
cv::Mat montage(const std::vector<cv::Mat>& tiles, int rows, int cols);

// Simple line plot of the loss curve on a white canvas.
cv::Mat render_loss_curve(const std::vector<double>& losses, int width = 900, int height = 540);

void save_image(const cv::Mat& image, const std::filesystem::path& file);

}  // namespace egogaze
