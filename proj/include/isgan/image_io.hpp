#pragma once

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>
#include <string>

#include "isgan/image.hpp"

namespace isgan {

/// Decode any OpenCV-supported image file to a CHW RGB [0,1] tensor.
inline Tensor read_image(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw std::runtime_error("read_image: cannot decode " + path);
    Tensor img({3, bgr.rows, bgr.cols});
    for (int y = 0; y < bgr.rows; ++y) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            img[img.idx3(0, y, x)] = row[x][2] / 255.0;
            img[img.idx3(1, y, x)] = row[x][1] / 255.0;
            img[img.idx3(2, y, x)] = row[x][0] / 255.0;
        }
    }
    return img;
}

inline void write_image_png(const std::string& path, const Tensor& img) {
    int h = image_height(img), w = image_width(img);
    cv::Mat bgr(h, w, CV_8UC3);
    for (int y = 0; y < h; ++y) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < w; ++x) {
            auto q = [&](int c) {
                double v = std::clamp(img[img.idx3(c, y, x)], 0.0, 1.0);
                return static_cast<std::uint8_t>(std::lround(v * 255.0));
            };
            row[x] = cv::Vec3b(q(2), q(1), q(0));
        }
    }
    if (!cv::imwrite(path, bgr)) throw std::runtime_error("write_image_png: cannot write " + path);
}

/// Tile images into a rows x cols grid with a 2px separator.
inline Tensor tile_grid(const std::vector<Tensor>& images, int cols, double gap_value = 1.0) {
    if (images.empty()) throw std::invalid_argument("tile_grid: empty");
    int rows = (static_cast<int>(images.size()) + cols - 1) / cols;
    int h = image_height(images[0]), w = image_width(images[0]);
    const int gap = 2;
    Tensor grid({3, rows * h + (rows - 1) * gap, cols * w + (cols - 1) * gap}, gap_value);
    for (std::size_t i = 0; i < images.size(); ++i) {
        int r = static_cast<int>(i) / cols;
        int c = static_cast<int>(i) % cols;
        int oy = r * (h + gap), ox = c * (w + gap);
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    grid[grid.idx3(ch, oy + y, ox + x)] = images[i][images[i].idx3(ch, y, x)];
    }
    return grid;
}

}  // namespace isgan
