#pragma once

#include <string>
#include <utility>
#include <vector>

namespace lmc {

// Minimal deterministic SVG writer: fixed-precision coordinates, no
// locale-dependent formatting, attributes always in the same order.

std::string svg_num(double v);  // "%.3f"

class SvgDoc {
 public:
  SvgDoc(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "");
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0, bool dashed = false);
  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& stroke, double width = 1.0);
  void circle(double cx, double cy, double r, const std::string& fill);
  void text(double x, double y, const std::string& content, int font_size = 12,
            const std::string& anchor = "start");

  std::string finish() const;

 private:
  std::string body_;
  double width_ = 0.0;
  double height_ = 0.0;
};

std::string xml_escape(const std::string& s);

}  // namespace lmc
