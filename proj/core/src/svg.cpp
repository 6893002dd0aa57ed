#include "lmc/svg.hpp"

#include <cstdio>

namespace lmc {

std::string svg_num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return std::string(buf);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

SvgDoc::SvgDoc(double width, double height) : width_(width), height_(height) {}

void SvgDoc::rect(double x, double y, double w, double h, const std::string& fill,
                  const std::string& stroke) {
  body_ += "<rect x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) + "\" width=\"" +
           svg_num(w) + "\" height=\"" + svg_num(h) + "\" fill=\"" + fill + "\"";
  if (!stroke.empty()) {
    body_ += " stroke=\"" + stroke + "\"";
  }
  body_ += "/>\n";
}

void SvgDoc::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                  double width, bool dashed) {
  body_ += "<line x1=\"" + svg_num(x1) + "\" y1=\"" + svg_num(y1) + "\" x2=\"" +
           svg_num(x2) + "\" y2=\"" + svg_num(y2) + "\" stroke=\"" + stroke +
           "\" stroke-width=\"" + svg_num(width) + "\"";
  if (dashed) {
    body_ += " stroke-dasharray=\"4 3\"";
  }
  body_ += "/>\n";
}

void SvgDoc::polyline(const std::vector<std::pair<double, double>>& pts,
                      const std::string& stroke, double width) {
  body_ += "<polyline points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0) body_ += ' ';
    body_ += svg_num(pts[i].first) + "," + svg_num(pts[i].second);
  }
  body_ += "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
           svg_num(width) + "\"/>\n";
}

void SvgDoc::circle(double cx, double cy, double r, const std::string& fill) {
  body_ += "<circle cx=\"" + svg_num(cx) + "\" cy=\"" + svg_num(cy) + "\" r=\"" +
           svg_num(r) + "\" fill=\"" + fill + "\"/>\n";
}

void SvgDoc::text(double x, double y, const std::string& content, int font_size,
                  const std::string& anchor) {
  body_ += "<text x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) +
           "\" font-family=\"sans-serif\" font-size=\"" + std::to_string(font_size) +
           "\" text-anchor=\"" + anchor + "\">" + xml_escape(content) + "</text>\n";
}

std::string SvgDoc::finish() const {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(width_) +
         "\" height=\"" + svg_num(height_) + "\" viewBox=\"0 0 " + svg_num(width_) +
         " " + svg_num(height_) + "\">\n";
  out += body_;
  out += "</svg>\n";
  return out;
}

}  // namespace lmc
