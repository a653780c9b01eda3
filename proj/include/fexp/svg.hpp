#pragma once

#include <string>
#include <vector>

namespace fexp::svg {

struct Point {
    double x, y;
};

// Minimal SVG canvas with a linear data-to-pixel map. Output is well-formed
// XML with the data range padded by 5%.
class Canvas {
  public:
    Canvas(double width, double height, double x_min, double x_max, double y_min, double y_max,
           std::string x_label = "", std::string y_label = "");

    void circle(Point p, double radius_px, const std::string& color, double opacity = 1.0);
    void polyline(const std::vector<Point>& pts, const std::string& color, double width_px = 1.5);
    // closed filled region
    void polygon(const std::vector<Point>& pts, const std::string& fill, double opacity);
    void rect(Point lo, Point hi, const std::string& fill, double opacity = 1.0);
    void text(Point p, const std::string& s, int size_px = 12);

    std::string finish();  // axes + assembled document

  private:
    double px(double x) const;
    double py(double y) const;

    double w_, h_;
    double x0_, x1_, y0_, y1_;
    std::string x_label_, y_label_;
    std::string body_;
};

void write_file(const std::string& path, const std::string& svg_text);

}  // namespace fexp::svg
