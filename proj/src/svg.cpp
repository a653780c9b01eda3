#include "fexp/svg.hpp"

#include <fstream>
#include <sstream>

#include "fexp/errors.hpp"

namespace fexp::svg {

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

Canvas::Canvas(double width, double height, double x_min, double x_max, double y_min, double y_max,
               std::string x_label, std::string y_label)
    : w_(width), h_(height), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {
    const double xpad = 0.05 * (x_max - x_min + 1e-12);
    const double ypad = 0.05 * (y_max - y_min + 1e-12);
    x0_ = x_min - xpad;
    x1_ = x_max + xpad;
    y0_ = y_min - ypad;
    y1_ = y_max + ypad;
}

double Canvas::px(double x) const { return 50.0 + (x - x0_) / (x1_ - x0_) * (w_ - 70.0); }
double Canvas::py(double y) const { return h_ - 40.0 - (y - y0_) / (y1_ - y0_) * (h_ - 60.0); }

void Canvas::circle(Point p, double radius_px, const std::string& color, double opacity) {
    body_ += "<circle cx=\"" + num(px(p.x)) + "\" cy=\"" + num(py(p.y)) + "\" r=\"" +
             num(radius_px) + "\" fill=\"" + escape(color) + "\" opacity=\"" + num(opacity) +
             "\"/>\n";
}

void Canvas::polyline(const std::vector<Point>& pts, const std::string& color, double width_px) {
    body_ += "<polyline fill=\"none\" stroke=\"" + escape(color) + "\" stroke-width=\"" +
             num(width_px) + "\" points=\"";
    for (const auto& p : pts) body_ += num(px(p.x)) + "," + num(py(p.y)) + " ";
    body_ += "\"/>\n";
}

void Canvas::polygon(const std::vector<Point>& pts, const std::string& fill, double opacity) {
    body_ += "<polygon fill=\"" + escape(fill) + "\" opacity=\"" + num(opacity) + "\" points=\"";
    for (const auto& p : pts) body_ += num(px(p.x)) + "," + num(py(p.y)) + " ";
    body_ += "\"/>\n";
}

void Canvas::rect(Point lo, Point hi, const std::string& fill, double opacity) {
    const double x = px(lo.x), y = py(hi.y);
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(px(hi.x) - x) +
             "\" height=\"" + num(py(lo.y) - y) + "\" fill=\"" + escape(fill) + "\" opacity=\"" +
             num(opacity) + "\"/>\n";
}

void Canvas::text(Point p, const std::string& s, int size_px) {
    body_ += "<text x=\"" + num(px(p.x)) + "\" y=\"" + num(py(p.y)) + "\" font-size=\"" +
             std::to_string(size_px) + "\">" + escape(s) + "</text>\n";
}

std::string Canvas::finish() {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w_) + "\" height=\"" +
           num(h_) + "\" viewBox=\"0 0 " + num(w_) + " " + num(h_) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + num(w_) + "\" height=\"" + num(h_) +
           "\" fill=\"white\"/>\n";
    // axes
    out += "<line x1=\"" + num(px(x0_)) + "\" y1=\"" + num(py(y0_)) + "\" x2=\"" + num(px(x1_)) +
           "\" y2=\"" + num(py(y0_)) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + num(px(x0_)) + "\" y1=\"" + num(py(y0_)) + "\" x2=\"" + num(px(x0_)) +
           "\" y2=\"" + num(py(y1_)) + "\" stroke=\"black\"/>\n";
    if (!x_label_.empty())
        out += "<text x=\"" + num(w_ / 2) + "\" y=\"" + num(h_ - 8.0) + "\" font-size=\"13\">" +
               escape(x_label_) + "</text>\n";
    if (!y_label_.empty())
        out += "<text x=\"12\" y=\"" + num(h_ / 2) + "\" font-size=\"13\" transform=\"rotate(-90 12 " +
               num(h_ / 2) + ")\">" + escape(y_label_) + "</text>\n";
    out += body_;
    out += "</svg>\n";
    return out;
}

void write_file(const std::string& path, const std::string& svg_text) {
    std::ofstream os(path);
    if (!os) throw FormatError("svg: cannot open " + path + " for writing");
    os << svg_text;
}

}  // namespace fexp::svg
