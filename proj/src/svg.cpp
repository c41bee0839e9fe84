#include "qdscope/svg.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace qdscope {

namespace {
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 34.0;
constexpr double kMarginBottom = 50.0;

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
} // namespace

std::string svg_num(double v) {
    if (!std::isfinite(v)) return "0";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
    std::vector<double> ticks;
    if (!(hi > lo) || target < 2) return ticks;
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (mag * m >= raw) {
            step = mag * m;
            break;
        }
    }
    const double first = std::ceil(lo / step - 1e-9) * step;
    for (double t = first; t <= hi + 1e-9 * step; t += step)
        ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    return ticks;
}

SvgFigure::SvgFigure(double width, double height, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel)
    : width_(width), height_(height), title_(title), xlabel_(xlabel), ylabel_(ylabel) {}

void SvgFigure::set_xrange(double lo, double hi) {
    if (!(hi > lo)) hi = lo + 1.0;
    x_lo_ = lo;
    x_hi_ = hi;
}

void SvgFigure::set_yrange(double lo, double hi) {
    if (!(hi > lo)) hi = lo + 1.0;
    y_lo_ = lo;
    y_hi_ = hi;
}

double SvgFigure::px(double x) const {
    return kMarginLeft + (x - x_lo_) / (x_hi_ - x_lo_) *
                             (width_ - kMarginLeft - kMarginRight);
}

double SvgFigure::py(double y) const {
    return height_ - kMarginBottom -
           (y - y_lo_) / (y_hi_ - y_lo_) * (height_ - kMarginTop - kMarginBottom);
}

void SvgFigure::add_polyline(const std::vector<double>& x, const std::vector<double>& y,
                             const std::string& color, double stroke_width,
                             bool dashed) {
    if (x.empty() || x.size() != y.size()) return;
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
       << svg_num(stroke_width) << "\"";
    if (dashed) os << " stroke-dasharray=\"6,4\"";
    os << " points=\"";
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!std::isfinite(x[k]) || !std::isfinite(y[k])) continue;
        os << svg_num(px(x[k])) << ',' << svg_num(py(y[k])) << ' ';
    }
    os << "\"/>";
    elements_.push_back(os.str());
}

void SvgFigure::add_circles(const std::vector<double>& x, const std::vector<double>& y,
                            const std::vector<double>& radius_px,
                            const std::string& color, bool filled) {
    for (std::size_t k = 0; k < x.size() && k < y.size(); ++k) {
        if (!std::isfinite(x[k]) || !std::isfinite(y[k])) continue;
        const double r = k < radius_px.size() ? radius_px[k] : 3.0;
        std::ostringstream os;
        os << "<circle cx=\"" << svg_num(px(x[k])) << "\" cy=\"" << svg_num(py(y[k]))
           << "\" r=\"" << svg_num(r) << "\" stroke=\"" << color << "\" fill=\""
           << (filled ? color : std::string("none")) << "\"";
        if (filled) os << " fill-opacity=\"0.75\"";
        os << "/>";
        elements_.push_back(os.str());
    }
}

void SvgFigure::add_error_bars(const std::vector<double>& x, const std::vector<double>& y,
                               const std::vector<double>& yerr,
                               const std::string& color) {
    for (std::size_t k = 0; k < x.size() && k < y.size() && k < yerr.size(); ++k) {
        if (!std::isfinite(yerr[k]) || yerr[k] <= 0.0) continue;
        std::ostringstream os;
        const double cx = px(x[k]);
        os << "<line x1=\"" << svg_num(cx) << "\" y1=\"" << svg_num(py(y[k] - yerr[k]))
           << "\" x2=\"" << svg_num(cx) << "\" y2=\"" << svg_num(py(y[k] + yerr[k]))
           << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>";
        elements_.push_back(os.str());
    }
}

void SvgFigure::add_legend_entry(const std::string& label, const std::string& color) {
    legend_.emplace_back(label, color);
}

std::string SvgFigure::render() const {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(width_)
       << "\" height=\"" << svg_num(height_) << "\" viewBox=\"0 0 " << svg_num(width_)
       << ' ' << svg_num(height_) << "\">\n";
    os << "<rect width=\"" << svg_num(width_) << "\" height=\"" << svg_num(height_)
       << "\" fill=\"white\"/>\n";

    const double x0 = kMarginLeft, x1 = width_ - kMarginRight;
    const double y0 = kMarginTop, y1 = height_ - kMarginBottom;

    // grid + ticks
    for (double t : nice_ticks(x_lo_, x_hi_)) {
        const double X = px(t);
        os << "<line x1=\"" << svg_num(X) << "\" y1=\"" << svg_num(y0) << "\" x2=\""
           << svg_num(X) << "\" y2=\"" << svg_num(y1)
           << "\" stroke=\"#dddddd\" stroke-width=\"0.6\"/>\n";
        os << "<text x=\"" << svg_num(X) << "\" y=\"" << svg_num(y1 + 16)
           << "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">"
           << svg_num(t) << "</text>\n";
    }
    for (double t : nice_ticks(y_lo_, y_hi_)) {
        const double Y = py(t);
        os << "<line x1=\"" << svg_num(x0) << "\" y1=\"" << svg_num(Y) << "\" x2=\""
           << svg_num(x1) << "\" y2=\"" << svg_num(Y)
           << "\" stroke=\"#dddddd\" stroke-width=\"0.6\"/>\n";
        os << "<text x=\"" << svg_num(x0 - 6) << "\" y=\"" << svg_num(Y + 4)
           << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">"
           << svg_num(t) << "</text>\n";
    }

    for (const auto& el : elements_) os << el << '\n';

    os << "<rect x=\"" << svg_num(x0) << "\" y=\"" << svg_num(y0) << "\" width=\""
       << svg_num(x1 - x0) << "\" height=\"" << svg_num(y1 - y0)
       << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    os << "<text x=\"" << svg_num(0.5 * (x0 + x1)) << "\" y=\"20\" font-size=\"14\" "
          "text-anchor=\"middle\" font-family=\"sans-serif\">"
       << xml_escape(title_) << "</text>\n";
    os << "<text x=\"" << svg_num(0.5 * (x0 + x1)) << "\" y=\""
       << svg_num(height_ - 12)
       << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">"
       << xml_escape(xlabel_) << "</text>\n";
    os << "<text x=\"16\" y=\"" << svg_num(0.5 * (y0 + y1))
       << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "transform=\"rotate(-90 16 "
       << svg_num(0.5 * (y0 + y1)) << ")\">" << xml_escape(ylabel_) << "</text>\n";

    double ly = y0 + 14;
    for (const auto& [label, color] : legend_) {
        os << "<line x1=\"" << svg_num(x1 - 150) << "\" y1=\"" << svg_num(ly - 4)
           << "\" x2=\"" << svg_num(x1 - 126) << "\" y2=\"" << svg_num(ly - 4)
           << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << svg_num(x1 - 120) << "\" y=\"" << svg_num(ly)
           << "\" font-size=\"11\" font-family=\"sans-serif\">" << xml_escape(label)
           << "</text>\n";
        ly += 16;
    }

    os << "</svg>\n";
    return os.str();
}

} // namespace qdscope
