#pragma once

#include <string>
#include <vector>

namespace qdscope {

// Minimal hand-built SVG plot: one axes box with linear scales, polylines,
// circles and error bars. Output is byte-stable for identical inputs.
class SvgFigure {
public:
    SvgFigure(double width, double height, const std::string& title,
              const std::string& xlabel, const std::string& ylabel);

    // Data ranges must be set before adding elements.
    void set_xrange(double lo, double hi);
    void set_yrange(double lo, double hi);

    void add_polyline(const std::vector<double>& x, const std::vector<double>& y,
                      const std::string& color, double stroke_width = 1.5,
                      bool dashed = false);
    void add_circles(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& radius_px, const std::string& color,
                     bool filled = true);
    void add_error_bars(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& yerr, const std::string& color);
    void add_legend_entry(const std::string& label, const std::string& color);

    std::string render() const;

private:
    double px(double x) const;
    double py(double y) const;

    double width_, height_;
    std::string title_, xlabel_, ylabel_;
    double x_lo_ = 0.0, x_hi_ = 1.0, y_lo_ = 0.0, y_hi_ = 1.0;
    std::vector<std::string> elements_;
    std::vector<std::pair<std::string, std::string>> legend_;
};

// Round tick positions covering [lo, hi] with a 1-2-5 mantissa.
std::vector<double> nice_ticks(double lo, double hi, int target = 6);

std::string svg_num(double v);

} // namespace qdscope
