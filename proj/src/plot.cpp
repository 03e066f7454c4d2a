#include "ifnet/plot.hpp"

#include "ifnet/csv.hpp"
#include "ifnet/errors.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace ifnet::plot {

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrid{225, 225, 225};
constexpr std::array<Rgb, 6> kPalette{{{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189},
                                       {23, 190, 207}}};

// 5x7 glyphs, one byte per row, bit 4 is the leftmost column.
const std::map<char, std::array<std::uint8_t, 7>>& font() {
  static const std::map<char, std::array<std::uint8_t, 7>> glyphs{
      {' ', {0, 0, 0, 0, 0, 0, 0}},
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}},
      {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
      {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
      {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
      {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
      {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
      {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
      {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
      {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'.', {0, 0, 0, 0, 0, 0x0C, 0x0C}},
      {',', {0, 0, 0, 0, 0x0C, 0x04, 0x08}},
      {'-', {0, 0, 0, 0x1F, 0, 0, 0}},
      {'_', {0, 0, 0, 0, 0, 0, 0x1F}},
      {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
      {'/', {0, 0x01, 0x02, 0x04, 0x08, 0x10, 0}},
      {':', {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0}},
      {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
      {'=', {0, 0, 0x1F, 0, 0x1F, 0, 0}},
      {'+', {0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0}},
  };
  return glyphs;
}

constexpr int kScale = 2;
constexpr int kAdvance = 6 * kScale;

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w * h), kWhite) {}

  void set(int x, int y, Rgb c) {
    if (x >= 0 && y >= 0 && x < w_ && y < h_) px_[static_cast<std::size_t>(y * w_ + x)] = c;
  }
  void fill(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) set(x, y, c);
    }
  }
  void line(int x0, int y0, int x1, int y1, Rgb c, int thick = 1) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      fill(x0 - thick / 2, y0 - thick / 2, x0 + (thick - 1) / 2, y0 + (thick - 1) / 2, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
  // Horizontal text with its top-left corner at (x, y); `vertical` rotates it to read bottom-up.
  void text(int x, int y, const std::string& s, Rgb c, bool vertical = false) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(s[i])));
      auto it = font().find(ch);
      if (it == font().end()) it = font().find(' ');
      const int off = static_cast<int>(i) * kAdvance;
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if (!((it->second[static_cast<std::size_t>(row)] >> (4 - col)) & 1)) continue;
          for (int a = 0; a < kScale; ++a) {
            for (int b = 0; b < kScale; ++b) {
              const int gx = off + col * kScale + a;
              const int gy = row * kScale + b;
              if (vertical) {
                set(x + gy, y - gx, c);
              } else {
                set(x + gx, y + gy, c);
              }
            }
          }
        }
      }
    }
  }
  static int text_width(const std::string& s) { return static_cast<int>(s.size()) * kAdvance; }

  void save(const std::filesystem::path& path) const {
    FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw ParameterError("plot: cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::fclose(f);
      throw ParameterError("plot: libpng failed writing " + path.string());
    }
    png_init_io(png, f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(3 * w_));
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const Rgb& p = px_[static_cast<std::size_t>(y * w_ + x)];
        row[static_cast<std::size_t>(3 * x)] = p.r;
        row[static_cast<std::size_t>(3 * x + 1)] = p.g;
        row[static_cast<std::size_t>(3 * x + 2)] = p.b;
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
  }

 private:
  int w_, h_;
  std::vector<Rgb> px_;
};

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Roughly five ticks on a 1-2-5 ladder covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 6.0) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t);
  return out;
}

void draw_panel(Canvas& c, int ox, int oy, int w, int h, const Panel& panel) {
  const int left = ox + 90, right = ox + w - 20, top = oy + 50, bottom = oy + h - 60;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  bool log_y = panel.log_y;
  for (const Series& s : panel.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  if (log_y && !(ymin > 0.0)) log_y = false;
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  double y0 = ty(ymin), y1 = ty(ymax);
  if (!log_y) y0 = std::min(y0, 0.0);
  if (y1 - y0 < 1e-12) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y1 += pad;
  if (log_y) y0 -= pad;
  if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;

  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (right - left))); };
  auto py = [&](double y) { return bottom - static_cast<int>(std::lround((ty(y) - y0) / (y1 - y0) * (bottom - top))); };

  for (double t : nice_ticks(xmin, xmax)) {
    const int x = px(t);
    c.line(x, top, x, bottom, kGrid);
    c.line(x, bottom, x, bottom + 5, kBlack);
    const std::string s = tick_label(t);
    c.text(x - Canvas::text_width(s) / 2, bottom + 10, s, kBlack);
  }
  for (double t : nice_ticks(y0, y1)) {
    const int y = bottom - static_cast<int>(std::lround((t - y0) / (y1 - y0) * (bottom - top)));
    c.line(left, y, right, y, kGrid);
    c.line(left - 5, y, left, y, kBlack);
    const std::string s = log_y ? tick_label(std::pow(10.0, t)) : tick_label(t);
    c.text(left - 10 - Canvas::text_width(s), y - 7, s, kBlack);
  }
  c.line(left, top, left, bottom, kBlack, 2);
  c.line(left, bottom, right, bottom, kBlack, 2);
  c.text(ox + (w - Canvas::text_width(panel.title)) / 2, oy + 15, panel.title, kBlack);
  c.text(left + (right - left - Canvas::text_width(panel.x_label)) / 2, bottom + 35, panel.x_label, kBlack);
  const std::string ylab = panel.y_label + (log_y ? " (log)" : "");
  c.text(ox + 8, top + (bottom - top + Canvas::text_width(ylab)) / 2, ylab, kBlack, true);

  for (std::size_t k = 0; k < panel.series.size(); ++k) {
    const Series& s = panel.series[k];
    const Rgb col = kPalette[k % kPalette.size()];
    bool have_prev = false;
    int lx = 0, ly = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0.0)) {
        have_prev = false;
        continue;
      }
      const int x = px(s.x[i]), y = py(s.y[i]);
      if (have_prev) c.line(lx, ly, x, y, col, 2);
      c.fill(x - 3, y - 3, x + 3, y + 3, col);
      lx = x, ly = y, have_prev = true;
    }
    const int ly0 = top + 8 + static_cast<int>(k) * 20;
    const int lx0 = right - 20 - Canvas::text_width(s.label) - 24;
    c.fill(lx0, ly0 + 3, lx0 + 16, ly0 + 10, col);
    c.text(lx0 + 24, ly0, s.label, kBlack);
  }
}

struct Figure {
  std::string file;
  std::vector<Panel> panels;
};

std::vector<double> column(const csv::Table& t, const std::string& name, const std::vector<std::size_t>& order) {
  const std::size_t c = t.column(name);
  std::vector<double> out;
  for (std::size_t r : order) out.push_back(t.number(r, c));
  return out;
}

std::vector<std::size_t> sorted_rows(const csv::Table& t, const std::string& key, const std::string& filter_col = "",
                                     const std::string& filter_val = "") {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (!filter_col.empty() && t.rows[r][t.column(filter_col)] != filter_val) continue;
    rows.push_back(r);
  }
  const std::size_t k = t.column(key);
  std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return t.number(a, k) < t.number(b, k); });
  return rows;
}

std::vector<Panel> error_panels(const csv::Table& t, const std::vector<std::size_t>& rows, const std::string& xcol,
                                const std::string& xlabel, const std::string& title) {
  const std::vector<double> x = column(t, xcol, rows);
  Panel rot{title + ": rotation", xlabel, "error (deg)", {}, false};
  rot.series.push_back({"MAE", x, column(t, "mae_r", rows)});
  rot.series.push_back({"RMSE", x, column(t, "rmse_r", rows)});
  Panel tr{title + ": translation", xlabel, "error", {}, false};
  tr.series.push_back({"MAE", x, column(t, "mae_t", rows)});
  tr.series.push_back({"RMSE", x, column(t, "rmse_t", rows)});
  return {rot, tr};
}

}  // namespace

void render(const std::vector<Panel>& panels, const std::filesystem::path& path) {
  if (panels.empty()) throw ParameterError("plot: nothing to render");
  constexpr int kW = 600, kH = 440;
  Canvas c(kW * static_cast<int>(panels.size()), kH);
  for (std::size_t i = 0; i < panels.size(); ++i) draw_panel(c, static_cast<int>(i) * kW, 0, kW, kH, panels[i]);
  c.save(path);
}

std::vector<std::filesystem::path> plot_report(const std::filesystem::path& csv_path,
                                               const std::filesystem::path& out_dir) {
  const csv::Table t = csv::read(csv_path);
  if (t.rows.empty()) throw ParseError("plot: " + csv_path.string() + " has no data rows", 2);

  // Build every figure first so that a bad cell leaves nothing on disk.
  std::vector<Figure> figures;
  if (t.has("epoch") && t.has("total")) {
    const auto rows = sorted_rows(t, "epoch");
    const auto x = column(t, "epoch", rows);
    Panel loss{"training loss", "epoch", "mean loss per pair", {}, true};
    for (const char* name : {"total", "gr", "nc", "pc"}) {
      if (t.has(name)) loss.series.push_back({name, x, column(t, name, rows)});
    }
    Figure f{"loss_vs_epoch.png", {loss}};
    if (t.has("val_mae_r")) {
      Panel val{"validation rotation error", "epoch", "error (deg)", {}, false};
      val.series.push_back({"MAE", x, column(t, "val_mae_r", rows)});
      if (t.has("val_rmse_r")) val.series.push_back({"RMSE", x, column(t, "val_rmse_r", rows)});
      f.panels.push_back(val);
    }
    figures.push_back(std::move(f));
  } else if (t.has("time_step") && t.has("mae_r")) {
    figures.push_back({"error_vs_time_step.png", error_panels(t, sorted_rows(t, "time_step"), "time_step",
                                                              "time step", "error vs time step")});
  } else if (t.has("axis") && t.has("value") && t.has("mae_r")) {
    std::vector<std::string> axes;
    for (const auto& row : t.rows) {
      const std::string& a = row[t.column("axis")];
      if (std::find(axes.begin(), axes.end(), a) == axes.end()) axes.push_back(a);
    }
    std::sort(axes.begin(), axes.end());
    for (const std::string& a : axes) {
      const std::string xlabel = a == "points" ? "number of points" : (a == "noise" ? "noise sigma" : a);
      figures.push_back({"robustness_" + a + ".png",
                         error_panels(t, sorted_rows(t, "value", "axis", a), "value", xlabel, "robustness")});
    }
  } else {
    throw ParseError("plot: unrecognised report columns in " + csv_path.string(), 1);
  }

  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const Figure& f : figures) {
    render(f.panels, out_dir / f.file);
    written.push_back(out_dir / f.file);
  }
  return written;
}

}  // namespace ifnet::plot
