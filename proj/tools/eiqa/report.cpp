#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "commands.hpp"
#include "eiqa/errors.hpp"

namespace eiqa::cli {

namespace {

struct Point {
  int algo_id;
  double mos;
  double predicted;
};

std::vector<Point> read_predictions(const std::filesystem::path& path) {
  std::istringstream is(read_text(path));
  std::string line;
  std::getline(is, line);
  std::vector<Point> points;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t index = 0;
    int scene = 0;
    Point p{};
    if (std::sscanf(line.c_str(), "%zu\t%d\t%d\t%lf\t%lf", &index, &scene, &p.algo_id, &p.mos, &p.predicted) != 5)
      throw ParseError(line_no, "malformed prediction row in " + path.string());
    points.push_back(p);
  }
  if (points.empty()) throw ValidationError("no predictions in " + path.string());
  return points;
}

// Tableau-10.
constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

const char* color(int algo) { return kPalette[static_cast<std::size_t>(algo) % std::size(kPalette)]; }

std::string fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

std::string svg_open(double w, double h) {
  return fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\" "
             "font-family=\"sans-serif\" font-size=\"11\">\n",
             w, h, w, h) +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return fmt("<text x=\"%.2f\" y=\"%.2f\"", x, y) + " text-anchor=\"" + anchor + "\">" + s + "</text>\n";
}

std::string line(double x1, double y1, double x2, double y2, const char* stroke = "#333") {
  return fmt("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\"", x1, y1, x2, y2) + " stroke=\"" + stroke +
         "\"/>\n";
}

std::string scatter_svg(const std::vector<Point>& points) {
  constexpr double W = 520, H = 480, L = 60, R = 110, T = 30, B = 50;
  double lo = 0, hi = 100;
  for (const auto& p : points) {
    lo = std::min(lo, std::floor(p.predicted / 10) * 10);
    hi = std::max(hi, std::ceil(p.predicted / 10) * 10);
  }
  const double pw = W - L - R, ph = H - T - B;
  auto sx = [&](double v) { return L + (v - lo) / (hi - lo) * pw; };
  auto sy = [&](double v) { return T + ph - (v - lo) / (hi - lo) * ph; };

  std::string s = svg_open(W, H);
  s += text(L + pw / 2, 18, "Predicted score vs. MOS");
  s += fmt("<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" stroke=\"#333\"/>\n", L, T, pw, ph);
  for (double v = lo; v <= hi + 1e-9; v += 20) {
    s += line(sx(v), T + ph, sx(v), T + ph + 4) + text(sx(v), T + ph + 16, fmt("%.0f", v));
    s += line(L - 4, sy(v), L, sy(v)) + text(L - 7, sy(v) + 4, fmt("%.0f", v), "end");
  }
  s += text(L + pw / 2, H - 12, "MOS");
  s += fmt("<text x=\"16\" y=\"%.2f\" text-anchor=\"middle\" transform=\"rotate(-90 16 %.2f)\">Predicted</text>\n",
           T + ph / 2, T + ph / 2);
  s += line(sx(lo), sy(lo), sx(hi), sy(hi), "#aaa");
  for (const auto& p : points)
    s += fmt("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\"", sx(p.mos), sy(p.predicted)) + " fill=\"" +
         color(p.algo_id) + "\" fill-opacity=\"0.75\"/>\n";

  std::vector<int> algos;
  for (const auto& p : points) algos.push_back(p.algo_id);
  std::sort(algos.begin(), algos.end());
  algos.erase(std::unique(algos.begin(), algos.end()), algos.end());
  for (std::size_t i = 0; i < algos.size(); ++i) {
    const double y = T + 10 + 16 * static_cast<double>(i);
    s += fmt("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\"", W - R + 20, y) + " fill=\"" + color(algos[i]) + "\"/>\n";
    s += text(W - R + 30, y + 4, "algo " + std::to_string(algos[i]), "start");
  }
  return s + "</svg>\n";
}

std::string error_bars_svg(const std::vector<Point>& points) {
  std::map<int, std::vector<double>> errors;
  for (const auto& p : points) errors[p.algo_id].push_back(std::abs(p.predicted - p.mos));
  struct Bar {
    int algo;
    double mean, sd;
  };
  std::vector<Bar> bars;
  double top = 1e-9;
  for (const auto& [algo, e] : errors) {
    double mean = 0, var = 0;
    for (double v : e) mean += v / static_cast<double>(e.size());
    for (double v : e) var += (v - mean) * (v - mean) / static_cast<double>(e.size());
    bars.push_back({algo, mean, std::sqrt(var)});
    top = std::max(top, mean + std::sqrt(var));
  }
  top = std::ceil(top / 5) * 5;

  const double L = 60, R = 20, T = 30, B = 50, slot = 44;
  const double W = L + R + slot * static_cast<double>(bars.size()), H = 360, ph = H - T - B;
  auto sy = [&](double v) { return T + ph - v / top * ph; };

  std::string s = svg_open(W, H);
  s += text(L + (W - L - R) / 2, 18, "Absolute prediction error per algorithm (mean, 1 sd)");
  s += line(L, T, L, T + ph) + line(L, T + ph, W - R, T + ph);
  const double step = top <= 10 ? 2 : 5;
  for (double v = 0; v <= top + 1e-9; v += step)
    s += line(L - 4, sy(v), L, sy(v)) + text(L - 7, sy(v) + 4, fmt("%.0f", v), "end");
  s += fmt("<text x=\"16\" y=\"%.2f\" text-anchor=\"middle\" transform=\"rotate(-90 16 %.2f)\">|predicted - MOS|</text>\n",
           T + ph / 2, T + ph / 2);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double cx = L + slot * (static_cast<double>(i) + 0.5);
    s += fmt("<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\"", cx - 14, sy(b.mean), 28.0,
             T + ph - sy(b.mean)) +
         " fill=\"" + color(b.algo) + "\"/>\n";
    s += line(cx, sy(b.mean - std::min(b.sd, b.mean)), cx, sy(b.mean + b.sd));
    s += line(cx - 6, sy(b.mean + b.sd), cx + 6, sy(b.mean + b.sd));
    s += text(cx, T + ph + 16, std::to_string(b.algo));
  }
  s += text(L + (W - L - R) / 2, H - 12, "algorithm");
  return s + "</svg>\n";
}

}  // namespace

int cmd_report(const RunContext& ctx) {
  const auto predictions = ctx.out / layout::kEvalPredictions;
  const auto ablate_dir = ctx.out / layout::kAblateDir;
  std::vector<std::filesystem::path> tables;
  if (std::filesystem::exists(ctx.out / layout::kEvalReport)) tables.push_back(layout::kEvalReport);
  if (std::filesystem::is_directory(ablate_dir)) {
    std::vector<std::filesystem::path> found;
    for (const auto& entry : std::filesystem::directory_iterator(ablate_dir))
      if (entry.path().extension() == ".tsv") found.push_back(layout::kAblateDir / entry.path().filename());
    std::sort(found.begin(), found.end());
    tables.insert(tables.end(), found.begin(), found.end());
  }
  const bool have_predictions = std::filesystem::exists(predictions);
  if (!have_predictions && tables.empty())
    throw IoError("no eval or ablate artifacts under " + ctx.out.string() + " (expected " + predictions.string() + ")");

  std::vector<std::filesystem::path> outputs;
  if (have_predictions) {
    const auto points = read_predictions(predictions);
    const auto scatter = layout::kReportDir / "scatter.svg";
    const auto bars = layout::kReportDir / "algo_error.svg";
    write_text(ctx.out / scatter, scatter_svg(points));
    write_text(ctx.out / bars, error_bars_svg(points));
    outputs.push_back(scatter);
    outputs.push_back(bars);
  }
  std::string all;
  for (const auto& t : tables) all += "# " + t.generic_string() + "\n" + read_text(ctx.out / t) + "\n";
  const auto tables_rel = layout::kReportDir / "tables.txt";
  write_text(ctx.out / tables_rel, all);
  outputs.push_back(tables_rel);
  std::fputs(all.c_str(), stdout);
  for (const auto& o : outputs) std::printf("wrote %s\n", (ctx.out / o).string().c_str());
  write_run_manifest(ctx, {{}, outputs});
  return kExitOk;
}

}  // namespace eiqa::cli
