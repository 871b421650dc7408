#pragma once

// Artifact plumbing for command-line runs: a manifest of everything a run
// wrote (with content hashes), deterministic CSV/JSON serialization, and
// static SVG line plots rendered from the CSV traces. Every file a run
// produces goes through the emit_* funnel so the manifest inventory is
// complete and reruns can be compared byte for byte.

#include <dbarlab/grid.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dbarlab {

inline const char* artifact_version() { return "dbarlab-artifacts/1"; }

// ---------------------------------------------------------------------------
// hashing and file helpers

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_tag(const std::string& data) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

inline std::string slurp_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "slurp_file: cannot open " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

inline void spill_file(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "spill_file: cannot open " + path);
    os << content;
    require(static_cast<bool>(os), "spill_file: write failure on " + path);
}

// ---------------------------------------------------------------------------
// JSON rendering (ordered, fixed float format; vendor parser reads it back)

inline std::string js_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

inline std::string js(const std::string& s) { return "\"" + js_escape(s) + "\""; }
inline std::string js(const char* s) { return js(std::string(s)); }
inline std::string js(bool v) { return v ? "true" : "false"; }
inline std::string js(int v) { return std::to_string(v); }
inline std::string js(unsigned v) { return std::to_string(v); }
inline std::string js(std::uint64_t v) { return std::to_string(v); }

/// NaN and infinities have no JSON spelling; they render as null.
inline std::string js(double v) {
    if (!std::isfinite(v)) return "null";
    return fmt_g17(v);
}

using JsonFields = std::vector<std::pair<std::string, std::string>>;

inline std::string js_obj(const JsonFields& kv, int indent = 0) {
    if (kv.empty()) return "{}";
    std::string pad(static_cast<std::size_t>(indent), ' ');
    std::string inner(static_cast<std::size_t>(indent) + 2, ' ');
    std::string out = "{\n";
    for (std::size_t i = 0; i < kv.size(); ++i) {
        out += inner + "\"" + js_escape(kv[i].first) + "\": " + kv[i].second;
        out += (i + 1 < kv.size()) ? ",\n" : "\n";
    }
    return out + pad + "}";
}

inline std::string js_arr(const std::vector<std::string>& items, int indent = 0) {
    if (items.empty()) return "[]";
    std::string pad(static_cast<std::size_t>(indent), ' ');
    std::string inner(static_cast<std::size_t>(indent) + 2, ' ');
    std::string out = "[\n";
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += inner + items[i];
        out += (i + 1 < items.size()) ? ",\n" : "\n";
    }
    return out + pad + "]";
}

// ---------------------------------------------------------------------------
// CSV rendering

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> cells) {
        require(cells.size() == header.size(),
                "CsvTable: row width " + std::to_string(cells.size()) +
                    " does not match header width " + std::to_string(header.size()));
        rows.push_back(std::move(cells));
    }

    std::string to_string() const {
        std::string out;
        for (std::size_t i = 0; i < header.size(); ++i)
            out += header[i] + (i + 1 < header.size() ? "," : "\n");
        for (const auto& row : rows)
            for (std::size_t i = 0; i < row.size(); ++i)
                out += row[i] + (i + 1 < row.size() ? "," : "\n");
        return out;
    }
};

inline std::string csv_num(double v) { return fmt_g17(v); }
inline std::string csv_num(int v) { return std::to_string(v); }

/// CSV-safe complex literal, e.g. "0.5+0.25i".
inline std::string csv_cplx(cplx z) {
    std::string out = fmt_g17(z.real());
    if (!std::signbit(z.imag())) out += "+";
    return out + fmt_g17(z.imag()) + "i";
}

/// Minimal reader for the files this module writes: numeric cells plus
/// plain-text labels, no quoting or embedded commas.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            std::size_t pos = line.find(',', start);
            if (pos == std::string::npos) {
                cells.push_back(line.substr(start));
                break;
            }
            cells.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// SVG line plots

struct PlotSeries {
    std::string name;
    std::vector<double> x, y;
};

struct PlotSpec {
    std::string title, x_label, y_label;
    bool log_x = false;
    bool log_y = false;
    /// fit a least-squares line per series (on the drawn, possibly log,
    /// coordinates) and annotate its slope with a 95% band
    bool fit = false;
};

namespace detail {

inline std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::vector<double> linear_ticks(double lo, double hi) {
    double span = hi - lo;
    double raw = span / 4.0;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double norm = raw / mag;
    double step = (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step)
        ticks.push_back(t);
    return ticks;
}

/// Tick positions in drawn coordinates; log axes tick at powers of ten when
/// the range spans at least one decade.
inline std::vector<double> axis_ticks(double lo, double hi, bool log_axis) {
    if (log_axis) {
        double step = std::max(1.0, std::ceil((hi - lo) / 8.0));
        std::vector<double> ticks;
        for (double d = std::ceil(lo - 1e-9); d <= hi + 1e-9; d += step)
            ticks.push_back(d);
        if (ticks.size() >= 2) return ticks;
    }
    return linear_ticks(lo, hi);
}

}  // namespace detail

/// Renders a static, self-contained SVG line plot. Deterministic: same data,
/// same bytes. Fails with the series name when a trace is empty or when a
/// log axis meets a non-positive value, so a missing probe run is reported
/// rather than drawn as a blank.
inline std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
    require(!series.empty(), "svg_line_plot: no series to draw");
    for (const auto& s : series) {
        require(!s.x.empty(), "svg_line_plot: series '" + s.name +
                                  "' has no points; run the probe before rendering");
        require(s.x.size() == s.y.size(),
                "svg_line_plot: series '" + s.name + "' has mismatched x/y lengths");
    }

    auto tx = [&](double v, bool log_axis, const std::string& name) {
        if (!log_axis) return v;
        if (!(v > 0.0))
            fail("svg_line_plot: series '" + name + "' has non-positive value " + fmt_g17(v) +
                 " on a log axis");
        return std::log10(v);
    };

    std::vector<PlotSeries> drawn = series;
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    bool first = true;
    for (auto& s : drawn) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            s.x[i] = tx(s.x[i], spec.log_x, s.name);
            s.y[i] = tx(s.y[i], spec.log_y, s.name);
            if (first) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                first = false;
            } else {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
        }
    }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }

    const double W = 640, H = 420, L = 72, R = 24, T = 44, B = 52;
    auto mx = [&](double v) { return L + (v - xmin) / (xmax - xmin) * (W - L - R); };
    auto my = [&](double v) { return H - B - (v - ymin) / (ymax - ymin) * (H - T - B); };

    static const char* palette[6] = {"#1f77b4", "#d62728", "#2ca02c",
                                     "#9467bd", "#ff7f0e", "#17becf"};

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
           "viewBox=\"0 0 640 420\" font-family=\"sans-serif\">\n";
    svg += "<rect width=\"640\" height=\"420\" fill=\"#ffffff\"/>\n";
    svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
           "fill=\"#222222\">" +
           js_escape(spec.title) + "</text>\n";

    for (double t : detail::axis_ticks(xmin, xmax, spec.log_x)) {
        if (t < xmin - 1e-9 || t > xmax + 1e-9) continue;
        double X = mx(t);
        svg += "<line x1=\"" + detail::px(X) + "\" y1=\"" + detail::px(T) + "\" x2=\"" +
               detail::px(X) + "\" y2=\"" + detail::px(H - B) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        double label = spec.log_x ? std::pow(10.0, t) : t;
        svg += "<text x=\"" + detail::px(X) + "\" y=\"" + detail::px(H - B + 18) +
               "\" text-anchor=\"middle\" font-size=\"11\" fill=\"#444444\">" +
               detail::tick_label(label) + "</text>\n";
    }
    for (double t : detail::axis_ticks(ymin, ymax, spec.log_y)) {
        if (t < ymin - 1e-9 || t > ymax + 1e-9) continue;
        double Y = my(t);
        svg += "<line x1=\"" + detail::px(L) + "\" y1=\"" + detail::px(Y) + "\" x2=\"" +
               detail::px(W - R) + "\" y2=\"" + detail::px(Y) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        double label = spec.log_y ? std::pow(10.0, t) : t;
        svg += "<text x=\"" + detail::px(L - 6) + "\" y=\"" + detail::px(Y + 4) +
               "\" text-anchor=\"end\" font-size=\"11\" fill=\"#444444\">" +
               detail::tick_label(label) + "</text>\n";
    }
    svg += "<rect x=\"" + detail::px(L) + "\" y=\"" + detail::px(T) + "\" width=\"" +
           detail::px(W - L - R) + "\" height=\"" + detail::px(H - T - B) +
           "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + detail::px((L + W - R) / 2) + "\" y=\"" + detail::px(H - 12) +
           "\" text-anchor=\"middle\" font-size=\"12\" fill=\"#222222\">" +
           js_escape(spec.x_label) + "</text>\n";
    svg += "<text x=\"18\" y=\"" + detail::px((T + H - B) / 2) +
           "\" text-anchor=\"middle\" font-size=\"12\" fill=\"#222222\" transform=\"rotate(-90 "
           "18 " +
           detail::px((T + H - B) / 2) + ")\">" + js_escape(spec.y_label) + "</text>\n";

    std::vector<std::string> legend;
    for (std::size_t si = 0; si < drawn.size(); ++si) {
        const auto& s = drawn[si];
        const char* color = palette[si % 6];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i)
            pts += detail::px(mx(s.x[i])) + "," + detail::px(my(s.y[i])) + " ";
        if (s.x.size() > 1)
            svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"1.5\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            svg += "<circle cx=\"" + detail::px(mx(s.x[i])) + "\" cy=\"" +
                   detail::px(my(s.y[i])) + "\" r=\"2.5\" fill=\"" + color + "\"/>\n";

        std::string entry = s.name;
        if (spec.fit && s.x.size() >= 2) {
            slope_fit_result fit = fit_line(s.x, s.y);
            double y0 = fit.intercept + fit.slope * xmin;
            double y1 = fit.intercept + fit.slope * xmax;
            svg += "<line x1=\"" + detail::px(mx(xmin)) + "\" y1=\"" + detail::px(my(y0)) +
                   "\" x2=\"" + detail::px(mx(xmax)) + "\" y2=\"" + detail::px(my(y1)) +
                   "\" stroke=\"" + color +
                   "\" stroke-width=\"1\" stroke-dasharray=\"5 4\" opacity=\"0.7\"/>\n";
            char buf[64];
            std::snprintf(buf, sizeof buf, " slope %.3g +/- %.2g", fit.slope,
                          1.96 * fit.stderr_slope);
            entry += buf;
        }
        legend.push_back(entry);
    }

    double ly = T + 14;
    for (std::size_t si = 0; si < legend.size(); ++si) {
        const char* color = palette[si % 6];
        svg += "<line x1=\"" + detail::px(L + 10) + "\" y1=\"" + detail::px(ly - 4) +
               "\" x2=\"" + detail::px(L + 34) + "\" y2=\"" + detail::px(ly - 4) +
               "\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + detail::px(L + 40) + "\" y=\"" + detail::px(ly) +
               "\" font-size=\"11\" fill=\"#333333\">" + js_escape(legend[si]) + "</text>\n";
        ly += 16;
    }

    svg += "</svg>\n";
    return svg;
}

// ---------------------------------------------------------------------------
// run manifests

struct OutputRecord {
    std::string name;  // path relative to the run directory
    std::string kind;  // csv/json/svg flavor tag, drives re-rendering
    std::uint64_t bytes = 0;
    std::string hash;
};

struct RunManifest {
    std::string verb, action;
    std::string version = artifact_version();
    std::string out_dir;
    std::string config_json;  // canonical snapshot of the run configuration
    JsonFields highlights;    // headline numbers, already JSON-rendered values
    std::vector<std::pair<std::string, double>> timings;  // stage, seconds
    std::vector<OutputRecord> outputs;
};

/// Single write funnel: every artifact lands here so the manifest inventory
/// stays complete.
inline void emit_text(RunManifest& m, const std::string& name, const std::string& kind,
                      const std::string& content) {
    for (const auto& rec : m.outputs)
        require(rec.name != name, "emit_text: duplicate output name " + name);
    spill_file(m.out_dir + "/" + name, content);
    m.outputs.push_back({name, kind, content.size(), hash_tag(content)});
}

inline void emit_field(RunManifest& m, const std::string& name, const SampledField& f) {
    std::string path = m.out_dir + "/" + name;
    std::filesystem::create_directories(m.out_dir);
    write_field_csv(path, f);
    std::string content = slurp_file(path);
    for (const auto& rec : m.outputs)
        require(rec.name != name, "emit_field: duplicate output name " + name);
    m.outputs.push_back({name, "field-csv", content.size(), hash_tag(content)});
}

inline std::string manifest_json(const RunManifest& m) {
    JsonFields top;
    top.emplace_back("version", js(m.version));
    top.emplace_back("verb", js(m.verb));
    top.emplace_back("action", js(m.action));
    top.emplace_back("config", m.config_json.empty() ? "{}" : m.config_json);
    top.emplace_back("highlights", js_obj(m.highlights, 2));
    std::vector<std::string> trows;
    for (const auto& [stage, sec] : m.timings)
        trows.push_back(js_obj({{"stage", js(stage)}, {"seconds", js(sec)}}, 4));
    top.emplace_back("timings", js_arr(trows, 2));
    std::vector<std::string> orows;
    for (const auto& rec : m.outputs)
        orows.push_back(js_obj({{"name", js(rec.name)},
                                {"kind", js(rec.kind)},
                                {"bytes", js(rec.bytes)},
                                {"hash", js(rec.hash)}},
                               4));
    top.emplace_back("outputs", js_arr(orows, 2));
    return js_obj(top) + "\n";
}

inline std::string summary_text(const RunManifest& m) {
    std::string out;
    out += m.verb + " " + m.action + "  (" + m.version + ")\n";
    out += std::string(out.size() - 1, '-') + "\n";
    if (!m.highlights.empty()) {
        out += "\nresults\n";
        std::size_t w = 0;
        for (const auto& [k, v] : m.highlights) w = std::max(w, k.size());
        for (const auto& [k, v] : m.highlights)
            out += "  " + k + std::string(w - k.size() + 2, ' ') + v + "\n";
    }
    if (!m.timings.empty()) {
        out += "\ntimings\n";
        for (const auto& [stage, sec] : m.timings) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%10.3f s", sec);
            out += "  " + std::string(buf) + "  " + stage + "\n";
        }
    }
    out += "\noutputs\n";
    for (const auto& rec : m.outputs) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%10llu", static_cast<unsigned long long>(rec.bytes));
        out += "  " + rec.name + std::string(rec.name.size() < 24 ? 24 - rec.name.size() : 1, ' ') +
               std::string(buf) + " B  " + rec.kind + "  " + rec.hash + "\n";
    }
    return out;
}

/// Writes summary.txt and manifest.json. The manifest lists every other
/// output but not itself.
inline void finalize_manifest(RunManifest& m) {
    emit_text(m, "summary.txt", "summary", summary_text(m));
    spill_file(m.out_dir + "/manifest.json", manifest_json(m));
}

// ---------------------------------------------------------------------------
// plot re-rendering from CSV traces

namespace detail {

inline double csv_to_double(const std::string& cell) {
    try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        require(used == cell.size(), "trailing junk");
        return v;
    } catch (const std::exception&) {
        fail("render_plot: cell '" + cell + "' is not a number");
    }
}

/// Groups rows into one series per distinct label (column `key`), pulling
/// x from column `xc` and y from column `yc`. Row order is preserved.
inline std::vector<PlotSeries> csv_series(const std::vector<std::vector<std::string>>& rows,
                                          std::size_t key, std::size_t xc, std::size_t yc) {
    std::vector<PlotSeries> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        require(rows[i].size() > std::max({key, xc, yc}), "render_plot: short CSV row");
        const std::string& label = rows[i][key];
        PlotSeries* s = nullptr;
        for (auto& cand : out)
            if (cand.name == label) s = &cand;
        if (!s) {
            out.push_back({label, {}, {}});
            s = &out.back();
        }
        s->x.push_back(csv_to_double(rows[i][xc]));
        s->y.push_back(csv_to_double(rows[i][yc]));
    }
    return out;
}

}  // namespace detail

/// SVG for a known CSV trace kind; empty string when the kind has no plot.
/// Rendering at run time and at report time goes through this one function,
/// so a re-render from unchanged CSVs is byte-identical.
inline std::string render_plot_for(const std::string& kind, const std::string& csv_text) {
    auto rows = parse_csv(csv_text);
    if (kind == "norm-trace") {
        require(rows.size() >= 2, "render_plot: norm trace has no data rows");
        auto series = detail::csv_series(rows, 0, 1, 4);
        PlotSpec spec{"cut-off norms toward the singular point", "ladder level",
                      "restricted norm", false, true, false};
        return svg_line_plot(series, spec);
    }
    if (kind == "boundedness") {
        require(rows.size() >= 2, "render_plot: boundedness trace has no data rows");
        auto series = detail::csv_series(rows, 0, 1, 2);
        PlotSpec spec{"norm ratios under refinement", "refinement level", "ratio", false, false,
                      false};
        return svg_line_plot(series, spec);
    }
    if (kind == "extension") {
        require(rows.size() >= 2, "render_plot: extension trace has no data rows");
        std::vector<PlotSeries> series(3);
        series[0].name = "|dw1 term|";
        series[1].name = "|dw2 term|";
        series[2].name = "majorant";
        for (std::size_t i = 1; i < rows.size(); ++i) {
            require(rows[i].size() >= 6, "render_plot: short extension row");
            double k = detail::csv_to_double(rows[i][0]);
            cplx d1(detail::csv_to_double(rows[i][1]), detail::csv_to_double(rows[i][2]));
            cplx d2(detail::csv_to_double(rows[i][3]), detail::csv_to_double(rows[i][4]));
            double maj = detail::csv_to_double(rows[i][5]);
            auto push = [&](PlotSeries& s, double v) {
                if (v > 0.0) {
                    s.x.push_back(k);
                    s.y.push_back(v);
                }
            };
            push(series[0], std::abs(d1));
            push(series[1], std::abs(d2));
            push(series[2], maj);
        }
        std::vector<PlotSeries> live;
        for (auto& s : series)
            if (!s.x.empty()) live.push_back(std::move(s));
        require(!live.empty(), "render_plot: extension trace is entirely zero");
        PlotSpec spec{"cut-off pairing decay", "cut-off scale k", "magnitude", true, true, true};
        return svg_line_plot(live, spec);
    }
    return "";
}

}  // namespace dbarlab
