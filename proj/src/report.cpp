#include "rml/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace rml::report {

void Table::add(std::vector<Cell> row) {
    if (row.size() != header.size())
        throw ConfigError("table row has " + std::to_string(row.size()) + " cells, header has " +
                          std::to_string(header.size()));
    rows.push_back(std::move(row));
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace {

std::string cell_text(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) {
        if (s->find_first_of(",\"\n") == std::string::npos) return *s;
        std::string q = "\"";
        for (char ch : *s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    }
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    return std::to_string(std::get<std::int64_t>(c));
}

std::string escape_xml(const std::string& s) {
    std::string out;
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

}  // namespace

std::string to_csv(const Table& t) {
    std::ostringstream os;
    for (std::size_t j = 0; j < t.header.size(); ++j) os << (j ? "," : "") << t.header[j];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << cell_text(row[j]);
        os << '\n';
    }
    return os.str();
}

Table matrix_table(const Matrix& m, const std::string& prefix) {
    Table t;
    for (Index j = 0; j < m.cols(); ++j) t.header.push_back(prefix + std::to_string(j));
    t.rows.reserve(static_cast<std::size_t>(m.rows()));
    for (Index i = 0; i < m.rows(); ++i) {
        std::vector<Cell> row;
        for (Index j = 0; j < m.cols(); ++j) row.emplace_back(m(i, j));
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string to_svg(const Plot& p) {
    constexpr double W = 640, H = 420, L = 70, R = 160, Tm = 40, B = 55;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    auto tx = [&](double x) { return p.log_x ? std::log10(x) : x; };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.y[i]) || !std::isfinite(tx(s.x[i]))) continue;
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.04 * (x1 - x0), pady = 0.06 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;
    auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - Tm - B); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
       << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(p.title)
       << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << Tm << "\" width=\"" << W - L - R << "\" height=\"" << H - Tm - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0;
        const double yv = y0 + (y1 - y0) * k / 4.0;
        const double xs = L + (W - L - R) * k / 4.0;
        const double ys = H - B - (H - Tm - B) * k / 4.0;
        os << "<text x=\"" << xs << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
           << format_number(p.log_x ? std::pow(10.0, xv) : xv).substr(0, 7) << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << ys + 4 << "\" text-anchor=\"end\">"
           << format_number(yv).substr(0, 7) << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
       << escape_xml(p.x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << (Tm + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape_xml(p.y_label) << "</text>\n";

    for (std::size_t k = 0; k < p.series.size(); ++k) {
        const auto& s = p.series[k];
        const char* color = palette[k % std::size(palette)];
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (p.points) {
            for (std::size_t i = 0; i < n; ++i)
                if (std::isfinite(s.y[i]))
                    os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"1.2\" fill=\""
                       << color << "\" fill-opacity=\"0.5\"/>\n";
        } else {
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
            for (std::size_t i = 0; i < n; ++i)
                if (std::isfinite(s.y[i])) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
            os << "\"/>\n";
            for (std::size_t i = 0; i < n; ++i)
                if (std::isfinite(s.y[i]))
                    os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << color
                       << "\"/>\n";
        }
        const double ly = Tm + 14 + 18.0 * static_cast<double>(k);
        os << "<rect x=\"" << W - R + 12 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << color
           << "\"/>\n";
        os << "<text x=\"" << W - R + 28 << "\" y=\"" << ly << "\">" << escape_xml(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw std::runtime_error("write failed for " + path.string());
    return fnv1a(contents);
}

}  // namespace rml::report
