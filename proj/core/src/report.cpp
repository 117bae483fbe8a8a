#include "sflab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "sflab/errors.hpp"

namespace sflab {

std::string verdict_label(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void EstimateReport::write_csv(std::ostream& os) const {
    std::set<std::string> axis_keys;
    for (const Row& r : rows)
        for (const auto& [k, _] : r.axis) axis_keys.insert(k);

    os << "name";
    for (const auto& k : axis_keys) os << "," << k;
    os << ",value,se\n";
    for (const Row& r : rows) {
        os << r.name;
        for (const auto& k : axis_keys) {
            os << ",";
            auto it = r.axis.find(k);
            if (it != r.axis.end()) os << format_double(it->second);
        }
        os << "," << format_double(r.value) << "," << format_double(r.se) << "\n";
    }
}

std::string EstimateReport::summary() const {
    std::ostringstream os;
    os << id << ": " << verdict_label(verdict);
    for (const auto& [k, v] : constants) os << "  " << k << "=" << format_double(v);
    for (const auto& [k, v] : exponents) {
        os << "  " << k << "=" << format_double(v);
        auto it = residuals.find(k);
        if (it != residuals.end()) os << " (resid " << format_double(it->second) << ")";
    }
    for (const auto& n : notes) os << "\n    note: " << n;
    return os.str();
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("fit_line: need >= 2 points");
    const int n = static_cast<int>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw DomainError("fit_line: degenerate abscissae");
    LineFit f;
    f.n = n;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    double rss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        rss += r * r;
    }
    f.rms_residual = std::sqrt(rss / n);
    return f;
}

LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return fit_line(lx, ly);
}

} // namespace sflab
