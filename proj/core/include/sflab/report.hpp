#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace sflab {

enum class Verdict { pass, fail, inconclusive };
std::string verdict_label(Verdict v);

/// Outcome of one verification experiment: axis-labeled measurements,
/// measured constants, fitted exponents with residuals, tolerances, verdict.
struct EstimateReport {
    std::string id;
    Verdict verdict = Verdict::inconclusive;

    struct Row {
        std::string name;
        std::map<std::string, double> axis;
        double value = 0.0;
        double se = 0.0;
    };
    std::vector<Row> rows;

    std::map<std::string, double> constants;
    std::map<std::string, double> exponents;
    std::map<std::string, double> residuals;
    std::map<std::string, double> tolerances;
    std::vector<std::string> notes;

    void add_row(const std::string& name, std::map<std::string, double> axis, double value,
                 double se = 0.0) {
        rows.push_back({name, std::move(axis), value, se});
    }

    bool passed() const { return verdict == Verdict::pass; }
    /// One row per axis point, stable column order.
    void write_csv(std::ostream& os) const;
    std::string summary() const;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
    int n = 0;
};

/// Ordinary least squares of y against x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
/// OLS of log y against log x (entries with y <= 0 are rejected).
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Shortest round-trip-exact decimal representation ("%.17g").
std::string format_double(double v);

} // namespace sflab
