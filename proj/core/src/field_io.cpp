#include "sflab/field_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "sflab/errors.hpp"
#include "sflab/report.hpp"

namespace sflab::io {

void write_field(const std::filesystem::path& path, const SpaceTimeField& field) {
    if (field.empty()) throw DataError("write_field: empty field");
    const TorusGrid& g = field.frames.front().grid();
    const int comps = field.frames.front().components();
    for (const auto& f : field.frames)
        if (!(f.grid() == g) || f.components() != comps)
            throw DataError("write_field: inhomogeneous frames");

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("write_field: cannot open " + path.string());
    os << "SFLD1\n";
    os << "dim=" << g.dim << "\n";
    os << "grid=" << g.n << "\n";
    os << "components=" << comps << "\n";
    os << "times=";
    for (std::size_t i = 0; i < field.times.size(); ++i) {
        if (i) os << ",";
        os << format_double(field.times[i]);
    }
    os << "\nend\n";
    for (const auto& f : field.frames)
        for (int c = 0; c < comps; ++c)
            os.write(reinterpret_cast<const char*>(f.component_data(c)),
                     static_cast<std::streamsize>(g.size() * sizeof(double)));
    if (!os) throw DataError("write_field: write failure on " + path.string());
}

SpaceTimeField read_field(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("read_field: cannot open " + path.string());
    std::string line;
    std::getline(is, line);
    if (line != "SFLD1") throw DataError("read_field: bad magic in " + path.string());

    int dim = 0, n = 0, comps = 0;
    std::vector<double> times;
    while (std::getline(is, line)) {
        if (line == "end") break;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("read_field: malformed header line");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "dim") dim = std::stoi(val);
        else if (key == "grid") n = std::stoi(val);
        else if (key == "components") comps = std::stoi(val);
        else if (key == "times") {
            std::stringstream ss(val);
            std::string tok;
            while (std::getline(ss, tok, ',')) times.push_back(std::stod(tok));
        }
    }
    if (dim < 1 || n < 2 || comps < 1 || times.empty())
        throw DataError("read_field: incomplete header");

    TorusGrid g(dim, n);
    SpaceTimeField out;
    out.times = times;
    for (std::size_t t = 0; t < times.size(); ++t) {
        PeriodicField f(g, comps);
        for (int c = 0; c < comps; ++c) {
            std::vector<double> buf(g.size());
            is.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(g.size() * sizeof(double)));
            if (!is) throw DataError("read_field: truncated data");
            for (std::size_t i = 0; i < g.size(); ++i) f.value_mut(i, c) = buf[i];
        }
        out.frames.push_back(std::move(f));
    }
    return out;
}

void write_snapshot(const std::filesystem::path& path, const PeriodicField& frame, double time) {
    SpaceTimeField f;
    f.times = {time};
    f.frames = {frame};
    write_field(path, f);
}

void write_ensemble_csv(std::ostream& os, const flow::FlowEnsemble& ens,
                        const flow::DerivativeRecord* derivs) {
    const int d = ens.dim();
    os << "checkpoint,time";
    for (int a = 0; a < d; ++a) os << ",mean" << a;
    for (int a = 0; a < d; ++a) os << ",var" << a;
    if (derivs) os << ",deriv_dist_mean";
    os << "\n";
    const double inv = 1.0 / (static_cast<double>(ens.n_points()) * ens.n_paths());
    for (int ck = 0; ck < ens.n_checkpoints(); ++ck) {
        double mean[3] = {0, 0, 0}, second[3] = {0, 0, 0};
        for (int pt = 0; pt < ens.n_points(); ++pt)
            for (int path = 0; path < ens.n_paths(); ++path) {
                const Vec& x = ens.state(ck, pt, path);
                for (int a = 0; a < d; ++a) {
                    mean[a] += x[a];
                    second[a] += x[a] * x[a];
                }
            }
        os << ck << "," << format_double(ens.checkpoints()[ck]);
        for (int a = 0; a < d; ++a) os << "," << format_double(mean[a] * inv);
        for (int a = 0; a < d; ++a)
            os << ","
               << format_double(std::max(0.0, second[a] * inv - mean[a] * inv * mean[a] * inv));
        if (derivs) {
            const Mat eye = mat_identity(d);
            double acc = 0.0;
            long count = 0;
            for (int pt = 0; pt < ens.n_points(); ++pt)
                for (int path = 0; path < ens.n_paths(); ++path)
                    for (int sg = 0; sg < derivs->n_sigmas; ++sg) {
                        acc += frobenius(derivs->at(ck, pt, path, sg) - eye);
                        ++count;
                    }
            os << "," << format_double(count ? acc / count : 0.0);
        }
        os << "\n";
    }
}

SpaceTimeField ensemble_mean_field(const flow::FlowEnsemble& ens, int points_per_axis) {
    TorusGrid g(ens.dim(), points_per_axis);
    if (static_cast<std::size_t>(ens.n_points()) != g.size())
        throw DomainError("ensemble_mean_field: point set is not the expected grid");
    SpaceTimeField out;
    for (int ck = 0; ck < ens.n_checkpoints(); ++ck) {
        PeriodicField f(g, ens.dim());
        for (int pt = 0; pt < ens.n_points(); ++pt) {
            Vec acc = vec_zero();
            for (int path = 0; path < ens.n_paths(); ++path)
                acc += ens.state(ck, pt, path);
            for (int a = 0; a < ens.dim(); ++a)
                f.value_mut(static_cast<std::size_t>(pt), a) = acc[a] / ens.n_paths();
        }
        out.times.push_back(ens.checkpoints()[ck]);
        out.frames.push_back(std::move(f));
    }
    return out;
}

} // namespace sflab::io
