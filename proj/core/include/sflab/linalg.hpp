#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace sflab {

/// Point / vector in up to three dimensions. Entries past the active
/// dimension are kept at zero so norms and dot products can ignore `dim`.
using Vec = std::array<double, 3>;

/// Row-major d x d matrix stored in a fixed 3x3 block.
using Mat = std::array<double, 9>;

inline Vec vec_zero() { return {0.0, 0.0, 0.0}; }

inline Vec operator+(const Vec& a, const Vec& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec operator-(const Vec& a, const Vec& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec operator*(double c, const Vec& a) { return {c * a[0], c * a[1], c * a[2]}; }
inline Vec& operator+=(Vec& a, const Vec& b) {
    a[0] += b[0]; a[1] += b[1]; a[2] += b[2];
    return a;
}

inline double dot(const Vec& a, const Vec& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Mat mat_zero() { return {0, 0, 0, 0, 0, 0, 0, 0, 0}; }

inline Mat mat_identity(int dim) {
    Mat m = mat_zero();
    for (int i = 0; i < dim; ++i) m[3 * i + i] = 1.0;
    return m;
}

inline double& at(Mat& m, int i, int j) { return m[3 * i + j]; }
inline double at(const Mat& m, int i, int j) { return m[3 * i + j]; }

/// c = a * b restricted to the leading dim x dim block.
inline Mat matmul(const Mat& a, const Mat& b, int dim) {
    Mat c = mat_zero();
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) {
            const double aik = a[3 * i + k];
            for (int j = 0; j < dim; ++j) c[3 * i + j] += aik * b[3 * k + j];
        }
    return c;
}

inline Vec matvec(const Mat& a, const Vec& x, int dim) {
    Vec y = vec_zero();
    for (int i = 0; i < dim; ++i) {
        double s = 0.0;
        for (int j = 0; j < dim; ++j) s += a[3 * i + j] * x[j];
        y[i] = s;
    }
    return y;
}

inline Mat operator+(const Mat& a, const Mat& b) {
    Mat c;
    for (int i = 0; i < 9; ++i) c[i] = a[i] + b[i];
    return c;
}
inline Mat operator-(const Mat& a, const Mat& b) {
    Mat c;
    for (int i = 0; i < 9; ++i) c[i] = a[i] - b[i];
    return c;
}
inline Mat operator*(double s, const Mat& a) {
    Mat c;
    for (int i = 0; i < 9; ++i) c[i] = s * a[i];
    return c;
}
inline Mat& operator+=(Mat& a, const Mat& b) {
    for (int i = 0; i < 9; ++i) a[i] += b[i];
    return a;
}

inline double frobenius(const Mat& m) {
    double s = 0.0;
    for (double v : m) s += v * v;
    return std::sqrt(s);
}

inline Mat transpose(const Mat& m, int dim) {
    Mat t = mat_zero();
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) t[3 * i + j] = m[3 * j + i];
    return t;
}

inline double det(const Mat& m, int dim) {
    if (dim == 1) return m[0];
    if (dim == 2) return m[0] * m[4] - m[1] * m[3];
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

} // namespace sflab
