#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "zsrc/errors.hpp"

namespace zsrc {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double norm1(const Vec& a) {
    double s = 0.0;
    for (double x : a) s += std::fabs(x);
    return s;
}

// y += alpha * x
inline void axpy(double alpha, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vec& a, double alpha) {
    for (double& x : a) x *= alpha;
}

inline Vec add(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline double cosine(const Vec& a, const Vec& b) {
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0)
        throw ComputeError("cosine undefined for zero vector");
    return dot(a, b) / (na * nb);
}

inline double euclidean(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline bool all_finite(const Vec& a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool is_zero(const Vec& a) {
    for (double x : a)
        if (x != 0.0) return false;
    return true;
}

}  // namespace zsrc
