#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "voxflow/core/tensor.hpp"

namespace voxflow {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
// eigenvalues in descending order with matching unit eigenvectors (rows of
// `vectors`). Plenty for the tiny covariance matrices seen here.
inline void symmetric_eigen(std::vector<std::vector<double>> a, std::vector<double>& values,
                            std::vector<std::vector<double>>& vectors) {
    const int d = static_cast<int>(a.size());
    vectors.assign(static_cast<size_t>(d), std::vector<double>(static_cast<size_t>(d), 0.0));
    for (int i = 0; i < d; ++i) vectors[static_cast<size_t>(i)][static_cast<size_t>(i)] = 1.0;
    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off += a[static_cast<size_t>(p)][static_cast<size_t>(q)] * a[static_cast<size_t>(p)][static_cast<size_t>(q)];
        if (off < 1e-24) break;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                double apq = a[static_cast<size_t>(p)][static_cast<size_t>(q)];
                if (std::abs(apq) < 1e-300) continue;
                double theta = (a[static_cast<size_t>(q)][static_cast<size_t>(q)] - a[static_cast<size_t>(p)][static_cast<size_t>(p)]) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < d; ++k) {
                    double akp = a[static_cast<size_t>(k)][static_cast<size_t>(p)];
                    double akq = a[static_cast<size_t>(k)][static_cast<size_t>(q)];
                    a[static_cast<size_t>(k)][static_cast<size_t>(p)] = c * akp - s * akq;
                    a[static_cast<size_t>(k)][static_cast<size_t>(q)] = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    double apk = a[static_cast<size_t>(p)][static_cast<size_t>(k)];
                    double aqk = a[static_cast<size_t>(q)][static_cast<size_t>(k)];
                    a[static_cast<size_t>(p)][static_cast<size_t>(k)] = c * apk - s * aqk;
                    a[static_cast<size_t>(q)][static_cast<size_t>(k)] = s * apk + c * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    double vkp = vectors[static_cast<size_t>(p)][static_cast<size_t>(k)];
                    double vkq = vectors[static_cast<size_t>(q)][static_cast<size_t>(k)];
                    vectors[static_cast<size_t>(p)][static_cast<size_t>(k)] = c * vkp - s * vkq;
                    vectors[static_cast<size_t>(q)][static_cast<size_t>(k)] = s * vkp + c * vkq;
                }
            }
        }
    }
    values.resize(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) values[static_cast<size_t>(i)] = a[static_cast<size_t>(i)][static_cast<size_t>(i)];
    // Sort descending, carrying eigenvectors along.
    for (int i = 0; i < d; ++i) {
        int best = i;
        for (int j = i + 1; j < d; ++j)
            if (values[static_cast<size_t>(j)] > values[static_cast<size_t>(best)]) best = j;
        std::swap(values[static_cast<size_t>(i)], values[static_cast<size_t>(best)]);
        std::swap(vectors[static_cast<size_t>(i)], vectors[static_cast<size_t>(best)]);
    }
}

// Two-component principal projection of labeled embeddings.
struct PcaProjection {
    std::vector<std::string> labels;
    std::vector<std::array<double, 2>> points;
    std::vector<double> eigenvalues;              // every component, descending
    std::array<std::vector<double>, 2> basis;     // the two projection axes
    std::vector<double> center;
    bool degenerate = false;  // no variance at all: every point sits at the origin
};

inline PcaProjection project_embeddings(const std::vector<std::string>& labels,
                                        const std::vector<std::vector<double>>& vectors) {
    const int n = static_cast<int>(vectors.size());
    if (n < 2) throw Error("plot data: need at least 2 embeddings");
    if (labels.size() != vectors.size()) throw Error("plot data: label/vector count mismatch");
    const int d = static_cast<int>(vectors[0].size());
    if (d < 1) throw Error("plot data: empty embedding");
    for (const auto& v : vectors)
        if (static_cast<int>(v.size()) != d) throw Error("plot data: embedding dimension mismatch");

    PcaProjection out;
    out.labels = labels;
    out.center.assign(static_cast<size_t>(d), 0.0);
    for (const auto& v : vectors)
        for (int i = 0; i < d; ++i) out.center[static_cast<size_t>(i)] += v[static_cast<size_t>(i)] / n;

    std::vector<std::vector<double>> cov(static_cast<size_t>(d), std::vector<double>(static_cast<size_t>(d), 0.0));
    double trace = 0;
    for (const auto& v : vectors)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                cov[static_cast<size_t>(i)][static_cast<size_t>(j)] +=
                    (v[static_cast<size_t>(i)] - out.center[static_cast<size_t>(i)]) *
                    (v[static_cast<size_t>(j)] - out.center[static_cast<size_t>(j)]) / n;
    for (int i = 0; i < d; ++i) trace += cov[static_cast<size_t>(i)][static_cast<size_t>(i)];

    out.basis[0].assign(static_cast<size_t>(d), 0.0);
    out.basis[1].assign(static_cast<size_t>(d), 0.0);
    if (trace <= 1e-24) {
        out.degenerate = true;
        out.eigenvalues.assign(static_cast<size_t>(d), 0.0);
        out.points.assign(static_cast<size_t>(n), {0.0, 0.0});
        return out;
    }

    std::vector<std::vector<double>> vecs;
    symmetric_eigen(cov, out.eigenvalues, vecs);
    out.basis[0] = vecs[0];
    if (d > 1) out.basis[1] = vecs[1];
    out.points.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        double x = 0, y = 0;
        for (int i = 0; i < d; ++i) {
            double c = vectors[static_cast<size_t>(k)][static_cast<size_t>(i)] - out.center[static_cast<size_t>(i)];
            x += c * out.basis[0][static_cast<size_t>(i)];
            y += c * out.basis[1][static_cast<size_t>(i)];
        }
        out.points[static_cast<size_t>(k)] = {x, y};
    }
    return out;
}

// Writes "label<space>x<space>y" per line; returns the projection (with the
// degenerate flag for caller-side warnings).
inline PcaProjection emit_embedding_plot_data(const std::vector<std::string>& labels,
                                              const std::vector<std::vector<double>>& vectors,
                                              const std::string& out_path) {
    PcaProjection p = project_embeddings(labels, vectors);
    std::ofstream f(out_path);
    if (!f) throw Error("plot data: cannot write " + out_path);
    f.precision(10);
    for (size_t i = 0; i < p.points.size(); ++i)
        f << p.labels[i] << " " << p.points[i][0] << " " << p.points[i][1] << "\n";
    return p;
}

}  // namespace voxflow
