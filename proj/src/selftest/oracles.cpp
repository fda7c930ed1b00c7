// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vitprune::oracle {

namespace {

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += (a[k] - b[k]) * (a[k] - b[k]);
    }
    return s;
}

}  // namespace

DpcReference dpc(const Rows& rows, std::size_t c) {
    const std::size_t n = rows.size();
    if (c == 0 || c > n) {
        throw std::invalid_argument("oracle::dpc: bad cluster count");
    }
    std::vector<double> dens(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s += sqdist(rows[i], rows[j]);
        }
        dens[i] = -s;
    }
    auto higher = [&](std::size_t j, std::size_t i) {
        if (dens[j] != dens[i]) {
            return dens[j] > dens[i];
        }
        return j < i;
    };

    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> to_higher;
        std::vector<double> to_all;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            const double d = std::sqrt(sqdist(rows[i], rows[j]));
            to_all.push_back(d);
            if (higher(j, i)) {
                to_higher.push_back(d);
            }
        }
        double delta = 0.0;
        if (!to_higher.empty()) {
            delta = to_higher[0];
            for (double d : to_higher) {
                if (d < delta) {
                    delta = d;
                }
            }
        } else {
            for (double d : to_all) {
                if (d > delta) {
                    delta = d;
                }
            }
        }
        score[i] = delta > 0.0 ? dens[i] + std::log(delta) : -std::numeric_limits<double>::infinity();
    }

    DpcReference ref;
    std::vector<bool> taken(n, false);
    for (std::size_t round = 0; round < c; ++round) {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) {
                continue;
            }
            if (best == n || score[i] > score[best]) {
                best = i;
            }
        }
        taken[best] = true;
        ref.centers.push_back(best);
    }

    ref.center_of.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) {
            ref.center_of[i] = i;
            continue;
        }
        std::size_t best = n;
        double best_d = 0.0;
        for (std::size_t ctr = 0; ctr < n; ++ctr) {
            if (!taken[ctr]) {
                continue;
            }
            const double d = std::sqrt(sqdist(rows[i], rows[ctr]));
            if (best == n || d < best_d) {
                best = ctr;
                best_d = d;
            }
        }
        ref.center_of[i] = best;
    }
    return ref;
}

double l1_objective(const std::vector<double>& column, double z) {
    double s = 0.0;
    for (double x : column) {
        s += std::abs(x - z);
    }
    return s;
}

double l1_grid_min(const std::vector<double>& column, double step) {
    double lo = column.at(0);
    double hi = column.at(0);
    for (double x : column) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    double best = l1_objective(column, lo);
    const auto steps = static_cast<long>(std::floor((hi - lo) / step));
    for (long s = 0; s <= steps + 1; ++s) {
        const double z = std::min(hi, lo + static_cast<double>(s) * step);
        best = std::min(best, l1_objective(column, z));
    }
    return best;
}

std::size_t ceil_tenths(std::size_t tenths, std::size_t n) {
    return (tenths * n + 9) / 10;
}

Rows matmul(const Rows& a, const Rows& b) {
    Rows c(a.size(), std::vector<double>(b.at(0).size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b[0].size(); ++j) {
            for (std::size_t k = 0; k < b.size(); ++k) {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    return c;
}

}  // namespace vitprune::oracle
