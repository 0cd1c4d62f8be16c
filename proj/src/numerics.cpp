#include "revdiff/numerics.hpp"

#include <algorithm>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

#include "revdiff/errors.hpp"

namespace revdiff {

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kLeaf = 16;
    if (values.size() <= kLeaf) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double v : values) s += std::exp(v - m);
    return m + std::log(s);
}

double softmax_inplace(std::span<double> logits) {
    if (logits.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(logits.begin(), logits.end());
    if (!std::isfinite(m)) throw NumericalError("softmax: non-finite maximum logit");
    double s = 0.0;
    for (double& v : logits) {
        v = std::exp(v - m);
        s += v;
    }
    const double inv = 1.0 / s;
    for (double& v : logits) v *= inv;
    return m + std::log(s);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return s;
}

MeanEstimate mean_and_se(std::span<const double> values) {
    MeanEstimate out;
    const std::size_t n = values.size();
    if (n == 0) return out;
    out.mean = pairwise_sum(values) / static_cast<double>(n);
    if (n < 2) return out;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - out.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    out.std_error = std::sqrt(var / static_cast<double>(n));
    return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DomainError("quantile of an empty list");
    q = std::clamp(q, 0.0, 1.0);
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t, std::size_t)>& body) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        body(0, n);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t first = std::min(n, w * chunk);
        const std::size_t last = std::min(n, first + chunk);
        threads.emplace_back([&, w, first, last] {
            try {
                body(first, last);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace revdiff
