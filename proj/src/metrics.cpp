#include "hetcache/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hetcache {

namespace {

void check_shapes(const TokenGrid& a, const TokenGrid& b, const char* who) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(who) + ": shape mismatch");
    }
}

}  // namespace

double l2_distance(const TokenGrid& a, const TokenGrid& b) {
    check_shapes(a, b, "l2_distance");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

double mean_squared_error(const TokenGrid& a, const TokenGrid& b) {
    check_shapes(a, b, "mean_squared_error");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double psnr(const TokenGrid& a, const TokenGrid& b, double peak) {
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
    const double mse = mean_squared_error(a, b);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const TokenGrid& a, const TokenGrid& b, double dynamic_range) {
    check_shapes(a, b, "ssim");
    if (!(dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic range must be > 0");

    const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);

    const int wh = std::min(8, a.height);
    const int ww = std::min(8, a.width);
    const double n = static_cast<double>(wh) * ww;

    double total = 0.0;
    std::int64_t windows = 0;

    for (int f = 0; f < a.frames; ++f) {
        for (int c = 0; c < a.channels; ++c) {
            for (int y0 = 0; y0 + wh <= a.height; ++y0) {
                for (int x0 = 0; x0 + ww <= a.width; ++x0) {
                    double sum_a = 0.0, sum_b = 0.0;
                    double sum_aa = 0.0, sum_bb = 0.0, sum_ab = 0.0;
                    for (int y = y0; y < y0 + wh; ++y) {
                        for (int x = x0; x < x0 + ww; ++x) {
                            const int tok = a.token_index(f, y, x);
                            const double va = a.token(tok)[c];
                            const double vb = b.token(tok)[c];
                            sum_a += va;
                            sum_b += vb;
                            sum_aa += va * va;
                            sum_bb += vb * vb;
                            sum_ab += va * vb;
                        }
                    }
                    const double mu_a = sum_a / n;
                    const double mu_b = sum_b / n;
                    const double var_a = sum_aa / n - mu_a * mu_a;
                    const double var_b = sum_bb / n - mu_b * mu_b;
                    const double cov = sum_ab / n - mu_a * mu_b;
                    const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
                    const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                    total += num / den;
                    ++windows;
                }
            }
        }
    }
    return total / static_cast<double>(windows);
}

}  // namespace hetcache
