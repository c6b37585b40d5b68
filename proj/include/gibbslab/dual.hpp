#pragma once

#include <cmath>

namespace gibbslab {

/// Value together with its derivative in beta. Partition-function recursions
/// run on these so d(log Z)/d(beta) comes out exact rather than differenced.
struct Dual {
    double v = 0.0;
    double d = 0.0;

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
    constexpr Dual(double value, double deriv) : v(value), d(deriv) {}

    constexpr Dual& operator+=(const Dual& o) {
        v += o.v;
        d += o.d;
        return *this;
    }
    constexpr Dual& operator-=(const Dual& o) {
        v -= o.v;
        d -= o.d;
        return *this;
    }
    constexpr Dual& operator*=(const Dual& o) {
        d = d * o.v + v * o.d;
        v *= o.v;
        return *this;
    }
    friend constexpr Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend constexpr Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend constexpr Dual operator*(Dual a, const Dual& b) { return a *= b; }
    friend constexpr Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
};

/// exp(-beta * w) as a dual number in beta.
inline Dual boltzmann_factor(double beta, double w) {
    const double f = std::exp(-beta * w);
    return {f, -w * f};
}

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
        abs_total_ += std::abs(x);
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }
    /// Sum of |terms|; the cancellation error bound scales with it.
    [[nodiscard]] double abs_total() const { return abs_total_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
    double abs_total_ = 0.0;
};

}  // namespace gibbslab
