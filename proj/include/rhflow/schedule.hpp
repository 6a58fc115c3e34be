#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

namespace rhflow {

// Coupling schedule alpha(t) >= 0: constant or piecewise-linear in t.
// Monotonicity statements require alpha non-increasing; runs that request
// monotonicity verdicts must use a schedule that passes require_non_increasing().
class CouplingSchedule {
  public:
    CouplingSchedule() : CouplingSchedule(1.0) {}

    explicit CouplingSchedule(double alpha) {
        if (alpha < 0.0) throw std::invalid_argument("CouplingSchedule: alpha must be >= 0");
        knots_.emplace_back(0.0, alpha);
    }

    static CouplingSchedule constant(double alpha) { return CouplingSchedule(alpha); }

    static CouplingSchedule piecewise_linear(std::vector<std::pair<double, double>> knots) {
        if (knots.size() < 2)
            throw std::invalid_argument("CouplingSchedule: need at least 2 knots");
        for (size_t k = 0; k < knots.size(); ++k) {
            if (knots[k].second < 0.0)
                throw std::invalid_argument("CouplingSchedule: alpha must be >= 0");
            if (k > 0 && !(knots[k].first > knots[k - 1].first))
                throw std::invalid_argument("CouplingSchedule: knot times must increase");
        }
        CouplingSchedule s(knots[0].second);
        s.knots_ = std::move(knots);
        return s;
    }

    bool is_constant() const { return knots_.size() == 1; }

    double value(double t) const {
        if (knots_.size() == 1 || t <= knots_.front().first) return knots_.front().second;
        if (t >= knots_.back().first) return knots_.back().second;
        size_t k = 1;
        while (knots_[k].first < t) ++k;
        const auto& [t0, a0] = knots_[k - 1];
        const auto& [t1, a1] = knots_[k];
        return a0 + (a1 - a0) * (t - t0) / (t1 - t0);
    }

    // Right derivative; zero outside the knot range and for constants.
    double derivative(double t) const {
        if (knots_.size() == 1) return 0.0;
        if (t < knots_.front().first || t >= knots_.back().first) return 0.0;
        size_t k = 1;
        while (knots_[k].first <= t) ++k;
        const auto& [t0, a0] = knots_[k - 1];
        const auto& [t1, a1] = knots_[k];
        return (a1 - a0) / (t1 - t0);
    }

    bool non_increasing() const {
        for (size_t k = 1; k < knots_.size(); ++k)
            if (knots_[k].second > knots_[k - 1].second) return false;
        return true;
    }

    void require_non_increasing() const {
        if (!non_increasing())
            throw std::invalid_argument(
                "CouplingSchedule: monotonicity checks require a non-increasing alpha(t)");
    }

    const std::vector<std::pair<double, double>>& knots() const { return knots_; }

  private:
    std::vector<std::pair<double, double>> knots_;
};

} // namespace rhflow
