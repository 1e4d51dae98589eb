#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "offirl/error.hpp"
#include "offirl/mdp.hpp"

namespace offirl {

struct NamedReward {
    std::string id;
    RewardFunction reward;
};

using RewardPanel = std::vector<NamedReward>;

inline double normalizer(const RewardFunction& r1, const RewardFunction& r2) {
    return std::max(r1.sup_norm(), r2.sup_norm());
}

/// Weighted distance: behavioral expectation of |r1 - r2| plus the largest
/// gap off the behavioral support, summed over stages and divided by M.
inline double dist_d(const RewardFunction& r1, const RewardFunction& r2, const VisitationTable& vis_b,
                     const TripleSet& zb) {
    const Dims d = r1.dims();
    require_same(r2.dims(), d, "rewards");
    require_same(vis_b.dims, d, "visitation vs reward");
    require_same(zb.dims(), d, "support vs reward");
    const double m = normalizer(r1, r2);
    if (m == 0.0) return 0.0;
    double total = 0.0;
    for (int h = 0; h < d.horizon; ++h) {
        double expectation = 0.0;
        double off = 0.0;
        for (int s = 0; s < d.states; ++s)
            for (int a = 0; a < d.actions; ++a) {
                const double gap = std::abs(r1(h, s, a) - r2(h, s, a));
                if (zb.contains(h, s, a)) {
                    expectation += vis_b.at(h, s, a) * gap;
                } else {
                    off = std::max(off, gap);
                }
            }
        total += expectation + off;
    }
    return total / m;
}

inline double dist_dinf(const RewardFunction& r1, const RewardFunction& r2) {
    const Dims d = r1.dims();
    require_same(r2.dims(), d, "rewards");
    const double m = normalizer(r1, r2);
    if (m == 0.0) return 0.0;
    double total = 0.0;
    for (int h = 0; h < d.horizon; ++h) {
        const auto x = r1.stage(h);
        const auto y = r2.stage(h);
        double gap = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) gap = std::max(gap, std::abs(x[i] - y[i]));
        total += gap;
    }
    return total / m;
}

enum class MetricKind { D, DInf };

/// Behavioral context needed by MetricKind::D.
struct MetricContext {
    MetricKind kind = MetricKind::DInf;
    std::optional<VisitationTable> vis_b;
    std::optional<TripleSet> zb;

    double operator()(const RewardFunction& x, const RewardFunction& y) const {
        if (kind == MetricKind::DInf) return dist_dinf(x, y);
        if (!vis_b || !zb) throw SchemaError("metric d needs the behavioral visitation and support");
        return dist_d(x, y, *vis_b, *zb);
    }
};

inline double hausdorff(const RewardPanel& a, const RewardPanel& b, const MetricContext& metric) {
    if (a.empty() || b.empty()) throw EmptyPanel("hausdorff distance needs two nonempty panels");
    std::vector<double> best_b(b.size(), std::numeric_limits<double>::infinity());
    double forward = 0.0;
    for (const auto& x : a) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double c = metric(x.reward, b[j].reward);
            best = std::min(best, c);
            best_b[j] = std::min(best_b[j], c);
        }
        forward = std::max(forward, best);
    }
    const double backward = *std::max_element(best_b.begin(), best_b.end());
    return std::max(forward, backward);
}

/// Worst value loss under r of a policy optimal for r_hat, over all (s,h),
/// divided by M.
inline double dg_vstar(const RewardFunction& r, const RewardFunction& r_hat, const MdpWithoutReward& mdp,
                       double tie_tol = kValueTol) {
    const Dims d = mdp.dims();
    require_same(r.dims(), d, "reward vs mdp");
    require_same(r_hat.dims(), d, "estimated reward vs mdp");
    const double m = normalizer(r, r_hat);
    if (m == 0.0) return 0.0;

    const ValueTable best = optimal_q_value(mdp, r);
    const ValueTable opt_hat = optimal_q_value(mdp, r_hat);

    std::vector<double> vmin(d.state_stage_count(), 0.0);
    double gap = 0.0;
    for (int h = d.horizon - 1; h >= 0; --h) {
        for (int s = 0; s < d.states; ++s) {
            double worst = std::numeric_limits<double>::infinity();
            for (int a = 0; a < d.actions; ++a) {
                if (opt_hat.Q(h, s, a) < opt_hat.V(h, s) - tie_tol) continue;
                double q = r(h, s, a);
                if (h + 1 < d.horizon) {
                    const auto row = mdp.transitions().row(h, s, a);
                    for (int n = 0; n < d.states; ++n)
                        q += row[n] * vmin[static_cast<std::size_t>(h + 1) * d.states + n];
                }
                worst = std::min(worst, q);
            }
            vmin[static_cast<std::size_t>(h) * d.states + s] = worst;
            gap = std::max(gap, best.V(h, s) - worst);
        }
    }
    return gap / m;
}

}  // namespace offirl
