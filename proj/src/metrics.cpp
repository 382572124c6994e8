#include "zsmad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "zsmad/errors.hpp"

namespace zsmad {

namespace {

double rate(size_t count, size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total);
}

void require_both(const LabeledScores& s, const char* what) {
    if (s.morph.empty()) throw DegenerateError(fmt::format("{}: no morph scores", what));
    if (s.bonafide.empty()) throw DegenerateError(fmt::format("{}: no bona fide scores", what));
}

}  // namespace

DetPoint rates_at(const LabeledScores& scores, double t) {
    const auto below = std::count_if(scores.morph.begin(), scores.morph.end(), [t](double s) { return s < t; });
    const auto at_or_above = std::count_if(scores.bonafide.begin(), scores.bonafide.end(), [t](double s) { return s >= t; });
    return {t, rate(static_cast<size_t>(below), scores.morph.size()), rate(static_cast<size_t>(at_or_above), scores.bonafide.size())};
}

std::vector<double> candidate_thresholds(const LabeledScores& scores) {
    std::vector<double> all;
    all.reserve(scores.bonafide.size() + scores.morph.size() + 2);
    all.insert(all.end(), scores.bonafide.begin(), scores.bonafide.end());
    all.insert(all.end(), scores.morph.begin(), scores.morph.end());
    for (double v : all) {
        if (!std::isfinite(v)) throw ConstraintError("scores must be finite");
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    if (all.empty()) return {};
    const double lo = std::nextafter(all.front(), -std::numeric_limits<double>::infinity());
    const double hi = std::nextafter(all.back(), std::numeric_limits<double>::infinity());
    all.insert(all.begin(), lo);
    all.push_back(hi);
    return all;
}

std::vector<DetPoint> det_curve(const LabeledScores& scores) {
    const std::vector<double> thresholds = candidate_thresholds(scores);
    std::vector<double> morph = scores.morph;
    std::vector<double> bona = scores.bonafide;
    std::sort(morph.begin(), morph.end());
    std::sort(bona.begin(), bona.end());
    std::vector<DetPoint> out;
    out.reserve(thresholds.size());
    size_t m_below = 0;
    size_t b_below = 0;
    for (double t : thresholds) {
        while (m_below < morph.size() && morph[m_below] < t) ++m_below;
        while (b_below < bona.size() && bona[b_below] < t) ++b_below;
        out.push_back({t, rate(m_below, morph.size()), rate(bona.size() - b_below, bona.size())});
    }
    return out;
}

OperatingPoint bpcer_at_macer(const LabeledScores& scores, double target) {
    require_both(scores, "bpcer_at_macer");
    if (!(target > 0.0 && target < 1.0)) throw ConstraintError(fmt::format("target macer {} outside (0, 1)", target));
    const auto curve = det_curve(scores);
    const DetPoint* best = nullptr;
    for (const auto& p : curve) {
        if (p.macer > target) continue;
        if (!best || p.bpcer < best->bpcer || (p.bpcer == best->bpcer && p.macer > best->macer)) best = &p;
    }
    if (best) return {target, best->macer, best->bpcer, best->threshold, true};
    // Not reachable for target > 0 since the low sentinel has macer 0.
    const auto lowest = std::min_element(curve.begin(), curve.end(),
                                         [](const DetPoint& a, const DetPoint& b) { return a.macer < b.macer; });
    return {target, lowest->macer, lowest->bpcer, lowest->threshold, false};
}

double eer(const LabeledScores& scores) {
    require_both(scores, "eer");
    const auto curve = det_curve(scores);
    const DetPoint* best = nullptr;
    for (const auto& p : curve) {
        if (!best || std::fabs(p.macer - p.bpcer) < std::fabs(best->macer - best->bpcer)) best = &p;
    }
    return (best->macer + best->bpcer) / 2.0;
}

}  // namespace zsmad
