#pragma once

// Exhaustive threshold sweep used to cross-check the metric implementation.
// Deliberately naive: every rate is recounted from scratch at every threshold.

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "zsmad/metrics.hpp"

namespace zsmad::testing {

struct SweepPoint {
    double t, macer, bpcer;
};

inline std::vector<SweepPoint> sweep(const LabeledScores& s) {
    std::set<double> values(s.bonafide.begin(), s.bonafide.end());
    values.insert(s.morph.begin(), s.morph.end());
    std::vector<double> ts(values.begin(), values.end());
    if (!ts.empty()) {
        ts.push_back(std::nextafter(*values.begin(), -std::numeric_limits<double>::infinity()));
        ts.push_back(std::nextafter(*values.rbegin(), std::numeric_limits<double>::infinity()));
    }
    std::set<double> sorted(ts.begin(), ts.end());
    std::vector<SweepPoint> out;
    for (double t : sorted) {
        size_t miss = 0, false_alarm = 0;
        for (double m : s.morph) miss += m < t ? 1 : 0;
        for (double b : s.bonafide) false_alarm += b >= t ? 1 : 0;
        const double macer = s.morph.empty() ? 0.0 : static_cast<double>(miss) / static_cast<double>(s.morph.size());
        const double bpcer =
            s.bonafide.empty() ? 0.0 : static_cast<double>(false_alarm) / static_cast<double>(s.bonafide.size());
        out.push_back({t, macer, bpcer});
    }
    return out;
}

inline SweepPoint oracle_bpcer_at_macer(const LabeledScores& s, double target) {
    const SweepPoint* best = nullptr;
    auto key = [](const SweepPoint& p) { return std::make_tuple(p.bpcer, -p.macer, p.t); };
    const auto pts = sweep(s);
    for (const auto& p : pts) {
        if (p.macer <= target && (!best || key(p) < key(*best))) best = &p;
    }
    return *best;
}

inline double oracle_eer(const LabeledScores& s) {
    const auto pts = sweep(s);
    auto key = [](const SweepPoint& p) { return std::make_tuple(std::fabs(p.macer - p.bpcer), p.t); };
    const SweepPoint* best = &pts.front();
    for (const auto& p : pts) {
        if (key(p) < key(*best)) best = &p;
    }
    return (best->macer + best->bpcer) / 2.0;
}

// Up to 50 scores; half the instances are drawn from a coarse grid so ties
// between and within classes are common.
inline LabeledScores random_scores(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, 25);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool coarse = rng() % 2 == 0;
    auto draw = [&] { return coarse ? std::round(unit(rng) * 10.0) / 10.0 : unit(rng); };
    LabeledScores s;
    const int nb = count(rng), nm = count(rng);
    for (int i = 0; i < nb; ++i) s.bonafide.push_back(draw());
    for (int i = 0; i < nm; ++i) s.morph.push_back(draw());
    return s;
}

}  // namespace zsmad::testing
