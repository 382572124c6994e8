#pragma once

#include <vector>

namespace zsmad {

// Scores follow the engine convention: higher means more attack-like.
struct LabeledScores {
    std::vector<double> bonafide;
    std::vector<double> morph;
};

struct DetPoint {
    double threshold = 0;
    double macer = 0;  // morphs scored below the threshold
    double bpcer = 0;  // bona fide scored at or above it
    bool operator==(const DetPoint&) const = default;
};

struct OperatingPoint {
    double target_macer = 0;
    double achieved_macer = 0;
    double bpcer = 0;
    double threshold = 0;
    bool reached = true;  // false when no candidate meets the target
    bool operator==(const OperatingPoint&) const = default;
};

// An empty class contributes a rate of 0.
DetPoint rates_at(const LabeledScores& scores, double t);

// Distinct observed scores plus one sentinel below the minimum and one above
// the maximum, ascending.
std::vector<double> candidate_thresholds(const LabeledScores& scores);

// One point per candidate threshold, ascending in threshold.
std::vector<DetPoint> det_curve(const LabeledScores& scores);

// Minimal BPCER among candidates with MACER <= target; ties go to the larger
// achieved MACER, then the smaller threshold. Throws DegenerateError if either
// class is empty and ConstraintError unless 0 < target < 1.
OperatingPoint bpcer_at_macer(const LabeledScores& scores, double target);

// (macer + bpcer) / 2 at the candidate minimising |macer - bpcer|, smallest
// threshold on ties. Throws DegenerateError if either class is empty.
double eer(const LabeledScores& scores);

}  // namespace zsmad
