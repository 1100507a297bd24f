#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "afcc/scales.hpp"

namespace afcc {

struct SearchConfig {
    int num_candidates = 24;  // M
    int stall_limit = 3;      // K
    double initial_radius = kPi / 2.0;
    int max_iterations = 25;
    double mu_init = 8.0;
    uint64_t seed = 0;

    void validate() const;
};

// Rate producer for one interpolation point; throwing marks the candidate
// invalid. Must be deterministic per point for a fixed seed.
using Objective = std::function<double(const InterpolationPoint&)>;

// Plane coordinates: the bi-frequency square normalized to [0, pi]^2.
struct PlanePoint {
    double x = 0.0;
    double y = 0.0;
};

struct CandidateEval {
    PlanePoint point;
    double rate = 0.0;
    bool valid = false;
};

struct IterationRecord {
    int iteration = 0;  // 1-based
    PlanePoint center;
    double radius = 0.0;
    int stall_counter = 0;  // value before this iteration's update
    std::vector<CandidateEval> candidates;
    double best_rate_so_far = 0.0;  // after this iteration
};

struct SearchState {
    SearchConfig config;
    AudioConfig audio;
    int iteration = 1;
    PlanePoint center;
    double radius = 0.0;
    std::vector<PlanePoint> candidates;
    PlanePoint best_point;
    double best_rate = 0.0;
    int best_iteration = 0;
    int stall_counter = 0;
    bool terminated = false;
    bool truncated = false;
    std::vector<IterationRecord> trace;
};

struct SearchResult {
    InterpolationPoint best_point;  // physical Hz
    double best_rate = 0.0;
    bool truncated = false;
    std::vector<IterationRecord> trace;
};

InterpolationPoint plane_to_hz(const PlanePoint& p, const AudioConfig& cfg);
PlanePoint hz_to_plane(const InterpolationPoint& p, const AudioConfig& cfg);

SearchState initialize(const SearchConfig& cfg, const AudioConfig& audio);

// Evaluate all candidates once; move-and-shrink on improvement, otherwise
// count a stall and keep the layout for re-evaluation.
void step(SearchState& state, const Objective& objective);

SearchResult optimize(const Objective& objective, const SearchConfig& cfg,
                      const AudioConfig& audio);

void write_trace_csv(const std::vector<IterationRecord>& trace, std::ostream& os);

}  // namespace afcc
