#include "afcc/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "afcc/parallel.hpp"

namespace afcc {

namespace {

constexpr double kBoundaryMargin = 1e-3 * kPi;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double dist(const PlanePoint& a, const PlanePoint& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Pull a candidate radially toward the center until it sits inside the
// margin square; the center itself is always interior.
PlanePoint clamp_to_square(const PlanePoint& center, const PlanePoint& p) {
    double t = 1.0;
    auto limit = [&](double c, double q) {
        if (q < kBoundaryMargin) t = std::min(t, (kBoundaryMargin - c) / (q - c));
        if (q > kPi - kBoundaryMargin) t = std::min(t, (kPi - kBoundaryMargin - c) / (q - c));
    };
    limit(center.x, p.x);
    limit(center.y, p.y);
    if (t >= 1.0) return p;
    return {center.x + t * (p.x - center.x), center.y + t * (p.y - center.y)};
}

// M points evenly spaced on three concentric circles, offset by pi/8 per
// circle to avoid collinear candidates.
std::vector<PlanePoint> layout_candidates(const PlanePoint& center, double radius, int m) {
    constexpr int kCircles = 3;
    std::vector<PlanePoint> pts;
    pts.reserve(static_cast<size_t>(m));
    int base = m / kCircles;
    int extra = m % kCircles;
    for (int c = 0; c < kCircles; ++c) {
        int count = base + (c < extra ? 1 : 0);
        if (count == 0) continue;
        double r = radius * static_cast<double>(c + 1) / kCircles;
        double offset = c * kPi / 8.0;
        for (int j = 0; j < count; ++j) {
            double angle = offset + 2.0 * kPi * j / count;
            PlanePoint p{center.x + r * std::cos(angle), center.y + r * std::sin(angle)};
            pts.push_back(clamp_to_square(center, p));
        }
    }
    return pts;
}

}  // namespace

void SearchConfig::validate() const {
    if (num_candidates < 4) throw DataError("search config: need at least 4 candidates");
    if (stall_limit < 1) throw DataError("search config: stall limit must be >= 1");
    if (!(initial_radius > 0.0)) throw DataError("search config: initial radius must be positive");
    if (max_iterations < 1) throw DataError("search config: max_iterations must be positive");
    if (!(mu_init > 0.0)) throw DataError("search config: mu_init must be positive");
}

InterpolationPoint plane_to_hz(const PlanePoint& p, const AudioConfig& cfg) {
    return {p.x / kPi * cfg.nyquist_hz, p.y / kPi * cfg.nyquist_hz};
}

PlanePoint hz_to_plane(const InterpolationPoint& p, const AudioConfig& cfg) {
    return {p.x / cfg.nyquist_hz * kPi, p.y / cfg.nyquist_hz * kPi};
}

SearchState initialize(const SearchConfig& cfg, const AudioConfig& audio) {
    cfg.validate();
    audio.validate();
    SearchState st;
    st.config = cfg;
    st.audio = audio;
    st.center = hz_to_plane(mu_law_center(cfg.mu_init, audio), audio);
    st.radius = cfg.initial_radius;
    st.candidates = layout_candidates(st.center, st.radius, cfg.num_candidates);
    st.best_rate = kNegInf;
    return st;
}

void step(SearchState& state, const Objective& objective) {
    if (state.terminated) throw ProtocolError("search step: already terminated");

    const size_t m = state.candidates.size();
    IterationRecord rec;
    rec.iteration = state.iteration;
    rec.center = state.center;
    rec.radius = state.radius;
    rec.stall_counter = state.stall_counter;
    rec.candidates.resize(m);

#pragma omp parallel for schedule(dynamic) num_threads(parallel::resolved_threads()) \
    if (!parallel::serial())
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        size_t i = static_cast<size_t>(ii);
        CandidateEval ev;
        ev.point = state.candidates[i];
        try {
            ev.rate = objective(plane_to_hz(ev.point, state.audio));
            ev.valid = std::isfinite(ev.rate);
        } catch (const std::exception&) {
            ev.rate = kNegInf;
            ev.valid = false;
        }
        rec.candidates[i] = ev;
    }

    // iteration best: highest rate, ties by distance to center then index
    long best = -1;
    for (size_t i = 0; i < m; ++i) {
        const auto& ev = rec.candidates[i];
        if (!ev.valid) continue;
        if (best < 0) {
            best = static_cast<long>(i);
            continue;
        }
        const auto& cur = rec.candidates[static_cast<size_t>(best)];
        if (ev.rate > cur.rate ||
            (ev.rate == cur.rate &&
             dist(ev.point, state.center) < dist(cur.point, state.center)))
            best = static_cast<long>(i);
    }
    if (best < 0)
        throw ProtocolError("search step: every candidate evaluation failed at iteration " +
                            std::to_string(state.iteration));

    const auto& winner = rec.candidates[static_cast<size_t>(best)];
    if (winner.rate > state.best_rate) {
        state.best_rate = winner.rate;
        state.best_point = winner.point;
        state.best_iteration = state.iteration;
        double move = dist(winner.point, state.center);
        double shrink = kPi / std::pow(2.0, state.iteration + 1);
        state.center = winner.point;
        state.radius = std::max(shrink, move);
        state.stall_counter = 0;
        state.candidates =
            layout_candidates(state.center, state.radius, state.config.num_candidates);
    } else {
        ++state.stall_counter;
        if (state.stall_counter >= state.config.stall_limit) state.terminated = true;
    }

    rec.best_rate_so_far = state.best_rate;
    state.trace.push_back(std::move(rec));

    ++state.iteration;
    if (!state.terminated && state.iteration > state.config.max_iterations) {
        state.terminated = true;
        state.truncated = true;
    }
}

SearchResult optimize(const Objective& objective, const SearchConfig& cfg,
                      const AudioConfig& audio) {
    SearchState st = initialize(cfg, audio);
    while (!st.terminated) step(st, objective);
    SearchResult out;
    out.best_point = plane_to_hz(st.best_point, audio);
    out.best_rate = st.best_rate;
    out.truncated = st.truncated;
    out.trace = std::move(st.trace);
    return out;
}

void write_trace_csv(const std::vector<IterationRecord>& trace, std::ostream& os) {
    os << "iteration,candidate,x,y,rate,center_x,center_y,radius,stall_counter,"
          "best_rate_so_far\n";
    os.precision(17);
    for (const auto& rec : trace) {
        for (size_t i = 0; i < rec.candidates.size(); ++i) {
            const auto& ev = rec.candidates[i];
            os << rec.iteration << ',' << i << ',' << ev.point.x << ',' << ev.point.y << ',';
            if (ev.valid)
                os << ev.rate;
            else
                os << "invalid";
            os << ',' << rec.center.x << ',' << rec.center.y << ',' << rec.radius << ','
               << rec.stall_counter << ',' << rec.best_rate_so_far << '\n';
        }
    }
}

}  // namespace afcc
