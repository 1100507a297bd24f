#pragma once

#include <array>
#include <iosfwd>
#include <string>

#include "afcc/common.hpp"

namespace afcc {

struct AudioConfig {
    double sample_rate_hz = 44100.0;
    double nyquist_hz = 22050.0;

    static AudioConfig from_sample_rate(double fs);
    void validate() const;
};

// A knot (x, y) of the single-point PCHP warp; also the coordinates being
// optimized over the bi-frequency plane. Physical Hz on both axes.
struct InterpolationPoint {
    double x = 0.0;
    double y = 0.0;
};

enum class WarpKind { linear, mel_htk, mel_slaney, mu_law, pchp };

const char* to_string(WarpKind kind);

/// Monotone map of [0, F_N] onto itself. Immutable after construction;
/// safe to share across threads.
class WarpFunction {
  public:
    WarpFunction();  // linear over the default 44.1 kHz config

    static WarpFunction linear(const AudioConfig& cfg);
    static WarpFunction mel_htk(const AudioConfig& cfg);
    static WarpFunction mel_slaney(const AudioConfig& cfg);
    static WarpFunction mu_law(double mu, const AudioConfig& cfg);
    // Monotone cubic Hermite through (0,0), knot, (F_N,F_N).
    // Knots within 1e-6*F_N of the boundary are rejected.
    static WarpFunction pchp(const InterpolationPoint& knot, const AudioConfig& cfg);

    // Warped frequency in Hz; f outside [0, F_N] is a domain error.
    double operator()(double f_hz) const;

    // Unit-square view of the same curve: [0,1] -> [0,1].
    double evaluate_unit(double u) const;

    // Physical frequency whose warp equals warped_hz (bisection).
    double inverse(double warped_hz) const;

    WarpKind kind() const { return kind_; }
    const AudioConfig& audio() const { return cfg_; }
    double mu() const { return mu_; }
    InterpolationPoint knot() const;

  private:
    WarpKind kind_ = WarpKind::linear;
    AudioConfig cfg_;
    double mu_ = 0.0;
    // PCHP data in unit coordinates: knots, values, slopes.
    std::array<double, 3> px_{}, py_{}, pm_{};
};

WarpFunction build_pchp(const InterpolationPoint& knot, const AudioConfig& cfg);

// Intersection of the mu-law curve with the anti-diagonal y = F_N - x.
InterpolationPoint mu_law_center(double mu, const AudioConfig& cfg);

// Two-column CSV (physical_hz, warped_hz) over a uniform grid.
void write_warp_csv(const WarpFunction& warp, int num_points, std::ostream& os);

}  // namespace afcc
