#include "afcc/scales.hpp"

#include <cmath>
#include <ostream>

namespace afcc {

namespace {

constexpr double kKnotMarginFrac = 1e-6;

double mel_htk_hz(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }

double mel_slaney_hz(double f) {
    // linear below 1 kHz (slope 3/200), logarithmic above
    if (f < 1000.0) return f * 3.0 / 200.0;
    return 15.0 + 27.0 * std::log(f / 1000.0) / std::log(6.4);
}

// Hermite evaluation on [xa, xb] with values (ya, yb) and slopes (ma, mb).
double hermite(double xa, double xb, double ya, double yb, double ma, double mb, double u) {
    double h = xb - xa;
    double t = (u - xa) / h;
    double omt = 1.0 - t;
    double h00 = (1.0 + 2.0 * t) * omt * omt;
    double h10 = t * omt * omt;
    double h01 = t * t * (3.0 - 2.0 * t);
    double h11 = t * t * (t - 1.0);
    return ya * h00 + h * ma * h10 + yb * h01 + h * mb * h11;
}

}  // namespace

AudioConfig AudioConfig::from_sample_rate(double fs) {
    AudioConfig cfg;
    cfg.sample_rate_hz = fs;
    cfg.nyquist_hz = fs / 2.0;
    cfg.validate();
    return cfg;
}

void AudioConfig::validate() const {
    if (!(sample_rate_hz > 0.0) || !(nyquist_hz > 0.0))
        throw DataError("audio config: sample rate and Nyquist must be positive");
    if (nyquist_hz != sample_rate_hz / 2.0)
        throw DataError("audio config: nyquist_hz must equal sample_rate_hz / 2");
}

const char* to_string(WarpKind kind) {
    switch (kind) {
        case WarpKind::linear: return "linear";
        case WarpKind::mel_htk: return "mel_htk";
        case WarpKind::mel_slaney: return "mel_slaney";
        case WarpKind::mu_law: return "mu_law";
        case WarpKind::pchp: return "pchp";
    }
    return "?";
}

WarpFunction::WarpFunction() : kind_(WarpKind::linear) {}

WarpFunction WarpFunction::linear(const AudioConfig& cfg) {
    cfg.validate();
    WarpFunction w;
    w.kind_ = WarpKind::linear;
    w.cfg_ = cfg;
    return w;
}

WarpFunction WarpFunction::mel_htk(const AudioConfig& cfg) {
    cfg.validate();
    WarpFunction w;
    w.kind_ = WarpKind::mel_htk;
    w.cfg_ = cfg;
    return w;
}

WarpFunction WarpFunction::mel_slaney(const AudioConfig& cfg) {
    cfg.validate();
    WarpFunction w;
    w.kind_ = WarpKind::mel_slaney;
    w.cfg_ = cfg;
    return w;
}

WarpFunction WarpFunction::mu_law(double mu, const AudioConfig& cfg) {
    cfg.validate();
    if (!(mu > 0.0)) throw DataError("mu-law warp: mu must be positive");
    WarpFunction w;
    w.kind_ = WarpKind::mu_law;
    w.cfg_ = cfg;
    w.mu_ = mu;
    return w;
}

WarpFunction WarpFunction::pchp(const InterpolationPoint& knot, const AudioConfig& cfg) {
    cfg.validate();
    double fn = cfg.nyquist_hz;
    double margin = kKnotMarginFrac * fn;
    if (!(knot.x > margin) || !(knot.x < fn - margin) || !(knot.y > margin) ||
        !(knot.y < fn - margin)) {
        throw DataError("pchp warp: knot (" + std::to_string(knot.x) + ", " +
                        std::to_string(knot.y) + ") too close to the boundary of (0, " +
                        std::to_string(fn) + ")^2");
    }
    WarpFunction w;
    w.kind_ = WarpKind::pchp;
    w.cfg_ = cfg;
    w.px_ = {0.0, knot.x / fn, 1.0};
    w.py_ = {0.0, knot.y / fn, 1.0};

    // Fritsch-Carlson slopes for the 3-knot monotone data: weighted harmonic
    // mean at the interior knot, adjacent secants at the ends.
    double h0 = w.px_[1] - w.px_[0];
    double h1 = w.px_[2] - w.px_[1];
    double d0 = (w.py_[1] - w.py_[0]) / h0;
    double d1 = (w.py_[2] - w.py_[1]) / h1;
    double w1 = 2.0 * h1 + h0;
    double w2 = h1 + 2.0 * h0;
    double interior = (d0 > 0.0 && d1 > 0.0) ? (w1 + w2) / (w1 / d0 + w2 / d1) : 0.0;
    // endpoint slopes: the adjacent secants (already inside the monotone region)
    w.pm_ = {d0, interior, d1};
    return w;
}

WarpFunction build_pchp(const InterpolationPoint& knot, const AudioConfig& cfg) {
    return WarpFunction::pchp(knot, cfg);
}

InterpolationPoint WarpFunction::knot() const {
    if (kind_ != WarpKind::pchp) throw DataError("warp: only pchp warps carry a knot");
    return {px_[1] * cfg_.nyquist_hz, py_[1] * cfg_.nyquist_hz};
}

double WarpFunction::evaluate_unit(double u) const {
    if (!(u >= 0.0) || !(u <= 1.0))
        throw std::domain_error("warp: frequency outside [0, F_N]");
    switch (kind_) {
        case WarpKind::linear:
            return u;
        case WarpKind::mel_htk:
            return mel_htk_hz(u * cfg_.nyquist_hz) / mel_htk_hz(cfg_.nyquist_hz);
        case WarpKind::mel_slaney:
            return mel_slaney_hz(u * cfg_.nyquist_hz) / mel_slaney_hz(cfg_.nyquist_hz);
        case WarpKind::mu_law:
            return std::log1p(mu_ * u) / std::log1p(mu_);
        case WarpKind::pchp: {
            if (u <= px_[1])
                return hermite(px_[0], px_[1], py_[0], py_[1], pm_[0], pm_[1], u);
            return hermite(px_[1], px_[2], py_[1], py_[2], pm_[1], pm_[2], u);
        }
    }
    return u;
}

double WarpFunction::operator()(double f_hz) const {
    if (!(f_hz >= 0.0) || !(f_hz <= cfg_.nyquist_hz))
        throw std::domain_error("warp: frequency " + std::to_string(f_hz) +
                                " outside [0, " + std::to_string(cfg_.nyquist_hz) + "]");
    return evaluate_unit(f_hz / cfg_.nyquist_hz) * cfg_.nyquist_hz;
}

double WarpFunction::inverse(double warped_hz) const {
    if (!(warped_hz >= 0.0) || !(warped_hz <= cfg_.nyquist_hz))
        throw std::domain_error("warp inverse: value outside [0, F_N]");
    double target = warped_hz / cfg_.nyquist_hz;
    if (target <= 0.0) return 0.0;
    if (target >= 1.0) return cfg_.nyquist_hz;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 64; ++i) {
        double mid = 0.5 * (lo + hi);
        if (evaluate_unit(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi) * cfg_.nyquist_hz;
}

InterpolationPoint mu_law_center(double mu, const AudioConfig& cfg) {
    cfg.validate();
    if (!(mu > 0.0)) throw DataError("mu_law_center: mu must be positive");
    // root of log1p(mu*u)/log1p(mu) - (1 - u), increasing in u
    auto g = [mu](double u) { return std::log1p(mu * u) / std::log1p(mu) - (1.0 - u); };
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 100; ++i) {
        double mid = 0.5 * (lo + hi);
        if (g(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    double u = 0.5 * (lo + hi);
    return {u * cfg.nyquist_hz, (1.0 - u) * cfg.nyquist_hz};
}

void write_warp_csv(const WarpFunction& warp, int num_points, std::ostream& os) {
    if (num_points < 2) throw DataError("warp csv: need at least 2 grid points");
    os << "physical_hz,warped_hz\n";
    double fn = warp.audio().nyquist_hz;
    os.precision(17);
    for (int i = 0; i < num_points; ++i) {
        double f = fn * static_cast<double>(i) / (num_points - 1);
        os << f << ',' << warp(f) << '\n';
    }
}

}  // namespace afcc
