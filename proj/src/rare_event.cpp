#include "thermomesh/rare_event.hpp"

#include "thermomesh/errors.hpp"
#include "thermomesh/parallel.hpp"
#include "thermomesh/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace thermomesh {

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << "event statistics: " << name << " must be positive, got " << v;
        throw ValidationError(os.str());
    }
}

void require_s(double s) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
        throw ValidationError("rare event: s must be finite and >= 0");
    }
}

}  // namespace

void EventStatistics::validate() const {
    if (!(areal_rate >= 0.0) || !std::isfinite(areal_rate)) {
        throw ValidationError("event statistics: areal_rate must be >= 0");
    }
    require_positive(event_duration, "event_duration");
    require_positive(window_duration, "window_duration");
    require_positive(sensing_area, "sensing_area");
    require_positive(pixel_area, "pixel_area");
    if (event_footprint) {
        require_positive(*event_footprint, "event_footprint");
    }
    if (pixel_time_constant) {
        require_positive(*pixel_time_constant, "pixel_time_constant");
    }
    if (!(tolerance > 0.0 && tolerance < 1.0)) {
        throw ValidationError("event statistics: tolerance must lie in (0, 1)");
    }
}

double snapshot_pmf(double s, unsigned n) {
    require_s(s);
    if (s == 0.0) {
        return n == 0 ? 1.0 : 0.0;
    }
    const double nn = static_cast<double>(n);
    return std::exp(-s + nn * std::log(s) - std::lgamma(nn + 1.0));
}

double snapshot_tail(double s, unsigned q) {
    require_s(s);
    if (s == 0.0) {
        return 0.0;
    }
    if (q == 0) {
        return -std::expm1(-s);
    }
    const double qq = static_cast<double>(q);
    if (s < qq + 1.0) {
        // Terms past q shrink at least geometrically by s / (q + 2) < 1.
        double term = snapshot_pmf(s, q + 1);
        double sum = 0.0;
        for (unsigned n = q + 1; term > 0.0; ++n) {
            sum += term;
            if (term < sum * 1e-18) {
                break;
            }
            term *= s / static_cast<double>(n + 1);
        }
        return std::min(sum, 1.0);
    }
    double cdf = 0.0;
    for (unsigned n = 0; n <= q; ++n) {
        cdf += snapshot_pmf(s, n);
    }
    return std::max(0.0, 1.0 - cdf);
}

double window_violation_probability(double s, double k, unsigned q_t_max) {
    require_s(s);
    if (!(k >= 1.0) || !std::isfinite(k)) {
        throw ValidationError("rare event: K must be finite and >= 1");
    }
    const double tail = snapshot_tail(s, q_t_max);
    if (tail >= 1.0) {
        return 1.0;
    }
    return -std::expm1(k * std::log1p(-tail));
}

WindowDecomposition window_decomposition(double s, double k) {
    require_s(s);
    if (!(k >= 1.0) || !std::isfinite(k)) {
        throw ValidationError("rare event: K must be finite and >= 1");
    }
    const double log_le1 = std::log1p(-snapshot_tail(s, 1));
    WindowDecomposition d;
    d.p0 = std::exp(-s * k);
    d.p_ge2 = -std::expm1(k * log_le1);
    d.p1 = std::exp(k * log_le1) - d.p0;
    return d;
}

double max_admissible_rate(const EventStatistics& stats, double delta) {
    EventStatistics probe = stats;
    probe.areal_rate = 0.0;
    probe.tolerance = delta;
    probe.validate();
    const double k = stats.k();
    if (k < 1.0) {
        throw DomainError("max_admissible_rate: window shorter than one event (K < 1)");
    }
    const unsigned q = stats.q_t_max;
    double lo = 1e-16;
    double hi = 1e2;
    if (window_violation_probability(lo, k, q) > delta || window_violation_probability(hi, k, q) < delta) {
        std::ostringstream os;
        os << "max_admissible_rate: tolerance " << delta << " not bracketed by s in [1e-16, 1e2]";
        throw DomainError(os.str());
    }
    // Bisection in log s; the violation probability is monotone in s.
    for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-15; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (window_violation_probability(mid, k, q) < delta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double s = 0.5 * (lo + hi);
    return s / (stats.sensing_area * stats.event_duration);
}

double fill_factor(double pixel_area, double sensing_area, std::size_t rows, std::size_t cols) {
    require_positive(pixel_area, "pixel_area");
    require_positive(sensing_area, "sensing_area");
    if (rows == 0 || cols == 0) {
        throw ValidationError("fill_factor: mesh dimensions must be positive");
    }
    return pixel_area / (sensing_area / static_cast<double>(rows * cols));
}

double sensing_area_from_fill(double pixel_area, double fill, std::size_t rows, std::size_t cols) {
    require_positive(pixel_area, "pixel_area");
    require_positive(fill, "fill");
    if (rows == 0 || cols == 0) {
        throw ValidationError("sensing_area_from_fill: mesh dimensions must be positive");
    }
    return static_cast<double>(rows * cols) * pixel_area / fill;
}

// ---------------------------------------------------------------------------
// Regime checks
// ---------------------------------------------------------------------------

bool RegimeReport::all_pass() const {
    return std::none_of(conditions.begin(), conditions.end(),
                        [](const RegimeCondition& c) { return c.status == RegimeCondition::Status::warn; });
}

const char* to_string(RegimeCondition::Status status) {
    switch (status) {
        case RegimeCondition::Status::pass:
            return "pass";
        case RegimeCondition::Status::warn:
            return "warn";
        case RegimeCondition::Status::skipped:
            return "skipped";
    }
    return "unknown";
}

RegimeReport regime_check(const EventStatistics& stats, std::size_t rows, std::size_t cols, double ratio_min) {
    RegimeReport rep;
    auto add = [&](std::string name, std::optional<double> value, double threshold, const char* relation) {
        RegimeCondition c;
        c.name = std::move(name);
        c.threshold = threshold;
        std::ostringstream os;
        if (!value) {
            c.status = RegimeCondition::Status::skipped;
            os << c.name << ": skipped, input not given";
        } else {
            c.value = *value;
            c.status = *value >= threshold ? RegimeCondition::Status::pass : RegimeCondition::Status::warn;
            os << c.name << " = " << *value << (c.status == RegimeCondition::Status::pass ? " >= " : " < ")
               << threshold << " (" << relation << ")";
        }
        c.message = os.str();
        rep.conditions.push_back(std::move(c));
    };
    auto ratio = [](double a, double b) -> std::optional<double> {
        if (a > 0.0 && b > 0.0) {
            return a / b;
        }
        return std::nullopt;
    };
    add("tau_m/tau_e", ratio(stats.window_duration, stats.event_duration), ratio_min, "tau_m >> tau_e");
    add("tau_e/tau_s",
        stats.pixel_time_constant ? ratio(stats.event_duration, *stats.pixel_time_constant) : std::nullopt, ratio_min,
        "tau_e >> tau_s");
    add("A_s/A_p", ratio(stats.sensing_area, stats.pixel_area), 0.5 * static_cast<double>(rows * cols),
        "A_s >> A_p");
    return rep;
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

namespace {

// Time in units of tau_e; arrivals over [-1, k) so that events already
// running at t = 0 are included.
bool window_violates(SplitMix64& rng, double s, std::size_t k, unsigned q, MonteCarloOptions::Mode mode) {
    const double span = static_cast<double>(k);
    auto gap = [&] { return -std::log(1.0 - rng.uniform()) / s; };
    if (mode == MonteCarloOptions::Mode::snapshot) {
        // Reading j at t = j sees arrivals in (j - 1, j].
        std::vector<unsigned> count(k, 0);
        for (double t = -1.0 + gap(); t < span - 1.0; t += gap()) {
            const auto j = static_cast<std::size_t>(std::ceil(t));
            if (j < k && ++count[j] > q) {
                return true;
            }
        }
        return false;
    }
    // The active count peaks at arrival instants. An arrival at t < 0 sees a
    // subset of the events still running at t = 0, so it never overcounts.
    std::deque<double> active;
    for (double t = -1.0 + gap(); t < span; t += gap()) {
        while (!active.empty() && active.front() <= t - 1.0) {
            active.pop_front();
        }
        active.push_back(t);
        if (active.size() > q) {
            return true;
        }
    }
    return false;
}

}  // namespace

MonteCarloResult simulate_window_violation(double s, std::size_t k, unsigned q_t_max, const MonteCarloOptions& options) {
    if (!(s > 0.0) || !std::isfinite(s)) {
        throw ValidationError("simulate_window_violation: s must be positive");
    }
    if (k == 0 || options.windows == 0 || options.batch == 0) {
        throw ValidationError("simulate_window_violation: K, windows and batch must be positive");
    }
    const std::size_t batches = (options.windows + options.batch - 1) / options.batch;
    std::vector<std::size_t> hits(batches, 0);
    parallel_for(batches, [&](std::size_t b) {
        SplitMix64 rng(options.seed ^ static_cast<std::uint64_t>(b));
        const std::size_t n = std::min(options.batch, options.windows - b * options.batch);
        std::size_t h = 0;
        for (std::size_t w = 0; w < n; ++w) {
            h += window_violates(rng, s, k, q_t_max, options.mode) ? 1 : 0;
        }
        hits[b] = h;
    });
    MonteCarloResult r;
    r.windows = options.windows;
    for (std::size_t h : hits) {
        r.violations += h;
    }
    const double n = static_cast<double>(r.windows);
    r.probability = static_cast<double>(r.violations) / n;
    r.standard_error = std::sqrt(std::max(r.probability * (1.0 - r.probability), 1.0 / n) / n);
    return r;
}

}  // namespace thermomesh
