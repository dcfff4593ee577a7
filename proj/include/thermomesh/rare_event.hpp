#pragma once

// Poisson rare-event model for temporal sparsity: snapshot occupancy, the
// windowed-maximum overlap probability over K independent snapshots, the
// admissible areal event rate for a tolerance, fill-factor geometry and a
// Monte-Carlo simulator of the underlying arrival process.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace thermomesh {

struct EventStatistics {
    double areal_rate = 0.0;         // P_e [1/(m^2 s)]
    double event_duration = 0.0;     // tau_e [s]
    double window_duration = 0.0;    // tau_m [s]
    double sensing_area = 0.0;       // A_s [m^2]
    double pixel_area = 0.0;         // A_p [m^2]
    std::optional<double> event_footprint;       // A_e [m^2]
    std::optional<double> pixel_time_constant;   // tau_s [s]
    unsigned q_t_max = 1;
    double tolerance = 0.01;         // delta

    /// Mean number of simultaneous events in one event-length snapshot.
    double s() const { return areal_rate * sensing_area * event_duration; }
    /// Snapshots per measurement window.
    double k() const { return window_duration / event_duration; }

    /// Throws ValidationError unless every field is positive (areal_rate may
    /// be zero when only the admissible rate is wanted) and delta is in (0, 1).
    void validate() const;
};

/// Pr{N = n} for N ~ Poisson(s), evaluated in the log domain.
double snapshot_pmf(double s, unsigned n);

/// Pr{N > q} for N ~ Poisson(s), without cancellation when it is tiny.
double snapshot_tail(double s, unsigned q);

/// 1 - Pr{N <= q}^K: probability that some snapshot of the window holds more
/// than q events (independent-snapshot approximation).
double window_violation_probability(double s, double k, unsigned q_t_max);

struct WindowDecomposition {
    double p0 = 0.0;     // no snapshot occupied
    double p1 = 0.0;     // at most one event per snapshot, at least one occupied
    double p_ge2 = 0.0;  // some snapshot with two or more
};

/// Decomposition for q_t_max = 1; the three terms sum to 1.
WindowDecomposition window_decomposition(double s, double k);

/// Largest P_e with window_violation_probability(P_e A_s tau_e, K, q) <= delta.
/// Bisection on s over [1e-16, 1e2]; throws DomainError when delta is not
/// bracketed there. stats.areal_rate is ignored.
double max_admissible_rate(const EventStatistics& stats, double delta);

/// A_p / (A_s / (M N)).
double fill_factor(double pixel_area, double sensing_area, std::size_t rows, std::size_t cols);
/// Inverse of fill_factor: A_s = M N A_p / fill.
double sensing_area_from_fill(double pixel_area, double fill, std::size_t rows, std::size_t cols);
/// Probability that a uniformly placed sub-pixel event lands on an absorber.
inline double capture_probability(double fill) { return fill; }

// ---------------------------------------------------------------------------
// Regime checks
// ---------------------------------------------------------------------------

struct RegimeCondition {
    enum class Status { pass, warn, skipped };
    std::string name;
    Status status = Status::skipped;
    double value = 0.0;
    double threshold = 0.0;
    std::string message;
};

struct RegimeReport {
    std::vector<RegimeCondition> conditions;
    /// No condition warns; skipped ones do not count against it.
    bool all_pass() const;
};

const char* to_string(RegimeCondition::Status status);

/// tau_m / tau_e >= ratio_min, tau_e / tau_s >= ratio_min and
/// A_s / A_p >= M N / 2. Conditions on absent optional fields are skipped.
RegimeReport regime_check(const EventStatistics& stats, std::size_t rows, std::size_t cols, double ratio_min = 10.0);

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

struct MonteCarloOptions {
    enum class Mode {
        snapshot,     // occupancy read at K instants spaced tau_e apart
        continuous,   // running maximum of the active count over the window
    };
    Mode mode = Mode::snapshot;
    std::size_t windows = 100000;
    std::size_t batch = 1000;
    std::uint64_t seed = 0;
};

struct MonteCarloResult {
    std::size_t windows = 0;
    std::size_t violations = 0;
    double probability = 0.0;
    double standard_error = 0.0;
};

/// Homogeneous Poisson arrivals of duration-tau_e events over a window of K
/// event lengths, with mean s events per event length. A window violates when
/// more than q_t_max events are active together. In snapshot mode the K
/// readings see disjoint arrival intervals, so they are independent and the
/// expected rate equals window_violation_probability; continuous mode
/// measures the true windowed maximum. Batch b uses seed ^ b.
MonteCarloResult simulate_window_violation(double s, std::size_t k, unsigned q_t_max,
                                           const MonteCarloOptions& options = {});

}  // namespace thermomesh
