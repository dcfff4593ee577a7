#pragma once

// 1-sparse source recovery from boundary voltages: synthetic datasets with
// SNR-controlled white noise, uniqueness checks, OMP (linear and dictionary
// form), a matched-filter baseline and accuracy metrics.

#include "thermomesh/fields.hpp"
#include "thermomesh/mesh_model.hpp"
#include "thermomesh/network.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace thermomesh {

/// Clean boundary response to a single hot junction. Linear variants use A;
/// temperature-dependent ones rebuild A(T) per event (rank-one update, or a
/// direct assembly for the ideal switch).
class ForwardModel {
public:
    ForwardModel(const MeshSpec& mesh, const MaterialSet& materials);

    const MeshSpec& mesh() const { return mesh_; }
    const MaterialSet& materials() const { return materials_; }
    bool linear() const { return !materials_.interlayer.temperature_dependent(); }
    std::size_t pixel_count() const { return mesh_.pixel_count(); }
    std::size_t channel_count() const { return mesh_.channel_count(); }

    /// Boundary voltages [V] for `pixel` at delta_t [K] above the reference.
    Eigen::VectorXd response(std::size_t pixel, double delta_t) const;
    /// Sensitivity matrix at the ambient state (A itself for linear variants).
    const Eigen::MatrixXd& ambient() const { return ambient_; }

private:
    MeshSpec mesh_;
    MaterialSet materials_;
    Eigen::MatrixXd ambient_;
    std::shared_ptr<const EventResponse> events_;
};

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct Sample {
    std::size_t index = 0;
    std::size_t pixel = 0;
    double delta_t = 0.0;      // [K] relative to the cold junction
    TemperatureField field;
    BoundaryReading reading;
};

struct DatasetOptions {
    std::size_t n_samples = 1000;
    std::optional<double> snr_db;
    std::uint64_t seed = 0;
};

/// Per-sample noise std for a clean reading: P_s = mean square of V,
/// P_n = P_s / 10^(snr/10). Throws DegenerateError if V is identically zero.
double snr_noise_std(const Eigen::VectorXd& clean, double snr_db);

/// Pixel uniform over the mesh, hot temperature uniform over (t_amb, t_max],
/// white Gaussian noise at snr_db when given. Sample k draws from its own
/// generator seeded with seed ^ k, so the output does not depend on threading.
std::vector<Sample> generate_dataset(const ForwardModel& model, const OperatingRange& range,
                                     const DatasetOptions& options);

// ---------------------------------------------------------------------------
// Uniqueness
// ---------------------------------------------------------------------------

struct NspReport {
    bool passed = false;
    /// Largest max|h_i| / ||h||_1 over an orthonormal nullspace basis (< 1/2 needed).
    double basis_worst_ratio = 0.0;
    std::size_t nullity = 0;
    /// Per-pixel dual certificates y with ||e_i - A^T y||_inf < 1/2 found for all i.
    bool certified = false;
    double worst_certificate = 0.0;   // largest certified ||e_i - A^T y||_inf
    std::size_t worst_pixel = 0;
    /// A pixel's lower bound reached 1/2 (within 1e-5, the LP perturbation
    /// scale): NSP of order 1 fails.
    bool refuted = false;
};

struct UniquenessReport {
    bool passed = false;
    bool no_zero_columns = false;
    bool no_parallel_columns = false;
    std::optional<std::size_t> zero_column;
    std::size_t worst_pair_a = 0;
    std::size_t worst_pair_b = 0;
    double worst_coherence = 0.0;
    double min_norm_ratio = 0.0;   // min ||a_j|| / max ||a_k||
    /// mu / (1 + mu) bounds |h_i| / ||h||_1 over the null space of the
    /// column-normalized matrix, so < 1/2 certifies its order-1 NSP at any size.
    double normalized_nsp_bound = 0.0;
    /// Exact order-1 NSP of the matrix as given (check_nsp only).
    std::optional<NspReport> nsp;
};

/// spark(A) > 2: no zero column and no parallel pair, each judged at relative
/// tolerance tol. With `check_nsp` (practical up to 16x16, one LP per pixel)
/// also tests the order-1 null space property of A itself exactly through
/// primal and dual certificates, and reports the nullspace-basis ratio.
UniquenessReport verify_one_sparse_uniqueness(const Eigen::MatrixXd& a, double tol = 1e-8, bool check_nsp = false);

// ---------------------------------------------------------------------------
// Recovery
// ---------------------------------------------------------------------------

struct RecoveryResult {
    bool detected = false;
    std::size_t pixel = 0;
    double delta_t = 0.0;     // [K]
    double residual = 0.0;    // [V]
    std::string method;       // "omp" or "matched_filter"
};

/// 1-sparse OMP on a linear dictionary: best normalized correlation, then
/// least-squares amplitude. An all-zero V yields detected = false.
RecoveryResult recover_omp(const Eigen::MatrixXd& a, const Eigen::VectorXd& v);

/// Response atoms b_j(dT) over a temperature grid for temperature-dependent
/// variants. Recovery picks the (pixel, grid point) of least residual and
/// refines dT by golden-section search between the neighbouring grid points.
class AtomDictionary {
public:
    /// Default grid: 64 log-spaced points over (0, max_delta_t].
    AtomDictionary(std::shared_ptr<const ForwardModel> model, double max_delta_t, std::size_t points = 64);

    const std::vector<double>& grid() const { return grid_; }
    RecoveryResult recover(const Eigen::VectorXd& v) const;

private:
    std::shared_ptr<const ForwardModel> model_;
    std::vector<double> grid_;
    std::vector<Eigen::MatrixXd> atoms_;   // per grid point: channels x pixels
};

/// Matched filter on ambient atoms; identical selection rule to recover_omp.
RecoveryResult recover_matched_filter(const Eigen::MatrixXd& a_ambient, const Eigen::VectorXd& v);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Truth {
    std::size_t pixel = 0;
    double delta_t = 0.0;
};

struct EvalReport {
    double accuracy = 0.0;        // correct pixel
    double success_rate = 0.0;    // correct pixel and amplitude within amplitude_tolerance
    double mae = 0.0;             // [K] over all samples
    std::vector<double> d_norm;   // misclassified samples only
    std::size_t trials = 0;
    std::optional<double> snr_db;
    double amplitude_tolerance = 0.05;
};

/// Pixel distance normalized by the mesh diagonal.
double normalized_distance(const MeshSpec& mesh, std::size_t a, std::size_t b);

/// Undetected samples count as misclassified with d_norm 1 and amplitude 0.
EvalReport evaluate(const MeshSpec& mesh, const std::vector<RecoveryResult>& results, const std::vector<Truth>& truths,
                    std::optional<double> snr_db = std::nullopt, double amplitude_tolerance = 0.05);

}  // namespace thermomesh
