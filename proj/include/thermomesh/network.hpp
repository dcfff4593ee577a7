#pragma once

// Nodal analysis of the two-plane thermocouple network.
//
// Every wire segment between adjacent junctions is a Seebeck EMF in series
// with its resistance; it is stamped in Norton form, so KCL over the junction
// nodes reads G U = S T. Boundary channels are ideal voltmeters at the cold
// end of a lead segment: no current flows in the leads, and each channel reads
// the potential of its edge node plus the lead EMF. The network floats, so the
// gauge is fixed by grounding the edge node of a datum channel and reporting
// all voltages relative to that channel:
//
//     V = I_U G^-1 S T + I_S T - V_datum  =  A T.

#include "thermomesh/fields.hpp"
#include "thermomesh/mesh_model.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace thermomesh {

// ---------------------------------------------------------------------------
// Channel and node conventions
// ---------------------------------------------------------------------------

/// Perimeter sides in channel order.
enum class Side { top, right, bottom, left };

/// A channel identified by its side and the wire it terminates (column index
/// for top/bottom, row index for right/left).
struct ChannelLine {
    Side side;
    std::size_t line;

    friend bool operator==(const ChannelLine&, const ChannelLine&) = default;
};

/// Channels run around the perimeter: top leads for columns 0..N-1, right
/// leads for rows 0..M-1, bottom leads for columns N-1..0, left leads for
/// rows M-1..0. Row 0 is the top edge.
std::size_t channel_index(const MeshSpec& mesh, ChannelLine line);
ChannelLine channel_line(const MeshSpec& mesh, std::size_t channel);

/// Channel seen at `channel` after reflecting the mesh across its vertical
/// centerline (column j -> N-1-j).
std::size_t mirror_channel(const MeshSpec& mesh, std::size_t channel);

/// Electrical node at a junction. Layer 1 hosts the leg-a row wires, layer 2
/// the leg-b column wires. With no interlayer both layers share one node.
struct NodeIndex {
    int layer = 1;
    std::size_t row = 0;
    std::size_t col = 0;
};

// ---------------------------------------------------------------------------
// Assembled network
// ---------------------------------------------------------------------------

class NetworkSystem {
public:
    using SparseMatrix = Eigen::SparseMatrix<double>;

    const MeshSpec& mesh() const { return mesh_; }
    const std::string& interlayer_tag() const { return tag_; }
    bool merged() const { return merged_; }
    std::size_t node_count() const { return static_cast<std::size_t>(conductance_.rows()); }
    std::size_t node(const NodeIndex& index) const;

    /// Ungauged conductance matrix [S]; symmetric Laplacian of the floating network.
    const SparseMatrix& conductance() const { return conductance_; }
    /// Norton source matrix [A/K], node x pixel.
    const SparseMatrix& seebeck() const { return seebeck_; }
    /// Lead EMF coefficients [V/K], channel x pixel (the I_S operator).
    const SparseMatrix& boundary_seebeck() const { return boundary_seebeck_; }
    /// Edge node read by each channel (the I_U selection).
    const std::vector<std::size_t>& channel_nodes() const { return channel_nodes_; }
    /// Resistance of each lead segment [ohm]. Leads carry no current under
    /// ideal-voltmeter readout, so these never enter G.
    const std::vector<double>& lead_resistances() const { return lead_resistances_; }
    /// Conductance from each node to the readout channels; zero for ideal voltmeters.
    std::vector<double> boundary_coupling() const;

    std::size_t datum_channel() const { return datum_; }
    std::size_t gauge_node() const { return channel_nodes_[datum_]; }

    /// Relative temperature state the system was assembled at (temperature-dependent interlayers only).
    const std::optional<std::vector<double>>& state() const { return state_; }

    /// Solves the gauged system G U = rhs with U[gauge_node] = 0. `rhs` has
    /// node_count() entries; the gauge-node entry is dropped.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

    /// Potentials for G U = S T, with the sources stamped in the solver's own
    /// coordinates rather than formed as S T first.
    Eigen::VectorXd solve_seebeck(const Eigen::VectorXd& temperatures) const;

    /// Row e_n^T G^-1 S: potential of node n per kelvin at each pixel.
    Eigen::RowVectorXd node_sensitivity(std::size_t node) const;

    /// Boundary voltages relative to the datum channel for node potentials U and temperatures T.
    Eigen::VectorXd read_channels(const Eigen::VectorXd& potentials, const Eigen::VectorXd& temperatures) const;

    /// Ratio of the largest to smallest pivot of the gauged factorization.
    double pivot_ratio() const;

private:
    friend NetworkSystem assemble(const MeshSpec&, const MaterialSet&, const TemperatureField*, std::size_t);
    struct Factorization;

    MeshSpec mesh_;
    std::string tag_;
    bool merged_ = false;
    SparseMatrix conductance_;
    SparseMatrix seebeck_;
    SparseMatrix boundary_seebeck_;
    std::vector<std::size_t> channel_nodes_;
    std::vector<double> lead_resistances_;
    std::size_t datum_ = 0;
    std::optional<std::vector<double>> state_;
    std::shared_ptr<const Factorization> factor_;
};

/// Builds and factors the network. `state` (relative temperatures, MN
/// entries) is required for temperature-dependent interlayers and ignored
/// otherwise. Throws ValidationError on bad inputs, DomainError when the
/// interlayer law is evaluated outside its domain.
NetworkSystem assemble(const MeshSpec& mesh, const MaterialSet& materials, const TemperatureField* state = nullptr,
                       std::size_t datum_channel = 0);

inline NetworkSystem assemble(const MeshSpec& mesh, const MaterialSet& materials, const TemperatureField& state,
                              std::size_t datum_channel = 0) {
    return assemble(mesh, materials, &state, datum_channel);
}

// ---------------------------------------------------------------------------
// Sensitivity matrix
// ---------------------------------------------------------------------------

struct SensitivityMatrix {
    Eigen::MatrixXd entries;   // (2M+2N) x MN [V/K]
    std::size_t rows = 0;      // mesh rows M
    std::size_t cols = 0;      // mesh cols N
    std::string interlayer_tag;
    std::optional<std::vector<double>> state;
    std::size_t datum_channel = 0;

    std::size_t channel_count() const { return static_cast<std::size_t>(entries.rows()); }
    std::size_t pixel_count() const { return static_cast<std::size_t>(entries.cols()); }
};

/// Adjoint: one solve per distinct channel node. Forward: one solve per pixel.
enum class SolveStrategy { adjoint, forward };

SensitivityMatrix sensitivity_matrix(const NetworkSystem& system, SolveStrategy strategy = SolveStrategy::adjoint);

/// One column of A (single forward solve), for meshes too large to form A.
Eigen::VectorXd sensitivity_column(const NetworkSystem& system, std::size_t pixel);

/// V = A T by a single solve. For temperature-dependent systems T must equal
/// the assembly state exactly; otherwise StalenessError.
BoundaryReading boundary_voltages(const NetworkSystem& system, const TemperatureField& temperatures);

// ---------------------------------------------------------------------------
// Single-event responses
// ---------------------------------------------------------------------------

/// Boundary responses to one hot junction over a uniform ambient background.
///
/// Heating one junction changes only its interlayer conductance, a rank-one
/// update of the ambient G, so each pixel's response at any temperature
/// follows from two precomputed solves (Sherman-Morrison). Equivalent to
/// assembling at the event state; use `assemble` for general states.
class EventResponse {
public:
    EventResponse(const MeshSpec& mesh, const MaterialSet& materials);

    const MeshSpec& mesh() const { return mesh_; }
    std::size_t pixel_count() const { return mesh_.pixel_count(); }
    std::size_t channel_count() const { return mesh_.channel_count(); }

    /// Boundary voltages [V] with `pixel` at delta_t above the reference temperature.
    Eigen::VectorXd response(std::size_t pixel, double delta_t) const;
    /// response / delta_t: column `pixel` of A at that event state [V/K].
    Eigen::VectorXd column(std::size_t pixel, double delta_t) const;
    /// Sensitivity matrix at the all-ambient state.
    const Eigen::MatrixXd& ambient() const { return ambient_; }

private:
    double conductance_change(double delta_t) const;

    MeshSpec mesh_;
    MaterialSet materials_;
    double ambient_conductance_ = 0.0;
    Eigen::MatrixXd ambient_;   // channel projection of G0^-1 S e_j plus lead EMF
    Eigen::MatrixXd update_;    // channel projection of G0^-1 d_j
    Eigen::VectorXd drive_gap_; // d_j^T G0^-1 S e_j
    Eigen::VectorXd self_gap_;  // d_j^T G0^-1 d_j
};

}  // namespace thermomesh
