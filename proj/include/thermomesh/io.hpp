#pragma once

// CSV artifacts. Every file starts with "# config_hash=<hex>" and may carry
// further "# key=value" comment lines before the header row.

#include "thermomesh/network.hpp"
#include "thermomesh/rare_event.hpp"
#include "thermomesh/recovery.hpp"
#include "thermomesh/sensitivity.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace thermomesh {

/// "# key=value" lines found before the header; the first occurrence of a key wins.
using CsvMeta = std::map<std::string, std::string>;

/// Shortest round-trip decimal form of v in scientific notation (17 significant digits).
std::string format_double(double v);

/// Dense matrix: row = channel, column = pixel, header pixel_0..pixel_{MN-1}.
void write_matrix_csv(const std::string& path, const SensitivityMatrix& a, const std::string& config_hash);
/// Coordinate triplets row,col,value with a "# rows=<>,cols=<>" line.
void write_matrix_triplets(const std::string& path, const SensitivityMatrix& a, const std::string& config_hash);

struct MatrixFile {
    CsvMeta meta;
    Eigen::MatrixXd entries;
};
MatrixFile read_matrix_csv(const std::string& path);

void write_sensitivity_map(const std::string& path, const SensitivityMap& map, const std::string& config_hash);
void write_sweeps(const std::string& path, const std::vector<SweepResult>& sweeps, const std::string& config_hash);
void write_net(const std::string& path, const NetReport& net, const std::string& config_hash);

// ---------------------------------------------------------------------------
// Datasets and results
// ---------------------------------------------------------------------------

struct DatasetRow {
    std::size_t sample = 0;
    std::size_t pixel = 0;
    double delta_t = 0.0;
    std::optional<double> snr_db;
    std::vector<double> voltages;
};

struct DatasetFile {
    CsvMeta meta;
    std::size_t rows = 0;   // mesh rows
    std::size_t cols = 0;   // mesh cols
    std::vector<DatasetRow> samples;
};

/// Header sample,pixel_index,delta_t_k,snr_db,v_0..; snr_db "inf" when noise free.
void write_dataset(const std::string& path, const MeshSpec& mesh, const std::vector<Sample>& samples,
                   std::optional<double> snr_db, const std::string& config_hash);
DatasetFile read_dataset(const std::string& path);

struct ResultRow {
    std::size_t sample = 0;
    std::size_t true_pixel = 0;
    std::optional<std::size_t> pred_pixel;   // nullopt: nothing detected
    double true_t = 0.0;
    double pred_t = 0.0;
    double d_norm = 0.0;
};

struct ResultsFile {
    CsvMeta meta;
    std::vector<ResultRow> rows;
};

/// Header sample,true_pixel,pred_pixel,true_t,pred_t,d_norm; pred_pixel -1
/// when nothing was detected.
void write_results(const std::string& path, const std::vector<ResultRow>& rows, const CsvMeta& meta,
                   const std::string& config_hash);
ResultsFile read_results(const std::string& path);

/// Header k,s,p0,p1,p_ge2.
void write_rare_event_curves(const std::string& path, const std::vector<double>& k_values,
                             const std::vector<double>& s_values, const std::string& config_hash);

/// Reads the leading comment block only.
CsvMeta read_meta(const std::string& path);

/// Throws ValidationError unless every meta carries the same config_hash.
std::string common_hash(const std::vector<CsvMeta>& metas, const std::vector<std::string>& names);

}  // namespace thermomesh
