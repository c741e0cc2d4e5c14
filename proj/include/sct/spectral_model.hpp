#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sct {

/// E x M table of linear attenuation coefficients (mm^-1): entry (e, m) is
/// the attenuation of pure material m averaged over energy bin e.
struct MixingMatrix {
    Eigen::MatrixXd lac;
    std::vector<double> bin_edges_kev;  // E + 1 edges
    std::vector<std::string> materials; // M names

    Eigen::Index n_bins() const { return lac.rows(); }
    Eigen::Index n_materials() const { return lac.cols(); }

    /// Throws ShapeError / DomainError when E < M, entries are non-finite or
    /// the labels do not match the table.
    void validate() const;
};

/// The 5-bin x 4-material (water, iodine, gadolinium, calcium) matrix
/// measured for the photon-counting scanner this toolkit models.
MixingMatrix reference_mixing_matrix();

enum class MaterialRole { solvent, contrast, mineral };

struct MaterialSpec {
    std::string name;
    double density_mg_per_ml = 0.0; // mass of pure material per unit volume
    MaterialRole role = MaterialRole::contrast;
};

MaterialRole parse_material_role(const std::string& s);
const char* to_string(MaterialRole role);

/// E x Q attenuation samples against Q x M known volume fractions.
struct CalibrationSet {
    Eigen::MatrixXd lac_samples;
    Eigen::MatrixXd truth;
    std::vector<double> bin_edges_kev;
    std::vector<std::string> materials;
};

struct CalibrationResult {
    MixingMatrix mixing;
    double residual_norm = 0.0;   // || M x^T - mu ||_F
    double gram_condition = 0.0;  // condition number of x^T x
};

/// Least-squares fit M = mu x (x^T x)^{-1}, computed by column-pivoted QR
/// on the truth design. Throws CalibrationError naming the linearly
/// dependent materials when x^T x is singular or worse conditioned than
/// `max_gram_condition`.
CalibrationResult calibrate_mixing_matrix(const CalibrationSet& cal, double max_gram_condition = 1e12);

/// Per-bin LAC of a voxel with the given volume fractions.
Eigen::VectorXd apply_mixing(const MixingMatrix& mix, std::span<const double> fractions);

double concentration_to_volume_fraction(double conc_mg_per_ml, const MaterialSpec& mat);
double volume_fraction_to_concentration(double fraction, const MaterialSpec& mat);
/// Fraction left for the complement material (water) once solutes are placed.
double complement_fraction(std::span<const double> solute_fractions);

/// Ratio of extreme singular values; +inf when the smallest is zero.
double condition_number(const MixingMatrix& mix);
double condition_number(const Eigen::MatrixXd& m);

} // namespace sct
