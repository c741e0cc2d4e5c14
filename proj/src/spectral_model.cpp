#include "sct/spectral_model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "sct/error.hpp"

namespace sct {

void MixingMatrix::validate() const {
    if (lac.rows() < 1 || lac.cols() < 1) throw ShapeError("mixing matrix: empty table");
    if (lac.rows() < lac.cols()) {
        throw ShapeError(fmt::format("mixing matrix: {} bins cannot resolve {} materials", lac.rows(), lac.cols()));
    }
    if (!lac.allFinite()) throw DomainError("mixing matrix: non-finite entry");
    if (bin_edges_kev.size() != static_cast<std::size_t>(lac.rows()) + 1) {
        throw ShapeError(fmt::format("mixing matrix: expected {} bin edges, got {}", lac.rows() + 1,
                                     bin_edges_kev.size()));
    }
    for (std::size_t i = 0; i + 1 < bin_edges_kev.size(); ++i) {
        if (!(bin_edges_kev[i + 1] > bin_edges_kev[i])) {
            throw DomainError("mixing matrix: bin edges must be strictly increasing");
        }
    }
    if (materials.size() != static_cast<std::size_t>(lac.cols())) {
        throw ShapeError(fmt::format("mixing matrix: expected {} material names, got {}", lac.cols(),
                                     materials.size()));
    }
}

MixingMatrix reference_mixing_matrix() {
    MixingMatrix m;
    m.lac.resize(5, 4);
    // clang-format off
    m.lac << 0.0301, 8.0544,  7.5169, 0.7722,
             0.0345, 4.9786, 11.1868, 1.0905,
             0.0253, 5.9366,  8.1421, 0.7815,
             0.0196, 7.2125,  4.8177, 0.4259,
             0.0177, 3.7628,  8.4091, 0.2395;
    // clang-format on
    m.bin_edges_kev = {7.0, 19.0, 29.0, 38.8, 51.1, 82.6};
    m.materials = {"water", "iodine", "gadolinium", "calcium"};
    return m;
}

MaterialRole parse_material_role(const std::string& s) {
    if (s == "solvent") return MaterialRole::solvent;
    if (s == "contrast") return MaterialRole::contrast;
    if (s == "mineral") return MaterialRole::mineral;
    throw ConfigError("unknown material role '" + s + "' (expected solvent, contrast or mineral)");
}

const char* to_string(MaterialRole role) {
    switch (role) {
    case MaterialRole::solvent: return "solvent";
    case MaterialRole::contrast: return "contrast";
    case MaterialRole::mineral: return "mineral";
    }
    return "?";
}

CalibrationResult calibrate_mixing_matrix(const CalibrationSet& cal, double max_gram_condition) {
    const auto& x = cal.truth;
    const auto& mu = cal.lac_samples;
    const Eigen::Index q = x.rows();
    const Eigen::Index m = x.cols();
    if (m < 1 || mu.rows() < 1) throw ShapeError("calibration: empty design");
    if (mu.cols() != q) {
        throw ShapeError(fmt::format("calibration: {} LAC samples but {} truth rows", mu.cols(), q));
    }
    if (q < m) throw ShapeError(fmt::format("calibration: need at least {} samples, got {}", m, q));
    if (cal.materials.size() != static_cast<std::size_t>(m)) {
        throw ShapeError("calibration: material names do not match truth columns");
    }
    for (Eigen::Index i = 0; i < q; ++i) {
        if ((x.row(i).array() < 0.0).any() || x.row(i).sum() > 1.0 + 1e-12) {
            throw DomainError(fmt::format("calibration: truth row {} is not a valid set of volume fractions", i));
        }
    }
    if (!mu.allFinite()) throw DomainError("calibration: non-finite LAC sample");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-12);
    if (qr.rank() < m) {
        std::string dependent;
        for (Eigen::Index k = qr.rank(); k < m; ++k) {
            if (!dependent.empty()) dependent += ", ";
            dependent += cal.materials[static_cast<std::size_t>(qr.colsPermutation().indices()(k))];
        }
        throw CalibrationError("calibration: truth design is rank deficient; dependent materials: " + dependent);
    }

    const double cond = condition_number(x);
    const double gram_cond = cond * cond;
    if (!(gram_cond <= max_gram_condition)) {
        throw CalibrationError(fmt::format("calibration: x^T x condition number {:.3e} exceeds bound {:.3e}",
                                           gram_cond, max_gram_condition));
    }

    CalibrationResult out;
    out.mixing.lac = qr.solve(mu.transpose()).transpose();
    out.mixing.bin_edges_kev = cal.bin_edges_kev;
    out.mixing.materials = cal.materials;
    out.residual_norm = (out.mixing.lac * x.transpose() - mu).norm();
    out.gram_condition = gram_cond;
    return out;
}

Eigen::VectorXd apply_mixing(const MixingMatrix& mix, std::span<const double> fractions) {
    if (fractions.size() != static_cast<std::size_t>(mix.n_materials())) {
        throw ShapeError(fmt::format("apply_mixing: expected {} fractions, got {}", mix.n_materials(),
                                     fractions.size()));
    }
    const Eigen::Map<const Eigen::VectorXd> f(fractions.data(), static_cast<Eigen::Index>(fractions.size()));
    return mix.lac * f;
}

double concentration_to_volume_fraction(double conc_mg_per_ml, const MaterialSpec& mat) {
    if (!(mat.density_mg_per_ml > 0.0)) {
        throw DomainError("material '" + mat.name + "': density must be positive");
    }
    if (!(conc_mg_per_ml >= 0.0) || conc_mg_per_ml > mat.density_mg_per_ml) {
        throw DomainError(fmt::format("material '{}': concentration {} mg/mL outside [0, {}]", mat.name,
                                      conc_mg_per_ml, mat.density_mg_per_ml));
    }
    return conc_mg_per_ml / mat.density_mg_per_ml;
}

double volume_fraction_to_concentration(double fraction, const MaterialSpec& mat) {
    if (!(mat.density_mg_per_ml > 0.0)) {
        throw DomainError("material '" + mat.name + "': density must be positive");
    }
    if (!(fraction >= 0.0) || fraction > 1.0) {
        throw DomainError(fmt::format("material '{}': volume fraction {} outside [0, 1]", mat.name, fraction));
    }
    return fraction * mat.density_mg_per_ml;
}

double complement_fraction(std::span<const double> solute_fractions) {
    double total = 0.0;
    for (double f : solute_fractions) total += f;
    if (total > 1.0) throw DomainError("solute volume fractions exceed 1");
    return 1.0 - total;
}

double condition_number(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return std::numeric_limits<double>::infinity();
    if (!m.allFinite()) throw DomainError("condition number: non-finite matrix");
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

double condition_number(const MixingMatrix& mix) { return condition_number(mix.lac); }

} // namespace sct
