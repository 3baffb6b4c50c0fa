#pragma once

#include <Eigen/Dense>

#include "cpi/model.hpp"

namespace cpi {

struct KrigingPrediction {
    double value = 0.0;
    VectorXd gradient;
    double sd = 0.0;          // predictive standard deviation sqrt(mse)
    VectorXd sd_gradient;
};

inline constexpr double kSdFloor = 1e-8;

/// Ordinary kriging (constant trend, Gaussian correlation) interpolator of
/// theta -> c_hat(theta). Correlation lengths are chosen by maximizing the
/// concentrated log-likelihood over a log grid refined by golden-section
/// search per coordinate; trend and process variance are the closed-form GLS
/// estimates. The design is normalized to the unit box internally.
class KrigingSurrogate {
public:
    /// Requires L >= d + 1 pairwise-distinct rows (enforce the dedupe radius
    /// upstream). Throws std::invalid_argument on duplicates, and
    /// std::runtime_error("design degenerate") if no nugget level at or below
    /// the cap yields a usable factorization.
    static KrigingSurrogate fit(const MatrixXd& design, const VectorXd& responses);

    KrigingPrediction predict(const VectorXd& theta) const;

    double trend() const { return trend_; }
    double process_var() const { return process_var_; }
    double nugget() const { return nugget_; }
    const VectorXd& corr_length() const { return corr_length_; }  // normalized coordinates
    int design_size() const { return static_cast<int>(design_.rows()); }

    /// Rows actually interpolated. Input points closer than the merge radius
    /// (in normalized coordinates) are indistinguishable to every admissible
    /// correlation length and collapse onto the earlier row.
    const MatrixXd& design_points() const { return design_original_; }
    const VectorXd& responses() const { return responses_; }

private:
    MatrixXd design_;        // normalized rows
    MatrixXd design_original_;
    VectorXd responses_;
    VectorXd lo_, scale_;    // normalization: x = (theta - lo) / scale
    VectorXd corr_length_;
    double trend_ = 0.0;
    double process_var_ = 0.0;
    double nugget_ = 0.0;
    Eigen::LLT<MatrixXd> chol_;
    VectorXd weights_;       // C^{-1} (y - trend)
    VectorXd cinv_ones_;     // C^{-1} 1
    double ones_cinv_ones_ = 0.0;
    VectorXd cinv_diag_;     // diag of C^{-1}, for the design-point mse form
};

} // namespace cpi
