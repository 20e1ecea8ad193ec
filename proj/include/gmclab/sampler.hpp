#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gmclab/grid.hpp"
#include "gmclab/kernels.hpp"
#include "gmclab/opsplit.hpp"
#include "gmclab/seed_covariance.hpp"

namespace gmclab {

/// One realization of a Gaussian field on a grid.
struct FieldSample {
    GridSpec grid;
    Eigen::VectorXd values;
    double level = 0.0;      ///< scale cutoff the sampler resolved down to
    std::string provenance;  ///< which sampler produced it, with parameters

    /// Throws ConfigError on a size mismatch or a non-finite value.
    void validate() const;
};

/// Draws i.i.d. Gaussian vectors with the given covariance through a clipped
/// spectral factor; row i is the realization drawn from stream
/// (master_seed, i, 0).  Throws NotPSD when the covariance has an eigenvalue
/// below -1e-8 times its largest one.
Eigen::MatrixXd sample_direct(const DiscretizedOperator& covariance,
                              int n_samples, std::uint64_t master_seed);

/// Exact stationary sampler for scale-averaged fields on uniform grids via
/// circulant embedding.
///
/// The level-t covariance K_t(|x-y|) of a compactly supported seed is
/// periodized onto a torus of `window()` cells per axis.  The window is
/// large enough that the wrap-around images vanish for every pair of grid
/// cells, so the restriction to the grid has exactly the requested
/// covariance, and the periodization of a positive-definite function is
/// automatically positive semidefinite: its discrete Fourier transform is an
/// aliased sum of nonnegative spectral densities.  One draw costs one real
/// FFT of the window instead of a dense factorization, which makes resolved
/// grids with ~10^6 cells practical.
///
/// Supports dimensions 1 and 2.  Throws ConfigError for an unbounded seed,
/// an unsupported dimension, or a non-positive level, and NotPSD if the
/// window spectrum dips below -1e-10 of its maximum (rounding-level
/// negatives are clamped to zero).
class StationarySampler {
public:
    StationarySampler(const SeedCovariance& seed, const GridSpec& grid,
                      double level);
    ~StationarySampler();
    StationarySampler(StationarySampler&&) noexcept;
    StationarySampler& operator=(StationarySampler&&) noexcept;
    StationarySampler(const StationarySampler&) = delete;
    StationarySampler& operator=(const StationarySampler&) = delete;

    const GridSpec& grid() const;
    double level() const;
    /// Cells per axis of the periodization torus.
    int window() const;

    /// Realization r draws its spectral noise from stream
    /// (master_seed, r, 0); equal keys give bitwise-equal fields.
    FieldSample draw(std::uint64_t master_seed, std::uint64_t realization);

    /// Number of standard normals one draw consumes: window()^dim.
    Eigen::Index noise_size() const;

    /// The sampling map itself: applies the fixed linear map to a
    /// caller-supplied standard-normal vector of length noise_size().
    /// Feeding the map basis vectors reconstructs its covariance exactly,
    /// which is how the tests certify it against the dense kernel matrix.
    /// Throws ConfigError on a size mismatch.
    FieldSample draw_from_noise(const Eigen::VectorXd& noise);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Rough/smooth accumulator pair built scale layer by scale layer.
///
/// Each advance to a higher level draws the two increment fields over the
/// new level window from their exact covariances
///   rough:   int_s^t k(e^u |x-y|) (1 - e^{-delta u}) du,
///   smooth:  int_s^t k(e^u |x-y|) e^{-delta u} du,
/// and adds them to the accumulators.  Advance j uses RNG layer streams
/// (2j, 2j+1), so increments over disjoint level windows are independent of
/// each other and of everything drawn before; the accumulated pair at equal
/// levels sums to the scale-averaged log field.
///
/// The state carries `n_realizations` independent realizations at once
/// (realization r uses streams keyed by realization_offset + r), so
/// ensemble statistics reuse one covariance factorization per layer.
class MultiscaleState {
public:
    MultiscaleState(SeedCovariance seed, double delta, GridSpec grid,
                    std::uint64_t master_seed, int n_realizations = 1,
                    std::uint64_t realization_offset = 0);

    /// Extends the schedule to next_t (strictly above the current level) and
    /// accumulates the increment fields.  Throws ConfigError on a
    /// non-increasing level and NotPSD on a bad layer covariance.
    void advance(double next_t);

    double level() const { return schedule_.back(); }
    /// Levels reached so far, starting at 0.
    const std::vector<double>& schedule() const { return schedule_; }
    const GridSpec& grid() const { return grid_; }
    int realizations() const { return static_cast<int>(rough_.rows()); }

    FieldSample rough(int realization = 0) const;
    FieldSample smooth(int realization = 0) const;
    /// rough + smooth: the scale-averaged log field truncated at level().
    FieldSample combined(int realization = 0) const;

    /// Accumulators as realization-by-node matrices.
    const Eigen::MatrixXd& rough_ensemble() const { return rough_; }
    const Eigen::MatrixXd& smooth_ensemble() const { return smooth_; }

private:
    FieldSample wrap(const Eigen::MatrixXd& field, int realization,
                     const char* part) const;

    SeedCovariance seed_;
    double delta_;
    GridSpec grid_;
    std::uint64_t master_seed_;
    std::uint64_t realization_offset_;
    std::vector<double> schedule_;
    Eigen::MatrixXd rough_, smooth_;  // realizations x nodes
    int advances_ = 0;
};

/// Functional form of MultiscaleState::advance; returns the same state.
MultiscaleState& advance_multiscale(MultiscaleState& state, double next_t);

/// Discretized covariance of the smooth limit field,
///   C(x, y) = int_0^inf k(e^u |x-y|) e^{-delta u} du,
/// with pointwise variance 1/delta.
DiscretizedOperator smooth_limit_covariance(const SeedCovariance& seed,
                                            double delta,
                                            const GridSpec& grid);

/// One draw of the smooth limit field from stream (master_seed, realization, 0).
FieldSample sample_S_infinity(const SeedCovariance& seed, double delta,
                              const GridSpec& grid, std::uint64_t master_seed,
                              std::uint64_t realization = 0);

/// White-noise cone sampler: discretizes the noise on R^d x (e^{-t}, 1) with
/// control measure y^{-(d+1)} (1 - y^delta) dz dy into cells (log-uniform in
/// scale, uniform in space), weights each cell by the seed's convolution
/// square root h scaled to the cell's representative y, and sums.  The cell
/// field's exact covariance converges to the rough-layer covariance at equal
/// levels (t, t) as the cells shrink.
///
/// `cells_per_support` is the single resolution knob: the spatial cell width
/// is the h-support diameter at the representative scale divided by it, and
/// the scale-slab thickness in u = log(1/y) is (log 2 / 4) * (8 / it), so
/// doubling the knob halves both cell dimensions.
///
/// Throws MissingFourierData when the seed carries no compactly supported
/// convolution square root, ConfigError on bad parameters.
FieldSample sample_cone(const SeedCovariance& seed, double delta,
                        const GridSpec& grid, double t,
                        std::uint64_t master_seed,
                        std::uint64_t realization = 0,
                        int cells_per_support = 8);

/// Ensemble version of sample_cone: row r is the realization drawn from
/// stream (master_seed, r, 0), all sharing one cell layout.
Eigen::MatrixXd sample_cone_ensemble(const SeedCovariance& seed, double delta,
                                     const GridSpec& grid, double t,
                                     std::uint64_t master_seed,
                                     int n_realizations,
                                     int cells_per_support = 8);

/// Exact covariance of the discretized cone field for the same parameters
/// (the law the samples actually follow, before any Monte Carlo error).
Eigen::MatrixXd cone_model_covariance(const SeedCovariance& seed, double delta,
                                      const GridSpec& grid, double t,
                                      int cells_per_support = 8);

/// Discretization bias of the cone construction against the quadrature
/// rough-layer covariance, at the requested resolution and at double the
/// resolution, plus the standard second-order Richardson estimate
/// (4/3 of the coarse-to-fine model gap) that needs no exact reference.
struct ConeBiasReport {
    int cells_per_support = 0;
    double max_bias = 0.0;          ///< max |model - quadrature|, coarse
    double refined_max_bias = 0.0;  ///< same at twice the resolution
    double richardson_estimate = 0.0;
};

ConeBiasReport cone_bias_report(const SeedCovariance& seed, double delta,
                                const GridSpec& grid, double t,
                                int cells_per_support = 8);

/// Split of a log-correlated field X into an exactly scale-invariant rough
/// part and an independent smooth remainder, with its PSD certificate.
struct DecompositionResult {
    FieldSample rough;     ///< scale-invariant part (realization 0)
    FieldSample residual;  ///< independent smooth remainder (realization 0)
    FieldSample combined;  ///< rough + residual: one realization of X

    GridSpec grid;               ///< final grid, after any radius shrinking
    double shift = 0.0;          ///< g(0,0) - g0(0,0) for the original seed
    double dilation = 1.0;       ///< lambda applied to the seed
    double adjusted_shift = 0.0; ///< origin offset after dilation, >= 0
    double level = 0.0;          ///< rough-part scale cutoff
    int shrink_count = 0;        ///< radius halvings needed for PSD
    double min_eigenvalue = 0.0; ///< PSD certificate of the remainder

    Eigen::MatrixXd rough_covariance;
    Eigen::MatrixXd residual_covariance;

    /// Extra realizations when requested: row r of each is drawn from
    /// streams (master_seed, r, 0) and (master_seed, r, 1).
    Eigen::MatrixXd rough_draws;
    Eigen::MatrixXd residual_draws;
};

/// Splits the log-correlated field with covariance log(1/|x-y|) + g(x, y)
/// into independent rough + remainder samples on a small ball around 0.
///
/// The seed is dilated so the origin offset a = g(0,0) - g0(0,0) becomes
/// nonnegative, the remainder covariance is the smooth limit covariance of
/// the dilated seed plus the entrywise gap between g and the dilated seed's
/// own remainder, and the rough part is the dilated seed's rough layer at a
/// cutoff deep enough that every off-diagonal entry of the model covariance
/// of rough + remainder equals log(1/|x-y|) + g(x, y) to quadrature
/// accuracy.  If the remainder covariance has a severely negative
/// eigenvalue the grid radius is halved and the build retried, up to 8
/// times; NoValidRadius reports the final eigenvalue if all fail.
DecompositionResult decompose_X(const LogKernel& kernel,
                                const SeedCovariance& seed, double delta,
                                const GridSpec& grid,
                                std::uint64_t master_seed, int n_draws = 1);

} // namespace gmclab
