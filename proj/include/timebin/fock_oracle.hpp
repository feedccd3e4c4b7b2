#pragma once

// Numerical check of the closed-form time-bin coherence: the thermal trace
// of the displacement-operator overlap evaluated in a truncated number basis.
//
// Per mode the two emission branches leave the motion displaced by i*eta at
// two times separated by tau, so the coherence is
//     Tr[ rho_th  D(i eta e^{-i omega tau})^dagger  D(i eta) ].
// D(i eta) = exp(i eta X) with X = a + a^dagger, computed from the
// eigendecomposition of the truncated X; the rotated displacement follows
// from <m|D(alpha e^{i phi})|n> = e^{i phi (m - n)} <m|D(alpha)|n>.

#include "timebin/physics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace timebin {

class CutoffError : public std::invalid_argument {
  public:
    CutoffError(const std::string& what, std::size_t required)
        : std::invalid_argument(what), required_(required) {}

    [[nodiscard]] std::size_t required_cutoff() const noexcept { return required_; }

  private:
    std::size_t required_;
};

/// Smallest N with thermal weight on levels >= N below tail.
inline std::size_t required_fock_cutoff(double nbar, double tail = 1e-10) {
    if (nbar <= 0.0)
        return 1;
    const double ratio = nbar / (nbar + 1.0);
    return static_cast<std::size_t>(std::ceil(std::log(tail) / std::log(ratio)));
}

namespace detail {

// Eigendecomposition of the truncated position quadrature a + a^dagger,
// cached per dimension. Thread-safe.
inline const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& quadrature_eigen(Eigen::Index dim) {
    static std::mutex mu;
    static std::map<Eigen::Index, std::unique_ptr<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[dim];
    if (!slot) {
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index n = 0; n + 1 < dim; ++n) {
            const double s = std::sqrt(static_cast<double>(n + 1));
            x(n, n + 1) = s;
            x(n + 1, n) = s;
        }
        slot = std::make_unique<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>>(x);
    }
    return *slot;
}

} // namespace detail

/// Complex single-mode time-bin coherence; |result| is the contrast factor
/// and arg(result) the zero-point phase offset. fock_cutoff = 0 selects the
/// required cutoff automatically.
inline std::complex<double> motional_coherence_fock(double lamb_dicke, double freq_hz, double nbar, double tau_s,
                                                    std::size_t fock_cutoff = 0) {
    const std::size_t needed = required_fock_cutoff(nbar);
    if (fock_cutoff == 0)
        fock_cutoff = needed;
    if (fock_cutoff < needed)
        throw CutoffError("motional_coherence_fock: cutoff " + std::to_string(fock_cutoff) +
                              " leaves thermal weight above 1e-10; need at least " + std::to_string(needed),
                          needed);

    // The displacement spreads level n over roughly 2 eta sqrt(n) levels; pad
    // the basis so the truncation edge is far from every populated level.
    const double spread = 2.0 * lamb_dicke * std::sqrt(static_cast<double>(fock_cutoff) + 1.0);
    const auto pad = static_cast<Eigen::Index>(40 + 4 * std::ceil(spread));
    // Rounded up so nearby cutoffs share one cached eigendecomposition.
    const Eigen::Index dim = (static_cast<Eigen::Index>(fock_cutoff) + pad + 63) / 64 * 64;

    const auto& eig = detail::quadrature_eigen(dim);
    const Eigen::MatrixXd& v = eig.eigenvectors();
    const Eigen::VectorXd arg = lamb_dicke * eig.eigenvalues();
    const auto keep = static_cast<Eigen::Index>(fock_cutoff);
    // Columns n < cutoff of D(i eta) = V diag(e^{i eta lambda}) V^T, split
    // into real and imaginary parts.
    const Eigen::MatrixXd vt = v.topRows(keep).transpose();
    const Eigen::MatrixXd d_re = v * arg.array().cos().matrix().asDiagonal() * vt;
    const Eigen::MatrixXd d_im = v * arg.array().sin().matrix().asDiagonal() * vt;

    const double theta = -two_pi * freq_hz * tau_s;
    const double q = nbar > 0.0 ? nbar / (nbar + 1.0) : 0.0;
    std::complex<double> trace{0.0, 0.0};
    double weight = 1.0 / (nbar + 1.0);
    for (Eigen::Index n = 0; n < keep; ++n) {
        std::complex<double> diag{0.0, 0.0};
        for (Eigen::Index m = 0; m < dim; ++m) {
            const double mag2 = d_re(m, n) * d_re(m, n) + d_im(m, n) * d_im(m, n);
            if (mag2 == 0.0)
                continue;
            diag += std::polar(mag2, -theta * static_cast<double>(m - n));
        }
        trace += weight * diag;
        weight *= q;
    }
    return trace;
}

} // namespace timebin
