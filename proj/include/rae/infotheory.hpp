#pragma once

#include "rae/error.hpp"
#include "rae/scorer.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rae::info {

inline constexpr double kDistTolerance = 1e-6;
inline constexpr double kJointTolerance = 1e-9;

// Throws ValidationError unless every entry is finite, non-negative, and the
// entries sum to 1 within `tol`.
template <typename Derived>
void check_distribution(const Eigen::DenseBase<Derived>& p, typename Derived::Scalar tol) {
    using Scalar = typename Derived::Scalar;
    if (p.size() == 0) throw ValidationError("empty distribution");
    if (!p.derived().array().isFinite().all() || p.derived().array().minCoeff() < Scalar(0)) {
        throw ValidationError("distribution has negative or non-finite entries");
    }
    const Scalar total = p.derived().sum();
    if (std::abs(total - Scalar(1)) > tol) {
        throw ValidationError("distribution sums to " + std::to_string(static_cast<double>(total)));
    }
}

// -sum p log2 p over the entries of any dense expression, with 0 log 0 = 0.
template <typename Derived>
typename Derived::Scalar shannon_entropy(const Eigen::DenseBase<Derived>& p,
                                         typename Derived::Scalar tol = kDistTolerance) {
    using Scalar = typename Derived::Scalar;
    check_distribution(p, tol);
    const auto a = p.derived().array();
    return -(a > Scalar(0)).select(a * a.log2(), Scalar(0)).sum();
}

double shannon_entropy(const TokenDist& dist);

// I(X;Y) = H(X) + H(Y) - H(X,Y) for a joint table with X on rows.
template <typename Derived>
typename Derived::Scalar mutual_information(const Eigen::MatrixBase<Derived>& joint,
                                            typename Derived::Scalar tol = kJointTolerance) {
    check_distribution(joint, tol);
    const auto px = joint.rowwise().sum();
    const auto py = joint.colwise().sum();
    // Marginals inherit the joint's rounding; check them against a looser bound.
    return shannon_entropy(px, tol * 10) + shannon_entropy(py, tol * 10) - shannon_entropy(joint, tol);
}

// Joint distribution over (G, Theta, Q), stored as one |Theta| x |Q| slice per g.
class DiscreteJoint {
public:
    // Throws ValidationError if the table is not a distribution, or claims
    // the Markov chain G -> Theta -> Q without satisfying
    // p(g, t, q) p(t) = p(g, t) p(t, q) within 1e-9.
    DiscreteJoint(std::vector<Eigen::MatrixXd> slices, bool markov_chain);

    // p(g) p(t | g) p(q | t); rows of the conditionals are distributions.
    static DiscreteJoint from_chain(const Eigen::VectorXd& p_g, const Eigen::MatrixXd& p_theta_given_g,
                                    const Eigen::MatrixXd& p_q_given_theta);

    Eigen::Index g_size() const { return static_cast<Eigen::Index>(slices_.size()); }
    Eigen::Index theta_size() const { return slices_.front().rows(); }
    Eigen::Index q_size() const { return slices_.front().cols(); }
    bool markov_chain() const { return markov_chain_; }
    double operator()(Eigen::Index g, Eigen::Index t, Eigen::Index q) const { return slices_[g](t, q); }

    Eigen::MatrixXd g_theta() const;  // |G| x |Theta|
    Eigen::MatrixXd g_q() const;      // |G| x |Q|
    Eigen::MatrixXd theta_q() const;  // |Theta| x |Q|

private:
    std::vector<Eigen::MatrixXd> slices_;
    bool markov_chain_;
};

// Independent flat-Dirichlet draws of p(g), p(theta | g), p(q | theta).
DiscreteJoint random_markov_joint(std::mt19937_64& rng, int g_size, int theta_size, int q_size);

struct DpiResult {
    double i_g_theta = 0.0;
    double i_g_q = 0.0;
    bool holds = false;
};

// I(G;Theta) >= I(G;Q) - 1e-9. Throws PreconditionError without the Markov flag.
DpiResult verify_dpi(const DiscreteJoint& joint);

struct DpiSummary {
    int trials = 0;
    int held = 0;
    double min_margin = 0.0;  // min over trials of I(G;Theta) - I(G;Q)
};

// Alphabet sizes drawn uniformly from [1, max_alphabet].
DpiSummary run_dpi_trials(int trials, int max_alphabet, std::uint64_t seed);

}  // namespace rae::info
