#include "rae/infotheory.hpp"

#include <limits>

namespace rae::info {

namespace {

Eigen::VectorXd flat_dirichlet(std::mt19937_64& rng, int n) {
    std::exponential_distribution<double> unit(1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = unit(rng);
    return v / v.sum();
}

}  // namespace

double shannon_entropy(const TokenDist& dist) {
    const std::vector<double> p = dist.outcomes();
    return shannon_entropy(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
}

DiscreteJoint::DiscreteJoint(std::vector<Eigen::MatrixXd> slices, bool markov_chain)
    : slices_(std::move(slices)), markov_chain_(markov_chain) {
    if (slices_.empty() || slices_.front().size() == 0) throw ValidationError("empty joint distribution");
    double total = 0.0;
    for (const auto& s : slices_) {
        if (s.rows() != theta_size() || s.cols() != q_size()) {
            throw ValidationError("joint slices have inconsistent shapes");
        }
        if (!s.array().isFinite().all() || s.minCoeff() < 0.0) {
            throw ValidationError("joint has negative or non-finite entries");
        }
        total += s.sum();
    }
    if (std::abs(total - 1.0) > kJointTolerance) {
        throw ValidationError("joint sums to " + std::to_string(total));
    }
    if (markov_chain_) {
        const Eigen::MatrixXd gt = g_theta();
        const Eigen::MatrixXd tq = theta_q();
        const Eigen::VectorXd pt = tq.rowwise().sum();
        for (Eigen::Index g = 0; g < g_size(); ++g) {
            for (Eigen::Index t = 0; t < theta_size(); ++t) {
                for (Eigen::Index q = 0; q < q_size(); ++q) {
                    if (std::abs(slices_[g](t, q) * pt[t] - gt(g, t) * tq(t, q)) > kJointTolerance) {
                        throw ValidationError("joint violates p(q | theta, g) = p(q | theta)");
                    }
                }
            }
        }
    }
}

DiscreteJoint DiscreteJoint::from_chain(const Eigen::VectorXd& p_g, const Eigen::MatrixXd& p_theta_given_g,
                                        const Eigen::MatrixXd& p_q_given_theta) {
    if (p_theta_given_g.rows() != p_g.size() || p_q_given_theta.rows() != p_theta_given_g.cols()) {
        throw ValidationError("conditional table shapes do not chain");
    }
    std::vector<Eigen::MatrixXd> slices;
    slices.reserve(p_g.size());
    for (Eigen::Index g = 0; g < p_g.size(); ++g) {
        // p(g) p(t|g) p(q|t) as a |Theta| x |Q| slice.
        slices.emplace_back(p_g[g] * p_theta_given_g.row(g).transpose().asDiagonal() * p_q_given_theta);
    }
    return DiscreteJoint(std::move(slices), true);
}

Eigen::MatrixXd DiscreteJoint::g_theta() const {
    Eigen::MatrixXd out(g_size(), theta_size());
    for (Eigen::Index g = 0; g < g_size(); ++g) out.row(g) = slices_[g].rowwise().sum().transpose();
    return out;
}

Eigen::MatrixXd DiscreteJoint::g_q() const {
    Eigen::MatrixXd out(g_size(), q_size());
    for (Eigen::Index g = 0; g < g_size(); ++g) out.row(g) = slices_[g].colwise().sum();
    return out;
}

Eigen::MatrixXd DiscreteJoint::theta_q() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(theta_size(), q_size());
    for (const auto& s : slices_) out += s;
    return out;
}

DiscreteJoint random_markov_joint(std::mt19937_64& rng, int g_size, int theta_size, int q_size) {
    if (g_size < 1 || theta_size < 1 || q_size < 1) throw ValidationError("alphabet sizes must be positive");
    Eigen::VectorXd p_g = flat_dirichlet(rng, g_size);
    Eigen::MatrixXd p_t(g_size, theta_size);
    for (int g = 0; g < g_size; ++g) p_t.row(g) = flat_dirichlet(rng, theta_size).transpose();
    Eigen::MatrixXd p_q(theta_size, q_size);
    for (int t = 0; t < theta_size; ++t) p_q.row(t) = flat_dirichlet(rng, q_size).transpose();
    return DiscreteJoint::from_chain(p_g, p_t, p_q);
}

DpiResult verify_dpi(const DiscreteJoint& joint) {
    if (!joint.markov_chain()) throw PreconditionError("data-processing check needs a Markov-chain joint");
    DpiResult r;
    r.i_g_theta = mutual_information(joint.g_theta());
    r.i_g_q = mutual_information(joint.g_q());
    r.holds = r.i_g_theta >= r.i_g_q - kJointTolerance;
    return r;
}

DpiSummary run_dpi_trials(int trials, int max_alphabet, std::uint64_t seed) {
    if (trials < 0) throw ValidationError("trial count must be non-negative");
    if (max_alphabet < 1) throw ValidationError("max alphabet must be at least 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> size(1, max_alphabet);
    DpiSummary summary;
    summary.min_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < trials; ++i) {
        const int g = size(rng);
        const int t = size(rng);
        const int q = size(rng);
        const DpiResult r = verify_dpi(random_markov_joint(rng, g, t, q));
        ++summary.trials;
        if (r.holds) ++summary.held;
        summary.min_margin = std::min(summary.min_margin, r.i_g_theta - r.i_g_q);
    }
    return summary;
}

}  // namespace rae::info
