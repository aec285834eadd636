#include "ehcoop/barrier.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ehcoop {

namespace {

// Affine function sum coef*z[idx] + c, at most a handful of entries.
struct Lin {
    std::array<int, 8> idx{};
    std::array<double, 8> coef{};
    int n = 0;
    double c = 0.0;

    void add(int i, double a) {
        if (i < 0 || a == 0.0) return;
        for (int t = 0; t < n; ++t)
            if (idx[t] == i) {
                coef[t] += a;
                return;
            }
        idx[n] = i;
        coef[n] = a;
        ++n;
    }
    double eval(const Eigen::VectorXd& z) const {
        double v = c;
        for (int t = 0; t < n; ++t) v += coef[t] * z[idx[t]];
        return v;
    }
    Lin scaled(double a) const {
        Lin out = *this;
        for (int t = 0; t < n; ++t) out.coef[t] *= a;
        out.c *= a;
        return out;
    }
    Lin plus(const Lin& o) const {
        Lin out = *this;
        for (int t = 0; t < o.n; ++t) out.add(o.idx[t], o.coef[t]);
        out.c += o.c;
        return out;
    }
};

// -weight * log(f(z)) terms.
struct Term {
    Lin f;
    double weight;
};

class Problem {
public:
    explicit Problem(const Scenario& sc) : sc_(sc) { build(); }

    int dim() const { return dim_; }
    std::size_t n_constraints() const { return cons_.size(); }

    double objective(const Eigen::VectorXd& z) const {
        double f = 0.0;
        for (const auto& t : obj_) f += t.weight * std::log(t.f.eval(z));
        return f;
    }

    // Barrier value t*(-objective) + sum -log(g); +inf outside the domain.
    double phi(const Eigen::VectorXd& z, double t) const {
        double v = 0.0;
        for (const auto& term : obj_) {
            const double a = term.f.eval(z);
            if (!(a > 0.0)) return std::numeric_limits<double>::infinity();
            v -= t * term.weight * std::log(a);
        }
        for (const auto& term : cons_) {
            const double a = term.f.eval(z);
            if (!(a > 0.0)) return std::numeric_limits<double>::infinity();
            v -= std::log(a);
        }
        return v;
    }

    void derivatives(const Eigen::VectorXd& z, double t, Eigen::VectorXd& grad,
                     Eigen::SparseMatrix<double>& hess) const {
        grad.setZero(dim_);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve((obj_.size() + cons_.size()) * 16);
        auto accumulate = [&](const Term& term, double w) {
            const double a = term.f.eval(z);
            for (int p = 0; p < term.f.n; ++p) {
                grad[term.f.idx[p]] -= w * term.f.coef[p] / a;
                for (int q = 0; q < term.f.n; ++q)
                    trip.emplace_back(term.f.idx[p], term.f.idx[q], w * term.f.coef[p] * term.f.coef[q] / (a * a));
            }
        };
        for (const auto& term : obj_) accumulate(term, t * term.weight);
        for (const auto& term : cons_) accumulate(term, 1.0);
        hess.resize(dim_, dim_);
        hess.setFromTriplets(trip.begin(), trip.end());
    }

    // Largest step keeping every logged function positive.
    double max_step(const Eigen::VectorXd& z, const Eigen::VectorXd& dz) const {
        double step = std::numeric_limits<double>::infinity();
        auto scan = [&](const std::vector<Term>& terms) {
            for (const auto& term : terms) {
                const double a = term.f.eval(z);
                double da = 0.0;
                for (int p = 0; p < term.f.n; ++p) da += term.f.coef[p] * dz[term.f.idx[p]];
                if (da < 0.0) step = std::min(step, -a / da);
            }
        };
        scan(obj_);
        scan(cons_);
        return step;
    }

    Eigen::VectorXd start() const;
    TransferPolicy policy(const Eigen::VectorXd& z) const;

private:
    void build();
    Lin power(int k, std::size_t i) const;

    const Scenario& sc_;
    std::size_t n_ = 0;
    int dim_ = 0;
    std::array<std::vector<int>, 2> S_, d_;
    std::vector<int> s_;
    std::vector<Term> obj_, cons_;
    double eta_ = 1e-9;
};

Lin Problem::power(int k, std::size_t i) const {
    const int j = 1 - k;
    Lin p;
    if (i > 0) p.add(S_[k][i - 1], 1.0);
    p.add(S_[k][i], -1.0);
    p.add(d_[k][i], -1.0);
    p.add(d_[j][i], sc_.alpha[j]);
    p.c = sc_.harvests[k][i];
    return p;
}

void Problem::build() {
    n_ = sc_.n_slots();
    for (int k = 0; k < 2; ++k) {
        S_[k].assign(n_, -1);
        d_[k].assign(n_, -1);
    }
    s_.assign(n_, -1);
    for (std::size_t i = 0; i < n_; ++i) {
        for (int k = 0; k < 2; ++k) {
            S_[k][i] = dim_++;
            if (sc_.alpha[k] > 0.0) d_[k][i] = dim_++;
        }
        if (sc_.model == ModelKind::thc) s_[i] = dim_++;
    }

    const double w = 0.5 * sc_.slot_seconds;
    for (std::size_t i = 0; i < n_; ++i) {
        std::array<Lin, 2> p{power(0, i), power(1, i)};
        std::array<Lin, 2> snr{p[0].scaled(1.0 / sc_.noise(0)), p[1].scaled(1.0 / sc_.noise(1))};
        Lin one;
        one.c = 1.0;
        switch (sc_.model) {
        case ModelKind::twc:
            obj_.push_back({one.plus(snr[0]), w});
            obj_.push_back({one.plus(snr[1]), w});
            break;
        case ModelKind::mac: obj_.push_back({one.plus(snr[0]).plus(snr[1]), w}); break;
        case ModelKind::thc: {
            Lin s;
            s.add(s_[i], 1.0);
            obj_.push_back({one.plus(s), w});
            for (int k = 0; k < 2; ++k) cons_.push_back({snr[k].plus(s.scaled(-1.0)), 1.0});
            Lin lower = s;
            lower.c = 0.5;
            cons_.push_back({lower, 1.0});
            break;
        }
        }
        for (int k = 0; k < 2; ++k) {
            cons_.push_back({p[k], 1.0});
            Lin s;
            s.add(S_[k][i], 1.0);
            s.c = eta_;
            cons_.push_back({s, 1.0});
            if (!sc_.capacity[k].is_infinite()) {
                Lin room;
                room.add(S_[k][i], -1.0);
                room.c = sc_.capacity[k].mj();
                cons_.push_back({room, 1.0});
            }
            if (d_[k][i] >= 0) {
                Lin d;
                d.add(d_[k][i], 1.0);
                cons_.push_back({d, 1.0});
            }
        }
    }
}

Eigen::VectorXd Problem::start() const {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(dim_);
    const double floor = eta_ / (4.0 * static_cast<double>(n_ + 1));
    const double rho = floor;
    std::array<double, 2> S{0.0, 0.0};
    for (std::size_t i = 0; i < n_; ++i) {
        std::array<double, 2> p{};
        for (int k = 0; k < 2; ++k)
            if (d_[k][i] >= 0) z[d_[k][i]] = rho;
        for (int k = 0; k < 2; ++k) {
            const int j = 1 - k;
            double avail = S[k] + sc_.harvests[k][i];
            if (d_[k][i] >= 0) avail -= rho;
            if (d_[j][i] >= 0) avail += sc_.alpha[j] * rho;
            p[k] = floor + 0.5 * std::max(0.0, avail);
            double next = avail - p[k];
            if (!sc_.capacity[k].is_infinite()) {
                const double room = sc_.capacity[k].mj() - 0.25 * std::min(sc_.capacity[k].mj(), 1.0);
                if (next > room) {
                    p[k] += next - room;
                    next = room;
                }
            }
            S[k] = next;
            z[S_[k][i]] = next;
        }
        if (s_[i] >= 0) {
            const double lo = std::min(p[0] / sc_.noise(0), p[1] / sc_.noise(1));
            z[s_[i]] = 0.5 * lo - 0.25;
        }
    }
    return z;
}

TransferPolicy Problem::policy(const Eigen::VectorXd& z) const {
    TransferPolicy out = TransferPolicy::zeros(n_);
    for (std::size_t i = 0; i < n_; ++i)
        for (int k = 0; k < 2; ++k) {
            out.p[k][i] = std::max(0.0, power(k, i).eval(z));
            out.delta[k][i] = d_[k][i] >= 0 ? std::max(0.0, z[d_[k][i]]) : 0.0;
        }
    return out;
}

}  // namespace

BarrierResult barrier_solve(const Scenario& sc, const BarrierOptions& opt) {
    Problem prob(sc);
    Eigen::VectorXd z = prob.start();
    const double m = static_cast<double>(prob.n_constraints());
    BarrierResult res;

    Eigen::VectorXd grad;
    Eigen::SparseMatrix<double> hess;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    double t = 1.0;
    bool analyzed = false;
    for (int outer = 0; outer < 60; ++outer) {
        for (int it = 0; it < 100; ++it) {
            if (res.newton_steps >= opt.max_newton) break;
            prob.derivatives(z, t, grad, hess);
            if (!analyzed) {
                ldlt.analyzePattern(hess);
                analyzed = true;
            }
            ldlt.factorize(hess);
            if (ldlt.info() != Eigen::Success) break;
            Eigen::VectorXd dz = ldlt.solve(-grad);
            const double decrement = -grad.dot(dz);
            if (!(decrement >= 0.0) || decrement < 1e-14) break;
            ++res.newton_steps;
            double step = std::min(1.0, 0.99 * prob.max_step(z, dz));
            const double phi0 = prob.phi(z, t);
            while (step > 1e-14 && !(prob.phi(z + step * dz, t) <= phi0 - 0.25 * step * decrement)) step *= 0.5;
            if (step <= 1e-14) break;
            z += step * dz;
            if (decrement < 1e-10) break;
        }
        const double f = prob.objective(z);
        if (m / t < opt.gap_tol * std::max(1.0, std::abs(f))) {
            res.converged = true;
            break;
        }
        if (res.newton_steps >= opt.max_newton) break;
        t *= 10.0;
    }
    res.policy = prob.policy(z);
    res.objective_nats = prob.objective(z);
    return res;
}

}  // namespace ehcoop
