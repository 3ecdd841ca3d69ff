#include "sdpse/solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "sdpse/error.hpp"

namespace sdpse {

SdpProblem assemble_problem(const NetworkModel& model, const MeasurementMatrixSet& set,
                            const std::vector<Measurement>& meas, const std::vector<int>& anchors) {
    validate_measurements(model, meas);
    const int n = model.node_count();
    for (int a : anchors)
        if (a < 0 || a >= n) throw ValidationError("anchor node out of range");

    for (const auto& comp : node_components(model)) {
        const bool anchored = std::any_of(comp.begin(), comp.end(), [&](int k) {
            return std::find(anchors.begin(), anchors.end(), k) != anchors.end();
        });
        if (!anchored)
            throw UnobservableError("no phase-angle anchor in the component containing " +
                                    model.node_label(comp.front()));
    }

    SdpProblem p;
    p.dim = 2 * n;
    p.anchors = anchors;
    p.terms.reserve(meas.size());
    for (std::size_t i = 0; i < meas.size(); ++i) {
        const auto& m = meas[i];
        ProblemTerm t;
        t.a = matrix_for(set, m);
        t.measurement = static_cast<int>(i);
        if (m.kind == MeasKind::Vmag) {
            t.z = m.value * m.value;
            t.sigma = 2.0 * std::max(m.value, m.sigma) * m.sigma;
        } else {
            t.z = m.value;
            t.sigma = m.sigma;
        }
        p.terms.push_back(std::move(t));
    }
    return p;
}

std::string_view to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::MaxIter: return "max_iter";
        case SolveStatus::NumericalFailure: return "numerical_failure";
    }
    return "?";
}

Residuals compute_residuals(const SdpProblem& problem, const Eigen::MatrixXd& w) {
    Residuals r;
    r.raw.reserve(problem.terms.size());
    r.normalized.reserve(problem.terms.size());
    for (const auto& t : problem.terms) {
        const double d = t.z - t.a.trace_with(w);
        r.raw.push_back(d);
        r.normalized.push_back(d / t.sigma);
    }
    return r;
}

double objective_value(const SdpProblem& problem, const Eigen::MatrixXd& w) {
    double f = 0.0;
    for (const auto& t : problem.terms) {
        const double d = (t.z - t.a.trace_with(w)) / t.sigma;
        f += d * d;
    }
    return f;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One upper-triangle entry of a term in free coordinates. coef already
// carries the factor 2 for off-diagonal entries, so Tr(A W) = Σ coef W(p,q).
struct Coef {
    int pair;
    double coef;
};

struct Operator {
    std::vector<std::pair<int, int>> pairs;  // distinct (p, q), p <= q
    std::vector<std::vector<Coef>> rows;     // per term
    std::vector<std::vector<int>> support;   // per term, sorted free indices
    std::vector<std::vector<double>> block;  // per term, dense |support|² block
    VectorXd sqrt_w;                         // 1/sigma
    VectorXd z;
    MatrixXd null;  // orthonormal basis of weighted dependencies, m x d

    Eigen::Index size() const { return static_cast<Eigen::Index>(rows.size()); }

    VectorXd values(const MatrixXd& w) const {
        std::vector<double> at(pairs.size());
        for (std::size_t k = 0; k < pairs.size(); ++k) at[k] = w(pairs[k].first, pairs[k].second);
        VectorXd y(size());
        for (Eigen::Index i = 0; i < size(); ++i) {
            double s = 0.0;
            for (const auto& c : rows[i]) s += c.coef * at[c.pair];
            y[i] = s;
        }
        return y;
    }

    VectorXd project(const VectorXd& v) const {
        if (null.cols() == 0) return v;
        return v - null * (null.transpose() * v);
    }

    // Weighted residual with exact linear dependencies projected out.
    double fit(const VectorXd& y) const { return project((z - y).cwiseProduct(sqrt_w)).squaredNorm(); }
};

Operator build_operator(const SdpProblem& problem, const std::vector<int>& full_to_free) {
    Operator op;
    const auto m = static_cast<Eigen::Index>(problem.terms.size());
    op.sqrt_w.resize(m);
    op.z.resize(m);
    std::map<std::pair<int, int>, int> index;
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& t = problem.terms[i];
        op.sqrt_w[i] = 1.0 / t.sigma;
        op.z[i] = t.z;
        std::vector<Coef> row;
        std::vector<int> sup;
        for (const auto& e : t.a.entries()) {
            const int p = full_to_free[e.row], q = full_to_free[e.col];
            if (p < 0 || q < 0) continue;
            const auto key = std::minmax(p, q);
            auto [it, fresh] = index.emplace(key, static_cast<int>(op.pairs.size()));
            if (fresh) op.pairs.push_back(key);
            row.push_back(Coef{it->second, p == q ? e.value : 2.0 * e.value});
            sup.push_back(p);
            sup.push_back(q);
        }
        std::sort(sup.begin(), sup.end());
        sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
        const auto k = sup.size();
        std::vector<double> blk(k * k, 0.0);
        auto pos = [&](int v) {
            return static_cast<std::size_t>(std::lower_bound(sup.begin(), sup.end(), v) - sup.begin());
        };
        for (const auto& e : t.a.entries()) {
            const int p = full_to_free[e.row], q = full_to_free[e.col];
            if (p < 0 || q < 0) continue;
            blk[pos(p) * k + pos(q)] = e.value;
            blk[pos(q) * k + pos(p)] = e.value;
        }
        op.rows.push_back(std::move(row));
        op.support.push_back(std::move(sup));
        op.block.push_back(std::move(blk));
    }

    // Readings that are exact linear combinations of others (for example a
    // full set of flows and the injection at a node) leave directions in
    // measurement space that no W can reach. Find them once so the Newton
    // systems can be kept away from those directions.
    MatrixXd dense = MatrixXd::Zero(m, static_cast<Eigen::Index>(op.pairs.size()));
    for (Eigen::Index i = 0; i < m; ++i)
        for (const auto& c : op.rows[i]) dense(i, c.pair) += op.sqrt_w[i] * c.coef;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(dense);
    qr.setThreshold(1e-10);
    const auto rank = qr.rank();
    if (rank < m) {
        MatrixXd q = qr.householderQ();
        op.null = q.rightCols(m - rank);
    }
    return op;
}

double logdet_if_pd(const MatrixXd& w, bool& ok) {
    Eigen::LLT<MatrixXd> llt(w);
    ok = llt.info() == Eigen::Success;
    if (!ok) return 0.0;
    const auto& l = llt.matrixL();
    double s = 0.0;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const double d = l(i, i);
        if (!(d > 0.0)) {
            ok = false;
            return 0.0;
        }
        s += 2.0 * std::log(d);
    }
    return s;
}

// K(i,l) = Tr(A_i W A_l W), built column by column from W A_l W sampled at
// the entries the operator touches.
MatrixXd coupling_matrix(const Operator& op, const MatrixXd& w) {
    const auto m = op.size();
    const auto n = w.rows();
    const auto np = op.pairs.size();
    MatrixXd k(m, m);
    std::vector<double> c(np);
    MatrixXd v;
    for (Eigen::Index l = 0; l < m; ++l) {
        const auto& sup = op.support[l];
        const auto nl = static_cast<Eigen::Index>(sup.size());
        v.setZero(n, nl);
        for (Eigen::Index r = 0; r < nl; ++r)
            for (Eigen::Index s = 0; s < nl; ++s) {
                const double a = op.block[l][r * nl + s];
                if (a != 0.0) v.col(s) += a * w.col(sup[r]);
            }
        for (std::size_t e = 0; e < np; ++e) {
            const auto [p, q] = op.pairs[e];
            double t = 0.0;
            for (Eigen::Index s = 0; s < nl; ++s) t += v(p, s) * w(sup[s], q);
            c[e] = t;
        }
        for (Eigen::Index i = l; i < m; ++i) {
            double t = 0.0;
            for (const auto& cf : op.rows[i]) t += cf.coef * c[cf.pair];
            k(i, l) = t;
            k(l, i) = t;
        }
    }
    return k;
}

// Levenberg-Marquardt on the factor x of W = x xᵀ, started from the leading
// eigenvector of the relaxed solution. Returns the weighted objective at x.
double polish_rank_one(const Operator& op, VectorXd& x) {
    const auto m = op.size();
    const auto n = x.size();
    auto evaluate = [&](const VectorXd& v) {
        VectorXd y(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            double s = 0.0;
            for (const auto& c : op.rows[i]) s += c.coef * v[op.pairs[c.pair].first] * v[op.pairs[c.pair].second];
            y[i] = s;
        }
        return VectorXd((op.z - y).cwiseProduct(op.sqrt_w));
    };
    VectorXd r = evaluate(x);
    double f = r.squaredNorm();
    double damping = 1e-6;
    MatrixXd jac(m, n);
    for (int it = 0; it < 50 && f > 0.0; ++it) {
        jac.setZero();
        for (Eigen::Index i = 0; i < m; ++i)
            for (const auto& c : op.rows[i]) {
                const auto [p, q] = op.pairs[c.pair];
                const double g = c.coef * op.sqrt_w[i];
                jac(i, p) += g * x[q];
                jac(i, q) += g * x[p];
            }
        const MatrixXd jtj = jac.transpose() * jac;
        const VectorXd jtr = jac.transpose() * r;
        bool improved = false;
        for (int tries = 0; tries < 20; ++tries) {
            MatrixXd a = jtj;
            a.diagonal().array() += damping * std::max(1.0, jtj.diagonal().maxCoeff());
            const VectorXd step = a.ldlt().solve(jtr);
            if (!step.allFinite()) break;
            const VectorXd cand = x + step;
            const VectorXd rc = evaluate(cand);
            const double fc = rc.squaredNorm();
            if (fc < f) {
                const double gain = f - fc;
                x = cand;
                r = rc;
                f = fc;
                damping = std::max(damping * 0.1, 1e-15);
                improved = gain > 1e-15 * f;
                if (!improved) return f;
                break;
            }
            damping *= 10.0;
        }
        if (!improved) break;
    }
    return f;
}

}  // namespace

SolveReport BarrierSolver::solve(const SdpProblem& problem, const SolverConfig& config) const {
    const int dim = problem.dim;
    const int nodes = dim / 2;
    if (dim <= 0) throw ValidationError("empty problem");
    if (config.barrier_reduction <= 0.0 || config.barrier_reduction >= 1.0)
        throw ValidationError("barrier reduction factor must lie in (0, 1)");
    if (config.convergence_tol <= 0.0) throw ValidationError("convergence tolerance must be positive");

    // Imag parts of anchor nodes are fixed at zero and dropped.
    std::vector<int> full_to_free(dim, 0);
    for (int a : problem.anchors) full_to_free[nodes + a] = -1;
    std::vector<int> free_idx;
    for (int i = 0; i < dim; ++i)
        if (full_to_free[i] == 0) {
            full_to_free[i] = static_cast<int>(free_idx.size());
            free_idx.push_back(i);
        }
    const int n = static_cast<int>(free_idx.size());
    const Operator op = build_operator(problem, full_to_free);
    const auto m = op.size();
    const bool dependent = op.null.cols() > 0;
    const MatrixXd null_proj = dependent ? MatrixXd(op.null * op.null.transpose()) : MatrixXd();

    MatrixXd w = MatrixXd::Identity(n, n);
    if (config.warm_start) {
        const auto& ws = *config.warm_start;
        if (ws.rows() != dim || ws.cols() != dim) throw ValidationError("warm start has wrong size");
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) w(i, j) = ws(free_idx[i], free_idx[j]);
        w = 0.5 * (w + w.transpose()).eval();
        const double floor = 1e-6 * std::max(1.0, w.diagonal().cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(w, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues()[0];
        if (lo < floor) w += (floor - lo) * MatrixXd::Identity(n, n);
    }
    // A trace cap keeps every barrier subproblem bounded; per-unit voltages
    // sit far inside it.
    const double cap = 4.0 * std::max<double>(n, w.trace());
    const double nu = n + 1.0;
    const VectorXd zw = op.z.cwiseProduct(op.sqrt_w);

    SolveReport rep;
    VectorXd y = op.values(w);
    double f = op.fit(y);
    double mu = std::max(f, 1e-12) / nu;
    bool pd = false;
    double logdet = logdet_if_pd(w, pd);
    if (!pd) throw SolverError("initial point is not positive definite");

    bool done = false;
    while (!done) {
        const bool last = nu * mu <= config.convergence_tol * std::max(1.0, f);
        for (;;) {
            const double s = cap - w.trace();
            const VectorXd yw = y.cwiseProduct(op.sqrt_w);
            const MatrixXd w2 = w * w;

            MatrixXd h(m + 1, m + 1);
            const MatrixXd k = coupling_matrix(op, w);
            h.topLeftCorner(m, m) = op.sqrt_w.asDiagonal() * k * op.sqrt_w.asDiagonal();
            if (dependent) {
                const double c = std::max(1.0, h.topLeftCorner(m, m).diagonal().maxCoeff());
                h.topLeftCorner(m, m) += c * null_proj;
            }
            h.topLeftCorner(m, m).diagonal().array() += 0.5 * mu;
            const VectorXd k0 = op.project(op.values(w2).cwiseProduct(op.sqrt_w));
            h.block(0, m, m, 1) = k0;
            h.block(m, 0, 1, m) = k0.transpose();
            h(m, m) = w2.trace() + s * s;
            VectorXd rhs(m + 1);
            rhs.head(m) = op.project(zw - 2.0 * yw);
            rhs[m] = -cap;

            VectorXd u;
            Eigen::LLT<MatrixXd> llt(h);
            if (llt.info() == Eigen::Success)
                u = llt.solve(rhs);
            else
                u = h.ldlt().solve(rhs);
            if (!u.allFinite()) {
                rep.status = SolveStatus::NumericalFailure;
                done = true;
                break;
            }
            u.head(m) = op.project(u.head(m));
            const VectorXd gamma = u.head(m).cwiseProduct(op.sqrt_w);

            // Δ = W (Σ γ_i A_i + u_0 I) W + W
            MatrixXd smat = u[m] * MatrixXd::Identity(n, n);
            for (Eigen::Index i = 0; i < m; ++i) {
                if (gamma[i] == 0.0) continue;
                for (const auto& c : op.rows[i]) {
                    const auto [p, q] = op.pairs[c.pair];
                    if (p == q) {
                        smat(p, p) += gamma[i] * c.coef;
                    } else {
                        smat(p, q) += 0.5 * gamma[i] * c.coef;
                        smat(q, p) += 0.5 * gamma[i] * c.coef;
                    }
                }
            }
            MatrixXd delta = w * smat * w + w;
            delta = 0.5 * (delta + delta.transpose()).eval();

            // Newton decrement from <-grad, Δ>.
            const VectorXd dw = op.project(op.values(delta).cwiseProduct(op.sqrt_w));
            const VectorXd resid = op.project(zw - yw);
            double lam2 = 2.0 * resid.dot(dw) - mu / s * delta.trace() +
                          mu * (u.head(m).dot(yw) + u[m] * w.trace() + n);
            lam2 = std::max(lam2, 0.0);
            const double lam = std::sqrt(lam2 / mu);
            if (lam <= (last ? 1e-3 : 0.25)) break;
            if (rep.iterations >= config.max_iterations) {
                rep.status = SolveStatus::MaxIter;
                done = true;
                break;
            }

            // Backtracking on the barrier function from the full step.
            const double phi = f - mu * (logdet + std::log(s));
            double alpha = 1.0;
            bool ok = false;
            MatrixXd trial;
            VectorXd y_trial;
            double f_trial = 0.0, ld_trial = 0.0;
            for (int tries = 0; tries < 60; ++tries, alpha *= 0.5) {
                trial = w + alpha * delta;
                const double s_trial = cap - trial.trace();
                if (!(s_trial > 0.0)) continue;
                bool pd_trial = false;
                ld_trial = logdet_if_pd(trial, pd_trial);
                if (!pd_trial) continue;
                y_trial = op.values(trial);
                f_trial = op.fit(y_trial);
                const double phi_trial = f_trial - mu * (ld_trial + std::log(s_trial));
                if (phi_trial <= phi - 1e-4 * alpha * lam2 + 1e-13 * std::abs(phi)) {
                    ok = true;
                    break;
                }
            }
            ++rep.iterations;
            if (!ok) {
                // No descent is possible to working precision; the current
                // point is as centered as it gets.
                break;
            }
            w = std::move(trial);
            y = std::move(y_trial);
            f = f_trial;
            logdet = ld_trial;
        }
        if (done) break;
        const double objective = (op.z - y).cwiseProduct(op.sqrt_w).squaredNorm();
        rep.objective_history.push_back(objective);
        rep.kkt_residual = nu * mu / std::max(1.0, f);
        if (last) break;
        mu *= config.barrier_reduction;
    }

    {
        // Blocks of W that no reading couples are judged separately.
        std::vector<int> parent(n);
        for (int i = 0; i < n; ++i) parent[i] = i;
        auto root = [&](int i) {
            while (parent[i] != i) i = parent[i] = parent[parent[i]];
            return i;
        };
        std::vector<char> touched(n, 0);
        for (const auto& [p, q] : op.pairs) {
            touched[p] = touched[q] = 1;
            parent[root(p)] = root(q);
        }
        std::map<int, std::vector<int>> groups;
        for (int i = 0; i < n; ++i)
            if (touched[i]) groups[root(i)].push_back(i);

        VectorXd x = VectorXd::Zero(n);
        bool usable = true;
        rep.relaxed_rank1_ratio = 0.0;
        for (const auto& [r, idx] : groups) {
            const auto k = static_cast<Eigen::Index>(idx.size());
            MatrixXd blk(k, k);
            for (Eigen::Index i = 0; i < k; ++i)
                for (Eigen::Index j = 0; j < k; ++j) blk(i, j) = w(idx[i], idx[j]);
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(blk);
            const double l1 = es.eigenvalues()[k - 1];
            if (!(l1 > 0.0)) {
                usable = false;
                continue;
            }
            if (k > 1)
                rep.relaxed_rank1_ratio =
                    std::max(rep.relaxed_rank1_ratio, std::max(0.0, es.eigenvalues()[k - 2]) / l1);
            const VectorXd v = std::sqrt(l1) * es.eigenvectors().col(k - 1);
            for (Eigen::Index i = 0; i < k; ++i) x[idx[i]] = v[i];
        }
        if (config.polish && usable && rep.status != SolveStatus::NumericalFailure &&
            rep.relaxed_rank1_ratio <= kRankRatioAccept) {
            const double before = (op.z - y).cwiseProduct(op.sqrt_w).squaredNorm();
            if (polish_rank_one(op, x) < before) {
                w = x * x.transpose();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        if (!touched[i] || !touched[j] || root(i) != root(j)) w(i, j) = 0.0;
                y = op.values(w);
                rep.polished = true;
            }
        }
    }

    rep.w = MatrixXd::Zero(dim, dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) rep.w(free_idx[i], free_idx[j]) = w(i, j);
    rep.objective = objective_value(problem, rep.w);
    return rep;
}
SolveReport solve(const SdpProblem& problem, const SolverConfig& config) {
    return BarrierSolver{}.solve(problem, config);
}

}  // namespace sdpse
