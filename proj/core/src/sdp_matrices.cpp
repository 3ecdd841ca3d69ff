#include "sdpse/sdp_matrices.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "sdpse/error.hpp"

namespace sdpse {

void SymSparse::add(int i, int j, double v) {
    if (i > j) std::swap(i, j);
    // Off-diagonal entries appear twice in the full matrix but are stored once.
    pending_[{i, j}] += v;
}

void SymSparse::finalize() {
    std::map<std::pair<int, int>, double> merged;
    for (const auto& e : entries_) merged[{e.row, e.col}] += e.value;
    for (const auto& [k, v] : pending_) merged[k] += v;
    pending_.clear();
    entries_.clear();
    for (const auto& [k, v] : merged)
        if (v != 0.0) entries_.push_back(Entry{k.first, k.second, v});
}

double SymSparse::quadratic(const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (const auto& e : entries_) {
        const double t = e.value * x[e.row] * x[e.col];
        s += (e.row == e.col) ? t : 2.0 * t;
    }
    return s;
}

double SymSparse::trace_with(const Eigen::MatrixXd& w) const {
    double s = 0.0;
    for (const auto& e : entries_) {
        const double t = e.value * w(e.row, e.col);
        s += (e.row == e.col) ? t : 2.0 * t;
    }
    return s;
}

Eigen::MatrixXd SymSparse::dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
    for (const auto& e : entries_) {
        m(e.row, e.col) = e.value;
        m(e.col, e.row) = e.value;
    }
    return m;
}

SymSparse& SymSparse::operator+=(const SymSparse& o) {
    if (dim_ == 0) dim_ = o.dim_;
    for (const auto& e : o.entries_) pending_[{e.row, e.col}] += e.value;
    finalize();
    return *this;
}

SymSparse& SymSparse::operator*=(double s) {
    for (auto& e : entries_) e.value *= s;
    finalize();
    return *this;
}

double SymSparse::max_abs() const {
    double m = 0.0;
    for (const auto& e : entries_) m = std::max(m, std::abs(e.value));
    return m;
}

Eigen::VectorXd stack_state(std::span<const Complex> v) {
    const auto n = static_cast<Eigen::Index>(v.size());
    Eigen::VectorXd x(2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        x[k] = v[k].real();
        x[n + k] = v[k].imag();
    }
    return x;
}

std::vector<Complex> unstack_state(const Eigen::VectorXd& x) {
    const auto n = x.size() / 2;
    std::vector<Complex> v(n);
    for (Eigen::Index k = 0; k < n; ++k) v[k] = Complex(x[k], x[n + k]);
    return v;
}

// For a complex matrix A with entry a at (p, q) the real symmetric form of
// Re(V^H A V) picks up ½Re(a) on both diagonal blocks and ±½Im(a) on the
// off-diagonal blocks.
SymSparse active_form(int n, std::span<const std::tuple<int, int, Complex>> entries) {
    SymSparse m(2 * n);
    for (const auto& [p, q, a] : entries) {
        const double re = 0.5 * a.real();
        const double im = 0.5 * a.imag();
        m.add(p, q, p == q ? 2.0 * re : re);
        m.add(n + p, n + q, p == q ? 2.0 * re : re);
        m.add(q, n + p, im);
        m.add(p, n + q, -im);
    }
    m.finalize();
    return m;
}

SymSparse reactive_form(int n, std::span<const std::tuple<int, int, Complex>> entries) {
    SymSparse m(2 * n);
    for (const auto& [p, q, a] : entries) {
        const double re = 0.5 * a.real();
        const double im = 0.5 * a.imag();
        m.add(p, q, p == q ? -2.0 * im : -im);
        m.add(n + p, n + q, p == q ? -2.0 * im : -im);
        m.add(p, n + q, -re);
        m.add(q, n + p, re);
    }
    m.finalize();
    return m;
}

MeasurementMatrixSet MeasurementMatrixSet::build(const NetworkModel& model) {
    MeasurementMatrixSet s;
    const int n = model.node_count();
    s.n_ = n;
    s.p_inj_.reserve(n);
    s.q_inj_.reserve(n);
    s.vsq_.reserve(n);

    // Y_k = e_k e_kᵀ Ybus: row k of the admittance matrix.
    std::vector<std::vector<std::tuple<int, int, Complex>>> rows(n);
    const auto& y = model.ybus();
    for (int col = 0; col < y.outerSize(); ++col)
        for (ComplexSparse::InnerIterator it(y, col); it; ++it)
            rows[it.row()].emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                        it.value());
    for (int k = 0; k < n; ++k) {
        s.p_inj_.push_back(active_form(n, rows[k]));
        s.q_inj_.push_back(reactive_form(n, rows[k]));
        SymSparse m(2 * n);
        m.add(k, k, 1.0);
        m.add(n + k, n + k, 1.0);
        m.finalize();
        s.vsq_.push_back(std::move(m));
    }

    // Power drawn by l from branch (l, m): with y = Ybus(l, m) = -y_series and
    // shunt ys at l, the complex matrix is (y - ys) e_l e_lᵀ - y e_l e_mᵀ.
    for (int b : model.closed_branches()) {
        const auto& br = model.branches()[b];
        const Complex ybus_lm = -br.series_admittance;
        for (int dir = 0; dir < 2; ++dir) {
            const int l = dir == 0 ? br.from_node : br.to_node;
            const int m = dir == 0 ? br.to_node : br.from_node;
            const std::tuple<int, int, Complex> ent[] = {
                {l, l, ybus_lm - br.shunt_admittance}, {l, m, -ybus_lm}};
            s.dir_[{l, m}] = static_cast<int>(s.p_flow_.size());
            s.p_flow_.push_back(active_form(n, ent));
            s.q_flow_.push_back(reactive_form(n, ent));
        }
    }
    return s;
}

const SymSparse& MeasurementMatrixSet::p_flow(int l, int m) const {
    auto it = dir_.find({l, m});
    if (it == dir_.end()) throw ValidationError("no closed branch between the given nodes");
    return p_flow_[it->second];
}

const SymSparse& MeasurementMatrixSet::q_flow(int l, int m) const {
    auto it = dir_.find({l, m});
    if (it == dir_.end()) throw ValidationError("no closed branch between the given nodes");
    return q_flow_[it->second];
}

double eval_measurement(const SymSparse& a, const Eigen::VectorXd& x) {
    if (a.dim() != x.size())
        throw ValidationError("dimension mismatch: matrix is " + std::to_string(a.dim()) +
                              ", state is " + std::to_string(x.size()));
    return a.quadratic(x);
}

VariableCounts count_variables(long long nodes, long long branches) {
    return VariableCounts{nodes * (2 * nodes + 1), 3 * nodes + 4 * branches, 3 * nodes + 4 * branches,
                          nodes + 2 * branches};
}

ExtractedState extract_state(const Eigen::MatrixXd& w, std::span<const int> anchors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (w + w.transpose()));
    if (es.info() != Eigen::Success) throw SolverError("eigendecomposition of W failed");
    const auto d = w.rows();
    const double l1 = es.eigenvalues()[d - 1];
    if (!(l1 > 0.0)) throw SolverError("degenerate W: leading eigenvalue is not positive");
    const double l2 = d > 1 ? std::max(0.0, es.eigenvalues()[d - 2]) : 0.0;
    ExtractedState out;
    out.x = std::sqrt(l1) * es.eigenvectors().col(d - 1);
    out.rank1_ratio = l2 / l1;
    const auto n = d / 2;
    double ref = 0.0;
    if (!anchors.empty()) ref = out.x[anchors.front()];
    if (ref == 0.0) {
        // Fall back to the largest-magnitude real part.
        Eigen::Index idx = 0;
        out.x.head(n).cwiseAbs().maxCoeff(&idx);
        ref = out.x[idx];
    }
    if (ref < 0.0) out.x = -out.x;
    return out;
}

}  // namespace sdpse
