#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdpse/network.hpp"

namespace sdpse {

/// Real symmetric matrix stored as its upper triangle (row <= col).
class SymSparse {
  public:
    struct Entry {
        int row;
        int col;
        double value;
    };

    SymSparse() = default;
    explicit SymSparse(int dim) : dim_(dim) {}

    int dim() const { return dim_; }
    const std::vector<Entry>& entries() const { return entries_; }

    /// Adds v to A(i,j) and, when i != j, to A(j,i) as well.
    void add(int i, int j, double v);
    /// Drops explicit zeros and sorts by (row, col).
    void finalize();

    /// x' A x.
    double quadratic(const Eigen::VectorXd& x) const;
    /// Tr(A W) for a dense symmetric W.
    double trace_with(const Eigen::MatrixXd& w) const;
    Eigen::MatrixXd dense() const;

    SymSparse& operator+=(const SymSparse& o);
    SymSparse& operator*=(double s);
    friend SymSparse operator+(SymSparse a, const SymSparse& b) { return a += b; }
    friend SymSparse operator-(SymSparse a, SymSparse b) { return a += (b *= -1.0); }
    friend SymSparse operator*(double s, SymSparse a) { return a *= s; }

    /// Largest absolute entry.
    double max_abs() const;

  private:
    int dim_ = 0;
    std::map<std::pair<int, int>, double> pending_;
    std::vector<Entry> entries_;
};

/// X = [Re V; Im V].
Eigen::VectorXd stack_state(std::span<const Complex> v);
std::vector<Complex> unstack_state(const Eigen::VectorXd& x);

/// SDP coefficient matrices for every node and every directed end of every
/// closed branch. Flow matrices give the power drawn by the near-end node
/// from the branch (negative of what it sends), so that the injection at a
/// node equals minus the sum of its flow matrices.
class MeasurementMatrixSet {
  public:
    static MeasurementMatrixSet build(const NetworkModel& model);

    int node_count() const { return n_; }
    int dim() const { return 2 * n_; }

    const SymSparse& p_inj(int k) const { return p_inj_[k]; }
    const SymSparse& q_inj(int k) const { return q_inj_[k]; }
    const SymSparse& vsq(int k) const { return vsq_[k]; }
    /// Flow drawn at node l on the closed branch joining l and m.
    const SymSparse& p_flow(int l, int m) const;
    const SymSparse& q_flow(int l, int m) const;
    bool has_branch(int l, int m) const { return dir_.count({l, m}) != 0; }

  private:
    int n_ = 0;
    std::vector<SymSparse> p_inj_, q_inj_, vsq_;
    std::vector<SymSparse> p_flow_, q_flow_;
    std::map<std::pair<int, int>, int> dir_;  // (l, m) -> slot in flow vectors
};

/// Complex entries (row, col, a) expanded into the real-part form
/// ½[[Re(A+Aᵀ), Im(Aᵀ−A)]; [Im(A−Aᵀ), Re(A+Aᵀ)]] (active power).
SymSparse active_form(int n, std::span<const std::tuple<int, int, Complex>> entries);
/// −½[[Im(A+Aᵀ), Re(A−Aᵀ)]; [Re(Aᵀ−A), Im(A+Aᵀ)]] (reactive power).
SymSparse reactive_form(int n, std::span<const std::tuple<int, int, Complex>> entries);

/// Tr(A · x xᵀ). Throws ValidationError on dimension mismatch.
double eval_measurement(const SymSparse& a, const Eigen::VectorXd& x);

struct VariableCounts {
    long long total_sym;         // N'(2N'+1)
    long long distinct;          // 3N' + 4M'
    long long max_measurements;  // 3N' + 4M'
    long long independent;       // N' + 2M'
};

VariableCounts count_variables(long long nodes, long long branches);

inline constexpr double kRankRatioAccept = 1e-4;
inline constexpr double kRankRatioReject = 0.1;

struct ExtractedState {
    Eigen::VectorXd x;
    double rank1_ratio = 0.0;
};

/// Leading eigenpair of W scaled to sqrt(lambda1); sign chosen so the first
/// anchor's real part is positive. Throws SolverError when lambda1 <= 0.
ExtractedState extract_state(const Eigen::MatrixXd& w, std::span<const int> anchors);

}  // namespace sdpse
