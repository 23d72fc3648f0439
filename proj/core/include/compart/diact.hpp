#ifndef COMPART_DIACT_HPP
#define COMPART_DIACT_HPP

#include "compart/partition.hpp"
#include "compart/staticnet.hpp"

#include <array>
#include <functional>
#include <string_view>
#include <vector>

/// Direct, indirect, acyclic, cycling and transfer (diact) flows and storages.
namespace compart {

enum class DiactKind { Direct, Indirect, Acyclic, Cycling, Transfer };

inline constexpr std::array<DiactKind, 5> kAllDiactKinds{DiactKind::Direct, DiactKind::Indirect, DiactKind::Acyclic,
                                                         DiactKind::Cycling, DiactKind::Transfer};

std::string_view kind_name(DiactKind kind);
char kind_letter(DiactKind kind);
/// Accepts the full name or its first letter.
DiactKind parse_kind(std::string_view text);

/// Column guard shared with the interaction signs.
double throughflow_epsilon(const Vector& tau_out);

struct Distribution {
  Matrix N;
  std::vector<bool> flagged;  // columns zeroed because the subsystem's own outflow is negligible
};

/// Dynamic flow distribution matrix N*(t).
Distribution diact_distribution(const SubthroughflowSet& s, DiactKind kind);
Distribution diact_distribution(const PartitionTrajectory& p, double t, DiactKind kind);

/// Which columns scale the distribution matrix.
struct FlowScope {
  enum class Type { Composite, Subsystem, Simple };
  Type type = Type::Composite;
  std::size_t subsystem = 0;  // for Type::Subsystem; 0 is the initial subsystem

  static FlowScope composite() { return {Type::Composite, 0}; }
  static FlowScope simple() { return {Type::Simple, 0}; }
  static FlowScope of_subsystem(std::size_t l) { return {Type::Subsystem, l}; }
};

/// Composite: N*(T - T0). Subsystem l: N* diag(T_out(:, l)). Simple: N* diag(diag T_out).
Matrix diact_flows(const SubthroughflowSet& s, DiactKind kind, FlowScope scope);
Matrix diact_flows(const PartitionTrajectory& p, double t, DiactKind kind, FlowScope scope);

/// Scalar flow series tau*(t) feeding one storage.
using FlowSeries = std::function<double(double)>;

/// Solves x' = tau*(t) - (tau_out_i / x_i) x, x(t1) = 0, and returns x(t).
double diact_storage(const PartitionTrajectory& p, const FlowSeries& tau, std::size_t i, double t1, double t,
                     const IntegratorConfig& config = {});

/// Same storage from integral of exp(-integral of tau_out_i/x_i) tau*(s) ds, by
/// composite Gauss-Legendre quadrature.
double diact_storage_quadrature(const PartitionTrajectory& p, const FlowSeries& tau, std::size_t i, double t1,
                                double t, std::size_t panels = 400);

/// Storages of every entry of a diact flow matrix, sampled on `grid`.
struct DiactStorageSeries {
  std::vector<double> times;
  std::vector<DiactKind> kinds;
  std::vector<std::vector<Matrix>> values;  // values[kind][time]
};

DiactStorageSeries diact_storages(const PartitionTrajectory& p, const std::vector<DiactKind>& kinds, FlowScope scope,
                                  double t1, const std::vector<double>& grid, const IntegratorConfig& config = {});

/// Table-2 quantities of the static network.
struct StaticDiact {
  DiactKind kind = DiactKind::Transfer;
  Matrix N, S, T, X, T_tilde, X_tilde;
  std::vector<Matrix> T_sub, X_sub;  // per input l = 1..n, index l-1
  Vector tau_tilde, x_tilde;         // row sums of T_tilde, X_tilde
};

StaticDiact static_diact(const StaticSolution& s, DiactKind kind);

}  // namespace compart

#endif
