#ifndef COMPART_INTERACT_HPP
#define COMPART_INTERACT_HPP

#include "compart/diact.hpp"
#include "compart/pathflow.hpp"

#include <map>
#include <string_view>
#include <utility>
#include <vector>

/// Sign and strength of pairwise diact interactions.
namespace compart {

enum class Basis { Flow, Storage };
enum class Source { Composite, Simple, InitialSubsystem };
enum class Normalization { PairwiseDiact, PairwiseTransfer, PairwiseThroughflow, GlobalThroughflow };

std::string_view basis_name(Basis b);
std::string_view source_name(Source s);
std::string_view normalization_name(Normalization n);
Basis parse_basis(std::string_view text);
Source parse_source(std::string_view text);
Normalization parse_normalization(std::string_view text);

/// Diact matrices of several kinds on one grid, with the per-compartment
/// totals used by the throughflow normalizations (inward throughflow for the
/// flow basis, storage for the storage basis).
struct DiactSeries {
  Basis basis = Basis::Flow;
  Source source = Source::Composite;
  std::vector<double> times;
  std::map<DiactKind, std::vector<Matrix>> values;
  std::vector<Vector> totals;
};

/// Flow basis: diact flows sampled directly at the grid times.
DiactSeries flow_series(const PartitionTrajectory& p, const std::vector<DiactKind>& kinds, Source source,
                        const std::vector<double>& grid);

/// Storage basis: diact storages accumulated from t1.
DiactSeries storage_series(const PartitionTrajectory& p, const std::vector<DiactKind>& kinds, Source source, double t1,
                           const std::vector<double>& grid, const IntegratorConfig& config = {});

struct InteractionReport {
  std::pair<std::size_t, std::size_t> pair;  // (i, j), 1-based
  DiactKind kind = DiactKind::Transfer;
  Basis basis = Basis::Flow;
  Source source = Source::Composite;
  Normalization normalization = Normalization::PairwiseThroughflow;
  std::vector<double> times;
  std::vector<int> sign;         // +1, 0, -1
  std::vector<double> strength;  // 0 when the denominator vanishes
  std::vector<double> net;       // value_ij - value_ji
};

/// "predation" for +, "neutral" for 0, empty otherwise.
std::string_view sign_label(int sign);

InteractionReport classify(const DiactSeries& series, std::pair<std::size_t, std::size_t> pair, DiactKind kind,
                           Normalization normalization = Normalization::PairwiseThroughflow);

struct TransientInteraction {
  std::pair<std::size_t, std::size_t> pair;  // (i, j): forward chain ends at i, backward chain at j
  std::vector<double> times;
  std::vector<int> sign;
  std::vector<double> strength;  // normalized by inward throughflows of i and j
  std::vector<double> net;
};

/// Compares the inflow reaching the end of the forward chain j -> ... -> i
/// with that reaching the end of the backward chain i -> ... -> j.
TransientInteraction transient_interaction(const PartitionTrajectory& p, const TransientRecord& forward,
                                           const TransientRecord& backward);

}  // namespace compart

#endif
