#include "compart/interact.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace compart {

namespace {

std::string lower(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

FlowScope scope_of(Source s) {
  switch (s) {
    case Source::Composite: return FlowScope::composite();
    case Source::Simple: return FlowScope::simple();
    case Source::InitialSubsystem: return FlowScope::of_subsystem(0);
  }
  return FlowScope::composite();
}

int sign_of(double v, double eps) { return v > eps ? 1 : (v < -eps ? -1 : 0); }

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

std::string_view basis_name(Basis b) { return b == Basis::Flow ? "flow" : "storage"; }

std::string_view source_name(Source s) {
  switch (s) {
    case Source::Composite: return "composite";
    case Source::Simple: return "simple";
    case Source::InitialSubsystem: return "initial-subsystem";
  }
  return "?";
}

std::string_view normalization_name(Normalization n) {
  switch (n) {
    case Normalization::PairwiseDiact: return "pairwise-diact";
    case Normalization::PairwiseTransfer: return "pairwise-transfer";
    case Normalization::PairwiseThroughflow: return "pairwise-throughflow";
    case Normalization::GlobalThroughflow: return "global-throughflow";
  }
  return "?";
}

Basis parse_basis(std::string_view text) {
  const std::string s = lower(text);
  if (s == "flow") return Basis::Flow;
  if (s == "storage") return Basis::Storage;
  throw ValidationError("interact", "unknown basis '" + std::string(text) + "'");
}

Source parse_source(std::string_view text) {
  const std::string s = lower(text);
  for (Source v : {Source::Composite, Source::Simple, Source::InitialSubsystem})
    if (s == source_name(v)) return v;
  if (s == "initial") return Source::InitialSubsystem;
  throw ValidationError("interact", "unknown source '" + std::string(text) + "'");
}

Normalization parse_normalization(std::string_view text) {
  const std::string s = lower(text);
  for (Normalization v : {Normalization::PairwiseDiact, Normalization::PairwiseTransfer,
                          Normalization::PairwiseThroughflow, Normalization::GlobalThroughflow})
    if (s == normalization_name(v)) return v;
  throw ValidationError("interact", "unknown normalization '" + std::string(text) + "'");
}

std::string_view sign_label(int sign) {
  if (sign > 0) return "predation";
  if (sign == 0) return "neutral";
  return "";
}

DiactSeries flow_series(const PartitionTrajectory& p, const std::vector<DiactKind>& kinds, Source source,
                        const std::vector<double>& grid) {
  DiactSeries d;
  d.basis = Basis::Flow;
  d.source = source;
  d.times = grid;
  for (DiactKind k : kinds) d.values[k];
  for (double t : grid) {
    const SubthroughflowSet s = p.subthroughflows(t);
    for (DiactKind k : kinds) d.values[k].push_back(diact_flows(s, k, scope_of(source)));
    d.totals.push_back(s.flows.tau_in);
  }
  return d;
}

DiactSeries storage_series(const PartitionTrajectory& p, const std::vector<DiactKind>& kinds, Source source, double t1,
                           const std::vector<double>& grid, const IntegratorConfig& config) {
  DiactStorageSeries st = diact_storages(p, kinds, scope_of(source), t1, grid, config);
  DiactSeries d;
  d.basis = Basis::Storage;
  d.source = source;
  d.times = grid;
  for (std::size_t k = 0; k < kinds.size(); ++k) d.values[kinds[k]] = std::move(st.values[k]);
  for (double t : grid) d.totals.push_back(p.state(t).aggregate());
  return d;
}

InteractionReport classify(const DiactSeries& series, std::pair<std::size_t, std::size_t> pair, DiactKind kind,
                           Normalization normalization) {
  auto it = series.values.find(kind);
  if (it == series.values.end())
    throw ValidationError("interact", "diact kind '" + std::string(kind_name(kind)) + "' not computed");
  const std::vector<Matrix>* transfer = nullptr;
  if (normalization == Normalization::PairwiseTransfer) {
    auto tr = series.values.find(DiactKind::Transfer);
    if (tr == series.values.end())
      throw ValidationError("interact", "pairwise-transfer normalization needs the transfer kind");
    transfer = &tr->second;
  }
  const std::size_t m = series.times.size();
  if (it->second.size() != m || series.totals.size() != m || (transfer && transfer->size() != m))
    throw ValidationError("interact", "diact series and grid have mismatched lengths");
  const auto [i, j] = pair;
  if (i == 0 || j == 0) throw ValidationError("interact", "pair indices are 1-based");

  InteractionReport r;
  r.pair = pair;
  r.kind = kind;
  r.basis = series.basis;
  r.source = series.source;
  r.normalization = normalization;
  r.times = series.times;
  for (std::size_t q = 0; q < m; ++q) {
    const Matrix& M = it->second[q];
    const Vector& tot = series.totals[q];
    if (i > static_cast<std::size_t>(M.rows()) || j > static_cast<std::size_t>(M.rows()))
      throw ValidationError("interact", "pair index out of range");
    const auto a = static_cast<Eigen::Index>(i) - 1, b = static_cast<Eigen::Index>(j) - 1;
    const double net = M(a, b) - M(b, a);
    double den = 0.0;
    switch (normalization) {
      case Normalization::PairwiseDiact: den = std::abs(M(a, b)) + std::abs(M(b, a)); break;
      case Normalization::PairwiseTransfer: den = std::abs((*transfer)[q](a, b)) + std::abs((*transfer)[q](b, a)); break;
      case Normalization::PairwiseThroughflow: den = tot(a) + tot(b); break;
      case Normalization::GlobalThroughflow: den = tot.sum(); break;
    }
    const int sg = sign_of(net, throughflow_epsilon(tot));
    r.net.push_back(net);
    r.sign.push_back(sg);
    r.strength.push_back(sg == 0 ? 0.0 : ratio(std::abs(net), den));
  }
  return r;
}

TransientInteraction transient_interaction(const PartitionTrajectory& p, const TransientRecord& forward,
                                           const TransientRecord& backward) {
  if (forward.nodes.empty() || backward.nodes.empty())
    throw ValidationError("interact", "transient chain has no storage nodes");
  if (forward.times != backward.times) throw ValidationError("interact", "transient records use different grids");
  const NodeSeries& fi = forward.nodes.back();
  const NodeSeries& bj = backward.nodes.back();
  const std::size_t i = fi.compartment, j = bj.compartment;
  if (i == j) throw ValidationError("interact", "chains must end at different compartments");
  TransientInteraction r;
  r.pair = {i, j};
  r.times = forward.times;
  for (std::size_t q = 0; q < r.times.size(); ++q) {
    const Vector tau_in = p.subthroughflows(r.times[q]).flows.tau_in;
    const double net = fi.inflow[q] - bj.inflow[q];
    const int sg = sign_of(net, throughflow_epsilon(tau_in));
    r.net.push_back(net);
    r.sign.push_back(sg);
    r.strength.push_back(
        sg == 0 ? 0.0 : ratio(std::abs(net), tau_in(static_cast<Eigen::Index>(i) - 1) + tau_in(static_cast<Eigen::Index>(j) - 1)));
  }
  return r;
}

}  // namespace compart
