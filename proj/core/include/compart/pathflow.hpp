#ifndef COMPART_PATHFLOW_HPP
#define COMPART_PATHFLOW_HPP

#include "compart/partition.hpp"

#include <limits>
#include <string>
#include <string_view>
#include <vector>

/// Transient flows and storages along subflow paths.
///
/// Path specs (see docs/paths.md):
///   spec    = header ":" node { "->" node } [ ";" option ] ;
///   header  = "k" "=" integer [ "," option ] ;
///   option  = "cycles" "=" integer ;
///   node    = integer | compartment-name ;
/// Node 0 is the environment: as head it is the environmental input, as
/// tail the environmental output. The first link is the local-input link.
namespace compart {

struct SubflowPath {
  std::size_t subsystem = 0;       // k, 0 = initial subsystem
  std::vector<std::size_t> nodes;  // 0 = environment, otherwise 1-based compartment
  std::size_t cycles = 6;          // m_w, used by cumulative_transient

  bool exits() const { return !nodes.empty() && nodes.back() == 0; }
  /// Positions in `nodes` that carry storage (every compartment after the head).
  std::vector<std::size_t> storage_positions() const;
};

SubflowPath parse_path(std::string_view spec, const CompartmentalModel& model);
std::string to_string(const SubflowPath& path);

enum class SolveMode { Simultaneous, PostHoc };

struct TransientOptions {
  double t1 = std::numeric_limits<double>::quiet_NaN();  // NaN selects the partition's t0
  SolveMode mode = SolveMode::Simultaneous;
  IntegratorConfig integrator;
  std::vector<double> grid;  // empty selects 201 uniform points on [t1, t_end]
};

/// Series at one storage-carrying node. Index m of every vector matches
/// TransientRecord::times[m].
struct NodeSeries {
  std::size_t position = 0;     // index in SubflowPath::nodes
  std::size_t compartment = 0;  // 1-based
  std::vector<double> inflow;
  std::vector<double> storage;
  std::vector<double> outflow;  // link flow to the next node; empty at the terminal node
  std::vector<double> leaving;  // (tau_out/x) * storage: leaves the node by any route
};

struct TransientRecord {
  SubflowPath path;
  double t1 = 0.0;
  std::vector<double> times;
  std::vector<NodeSeries> nodes;
  /// Outflow of the last compartment node into the environment (exit paths only).
  const std::vector<double>& exit_flow() const;
};

TransientRecord transient_flows(const PartitionTrajectory& partition, const SubflowPath& path,
                                const TransientOptions& options = {});

struct CumulativeRecord {
  SubflowPath unrolled;                  // path after unrolling
  std::size_t designated = 0;            // 1-based compartment whose visits are summed
  std::vector<std::size_t> visits;       // counted positions in unrolled.nodes
  std::vector<double> times;
  std::vector<double> inflow, storage, outflow;
};

/// Unrolls a closed path until its designated (last) node has been reached
/// `path.cycles` times through transient links. A path that never returns is
/// left as is and its terminal node is the only counted visit.
SubflowPath unroll(const SubflowPath& path, std::vector<std::size_t>& counted);

CumulativeRecord cumulative_transient(const PartitionTrajectory& partition, const SubflowPath& path,
                                      const TransientOptions& options = {});

}  // namespace compart

#endif
