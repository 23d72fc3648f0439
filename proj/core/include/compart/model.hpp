#ifndef COMPART_MODEL_HPP
#define COMPART_MODEL_HPP

#include "compart/common.hpp"
#include "compart/expr.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace compart {

/// Flow regime of a model at one (t, x).
struct FlowSnapshot {
  double t = 0.0;
  Matrix F;        // F(i,j): flow from j into i
  Vector z;        // environmental inputs
  Vector y;        // environmental outputs
  Vector tau_in;   // z + F*1
  Vector tau_out;  // y + F^T*1
};

/// Compartmental system: flows, inputs and outputs as expressions of (t, x).
class CompartmentalModel {
 public:
  CompartmentalModel(std::vector<std::string> labels, std::vector<std::string> param_names, Vector param_values,
                     Vector x_init);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& param_names() const noexcept { return param_names_; }
  const Vector& param_values() const noexcept { return param_values_; }
  const Vector& x_init() const noexcept { return x_init_; }
  expr::Symbols symbols() const;

  /// Flow from compartment j into compartment i (0-based).
  const std::optional<expr::Expression>& flow(std::size_t i, std::size_t j) const { return flows_[i * size() + j]; }
  const std::optional<expr::Expression>& input(std::size_t i) const { return inputs_[i]; }
  const std::optional<expr::Expression>& output(std::size_t i) const { return outputs_[i]; }

  void set_flow(std::size_t i, std::size_t j, std::optional<expr::Expression> e);
  void set_input(std::size_t i, std::optional<expr::Expression> e);
  void set_output(std::size_t i, std::optional<expr::Expression> e);
  void set_x_init(Vector x);

  /// Parses `source` against this model's symbols.
  expr::Expression compile(std::string_view source) const;

  FlowSnapshot evaluate_flows(double t, const Vector& x) const;
  /// F only; cheaper when z and y are not needed.
  void evaluate_F(double t, const Vector& x, Matrix& F) const;
  Vector evaluate_inputs(double t, const Vector& x) const;
  Vector evaluate_outputs(double t, const Vector& x) const;
  /// Aggregate right-hand side z + F*1 - y - F^T*1.
  Vector rhs(double t, const Vector& x) const;

 private:
  double eval(const expr::Expression& e, double t, const Vector& x) const;

  std::vector<std::string> labels_;
  std::vector<std::string> param_names_;
  Vector param_values_;
  Vector x_init_;
  std::vector<std::optional<expr::Expression>> flows_;
  std::vector<std::optional<expr::Expression>> inputs_;
  std::vector<std::optional<expr::Expression>> outputs_;
};

/// Reads a model document (JSON). Throws ValidationError on schema or expression errors.
CompartmentalModel load_model(std::string_view document);
CompartmentalModel load_model_file(const std::string& path);

/// Replaces every input expression. `sources.size()` must equal n.
CompartmentalModel with_inputs(const CompartmentalModel& model, const std::vector<std::string>& sources);

enum class CheckStatus { Pass, Fail, NotRequired };

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  /// For optional checks: whether the property held, regardless of status.
  bool holds = true;
  std::vector<std::string> details;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  /// Pass unless some check has status Fail.
  bool ok() const;
  const CheckResult& check(std::string_view name) const;
};

struct Probe {
  double t = 0.0;
  Vector x;
};

struct ValidationOptions {
  bool require_strong_form = false;
  std::size_t random_probes = 8;
  unsigned seed = 12345;
};

/// x_init plus `random_probes` random positive states at random times in [0, 10].
std::vector<Probe> default_probes(const CompartmentalModel& model, const ValidationOptions& options = {});

/// Checks: "conservative", "factorable", "strong_form", "nonnegative".
ValidationReport validate_model(const CompartmentalModel& model, const std::vector<Probe>& probes,
                                const ValidationOptions& options = {});
ValidationReport validate_model(const CompartmentalModel& model, const ValidationOptions& options = {});

}  // namespace compart

#endif
