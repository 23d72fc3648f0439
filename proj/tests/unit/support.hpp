#ifndef COMPART_TESTS_SUPPORT_HPP
#define COMPART_TESTS_SUPPORT_HPP

#include "compart/model.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace testsupport {

inline std::string fixture_path(const std::string& name) {
  return std::string(COMPART_FIXTURES) + "/models/" + name + ".json";
}

inline compart::CompartmentalModel model(const std::string& name) {
  return compart::load_model_file(fixture_path(name));
}

inline std::shared_ptr<const compart::CompartmentalModel> shared(compart::CompartmentalModel m) {
  return std::make_shared<const compart::CompartmentalModel>(std::move(m));
}

inline const char* kGaussian = "exp(-(t-15)^2/2)+0.1";

inline compart::CompartmentalModel hippe_periodic() {
  return compart::with_inputs(model("hippe"), {"3+sin(t)", "3+sin(2*t)"});
}

inline compart::CompartmentalModel hallam_gaussian() {
  return compart::with_inputs(model("hallam"), {"1", kGaussian, "1"});
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testsupport

#endif
