#pragma once

#include <json.hpp>
#include <string>

#include "spnmkl/kernel_engine.hpp"

namespace spnmkl::detail {

inline nlohmann::json kernel_json(const KernelSpec& s) {
  nlohmann::json j = {{"family", to_string(s.family)}, {"normalize", s.normalize}};
  if (s.family == KernelFamily::polynomial) {
    j["degree"] = s.degree;
    j["coef"] = s.coef;
  }
  if (s.family == KernelFamily::rbf) j["gamma"] = s.gamma;
  return j;
}

inline KernelSpec kernel_from_json(const std::string& name, const nlohmann::json& j) {
  KernelSpec s;
  s.name = name;
  s.family = kernel_family_from_string(j.at("family").get<std::string>());
  s.normalize = j.value("normalize", true);
  s.degree = j.value("degree", 2);
  s.coef = j.value("coef", 1.0);
  s.gamma = j.value("gamma", 1.0);
  s.validate();
  return s;
}

}  // namespace spnmkl::detail
