#pragma once

/// \file
/// JSON form of WeightSpec. Schema: docs/weight_spec.schema.json.

#include <nlohmann/json.hpp>

#include "cavlab/weights.hpp"

namespace cavlab {

inline nlohmann::json to_json(const WeightSpec& s) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(s.kind()));
  j["dim"] = s.dim();
  j["alpha"] = s.alpha();
  j["tau0"] = s.tau0();
  switch (s.kind()) {
    case WeightKind::Constant: j["value"] = s.constant_value(); break;
    case WeightKind::PowerSubspace: j["codim"] = s.codim(); break;
    case WeightKind::AnisotropicProduct: j["per_axis_exponents"] = s.per_axis_exponents(); break;
    case WeightKind::TwoCone:
      j["codim"] = s.codim();
      j["cone_exponents"] = {s.cone_exponents().first, s.cone_exponents().second};
      break;
    case WeightKind::AngularModulated:
      j["codim"] = s.codim();
      j["angular_profile"] = {{"n_azimuth", s.angular_profile().n_azimuth},
                              {"n_polar", s.angular_profile().n_polar},
                              {"values", s.angular_profile().values}};
      break;
    case WeightKind::Perturbed: {
      const auto& p = s.perturbation();
      j["base"] = to_json(s.base());
      j["perturbation"] = {{"theta_amplitude", p.theta_amplitude},
                           {"theta_frequency", p.theta_frequency},
                           {"g_coefficient", p.g_coefficient},
                           {"g_exponent", p.g_exponent}};
      break;
    }
  }
  nlohmann::json sing = nlohmann::json::array();
  for (const auto& c : s.singular_set()) sing.push_back(c.axes);
  j["singular_set"] = sing;
  return j;
}

/// Parses a weight description. "alpha" and "singular_set" are derived for
/// the product kinds and ignored on input; "tau0" is optional.
inline WeightSpec weight_from_json(const nlohmann::json& j) {
  try {
    const WeightKind kind = weight_kind_from_string(j.at("kind").get<std::string>());
    auto dim = [&] { return j.at("dim").get<int>(); };
    WeightSpec s = [&] {
      switch (kind) {
        case WeightKind::Constant: return WeightSpec::constant(dim(), j.value("value", 1.0));
        case WeightKind::PowerSubspace:
          return WeightSpec::power_subspace(dim(), j.at("codim").get<int>(), j.at("alpha").get<double>());
        case WeightKind::AnisotropicProduct:
          return WeightSpec::anisotropic(j.at("per_axis_exponents").get<std::vector<double>>());
        case WeightKind::TwoCone: {
          const auto e = j.at("cone_exponents").get<std::vector<double>>();
          if (e.size() != 2) throw InvalidSpec("cone_exponents needs two entries");
          return WeightSpec::two_cone(dim(), j.at("codim").get<int>(), e[0], e[1]);
        }
        case WeightKind::AngularModulated: {
          const auto& pj = j.at("angular_profile");
          AngularProfile p;
          p.n_azimuth = pj.at("n_azimuth").get<int>();
          p.n_polar = pj.value("n_polar", 1);
          p.values = pj.at("values").get<std::vector<double>>();
          return WeightSpec::angular(dim(), j.at("codim").get<int>(), j.at("alpha").get<double>(), p);
        }
        case WeightKind::Perturbed: {
          const auto& pj = j.at("perturbation");
          Perturbation p;
          p.theta_amplitude = pj.value("theta_amplitude", 0.0);
          p.theta_frequency = pj.value("theta_frequency", 0.0);
          p.g_coefficient = pj.value("g_coefficient", 0.0);
          p.g_exponent = pj.value("g_exponent", 0.0);
          return WeightSpec::perturbed(weight_from_json(j.at("base")), p);
        }
      }
      throw InvalidSpec("unhandled weight kind");
    }();
    if (j.contains("dim") && j.at("dim").get<int>() != s.dim()) throw InvalidSpec("dim disagrees with exponents");
    if (j.contains("tau0")) s = s.with_tau0(j.at("tau0").get<double>());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpec(std::string("malformed weight description: ") + e.what());
  }
}

}  // namespace cavlab
