#include "mmtopo/materials.hpp"

#include "mmtopo/error.hpp"

#include <cmath>
#include <numbers>

namespace mmtopo {

MaterialModel::MaterialModel(std::string name, Law law, double current_density)
    : name_(std::move(name)), law_(std::move(law)), current_density_(current_density) {}

Eigen::Vector2d MaterialModel::polarization(const Eigen::Vector2d& b) const {
  return std::visit(
      [&](const auto& law) -> Eigen::Vector2d {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, ConstantLaw>) {
          return law.polarization;
        } else if constexpr (std::is_same_v<T, LinearLaw>) {
          return law.slope * b;
        } else {
          const double norm = b.norm();
          if (norm == 0.0) return Eigen::Vector2d::Zero();
          return law.magnitude(norm) / norm * b;
        }
      },
      law_);
}

Eigen::Matrix2d MaterialModel::d_polarization_dB(const Eigen::Vector2d& b) const {
  return std::visit(
      [&](const auto& law) -> Eigen::Matrix2d {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, ConstantLaw>) {
          return Eigen::Matrix2d::Zero();
        } else if constexpr (std::is_same_v<T, LinearLaw>) {
          return law.slope * Eigen::Matrix2d::Identity();
        } else {
          const double norm = b.norm();
          // jp(b)/b -> a as b -> 0; the secant slope has a removable singularity.
          if (norm < 1e-12) return law.initial_slope * Eigen::Matrix2d::Identity();
          const Eigen::Vector2d u = b / norm;
          const Eigen::Matrix2d uu = u * u.transpose();
          const double secant = law.saturation * law.initial_slope / (law.saturation + law.initial_slope * norm);
          return law.magnitude_derivative(norm) * uu + secant * (Eigen::Matrix2d::Identity() - uu);
        }
      },
      law_);
}

std::string pm_name(int index) { return "pm" + std::to_string(index); }

MaterialModel pm_model(double angle_deg, double remanence) {
  const double t = angle_deg * std::numbers::pi / 180.0;
  ConstantLaw law{Eigen::Vector2d(remanence * std::cos(t), remanence * std::sin(t))};
  return MaterialModel("pm@" + std::to_string(angle_deg), law, 0.0);
}

MaterialModel steel_model(double saturation, double initial_slope) {
  if (!(saturation > 0.0) || !(initial_slope > 0.0) || !(initial_slope < 1.0)) {
    throw Error(Errc::InvalidParameters, "steel law needs Js > 0 and 0 < a < 1");
  }
  return MaterialModel("steel", FroelichLaw{saturation, initial_slope}, 0.0);
}

MaterialModel linear_iron_model(double slope) {
  if (!(slope >= 0.0) || !(slope < 1.0)) throw Error(Errc::InvalidParameters, "linear iron needs 0 <= slope < 1");
  return MaterialModel("linear_iron", LinearLaw{slope}, 0.0);
}

MaterialModel conductor_model(int sign, double magnitude) {
  if (sign != 1 && sign != -1) throw Error(Errc::InvalidParameters, "conductor sign must be +1 or -1");
  return MaterialModel(sign > 0 ? "cond+" : "cond-", ConstantLaw{}, sign * magnitude);
}

MaterialModel air_model() { return MaterialModel("air", ConstantLaw{}, 0.0); }

MaterialModel constant_model(std::string name, Eigen::Vector2d polarization, double current_density) {
  return MaterialModel(std::move(name), ConstantLaw{polarization}, current_density);
}

int MaterialCatalogue::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].name() == name) return static_cast<int>(i);
  return -1;
}

const MaterialModel& MaterialCatalogue::at(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw Error(Errc::InvalidConfig, "unknown material '" + name + "'");
  return entries[static_cast<std::size_t>(i)];
}

MaterialCatalogue default_catalogue(const CatalogueParameters& params) {
  if (params.pm_orientations < 1) throw Error(Errc::InvalidParameters, "need at least one magnet orientation");
  MaterialCatalogue cat;
  for (int k = 0; k < params.pm_orientations; ++k) {
    const double angle = 360.0 * k / params.pm_orientations;
    const double t = angle * std::numbers::pi / 180.0;
    ConstantLaw law{Eigen::Vector2d(params.remanence * std::cos(t), params.remanence * std::sin(t))};
    cat.entries.emplace_back(pm_name(k), law, 0.0);
    // Hue wheel keyed to the magnetization angle.
    const double hue = angle / 60.0;
    const double x = 1.0 - std::abs(std::fmod(hue, 2.0) - 1.0);
    std::array<double, 3> rgb{};
    switch (static_cast<int>(hue) % 6) {
      case 0: rgb = {1, x, 0}; break;
      case 1: rgb = {x, 1, 0}; break;
      case 2: rgb = {0, 1, x}; break;
      case 3: rgb = {0, x, 1}; break;
      case 4: rgb = {x, 0, 1}; break;
      default: rgb = {1, 0, x}; break;
    }
    cat.colors.push_back(rgb);
  }
  cat.entries.push_back(conductor_model(+1, params.current_density));
  cat.colors.push_back({0.85, 0.45, 0.1});
  cat.entries.push_back(conductor_model(-1, params.current_density));
  cat.colors.push_back({0.45, 0.2, 0.6});
  cat.entries.push_back(steel_model(params.steel_saturation, params.steel_initial_slope));
  cat.colors.push_back({0.35, 0.35, 0.35});
  cat.entries.push_back(air_model());
  cat.colors.push_back({1.0, 1.0, 1.0});
  return cat;
}

}  // namespace mmtopo
