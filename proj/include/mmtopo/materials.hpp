#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <variant>
#include <vector>

namespace mmtopo {

inline constexpr double kMu0 = 4.0e-7 * 3.14159265358979323846;
inline constexpr double kNu0 = 1.0 / kMu0;

// Material laws are written in the polarization form B = mu0 H + Jp(B).

/// Constant polarization and current density (air, magnets, conductors).
struct ConstantLaw {
  Eigen::Vector2d polarization = Eigen::Vector2d::Zero();
};

/// Jp = slope * B. Linearized iron; used for linear test cases.
struct LinearLaw {
  double slope = 0.0;
};

/// Isotropic Froelich-type saturation: |Jp| = Js a b / (Js + a b).
struct FroelichLaw {
  double saturation = 1.9;
  double initial_slope = 0.999;

  double magnitude(double b) const { return saturation * initial_slope * b / (saturation + initial_slope * b); }
  double magnitude_derivative(double b) const {
    const double d = saturation + initial_slope * b;
    return initial_slope * saturation * saturation / (d * d);
  }
};

class MaterialModel {
 public:
  using Law = std::variant<ConstantLaw, LinearLaw, FroelichLaw>;

  MaterialModel(std::string name, Law law, double current_density);

  const std::string& name() const noexcept { return name_; }
  const Law& law() const noexcept { return law_; }
  double current_density() const noexcept { return current_density_; }
  bool linear() const noexcept { return !std::holds_alternative<FroelichLaw>(law_); }

  Eigen::Vector2d polarization(const Eigen::Vector2d& b) const;
  Eigen::Matrix2d d_polarization_dB(const Eigen::Vector2d& b) const;

 private:
  std::string name_;
  Law law_;
  double current_density_ = 0.0;
};

/// Ideal magnet, relative permeability 1, polarization of `remanence` along angle_deg.
MaterialModel pm_model(double angle_deg, double remanence = 1.0);
/// Throws InvalidParameters unless 0 < a < 1 and Js > 0.
MaterialModel steel_model(double saturation = 1.9, double initial_slope = 0.999);
MaterialModel linear_iron_model(double slope = 0.999);
MaterialModel conductor_model(int sign, double magnitude = 1.0e7);
MaterialModel air_model();
/// Arbitrary constant leaf; handy for scalar interpolation checks.
MaterialModel constant_model(std::string name, Eigen::Vector2d polarization, double current_density);

struct CatalogueParameters {
  double remanence = 1.0;
  int pm_orientations = 12;
  double current_density = 1.0e7;
  double steel_saturation = 1.9;
  double steel_initial_slope = 0.999;
};

struct MaterialCatalogue {
  std::vector<MaterialModel> entries;
  std::vector<std::array<double, 3>> colors;  // RGB in [0,1]

  std::size_t size() const noexcept { return entries.size(); }
  /// Index of the entry with the given name, or -1.
  int index_of(const std::string& name) const;
  const MaterialModel& at(const std::string& name) const;
};

/// [PM 0deg, PM 30deg, ..., PM 330deg, cond+, cond-, steel, air]
MaterialCatalogue default_catalogue(const CatalogueParameters& params = {});

std::string pm_name(int index);

}  // namespace mmtopo
