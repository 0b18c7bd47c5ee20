#pragma once

#include "dmae/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace dmae {

class RaggedRows : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Feature matrix plus integer labels (-1 when unknown).
struct LabeledDataset {
  Matrix x;
  Labels y;
  std::string name;
  nlohmann::json metadata = nlohmann::json::object();

  Eigen::Index size() const { return x.rows(); }
  /// Number of distinct non-negative labels (max label + 1).
  int classes() const;
};

/// How the rotation of a pinwheel sample grows with its radius u:
/// rate * exp(u) as in the usual reference generator, or rate * u.
enum class PinwheelTwist { Exponential, Linear };

/// Five (by default) radially stretched Gaussian arms, each sample rotated
/// by its arm's base angle plus a radius-dependent twist.
LabeledDataset gen_pinwheel(int n_per_arm, int arms = 5, double radial_std = 0.3,
                            double angular_std = 0.05, double rate = 0.25,
                            std::uint64_t seed = 0,
                            PinwheelTwist twist = PinwheelTwist::Exponential);

/// Fixed blob centers on the unit flat torus; at least one blob straddles
/// the boundary. Samples are wrapped modulo 1 per coordinate.
inline const Matrix& toroidal_centers() {
  static const Matrix centers = (Matrix(4, 2) << 0.0, 0.5, 0.5, 0.0, 0.5, 0.5, 0.95, 0.95)
                                    .finished();
  return centers;
}

LabeledDataset gen_toroidal(int n_per_blob, int blobs = 4, double sigma = 0.05,
                            std::uint64_t seed = 0, Eigen::Vector2d center_shift = {0.0, 0.0});

/// Two interleaving half circles; class 0 is the upper arc centred at the origin.
LabeledDataset gen_moons(int n, double noise_std = 0.1, std::uint64_t seed = 0);

/// Outer circle of radius 1 (class 0) and inner circle of radius
/// radius_factor (class 1).
LabeledDataset gen_circles(int n, double noise_std = 0.1, double radius_factor = 0.1,
                           std::uint64_t seed = 0);

/// x - floor(x), mapped into [0, 1).
double wrap_unit(double v);

/// Reads a numeric CSV. The first line is a header when none of its cells
/// is numeric. `label_column` is a header name or a 0-based column index.
/// Errors report 1-based data rows and columns.
LabeledDataset load_csv(const std::filesystem::path& path,
                        const std::optional<std::string>& label_column = std::nullopt);

/// Header x0..x{m-1},label; values at 17 significant digits.
void write_csv(const LabeledDataset& data, const std::filesystem::path& path);

/// "pin.csv" -> "pin.meta.json".
std::filesystem::path metadata_path(const std::filesystem::path& csv_path);

}  // namespace dmae
