#include "dmae/data.hpp"

#include "dmae/checkpoint.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace dmae {

int LabeledDataset::classes() const {
  int top = -1;
  for (int label : y) top = std::max(top, label);
  return top + 1;
}

double wrap_unit(double v) {
  double w = v - std::floor(v);
  if (w >= 1.0) w = 0.0;
  return w;
}

LabeledDataset gen_pinwheel(int n_per_arm, int arms, double radial_std, double angular_std,
                            double rate, std::uint64_t seed, PinwheelTwist twist) {
  if (n_per_arm < 1 || arms < 1) throw ConfigError("pinwheel: counts must be positive");
  if (radial_std < 0.0 || angular_std < 0.0) throw ConfigError("pinwheel: negative std");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledDataset data;
  data.name = "pinwheel";
  data.x.resize(static_cast<Eigen::Index>(n_per_arm) * arms, 2);
  data.y.reserve(static_cast<std::size_t>(n_per_arm) * arms);
  Eigen::Index row = 0;
  for (int k = 0; k < arms; ++k) {
    const double base = 2.0 * std::numbers::pi * k / arms;
    for (int i = 0; i < n_per_arm; ++i) {
      const double u = 1.0 + radial_std * normal(rng);
      const double v = angular_std * normal(rng);
      const double angle = base + rate * (twist == PinwheelTwist::Exponential ? std::exp(u) : u);
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      data.x(row, 0) = c * u - s * v;
      data.x(row, 1) = s * u + c * v;
      data.y.push_back(k);
      ++row;
    }
  }
  data.metadata = {{"generator", "pinwheel"}, {"n_per_arm", n_per_arm}, {"arms", arms},
                   {"radial_std", radial_std}, {"angular_std", angular_std},
                   {"rate", rate},
                   {"twist", twist == PinwheelTwist::Exponential ? "exponential" : "linear"},
                   {"seed", seed}};
  return data;
}

LabeledDataset gen_toroidal(int n_per_blob, int blobs, double sigma, std::uint64_t seed,
                            Eigen::Vector2d center_shift) {
  const Matrix& centers = toroidal_centers();
  if (n_per_blob < 1) throw ConfigError("toroidal: n_per_blob must be positive");
  if (blobs < 1 || blobs > centers.rows()) throw ConfigError("toroidal: blobs must be in [1, 4]");
  if (sigma < 0.0) throw ConfigError("toroidal: negative sigma");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledDataset data;
  data.name = "toroidal";
  data.x.resize(static_cast<Eigen::Index>(n_per_blob) * blobs, 2);
  Eigen::Index row = 0;
  for (int k = 0; k < blobs; ++k) {
    for (int i = 0; i < n_per_blob; ++i) {
      for (int j = 0; j < 2; ++j) {
        data.x(row, j) = wrap_unit(centers(k, j) + center_shift[j] + sigma * normal(rng));
      }
      data.y.push_back(k);
      ++row;
    }
  }
  data.metadata = {{"generator", "toroidal"}, {"n_per_blob", n_per_blob}, {"blobs", blobs},
                   {"sigma", sigma},          {"seed", seed}};
  return data;
}

LabeledDataset gen_moons(int n, double noise_std, std::uint64_t seed) {
  if (n < 2) throw ConfigError("moons: need at least 2 samples");
  if (noise_std < 0.0) throw ConfigError("moons: negative noise");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n_upper = (n + 1) / 2;
  const int n_lower = n - n_upper;
  LabeledDataset data;
  data.name = "moons";
  data.x.resize(n, 2);
  auto angle = [](int i, int count) {
    return count > 1 ? std::numbers::pi * i / (count - 1) : 0.0;
  };
  Eigen::Index row = 0;
  for (int i = 0; i < n_upper; ++i, ++row) {
    const double t = angle(i, n_upper);
    data.x(row, 0) = std::cos(t) + noise_std * normal(rng);
    data.x(row, 1) = std::sin(t) + noise_std * normal(rng);
    data.y.push_back(0);
  }
  for (int i = 0; i < n_lower; ++i, ++row) {
    const double t = angle(i, n_lower);
    data.x(row, 0) = 1.0 - std::cos(t) + noise_std * normal(rng);
    data.x(row, 1) = 0.5 - std::sin(t) + noise_std * normal(rng);
    data.y.push_back(1);
  }
  data.metadata = {{"generator", "moons"}, {"n", n}, {"noise_std", noise_std}, {"seed", seed}};
  return data;
}

LabeledDataset gen_circles(int n, double noise_std, double radius_factor, std::uint64_t seed) {
  if (n < 2) throw ConfigError("circles: need at least 2 samples");
  if (noise_std < 0.0) throw ConfigError("circles: negative noise");
  if (!(radius_factor > 0.0 && radius_factor < 1.0)) {
    throw ConfigError("circles: radius factor must be in (0, 1)");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> turn(0.0, 2.0 * std::numbers::pi);
  const int n_outer = (n + 1) / 2;
  LabeledDataset data;
  data.name = "circles";
  data.x.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const bool outer = i < n_outer;
    const double radius = outer ? 1.0 : radius_factor;
    const double t = turn(rng);
    data.x(i, 0) = radius * std::cos(t) + noise_std * normal(rng);
    data.x(i, 1) = radius * std::sin(t) + noise_std * normal(rng);
    data.y.push_back(outer ? 0 : 1);
  }
  data.metadata = {{"generator", "circles"},
                   {"n", n},
                   {"noise_std", noise_std},
                   {"radius_factor", radius_factor},
                   {"seed", seed}};
  return data;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// RFC-4180 subset: comma separated, optional double quotes with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (*begin == '+') ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path,
                        const std::optional<std::string>& label_column) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw ParseError("'" + path.string() + "' contains no rows");

  std::vector<std::string> header;
  bool has_header = true;
  for (const auto& cell : rows.front()) {
    if (parse_number(cell)) has_header = false;
  }
  if (has_header) {
    header = rows.front();
    rows.erase(rows.begin());
  }
  if (rows.empty()) throw ParseError("'" + path.string() + "' has a header but no data");

  const std::size_t width = has_header ? header.size() : rows.front().size();
  std::optional<std::size_t> label_index;
  if (label_column) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == *label_column) label_index = c;
    }
    if (!label_index) {
      std::size_t idx = 0;
      const auto [ptr, ec] =
          std::from_chars(label_column->data(), label_column->data() + label_column->size(), idx);
      if (ec != std::errc() || ptr != label_column->data() + label_column->size() ||
          idx >= width) {
        throw ParseError("label column '" + *label_column + "' not found");
      }
      label_index = idx;
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index m = static_cast<Eigen::Index>(width - (label_index ? 1 : 0));
  LabeledDataset data;
  data.name = path.stem().string();
  data.x.resize(n, m);
  data.y.assign(rows.size(), -1);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      std::ostringstream msg;
      msg << "row " << r + 1 << " has " << rows[r].size() << " columns, expected " << width;
      throw RaggedRows(msg.str());
    }
    Eigen::Index out_col = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const auto value = parse_number(rows[r][c]);
      const bool is_label = label_index && c == *label_index;
      if (!value || (is_label && std::floor(*value) != *value)) {
        std::ostringstream msg;
        msg << "row " << r + 1 << ", column " << c + 1 << ": cannot parse '" << rows[r][c]
            << "' as " << (is_label ? "an integer label" : "a number");
        throw ParseError(msg.str());
      }
      if (is_label) {
        data.y[r] = static_cast<int>(*value);
      } else {
        data.x(static_cast<Eigen::Index>(r), out_col++) = *value;
      }
    }
  }
  data.metadata = {{"source", path.string()}};
  return data;
}

void write_csv(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ostringstream out;
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) out << 'x' << j << ',';
  out << "label\n";
  char buf[64];
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.x(i, j));
      out << buf << ',';
    }
    const auto idx = static_cast<std::size_t>(i);
    out << (idx < data.y.size() ? data.y[idx] : -1) << '\n';
  }
  write_text_atomic(path, out.str());
}

std::filesystem::path metadata_path(const std::filesystem::path& csv_path) {
  std::filesystem::path out = csv_path;
  out.replace_extension(".meta.json");
  return out;
}

}  // namespace dmae
