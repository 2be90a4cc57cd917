#include "cli/inputs.hpp"

#include <cmath>

#include "sfe/error.hpp"
#include "sfe/io.hpp"

namespace sfe::cli {

namespace {

// name(arg, ...) -> name and args; plain words have no args.
bool parse_call(const std::string& text, std::string& name, std::vector<double>& args) {
  const auto open = text.find('(');
  if (open == std::string::npos) {
    name = text;
    args.clear();
    return text.find_first_of("./") == std::string::npos;
  }
  if (text.back() != ')') return false;
  name = text.substr(0, open);
  args.clear();
  const std::string inner = text.substr(open + 1, text.size() - open - 2);
  for (const auto& f : split_list(inner)) args.push_back(parse_double(f, text));
  return true;
}

Vec generate(const std::string& spec, const std::string& name, const std::vector<double>& args, const Support& grid) {
  const RowMat& x = grid.points();
  Vec v(x.rows());
  auto gaussian = [&](Eigen::Index i, const Eigen::RowVectorXd& mean, double var) {
    return std::exp(-(x.row(i) - mean).squaredNorm() / (2.0 * var));
  };
  if (name == "normal") {
    if (args.size() != 2 || !(args[1] > 0.0)) throw InvalidArgument(spec + ": expected normal(mean, var) with var > 0");
    const Eigen::RowVectorXd mean = Eigen::RowVectorXd::Constant(x.cols(), args[0]);
    for (Eigen::Index i = 0; i < x.rows(); ++i) v[i] = gaussian(i, mean, args[1]);
  } else if (name == "mixture") {
    if (args.size() != 2 || !(args[1] > 0.0))
      throw InvalidArgument(spec + ": expected mixture(offset, var) with var > 0");
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(x.cols());
    c[0] = args[0];
    for (Eigen::Index i = 0; i < x.rows(); ++i) v[i] = 0.5 * (gaussian(i, c, args[1]) + gaussian(i, -c, args[1]));
  } else if (name == "uniform") {
    if (!args.empty()) throw InvalidArgument(spec + ": uniform takes no arguments");
    v.setOnes();
  } else {
    throw InvalidArgument("unknown measure generator '" + spec + "'");
  }
  return v;
}

}  // namespace

GridSpec parse_grid(const std::string& text) {
  const auto f = split_list(text);
  if (f.size() != 3) throw InvalidArgument("grid must be 'd,r,n', got '" + text + "'");
  GridSpec g;
  const double d = parse_double(f[0], "grid dimension");
  const double n = parse_double(f[2], "grid points per axis");
  g.radius = parse_double(f[1], "grid radius");
  if (d != std::floor(d) || d < 1 || n != std::floor(n) || n < 2 || !(g.radius > 0.0))
    throw InvalidArgument("grid '" + text + "' needs integer d >= 1, r > 0 and integer n >= 2");
  g.dim = static_cast<int>(d);
  g.points_per_axis = static_cast<int>(n);
  return g;
}

DiscreteMeasure InputMeasure::measure() const {
  return is_density ? Density::normalized(support, values).to_measure() : DiscreteMeasure::normalized(support, values);
}

Density InputMeasure::density() const {
  return is_density ? Density::normalized(support, values) : Density::from_measure(measure());
}

InputMeasure resolve_measure(const RunConfig& cfg, const std::string& key, const SupportPtr& grid,
                             std::vector<std::string>& files) {
  const std::string spec = cfg.text(key);
  std::string name;
  std::vector<double> args;
  if (parse_call(spec, name, args)) {
    if (!grid) throw InvalidArgument(key + " = " + spec + " needs a grid (set grid = d,r,n)");
    return {grid, generate(spec, name, args, *grid), true};
  }
  const std::string path = cfg.path(spec);
  files.push_back(path);
  io::LoadedMeasure m = io::load_measure_csv(path);
  return {m.support, m.values, m.is_density};
}

}  // namespace sfe::cli
