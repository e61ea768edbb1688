#include "recomb/lattice_io.hpp"

#include <fmt/format.h>

#include <json.hpp>
#include <stdexcept>

namespace recomb {
namespace {

void dot_edge(std::string& out, NodeCoord from, NodeCoord to, const char* color,
              double prob) {
  fmt::format_to(std::back_inserter(out),
                 "  n_{}_{} -> n_{}_{} [color={}, label=\"{}\"];\n", from.j, from.k,
                 to.j, to.k, color, format_double(prob));
}

std::string to_json(const Lattice& lat) {
  std::string out;
  auto it = std::back_inserter(out);
  const int n = lat.levels();
  fmt::format_to(it, "{{\"levels\":{},\"dx\":[", n);
  for (int j = 0; j <= n; ++j) {
    fmt::format_to(it, "{}{}", j ? "," : "", format_double(lat.dx(j)));
  }
  out += "],\"nodes\":[";
  bool first = true;
  for (int j = 0; j <= n; ++j) {
    for (int k = -j; k <= j; ++k) {
      const auto node = lat.node(j, k);
      fmt::format_to(it,
                     "{}{{\"j\":{},\"k\":{},\"value\":{},\"cond_mean\":{},\"kind\":\"{}\"}}",
                     first ? "" : ",", j, k, format_double(node.value),
                     format_double(node.cond_mean), to_string(node.kind));
      first = false;
    }
  }
  out += "],\"center_branches\":[";
  for (int j = 0; j < n; ++j) {
    const auto& c = lat.center_branches(j);
    fmt::format_to(it, "{}{{\"j\":{},\"pu\":{},\"pn\":{},\"pd\":{}}}", j ? "," : "", j,
                   format_double(c.p_u), format_double(c.p_n), format_double(c.p_d));
  }
  out += "],\"spanning\":[";
  first = true;
  for (int j = 0; j < n; ++j) {
    for (int k = -j; k <= j; ++k) {
      if (k == 0) continue;
      const auto& s = lat.spanning(j, k);
      fmt::format_to(it,
                     "{}{{\"j\":{},\"k\":{},\"p_sibling\":{},\"span_value\":{},"
                     "\"degenerate\":{}}}",
                     first ? "" : ",", j, k, format_double(s.p), format_double(s.x),
                     s.degenerate ? "true" : "false");
      first = false;
    }
  }
  out += "]}\n";
  return out;
}

std::string to_dot(const Lattice& lat) {
  std::string out = "digraph lattice {\n  rankdir=LR;\n";
  const int n = lat.levels();
  for (int j = 0; j <= n; ++j) {
    for (int k = -j; k <= j; ++k) {
      fmt::format_to(std::back_inserter(out), "  n_{}_{} [label=\"{}\"];\n", j, k,
                     format_double(lat.value(j, k)));
    }
  }
  for (int j = 0; j < n; ++j) {
    const auto& c = lat.center_branches(j);
    dot_edge(out, {j, 0}, {j + 1, -1}, "black", c.p_d);
    dot_edge(out, {j, 0}, {j + 1, 0}, "black", c.p_n);
    dot_edge(out, {j, 0}, {j + 1, 1}, "black", c.p_u);
    for (int k = -j; k <= j; ++k) {
      if (k == 0) continue;
      const auto& s = lat.spanning(j, k);
      const int side = k > 0 ? 1 : -1;
      dot_edge(out, {j, k}, {j + 1, k + side}, "blue", 1.0 - s.p);
      dot_edge(out, {j, k}, {j, k - side}, side > 0 ? "green" : "red", s.p);
    }
  }
  out += "}\n";
  return out;
}

std::string to_csv(const Lattice& lat) {
  std::string out = "j,k,kind,value,cond_mean,p_sibling,span_value\n";
  auto it = std::back_inserter(out);
  for (int j = 0; j <= lat.levels(); ++j) {
    for (int k = -j; k <= j; ++k) {
      const auto node = lat.node(j, k);
      fmt::format_to(it, "{},{},{},{},{},", j, k, to_string(node.kind),
                     format_double(node.value), format_double(node.cond_mean));
      if (k != 0 && j < lat.levels()) {
        const auto& s = lat.spanning(j, k);
        fmt::format_to(it, "{},{}\n", format_double(s.p), format_double(s.x));
      } else {
        out += ",\n";
      }
    }
  }
  return out;
}

}  // namespace

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

ExportFormat parse_format(std::string_view tag) {
  if (tag == "json") return ExportFormat::json;
  if (tag == "dot") return ExportFormat::dot;
  if (tag == "csv") return ExportFormat::csv;
  throw std::invalid_argument("unknown export format '" + std::string(tag) + "'");
}

std::string export_lattice(const Lattice& lat, ExportFormat format) {
  switch (format) {
    case ExportFormat::json:
      return to_json(lat);
    case ExportFormat::dot:
      return to_dot(lat);
    case ExportFormat::csv:
      return to_csv(lat);
  }
  throw std::invalid_argument("unknown export format");
}

Lattice parse_lattice_json(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
    const int n = doc.at("levels").get<int>();
    if (n < 1) throw std::invalid_argument("levels must be >= 1");
    std::vector<LatticeLevel> levels(n + 1);
    const auto& dx = doc.at("dx");
    if (dx.size() != static_cast<std::size_t>(n + 1)) {
      throw std::invalid_argument("dx must have levels + 1 entries");
    }
    for (int j = 0; j <= n; ++j) {
      levels[j].dx = dx[j].get<double>();
      levels[j].values = Eigen::VectorXd::Zero(2 * j + 1);
      levels[j].cond_means = Eigen::VectorXd::Zero(2 * j + 1);
      if (j < n) levels[j].spanning.assign(2 * j + 1, BranchSolve{});
    }
    const auto& nodes = doc.at("nodes");
    if (nodes.size() != static_cast<std::size_t>((n + 1) * (n + 1))) {
      throw std::invalid_argument("node count must be (levels + 1)^2");
    }
    for (const auto& node : nodes) {
      const int j = node.at("j").get<int>();
      const int k = node.at("k").get<int>();
      if (j < 0 || j > n || std::abs(k) > j) {
        throw std::invalid_argument("node coordinate out of range");
      }
      levels[j].values[k + j] = node.at("value").get<double>();
      levels[j].cond_means[k + j] = node.at("cond_mean").get<double>();
    }
    for (const auto& c : doc.at("center_branches")) {
      const int j = c.at("j").get<int>();
      if (j < 0 || j >= n) throw std::invalid_argument("center branch level out of range");
      auto& cb = levels[j].center;
      cb.p_u = c.at("pu").get<double>();
      cb.p_n = c.at("pn").get<double>();
      cb.p_d = c.at("pd").get<double>();
    }
    for (const auto& s : doc.at("spanning")) {
      const int j = s.at("j").get<int>();
      const int k = s.at("k").get<int>();
      if (j < 0 || j >= n || k == 0 || std::abs(k) > j) {
        throw std::invalid_argument("spanning coordinate out of range");
      }
      auto& b = levels[j].spanning[k + j];
      b.p = s.at("p_sibling").get<double>();
      b.x = s.at("span_value").get<double>();
      b.degenerate = s.at("degenerate").get<bool>();
    }
    for (int j = 0; j < n; ++j) {
      levels[j].center.eta = levels[j].cond_means[j] - levels[j + 1].values[j + 1];
    }
    return Lattice(std::move(levels));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed lattice JSON: ") + e.what());
  }
}

}  // namespace recomb
