#include "streamforge/encode/encode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace streamforge::encode {

namespace {

const minicp::ValueArray& solution_values(const minicp::Solution& solution,
                                          const std::string& name) {
  auto it = solution.find(name);
  if (it == solution.end()) {
    throw EncodeError("solution has no values for variable '" + name + "'");
  }
  return it->second;
}

const minicp::ValueArray& require_param(const minicp::Instance& instance,
                                        const std::string& name) {
  const minicp::ValueArray* value = instance.find_param(name);
  if (value == nullptr) {
    throw EncodeError("packing instance lacks parameter '" + name + "'");
  }
  return *value;
}

long long scalar_param(const minicp::Instance& instance, const std::string& name) {
  const minicp::ValueArray& value = require_param(instance, name);
  if (!value.is_scalar()) {
    throw EncodeError("packing parameter '" + name + "' must be a scalar");
  }
  return value.data[0];
}

SolutionTensor encode_matrix(const minicp::Instance& instance,
                             const minicp::Solution& solution) {
  const minicp::VarInfo& var = grid_var(instance);
  auto extents = var.extents();
  const int height = static_cast<int>(extents[0]);
  const int width = static_cast<int>(extents[1]);
  if (var.dom_hi <= 0) {
    throw EncodeError("matrix variable '" + var.name +
                      "' needs a positive domain maximum for grayscale scaling");
  }
  const double scale = static_cast<double>(var.dom_hi);
  const minicp::ValueArray& values = solution_values(solution, var.name);
  SolutionTensor tensor(corpus::ShapeKind::Matrix, 1, height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      tensor.at(0, r, c) = static_cast<double>(values.at(r + 1, c + 1)) / scale;
    }
  }
  return tensor;
}

SolutionTensor encode_permutation(const minicp::Instance& instance,
                                  const minicp::Solution& solution) {
  const minicp::VarInfo& var = permutation_var(instance);
  const int n = static_cast<int>(var.extents()[0]);
  const minicp::ValueArray& values = solution_values(solution, var.name);
  SolutionTensor tensor(corpus::ShapeKind::Permutation, 1, n, n);
  for (int p = 1; p <= n; ++p) {
    long long v = values.at(p);
    if (v < 1 || v > n) {
      throw EncodeError("permutation value " + std::to_string(v) +
                        " at position " + std::to_string(p) +
                        " is outside 1.." + std::to_string(n));
    }
    tensor.at(0, p - 1, static_cast<int>(v) - 1) = 1.0;
  }
  return tensor;
}

SolutionTensor encode_assignment(const minicp::Instance& instance,
                                 const minicp::Solution& solution) {
  const minicp::VarInfo& var = grid_var(instance);
  auto extents = var.extents();
  const int height = static_cast<int>(extents[0]);
  const int width = static_cast<int>(extents[1]);
  const int channels = static_cast<int>(var.dom_hi - var.dom_lo + 1);
  const minicp::ValueArray& values = solution_values(solution, var.name);
  SolutionTensor tensor(corpus::ShapeKind::Assignment, channels, height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      long long v = values.at(r + 1, c + 1);
      if (v < var.dom_lo || v > var.dom_hi) {
        throw EncodeError("assignment value " + std::to_string(v) +
                          " is outside the declared domain of '" + var.name + "'");
      }
      tensor.at(static_cast<int>(v - var.dom_lo), r, c) = 1.0;
    }
  }
  return tensor;
}

SolutionTensor encode_packing(const minicp::Instance& instance,
                              const minicp::Solution& solution) {
  PackingView view = packing_view(instance, solution);
  SolutionTensor tensor(corpus::ShapeKind::PackingCoords, 1, view.deck_length,
                        view.deck_width);
  const double scale = static_cast<double>(view.max_class_id);
  for (int i = 0; i < view.n_containers; ++i) {
    const long long x0 = view.left[i];
    const long long y0 = view.bottom[i];
    const long long x1 = x0 + view.width[i];
    const long long y1 = y0 + view.length[i];
    if (x0 < 0 || y0 < 0 || x1 > view.deck_width || y1 > view.deck_length) {
      throw EncodeError("container " + std::to_string(i + 1) +
                        " extends outside the deck");
    }
    for (long long y = y0; y < y1; ++y) {
      for (long long x = x0; x < x1; ++x) {
        double& cell = tensor.at(0, static_cast<int>(y), static_cast<int>(x));
        if (cell != 0.0) {
          throw EncodeError("containers overlap at cell (" + std::to_string(y) +
                            ", " + std::to_string(x) + ")");
        }
        cell = static_cast<double>(view.class_id[i]) / scale;
      }
    }
  }
  return tensor;
}

}  // namespace

const minicp::VarInfo& grid_var(const minicp::Instance& instance) {
  const minicp::VarInfo* found = nullptr;
  for (const auto& var : instance.vars) {
    if (var.is_bool || var.index_ranges.size() != 2) continue;
    if (found != nullptr) {
      throw EncodeError("instance has more than one 2-D integer variable ('" +
                        found->name + "' and '" + var.name + "')");
    }
    found = &var;
  }
  if (found == nullptr) {
    throw EncodeError("instance has no 2-D integer variable to encode");
  }
  return *found;
}

const minicp::VarInfo& permutation_var(const minicp::Instance& instance) {
  const minicp::VarInfo* found = nullptr;
  for (const auto& var : instance.vars) {
    if (var.is_bool || var.index_ranges.size() != 1) continue;
    if (found != nullptr) {
      throw EncodeError("instance has more than one 1-D integer variable ('" +
                        found->name + "' and '" + var.name + "')");
    }
    found = &var;
  }
  if (found == nullptr) {
    throw EncodeError("instance has no 1-D integer variable to encode");
  }
  return *found;
}

PackingView packing_view(const minicp::Instance& instance,
                         const minicp::Solution& solution) {
  PackingView view;
  view.deck_width = static_cast<int>(scalar_param(instance, "deck_width"));
  view.deck_length = static_cast<int>(scalar_param(instance, "deck_length"));
  if (view.deck_width <= 0 || view.deck_length <= 0) {
    throw EncodeError("deck dimensions must be positive");
  }

  const minicp::ValueArray& widths = require_param(instance, "width");
  const minicp::ValueArray& lengths = require_param(instance, "length");
  const minicp::ValueArray& classes = require_param(instance, "class");
  const std::size_t n = widths.size();
  if (lengths.size() != n || classes.size() != n) {
    throw EncodeError("width, length and class must have one entry per container");
  }
  view.n_containers = static_cast<int>(n);

  const minicp::ValueArray& left = solution_values(solution, "Left");
  const minicp::ValueArray& bottom = solution_values(solution, "Bottom");
  if (left.size() != n || bottom.size() != n) {
    throw EncodeError("Left and Bottom must have one entry per container");
  }

  std::vector<long long> rotated(n, 0);
  if (solution.count("rotated") != 0) {
    const minicp::ValueArray& rot = solution.at("rotated");
    if (rot.size() != n) {
      throw EncodeError("rotated must have one entry per container");
    }
    for (std::size_t i = 0; i < n; ++i) rotated[i] = rot.at(i + 1);
  }

  view.max_class_id = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool rot = rotated[i] != 0;
    const long long w = rot ? lengths.at(i + 1) : widths.at(i + 1);
    const long long l = rot ? widths.at(i + 1) : lengths.at(i + 1);
    if (w <= 0 || l <= 0) {
      throw EncodeError("container " + std::to_string(i + 1) +
                        " has a non-positive footprint");
    }
    const long long cls = classes.at(i + 1);
    if (cls <= 0) {
      throw EncodeError("container " + std::to_string(i + 1) +
                        " has a non-positive class id");
    }
    view.left.push_back(left.at(i + 1));
    view.bottom.push_back(bottom.at(i + 1));
    view.width.push_back(w);
    view.length.push_back(l);
    view.class_id.push_back(cls);
    view.rotated.push_back(rot ? 1 : 0);
    view.max_class_id = std::max(view.max_class_id, cls);
  }
  return view;
}

SolutionTensor encode(corpus::ShapeKind kind, const minicp::Instance& instance,
                      const minicp::Solution& solution) {
  switch (kind) {
    case corpus::ShapeKind::Matrix: return encode_matrix(instance, solution);
    case corpus::ShapeKind::Permutation:
      return encode_permutation(instance, solution);
    case corpus::ShapeKind::Assignment:
      return encode_assignment(instance, solution);
    case corpus::ShapeKind::PackingCoords:
      return encode_packing(instance, solution);
  }
  throw EncodeError("unknown shape kind");
}

std::string to_text(const SolutionTensor& tensor) {
  std::ostringstream out;
  out.precision(std::numeric_limits<double>::max_digits10);
  out << corpus::shape_kind_name(tensor.kind) << ' ' << tensor.channels << ' '
      << tensor.height << ' ' << tensor.width << '\n';
  for (int c = 0; c < tensor.channels; ++c) {
    for (int h = 0; h < tensor.height; ++h) {
      for (int w = 0; w < tensor.width; ++w) {
        if (w > 0) out << ' ';
        out << tensor.at(c, h, w);
      }
      out << '\n';
    }
  }
  return out.str();
}

SolutionTensor from_text(const std::string& text) {
  std::istringstream in(text);
  std::string kind_name;
  int channels = 0, height = 0, width = 0;
  if (!(in >> kind_name >> channels >> height >> width)) {
    throw EncodeError("malformed tensor header");
  }
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw EncodeError("tensor dimensions must be positive");
  }
  SolutionTensor tensor(corpus::shape_kind_from_name(kind_name), channels,
                        height, width);
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    if (!(in >> tensor.data[i])) {
      throw EncodeError("tensor body ends early: expected " +
                        std::to_string(tensor.size()) + " cells");
    }
  }
  double extra = 0.0;
  if (in >> extra) {
    throw EncodeError("tensor body has trailing cells");
  }
  return tensor;
}

}  // namespace streamforge::encode
